use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::extract::ImageFeatures;
use super::PipelineConfig;
use crate::classify::{train_svm, LinearModel, SvmConfig};
use crate::error::{Error, Result};
use crate::pursuit::{
    epoch_seed, label_object_samples, mix_seed, purity, stuff_samples, GtSegment, PursuitConfig, PursuitMode,
    SampleLabel,
};
use crate::toynet::ToyNet;
use crate::types::{BinaryMask, FeatureMap, SegmentProposal};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategorySet {
    pub objects: Vec<u16>,
    pub stuff: Vec<u16>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub svm: SvmConfig,
    pub pursuit: PursuitConfig,
    pub pursuit_mode: PursuitMode,
    /// Stochastic pursuit draws per image; positives are their union.
    pub stuff_rounds: usize,
    /// Random negatives kept per image and category on top of the hard ones.
    pub easy_negatives: usize,
    pub categories: CategorySet,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            svm: SvmConfig {
                reg: 1e-5,
                ..SvmConfig::default()
            },
            pursuit: PursuitConfig::default(),
            pursuit_mode: PursuitMode::Deterministic,
            stuff_rounds: 1,
            easy_negatives: 8,
            categories: CategorySet {
                objects: crate::synth::OBJECT_CATEGORIES.to_vec(),
                stuff: crate::synth::STUFF_CATEGORIES.to_vec(),
            },
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainingScene {
    pub image: FeatureMap,
    pub gt_segments: Vec<GtSegment>,
    pub proposals: Vec<SegmentProposal>,
}

/// Sample references of one scene: features are stored once and shared by
/// all categories.
struct SceneSamples {
    features: Vec<Vec<f32>>,
    /// category → (positive slots, negative slots)
    slots: BTreeMap<u16, (Vec<usize>, Vec<usize>)>,
}

struct Slots<'a> {
    feats: &'a ImageFeatures<'a>,
    proposals: &'a [SegmentProposal],
    index: BTreeMap<usize, usize>,
    features: Vec<Vec<f32>>,
}

impl Slots<'_> {
    fn proposal(&mut self, i: usize) -> Result<usize> {
        if let Some(&s) = self.index.get(&i) {
            return Ok(s);
        }
        self.features.push(self.feats.proposal_features(&self.proposals[i])?);
        self.index.insert(i, self.features.len() - 1);
        Ok(self.features.len() - 1)
    }

    fn mask(&mut self, m: &BinaryMask) -> Result<usize> {
        self.features.push(self.feats.features(m, m.bbox()?)?);
        Ok(self.features.len() - 1)
    }
}

/// Hard negatives plus up to `easy` random others.
fn pick_negatives(hard: Vec<usize>, mut easy_pool: Vec<usize>, easy: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    easy_pool.shuffle(rng);
    easy_pool.truncate(easy);
    let mut out = hard;
    out.extend(easy_pool);
    out
}

fn scene_samples(
    index: usize,
    scene: &TrainingScene,
    net: &ToyNet,
    cfg: &PipelineConfig,
    tcfg: &TrainingConfig,
) -> Result<SceneSamples> {
    let feats = ImageFeatures::new(net, &scene.image, cfg)?;
    let mut slots = Slots {
        feats: &feats,
        proposals: &scene.proposals,
        index: BTreeMap::new(),
        features: Vec::new(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(tcfg.seed ^ mix_seed(index as u64)));
    let mut out = BTreeMap::new();

    for &c in &tcfg.categories.objects {
        // Ground-truth segments are the positives.
        let mut pos = Vec::new();
        for g in scene.gt_segments.iter().filter(|g| g.category == c) {
            pos.push(slots.mask(&g.mask)?);
        }
        let labels = label_object_samples(&scene.proposals, &scene.gt_segments, c)?;
        let hard: Vec<usize> = labels
            .iter()
            .filter(|l| l.label == SampleLabel::Negative)
            .map(|l| l.index)
            .collect();
        let easy: Vec<usize> = labels.iter().filter(|l| l.iou < 0.1).map(|l| l.index).collect();
        let mut neg = Vec::new();
        for i in pick_negatives(hard, easy, tcfg.easy_negatives, &mut rng) {
            neg.push(slots.proposal(i)?);
        }
        out.insert(c, (pos, neg));
    }

    let (w, h) = (scene.image.width(), scene.image.height());
    for &c in &tcfg.categories.stuff {
        let mut stuff = BinaryMask::new(w, h)?;
        for g in scene.gt_segments.iter().filter(|g| g.category == c) {
            stuff = stuff.union(&g.mask)?;
        }
        let rounds = match tcfg.pursuit_mode {
            PursuitMode::Deterministic => 1,
            PursuitMode::Stochastic => tcfg.stuff_rounds.max(1),
        };
        let mut positives = std::collections::BTreeSet::new();
        let mut negatives = Vec::new();
        for r in 0..rounds {
            let seed = epoch_seed(tcfg.seed, index as u64, r as u64);
            let s = stuff_samples(&scene.proposals, &stuff, &tcfg.pursuit, tcfg.pursuit_mode, seed)?;
            positives.extend(s.positives);
            negatives = s.negatives;
        }
        let mut pos = Vec::new();
        for i in positives {
            pos.push(slots.proposal(i)?);
        }
        let mut hard = Vec::new();
        let mut easy = Vec::new();
        for i in negatives {
            if purity(&scene.proposals[i], &stuff)? > 0.0 {
                hard.push(i);
            } else {
                easy.push(i);
            }
        }
        let mut neg = Vec::new();
        for i in pick_negatives(hard, easy, tcfg.easy_negatives, &mut rng) {
            neg.push(slots.proposal(i)?);
        }
        out.insert(c, (pos, neg));
    }
    Ok(SceneSamples {
        features: slots.features,
        slots: out,
    })
}

/// Extracts training samples from every scene and fits one model per
/// category. Features are divided by their mean L2 norm before fitting and
/// the returned weights absorb that factor, so models apply to raw features.
pub fn train_models(
    scenes: &[TrainingScene],
    net: &ToyNet,
    cfg: &PipelineConfig,
    tcfg: &TrainingConfig,
) -> Result<Vec<LinearModel>> {
    cfg.validate()?;
    tcfg.pursuit.validate()?;
    let mut all: Vec<u16> = tcfg
        .categories
        .objects
        .iter()
        .chain(&tcfg.categories.stuff)
        .copied()
        .collect();
    all.sort_unstable();
    if all.windows(2).any(|w| w[0] == w[1]) || all.contains(&crate::types::BACKGROUND) {
        return Err(Error::InvalidInput(format!(
            "categories must be distinct and non-background: {all:?}"
        )));
    }
    if scenes.is_empty() {
        return Err(Error::InvalidInput("no training scenes".into()));
    }

    let mut per_scene: Vec<SceneSamples> = scenes
        .par_iter()
        .enumerate()
        .map(|(i, s)| scene_samples(i, s, net, cfg, tcfg))
        .collect::<Result<_>>()?;

    let count: usize = per_scene.iter().map(|s| s.features.len()).sum();
    let norm_sum: f64 = per_scene
        .iter()
        .flat_map(|s| &s.features)
        .map(|f| f.iter().map(|&v| v as f64 * v as f64).sum::<f64>().sqrt())
        .sum();
    let scale = if count > 0 && norm_sum > 0.0 {
        norm_sum / count as f64
    } else {
        1.0
    };
    per_scene.par_iter_mut().for_each(|s| {
        for f in &mut s.features {
            for v in f.iter_mut() {
                *v = (*v as f64 / scale) as f32;
            }
        }
    });

    all.par_iter()
        .map(|&c| {
            let mut pos: Vec<&[f32]> = Vec::new();
            let mut neg: Vec<&[f32]> = Vec::new();
            for s in &per_scene {
                let (p, n) = &s.slots[&c];
                pos.extend(p.iter().map(|&k| s.features[k].as_slice()));
                neg.extend(n.iter().map(|&k| s.features[k].as_slice()));
            }
            if pos.is_empty() || neg.is_empty() {
                return Err(Error::EmptyPool(format!(
                    "category {c}: {} positives, {} negatives",
                    pos.len(),
                    neg.len()
                )));
            }
            let svm = SvmConfig {
                seed: mix_seed(tcfg.seed ^ ((c as u64) << 32)),
                ..tcfg.svm
            };
            let mut m = train_svm(c, &pos, &neg, &svm)?.model;
            for w in &mut m.weights {
                *w = (*w as f64 / scale) as f32;
            }
            Ok(m)
        })
        .collect()
}
