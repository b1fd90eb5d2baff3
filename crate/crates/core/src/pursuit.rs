//! Stuff representation by compact segment combinations.
//!
//! A segment's purity is its IoU with the stuff pixels inside its own box.
//! Segments with purity above `purity_pos` form the candidate set. Segment
//! pursuit then repeatedly picks a candidate among those whose area reaches
//! the mean candidate area, and removes it together with every remaining
//! candidate overlapping it by more than `inhibit_iou`. Deterministic pursuit
//! picks the largest; stochastic pursuit picks with probability proportional
//! to area. Both stop once no remaining candidate is large enough.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{BinaryMask, SegmentProposal};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PursuitConfig {
    pub purity_pos: f64,
    pub purity_neg: f64,
    pub inhibit_iou: f64,
}

impl Default for PursuitConfig {
    fn default() -> Self {
        Self {
            purity_pos: 0.6,
            purity_neg: 0.3,
            inhibit_iou: 0.2,
        }
    }
}

impl PursuitConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 <= self.purity_neg
            && self.purity_neg < self.purity_pos
            && self.purity_pos <= 1.0
            && self.inhibit_iou > 0.0
            && self.inhibit_iou < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid pursuit config {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate<'a> {
    pub proposal: &'a SegmentProposal,
    pub area: usize,
    pub purity: f64,
}

/// IoU of the segment with the stuff pixels inside the segment's box.
pub fn purity(seg: &SegmentProposal, stuff: &BinaryMask) -> Result<f64> {
    let clipped = stuff.clip_to_box(seg.bbox());
    seg.mask().iou(&clipped)
}

/// Proposals with purity strictly above `cfg.purity_pos`, in input order.
pub fn candidate_set<'a>(
    proposals: &'a [SegmentProposal],
    stuff: &BinaryMask,
    cfg: &PursuitConfig,
) -> Result<Vec<Candidate<'a>>> {
    let mut out = Vec::new();
    for p in proposals {
        let purity = purity(p, stuff)?;
        if purity > cfg.purity_pos {
            out.push(Candidate {
                proposal: p,
                area: p.area(),
                purity,
            });
        }
    }
    Ok(out)
}

/// Mean candidate area; a candidate is eligible when `area ≥ mean`, i.e.
/// `area · n ≥ Σ area`.
struct AreaThreshold {
    total: u128,
    n: u128,
}

impl AreaThreshold {
    fn new(cands: &[Candidate<'_>]) -> Self {
        Self {
            total: cands.iter().map(|c| c.area as u128).sum(),
            n: cands.len() as u128,
        }
    }

    fn eligible(&self, area: usize) -> bool {
        area as u128 * self.n >= self.total
    }
}

fn pursue<'a>(
    cands: &[Candidate<'a>],
    cfg: &PursuitConfig,
    mut pick: impl FnMut(&[Candidate<'a>]) -> usize,
) -> Vec<Candidate<'a>> {
    let threshold = AreaThreshold::new(cands);
    let mut remaining: Vec<Candidate<'a>> = cands.to_vec();
    let mut selected = Vec::new();
    loop {
        let eligible: Vec<Candidate<'a>> = remaining
            .iter()
            .copied()
            .filter(|c| threshold.eligible(c.area))
            .collect();
        if eligible.is_empty() {
            break;
        }
        let chosen = eligible[pick(&eligible)];
        remaining.retain(|c| {
            !std::ptr::eq(c.proposal, chosen.proposal)
                && c.proposal
                    .mask()
                    .iou(chosen.proposal.mask())
                    .expect("candidates share image dims")
                    <= cfg.inhibit_iou
        });
        selected.push(chosen);
    }
    selected
}

fn check_dims(cands: &[Candidate<'_>]) -> Result<()> {
    if let Some(first) = cands.first() {
        if cands
            .iter()
            .any(|c| !c.proposal.mask().same_dims(first.proposal.mask()))
        {
            return Err(Error::DimensionMismatch("candidates differ in image dims".into()));
        }
    }
    Ok(())
}

/// Largest eligible candidate first; ties go to the smaller id.
pub fn deterministic_pursuit<'a>(cands: &[Candidate<'a>], cfg: &PursuitConfig) -> Result<Vec<Candidate<'a>>> {
    check_dims(cands)?;
    Ok(pursue(cands, cfg, |eligible| {
        let mut best = 0;
        for (i, c) in eligible.iter().enumerate().skip(1) {
            let b = &eligible[best];
            if c.area > b.area || (c.area == b.area && c.proposal.id() < b.proposal.id()) {
                best = i;
            }
        }
        best
    }))
}

/// Draws an index with probability proportional to area.
pub fn area_proportional_pick(cands: &[Candidate<'_>], rng: &mut impl Rng) -> usize {
    let total: u64 = cands.iter().map(|c| c.area as u64).sum();
    let mut r = rng.gen_range(0..total);
    for (i, c) in cands.iter().enumerate() {
        if r < c.area as u64 {
            return i;
        }
        r -= c.area as u64;
    }
    unreachable!("draw below total area")
}

/// Area-proportional picks from a ChaCha8 stream seeded with `seed`.
pub fn stochastic_pursuit<'a>(cands: &[Candidate<'a>], cfg: &PursuitConfig, seed: u64) -> Result<Vec<Candidate<'a>>> {
    check_dims(cands)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(pursue(cands, cfg, |eligible| {
        area_proportional_pick(eligible, &mut rng)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleLabel {
    Positive,
    Negative,
    Excluded,
}

/// `[0.5, 1]` positive, `[0.1, 0.3]` negative, anything else excluded.
pub fn classify_overlap(iou: f64) -> SampleLabel {
    if (0.5..=1.0).contains(&iou) {
        SampleLabel::Positive
    } else if (0.1..=0.3).contains(&iou) {
        SampleLabel::Negative
    } else {
        SampleLabel::Excluded
    }
}

/// Largest segment IoU of `mask` against any of `gt`; 0 when `gt` is empty.
pub fn max_iou<'m>(mask: &BinaryMask, gt: impl IntoIterator<Item = &'m BinaryMask>) -> Result<f64> {
    let mut best = 0.0f64;
    for g in gt {
        best = best.max(mask.iou(g)?);
    }
    Ok(best)
}

/// A ground-truth instance: category plus visible pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct GtSegment {
    pub category: u16,
    pub mask: BinaryMask,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledSample {
    pub index: usize,
    pub iou: f64,
    pub label: SampleLabel,
}

/// Labels every proposal by its best IoU against same-category ground truth.
pub fn label_object_samples(
    proposals: &[SegmentProposal],
    gt_segments: &[GtSegment],
    category: u16,
) -> Result<Vec<LabeledSample>> {
    let gts: Vec<&BinaryMask> = gt_segments
        .iter()
        .filter(|g| g.category == category)
        .map(|g| &g.mask)
        .collect();
    proposals
        .iter()
        .enumerate()
        .map(|(index, p)| {
            let iou = max_iou(p.mask(), gts.iter().copied())?;
            Ok(LabeledSample {
                index,
                iou,
                label: classify_overlap(iou),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PursuitMode {
    Deterministic,
    Stochastic,
}

/// Positive and negative proposal indices for one stuff category.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StuffSamples {
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
}

/// Positives are the pursuit selection; negatives have purity below
/// `cfg.purity_neg`. Everything else is left out.
pub fn stuff_samples(
    proposals: &[SegmentProposal],
    stuff: &BinaryMask,
    cfg: &PursuitConfig,
    mode: PursuitMode,
    seed: u64,
) -> Result<StuffSamples> {
    cfg.validate()?;
    let cands = candidate_set(proposals, stuff, cfg)?;
    let selected = match mode {
        PursuitMode::Deterministic => deterministic_pursuit(&cands, cfg)?,
        PursuitMode::Stochastic => stochastic_pursuit(&cands, cfg, seed)?,
    };
    let index_of = |p: &SegmentProposal| {
        proposals
            .iter()
            .position(|q| std::ptr::eq(q, p))
            .expect("candidate borrowed from proposals")
    };
    let positives = selected.iter().map(|c| index_of(c.proposal)).collect();
    let mut negatives = Vec::new();
    for (i, p) in proposals.iter().enumerate() {
        if purity(p, stuff)? < cfg.purity_neg {
            negatives.push(i);
        }
    }
    Ok(StuffSamples { positives, negatives })
}

/// SplitMix64 finalizer, used to derive independent seeds from a master seed.
pub fn mix_seed(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one image's stochastic combination in one epoch.
pub fn epoch_seed(master: u64, image: u64, epoch: u64) -> u64 {
    mix_seed(mix_seed(mix_seed(master) ^ image) ^ epoch)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleSource {
    Object,
    Stuff,
    Background,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BatchEntry {
    pub source: SampleSource,
    pub index: usize,
}

/// `floor(0.3·n)` objects, `floor(0.3·n)` stuff, the remainder background.
pub fn minibatch_counts(batch_size: usize) -> (usize, usize, usize) {
    let obj = batch_size * 3 / 10;
    let stuff = batch_size * 3 / 10;
    (obj, stuff, batch_size - obj - stuff)
}

/// Samples a 30/30/40 mini-batch without replacement from each pool (a pool
/// smaller than its share is cycled through fresh permutations) and shuffles
/// the result.
pub fn compose_minibatch(
    object_pool: usize,
    stuff_pool: usize,
    background_pool: usize,
    batch_size: usize,
    seed: u64,
) -> Result<Vec<BatchEntry>> {
    let (n_obj, n_stuff, n_bg) = minibatch_counts(batch_size);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut batch = Vec::with_capacity(batch_size);
    for (source, pool, count) in [
        (SampleSource::Object, object_pool, n_obj),
        (SampleSource::Stuff, stuff_pool, n_stuff),
        (SampleSource::Background, background_pool, n_bg),
    ] {
        if count == 0 {
            continue;
        }
        if pool == 0 {
            return Err(Error::EmptyPool(format!("{source:?} pool is empty")));
        }
        let mut perm: Vec<usize> = Vec::new();
        while batch.iter().filter(|e: &&BatchEntry| e.source == source).count() < count {
            if perm.is_empty() {
                perm = (0..pool).collect();
                perm.shuffle(&mut rng);
                perm.reverse();
            }
            let index = perm.pop().expect("refilled");
            batch.push(BatchEntry { source, index });
        }
    }
    batch.shuffle(&mut rng);
    Ok(batch)
}
