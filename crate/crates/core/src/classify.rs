//! One-vs-rest linear max-margin classifiers.
//!
//! Training minimizes `(λ/2)·‖w‖² + mean hinge` by primal stochastic
//! subgradient descent with step `1/(λ·t)`, starting from zero. The bias is
//! learned as the weight of a constant unit feature. The returned model is the
//! average of the iterates over the second half of training.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::types::FeatureMap;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub category: u16,
    pub weights: Vec<f32>,
    pub bias: f32,
}

impl LinearModel {
    pub fn zeros(category: u16, len: usize) -> Self {
        Self {
            category,
            weights: vec![0.0; len],
            bias: 0.0,
        }
    }

    /// `w·f + b`.
    pub fn score(&self, f: &[f32]) -> Result<f64> {
        if f.len() != self.weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "model expects {} features, got {}",
                self.weights.len(),
                f.len()
            )));
        }
        Ok(dot(&self.weights, f) + self.bias as f64)
    }

    /// Writes `<dir>/<stem>.json` and the weight vector as `<dir>/<stem>.cfmt`.
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        let weights = format!("{stem}.cfmt");
        let tensor = FeatureMap::new(1, 1, self.weights.len(), self.weights.clone())?;
        io::save_feature_map(dir.join(&weights), &tensor)?;
        let file = ModelFile {
            category: self.category,
            bias: self.bias,
            weights,
        };
        let mut json = serde_json::to_vec(&file)?;
        json.push(b'\n');
        let path = dir.join(format!("{stem}.json"));
        std::fs::write(&path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(json_path: impl AsRef<Path>) -> Result<Self> {
        let path = json_path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let file: ModelFile = serde_json::from_slice(&bytes)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let tensor = io::load_feature_map(base.join(&file.weights))?;
        if tensor.channels() != 1 || tensor.height() != 1 {
            return Err(Error::Format("weights must be a 1x1xN tensor".into()));
        }
        if !file.bias.is_finite() {
            return Err(Error::Format("non-finite bias".into()));
        }
        Ok(Self {
            category: file.category,
            weights: tensor.into_values(),
            bias: file.bias,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    category: u16,
    bias: f32,
    weights: String,
}

/// Free-function form of [`LinearModel::score`].
pub fn score(m: &LinearModel, f: &[f32]) -> Result<f64> {
    m.score(f)
}

fn dot(w: &[f32], f: &[f32]) -> f64 {
    w.iter().zip(f).map(|(&a, &b)| a as f64 * b as f64).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    /// Regularization strength λ.
    pub reg: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Oversample the smaller class so each epoch sees both equally often.
    pub balanced: bool,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            reg: 1e-3,
            epochs: 20,
            seed: 0,
            balanced: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: LinearModel,
    /// Objective of the running iterate after each epoch.
    pub loss_trace: Vec<f64>,
}

/// A feature vector with its ±1 label.
#[derive(Debug, Clone, Copy)]
pub struct Labeled<'a> {
    pub features: &'a [f32],
    pub label: f64,
}

/// `(λ/2)·‖w‖² + mean max(0, 1 − y·score)`; the bias is not regularized here.
pub fn hinge_objective(m: &LinearModel, samples: &[Labeled<'_>], reg: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no samples".into()));
    }
    let norm2: f64 = m.weights.iter().map(|&w| w as f64 * w as f64).sum();
    let mut hinge = 0.0;
    for s in samples {
        hinge += (1.0 - s.label * m.score(s.features)?).max(0.0);
    }
    Ok(0.5 * reg * norm2 + hinge / samples.len() as f64)
}

fn objective_f64(w: &[f64], b: f64, samples: &[Labeled<'_>], reg: f64) -> f64 {
    let norm2: f64 = w.iter().map(|v| v * v).sum();
    let hinge: f64 = samples
        .iter()
        .map(|s| {
            let m: f64 = w.iter().zip(s.features).map(|(a, &f)| a * f as f64).sum::<f64>() + b;
            (1.0 - s.label * m).max(0.0)
        })
        .sum();
    0.5 * reg * norm2 + hinge / samples.len() as f64
}

fn validate_features<P: AsRef<[f32]>>(lists: [&[P]; 2]) -> Result<usize> {
    let mut len = None;
    for list in lists {
        if list.is_empty() {
            return Err(Error::InvalidInput("both classes need at least one sample".into()));
        }
        for f in list {
            let f = f.as_ref();
            match len {
                None => len = Some(f.len()),
                Some(l) if l != f.len() => {
                    return Err(Error::DimensionMismatch(format!(
                        "feature lengths {l} and {} differ",
                        f.len()
                    )))
                }
                _ => {}
            }
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("non-finite feature value".into()));
            }
        }
    }
    Ok(len.expect("non-empty"))
}

/// Order of sample visits for one epoch: indices into `samples`.
fn epoch_order(n_pos: usize, n_neg: usize, balanced: bool, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n_pos + n_neg).collect();
    if balanced && n_pos != n_neg {
        let (small_start, small_len, target) = if n_pos < n_neg {
            (0, n_pos, n_neg)
        } else {
            (n_pos, n_neg, n_pos)
        };
        let mut extra = Vec::with_capacity(target - small_len);
        while extra.len() < target - small_len {
            let mut perm: Vec<usize> = (small_start..small_start + small_len).collect();
            perm.shuffle(rng);
            extra.extend(perm.into_iter().take(target - small_len - extra.len()));
        }
        order.extend(extra);
    }
    order.shuffle(rng);
    order
}

/// Trains a one-vs-rest model for `category`.
pub fn train_svm<P: AsRef<[f32]>>(
    category: u16,
    positives: &[P],
    negatives: &[P],
    cfg: &SvmConfig,
) -> Result<TrainedModel> {
    if !(cfg.reg > 0.0 && cfg.reg.is_finite()) {
        return Err(Error::InvalidInput(format!("reg must be positive, got {}", cfg.reg)));
    }
    let dim = validate_features([positives, negatives])?;
    let samples: Vec<Labeled<'_>> = positives
        .iter()
        .map(|f| Labeled {
            features: f.as_ref(),
            label: 1.0,
        })
        .chain(negatives.iter().map(|f| Labeled {
            features: f.as_ref(),
            label: -1.0,
        }))
        .collect();

    let lambda = cfg.reg;
    let radius = 1.0 / lambda.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let orders: Vec<Vec<usize>> = (0..cfg.epochs)
        .map(|_| epoch_order(positives.len(), negatives.len(), cfg.balanced, &mut rng))
        .collect();
    let total_steps: usize = orders.iter().map(Vec::len).sum();
    let avg_from = total_steps / 2;

    // Augmented weight vector: the last entry multiplies a constant 1.
    let mut w = vec![0.0f64; dim + 1];
    let mut avg = vec![0.0f64; dim + 1];
    let mut averaged = 0usize;
    let mut t = 0usize;
    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    for order in &orders {
        for &i in order {
            t += 1;
            let s = samples[i];
            let eta = 1.0 / (lambda * t as f64);
            let margin = s.label * (w[..dim].iter().zip(s.features).map(|(a, &f)| a * f as f64).sum::<f64>() + w[dim]);
            let shrink = 1.0 - eta * lambda;
            for v in w.iter_mut() {
                *v *= shrink;
            }
            if margin < 1.0 {
                let step = eta * s.label;
                for (v, &f) in w[..dim].iter_mut().zip(s.features) {
                    *v += step * f as f64;
                }
                w[dim] += step;
            }
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > radius {
                let k = radius / norm;
                for v in w.iter_mut() {
                    *v *= k;
                }
            }
            if t > avg_from {
                averaged += 1;
                let k = 1.0 / averaged as f64;
                for (a, v) in avg.iter_mut().zip(&w) {
                    *a += (v - *a) * k;
                }
            }
        }
        loss_trace.push(objective_f64(&w[..dim], w[dim], &samples, lambda));
    }
    let final_w = if averaged > 0 { avg } else { w };
    let model = LinearModel {
        category,
        weights: final_w[..dim].iter().map(|&v| v as f32).collect(),
        bias: final_w[dim] as f32,
    };
    Ok(TrainedModel { model, loss_trace })
}
