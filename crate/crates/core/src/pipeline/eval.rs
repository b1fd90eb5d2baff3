use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::LabelMap;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IouReport {
    /// Indexed by category; `None` when the category occurs in neither
    /// predictions nor ground truth.
    pub per_category: Vec<Option<f64>>,
    pub mean: f64,
}

/// Dataset-global IoU per category (background included), then the mean
/// over categories that occur anywhere.
pub fn mean_iou(pred: &[LabelMap], gt: &[LabelMap], num_categories: usize) -> Result<IouReport> {
    if pred.len() != gt.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions vs {} ground truths",
            pred.len(),
            gt.len()
        )));
    }
    if num_categories == 0 {
        return Err(Error::InvalidInput("num_categories must be >= 1".into()));
    }
    let mut inter = vec![0u64; num_categories];
    let mut union = vec![0u64; num_categories];
    for (i, (p, g)) in pred.iter().zip(gt).enumerate() {
        if p.width() != g.width() || p.height() != g.height() {
            return Err(Error::DimensionMismatch(format!("pair {i}: label maps differ in size")));
        }
        p.check_categories(num_categories)?;
        g.check_categories(num_categories)?;
        for (&a, &b) in p.labels().iter().zip(g.labels()) {
            let (a, b) = (a as usize, b as usize);
            if a == b {
                inter[a] += 1;
                union[a] += 1;
            } else {
                union[a] += 1;
                union[b] += 1;
            }
        }
    }
    let per_category: Vec<Option<f64>> = inter
        .iter()
        .zip(&union)
        .map(|(&i, &u)| (u > 0).then(|| i as f64 / u as f64))
        .collect();
    let present: Vec<f64> = per_category.iter().flatten().copied().collect();
    let mean = if present.is_empty() {
        0.0
    } else {
        present.iter().sum::<f64>() / present.len() as f64
    };
    Ok(IouReport { per_category, mean })
}
