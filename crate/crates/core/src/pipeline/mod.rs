//! End-to-end inference: scale assignment, cached per-scale feature maps,
//! proposal scoring, pasting, evaluation, training and the extraction
//! benchmark.

mod bench;
mod eval;
mod extract;
mod paste;
mod scale;
mod train;

pub use bench::{benchmark, features_digest, BenchReport};
pub use eval::{mean_iou, IouReport};
pub use extract::{region_features, score_proposals, ImageFeatures, ScoredRegion};
pub use paste::{paste, proposal_iou};
pub use scale::{assign_scale, resize_axis, scale_region, scaled_dims, TARGET_SIDE};
pub use train::{train_models, CategorySet, TrainingConfig, TrainingScene};

use serde::{Deserialize, Serialize};

use crate::classify::LinearModel;
use crate::error::{Error, Result};
use crate::spp::PyramidSpec;
use crate::toynet::ToyNet;
use crate::types::{FeatureMap, LabelMap, SegmentProposal};

/// How a proposal becomes a feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Design {
    /// Box pathway and masked segment pathway, concatenated.
    #[default]
    A,
    /// One pyramid with unmasked fine bins zeroed.
    B,
    /// Box pathway only; the no-masking ablation.
    Box,
}

impl Design {
    pub fn feature_len(self, pyr: &PyramidSpec, channels: usize) -> usize {
        match self {
            Design::A => 2 * pyr.feature_len(channels),
            Design::B | Design::Box => pyr.feature_len(channels),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Shorter-edge sizes, ascending.
    pub scales: Vec<usize>,
    pub paste_inhibit_iou: f64,
    pub design: Design,
    pub pyramid: PyramidSpec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            scales: vec![480, 576, 688, 864, 1200],
            paste_inhibit_iou: 0.3,
            design: Design::A,
            pyramid: PyramidSpec::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() {
            return Err(Error::InvalidInput("scale list is empty".into()));
        }
        if self.scales.contains(&0) || self.scales.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!(
                "scales must be positive and strictly ascending, got {:?}",
                self.scales
            )));
        }
        if !(self.paste_inhibit_iou > 0.0 && self.paste_inhibit_iou < 1.0) {
            return Err(Error::InvalidInput(format!(
                "paste_inhibit_iou must lie in (0,1), got {}",
                self.paste_inhibit_iou
            )));
        }
        Ok(())
    }
}

/// Result of scoring and pasting one image.
#[derive(Debug, Clone)]
pub struct Segmentation<'p> {
    pub labels: LabelMap,
    pub scored: Vec<ScoredRegion<'p>>,
    /// Conv maps computed while scoring; at most one per scale.
    pub maps_computed: usize,
}

/// [`score_proposals`] followed by [`paste`].
pub fn segment_image<'p>(
    models: &[LinearModel],
    proposals: &'p [SegmentProposal],
    image: &FeatureMap,
    net: &ToyNet,
    cfg: &PipelineConfig,
) -> Result<Segmentation<'p>> {
    let feats = ImageFeatures::new(net, image, cfg)?;
    let scored = score_proposals(models, proposals, &feats)?;
    let labels = paste(&scored, image.width(), image.height(), cfg.paste_inhibit_iou)?;
    Ok(Segmentation {
        labels,
        scored,
        maps_computed: feats.maps_computed(),
    })
}
