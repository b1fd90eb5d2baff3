//! Convolutional feature masking for joint object and stuff segmentation.
//!
//! Region proposals are masked on a shared conv feature map instead of being
//! cropped from the image, pooled with a spatial pyramid, and scored by
//! per-category linear models. A deterministic toy network and a synthetic
//! scene generator make the whole pipeline runnable without external data.

pub mod cfm;
pub mod classify;
pub mod error;
pub mod io;
pub mod netgeom;
pub mod pipeline;
pub mod pursuit;
pub mod spp;
pub mod synth;
pub mod toynet;
pub mod types;

pub use cfm::{apply_mask, project_mask, project_proposal, FeatureMask};
pub use classify::{train_svm, LinearModel, SvmConfig};
pub use error::{Error, Result};
pub use netgeom::{compose_geometry, feature_extent, CellBox, LayerKind, LayerSpec, NetGeometry};
pub use pipeline::{Design, PipelineConfig};
pub use pursuit::{GtSegment, PursuitConfig, PursuitMode};
pub use spp::{PooledFeature, PyramidSpec};
pub use toynet::{init_toynet, ToyNet, ToyNetSpec};
pub use types::{BinaryMask, FeatureMap, LabelMap, PixelBox, SegmentProposal, BACKGROUND};
