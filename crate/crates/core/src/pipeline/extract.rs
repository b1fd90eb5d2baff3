use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;

use rayon::prelude::*;

use super::scale::{assign_scale, resize_image, scale_region, scaled_dims};
use super::{Design, PipelineConfig};
use crate::cfm::project_mask_in;
use crate::classify::LinearModel;
use crate::error::{Error, Result};
use crate::netgeom::{feature_extent, NetGeometry};
use crate::spp::{design_a_from_parts, design_b_from_parts, spp_pool, PyramidSpec};
use crate::toynet::ToyNet;
use crate::types::{BinaryMask, FeatureMap, PixelBox, SegmentProposal};

/// Pooled feature of one region on one conv map.
pub fn region_features(
    conv: &FeatureMap,
    g: &NetGeometry,
    mask: &BinaryMask,
    rect: PixelBox,
    pyr: &PyramidSpec,
    design: Design,
) -> Result<Vec<f32>> {
    let window = feature_extent(g, rect, conv.height(), conv.width())?;
    if design == Design::Box {
        return Ok(spp_pool(conv, window, pyr)?.values);
    }
    let fmask = project_mask_in(g, mask, rect, conv.height(), conv.width())?;
    Ok(match design {
        Design::A => {
            let (boxed, seg) = design_a_from_parts(conv, window, &fmask, pyr)?;
            let mut v = boxed.values;
            v.extend_from_slice(&seg.values);
            v
        }
        Design::B => design_b_from_parts(conv, window, &fmask, pyr)?.values,
        Design::Box => unreachable!(),
    })
}

/// Lazily computed conv maps of one image at every configured scale.
/// Each map is computed at most once, also under concurrent access.
pub struct ImageFeatures<'a> {
    net: &'a ToyNet,
    image: &'a FeatureMap,
    cfg: &'a PipelineConfig,
    dims: Vec<(usize, usize)>,
    maps: Vec<OnceLock<FeatureMap>>,
    computed: AtomicUsize,
}

impl<'a> ImageFeatures<'a> {
    pub fn new(net: &'a ToyNet, image: &'a FeatureMap, cfg: &'a PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        if image.channels() != net.spec().in_channels {
            return Err(Error::DimensionMismatch(format!(
                "image has {} channels, net expects {}",
                image.channels(),
                net.spec().in_channels
            )));
        }
        let dims: Vec<(usize, usize)> = cfg
            .scales
            .iter()
            .map(|&s| scaled_dims(image.width(), image.height(), s))
            .collect();
        // Fail early instead of inside the cache initializer.
        for &(w, h) in &dims {
            net.spec().output_dims(h, w)?;
        }
        Ok(Self {
            net,
            image,
            cfg,
            maps: dims.iter().map(|_| OnceLock::new()).collect(),
            dims,
            computed: AtomicUsize::new(0),
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        self.cfg
    }

    pub fn feature_len(&self) -> usize {
        self.cfg
            .design
            .feature_len(&self.cfg.pyramid, self.net.spec().out_channels())
    }

    /// Number of conv maps computed so far.
    pub fn maps_computed(&self) -> usize {
        self.computed.load(Ordering::SeqCst)
    }

    fn map(&self, k: usize) -> &FeatureMap {
        self.maps[k].get_or_init(|| {
            self.computed.fetch_add(1, Ordering::SeqCst);
            let (w, h) = self.dims[k];
            let scaled = resize_image(self.image, w, h).expect("dims validated");
            self.net.forward(&scaled).expect("dims validated")
        })
    }

    /// Feature of a region given in original image coordinates.
    pub fn features(&self, mask: &BinaryMask, rect: PixelBox) -> Result<Vec<f32>> {
        if mask.width() != self.image.width() || mask.height() != self.image.height() {
            return Err(Error::DimensionMismatch(format!(
                "mask {}x{} vs image {}x{}",
                mask.width(),
                mask.height(),
                self.image.width(),
                self.image.height()
            )));
        }
        let short = self.image.width().min(self.image.height());
        let s = assign_scale(rect, short, &self.cfg.scales)?;
        let k = self.cfg.scales.iter().position(|&v| v == s).expect("chosen from list");
        let (w, h) = self.dims[k];
        let (smask, srect) = scale_region(mask, rect, w, h)?;
        region_features(
            self.map(k),
            &self.net.geometry(),
            &smask,
            srect,
            &self.cfg.pyramid,
            self.cfg.design,
        )
    }

    pub fn proposal_features(&self, p: &SegmentProposal) -> Result<Vec<f32>> {
        self.features(p.mask(), p.bbox())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredRegion<'a> {
    pub proposal: &'a SegmentProposal,
    pub category: u16,
    pub score: f64,
}

/// Scores every proposal against every model, proposal-major, in input order.
pub fn score_proposals<'p>(
    models: &[LinearModel],
    proposals: &'p [SegmentProposal],
    features: &ImageFeatures<'_>,
) -> Result<Vec<ScoredRegion<'p>>> {
    let len = features.feature_len();
    for m in models {
        if m.weights.len() != len {
            return Err(Error::DimensionMismatch(format!(
                "model for category {} has {} weights, features have {len}",
                m.category,
                m.weights.len()
            )));
        }
    }
    if models.is_empty() {
        return Ok(Vec::new());
    }
    let per_proposal: Vec<Vec<ScoredRegion<'p>>> = proposals
        .par_iter()
        .map(|p| {
            let f = features.proposal_features(p)?;
            models
                .iter()
                .map(|m| {
                    Ok(ScoredRegion {
                        proposal: p,
                        category: m.category,
                        score: m.score(&f)?,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_proposal.into_iter().flatten().collect())
}
