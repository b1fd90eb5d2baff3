//! Spatial pyramid pooling and the two box/segment feature assemblies.
//!
//! Pooled vectors are laid out level by level in the listed order, bins
//! row-major within a level, channels innermost:
//! `index = (Σ_{l' < l} n_{l'}² + by·n_l + bx) · C + c`.

use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cfm::{project_proposal, FeatureMask};
use crate::error::{Error, Result};
use crate::io;
use crate::netgeom::{feature_extent, CellBox, NetGeometry};
use crate::types::{FeatureMap, SegmentProposal};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PyramidSpec {
    levels: Vec<usize>,
}

impl Default for PyramidSpec {
    /// `{6×6, 3×3, 2×2, 1×1}`: 50 bins.
    fn default() -> Self {
        Self {
            levels: vec![6, 3, 2, 1],
        }
    }
}

impl PyramidSpec {
    pub fn new(levels: Vec<usize>) -> Result<Self> {
        if levels.is_empty() || levels.contains(&0) {
            return Err(Error::InvalidInput(format!(
                "pyramid levels must be non-empty and >= 1, got {levels:?}"
            )));
        }
        Ok(Self { levels })
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn total_bins(&self) -> usize {
        self.levels.iter().map(|n| n * n).sum()
    }

    pub fn feature_len(&self, channels: usize) -> usize {
        channels * self.total_bins()
    }
}

/// Fixed-length pooled vector with its layout metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledFeature {
    pub values: Vec<f32>,
    pub pyramid: PyramidSpec,
    pub channels: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct PooledSidecar {
    pyramid: PyramidSpec,
    channels: usize,
    length: usize,
}

impl PooledFeature {
    /// Writes the vector as a `1×1×len` tensor plus `<path>.json` metadata.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tensor = FeatureMap::new(1, 1, self.values.len(), self.values.clone())?;
        io::save_feature_map(path, &tensor)?;
        let sidecar = PooledSidecar {
            pyramid: self.pyramid.clone(),
            channels: self.channels,
            length: self.values.len(),
        };
        let mut json = serde_json::to_vec(&sidecar)?;
        json.push(b'\n');
        let side = sidecar_path(path);
        std::fs::write(&side, json).map_err(|e| Error::io(side, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let tensor = io::load_feature_map(path)?;
        let side = sidecar_path(path);
        let bytes = std::fs::read(&side).map_err(|e| Error::io(&side, e))?;
        let meta: PooledSidecar = serde_json::from_slice(&bytes)?;
        if tensor.channels() != 1 || tensor.height() != 1 || meta.length != tensor.width() {
            return Err(Error::Format("pooled feature must be a 1x1xN tensor".into()));
        }
        if meta.pyramid.feature_len(meta.channels) != meta.length {
            return Err(Error::Format("sidecar length disagrees with pyramid".into()));
        }
        Ok(Self {
            values: tensor.into_values(),
            pyramid: meta.pyramid,
            channels: meta.channels,
        })
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

/// Bin `j` of `n` over a window of `w` cells is `[floor(j·w/n), ceil((j+1)·w/n))`.
pub fn bin_boundaries(window_len: usize, n: usize) -> Vec<Range<usize>> {
    (0..n)
        .map(|j| (j * window_len / n)..((j + 1) * window_len).div_ceil(n))
        .collect()
}

fn check_window(f_h: usize, f_w: usize, window: &CellBox) -> Result<()> {
    if window.x0 > window.x1 || window.y0 > window.y1 {
        return Err(Error::InvalidInput(format!("empty window {window:?}")));
    }
    if window.x1 >= f_w || window.y1 >= f_h {
        return Err(Error::InvalidInput(format!(
            "window {window:?} outside {f_h}x{f_w} map"
        )));
    }
    Ok(())
}

/// Max pooling with an optional cell mask; masked-out cells read as 0.
fn pool_masked(
    f: &FeatureMap,
    window: CellBox,
    mask: Option<&FeatureMask>,
    pyr: &PyramidSpec,
) -> Result<PooledFeature> {
    check_window(f.height(), f.width(), &window)?;
    let c = f.channels();
    let fw = f.width();
    let mut values = Vec::with_capacity(pyr.feature_len(c));
    let mut acc = vec![f32::NEG_INFINITY; c];
    for &n in pyr.levels() {
        let rows = bin_boundaries(window.height(), n);
        let cols = bin_boundaries(window.width(), n);
        for r in &rows {
            for q in &cols {
                acc.fill(f32::NEG_INFINITY);
                for y in r.clone() {
                    let y = window.y0 + y;
                    for x in q.clone() {
                        let x = window.x0 + x;
                        let on = mask.is_none_or(|m| m.get(y, x));
                        for (ch, a) in acc.iter_mut().enumerate() {
                            let v = if on {
                                f.values()[(ch * f.height() + y) * fw + x]
                            } else {
                                0.0
                            };
                            *a = a.max(v);
                        }
                    }
                }
                values.extend_from_slice(&acc);
            }
        }
    }
    Ok(PooledFeature {
        values,
        pyramid: pyr.clone(),
        channels: c,
    })
}

/// Per-bin max over `window` of `f`.
pub fn spp_pool(f: &FeatureMap, window: CellBox, pyr: &PyramidSpec) -> Result<PooledFeature> {
    pool_masked(f, window, None, pyr)
}

/// `n × n` row-major grid: a bin is set when at least half of its cells are.
pub fn downsample_mask_to_grid(m: &FeatureMask, window: CellBox, n: usize) -> Result<Vec<bool>> {
    check_window(m.height(), m.width(), &window)?;
    if n == 0 {
        return Err(Error::InvalidInput("grid size must be >= 1".into()));
    }
    let rows = bin_boundaries(window.height(), n);
    let cols = bin_boundaries(window.width(), n);
    let mut grid = Vec::with_capacity(n * n);
    for r in &rows {
        for q in &cols {
            let total = r.len() * q.len();
            let set = r
                .clone()
                .flat_map(|y| q.clone().map(move |x| (y, x)))
                .filter(|&(y, x)| m.get(window.y0 + y, window.x0 + x))
                .count();
            grid.push(2 * set >= total);
        }
    }
    Ok(grid)
}

/// Window and projected mask of a proposal on `conv`.
pub fn proposal_window(conv: &FeatureMap, p: &SegmentProposal, g: &NetGeometry) -> Result<(CellBox, FeatureMask)> {
    let window = feature_extent(g, p.bbox(), conv.height(), conv.width())?;
    let mask = project_proposal(g, p, conv.height(), conv.width())?;
    Ok((window, mask))
}

/// Box pathway on the plain map and segment pathway on the masked map, both
/// pooled over the proposal's feature window.
pub fn design_a_features(
    conv: &FeatureMap,
    p: &SegmentProposal,
    g: &NetGeometry,
    pyr: &PyramidSpec,
) -> Result<(PooledFeature, PooledFeature)> {
    let (window, mask) = proposal_window(conv, p, g)?;
    design_a_from_parts(conv, window, &mask, pyr)
}

pub fn design_a_from_parts(
    conv: &FeatureMap,
    window: CellBox,
    mask: &FeatureMask,
    pyr: &PyramidSpec,
) -> Result<(PooledFeature, PooledFeature)> {
    if mask.height() != conv.height() || mask.width() != conv.width() {
        return Err(Error::DimensionMismatch("mask and map dims differ".into()));
    }
    let boxed = pool_masked(conv, window, None, pyr)?;
    let seg = pool_masked(conv, window, Some(mask), pyr)?;
    Ok((boxed, seg))
}

/// Plain pyramid with the finest level's bins zeroed where the downsampled
/// segment mask is unset.
pub fn design_b_features(
    conv: &FeatureMap,
    p: &SegmentProposal,
    g: &NetGeometry,
    pyr: &PyramidSpec,
) -> Result<PooledFeature> {
    let (window, mask) = proposal_window(conv, p, g)?;
    design_b_from_parts(conv, window, &mask, pyr)
}

pub fn design_b_from_parts(
    conv: &FeatureMap,
    window: CellBox,
    mask: &FeatureMask,
    pyr: &PyramidSpec,
) -> Result<PooledFeature> {
    let finest = pyr.levels()[0];
    if pyr.levels().iter().any(|&n| n > finest) {
        return Err(Error::InvalidInput(format!(
            "first pyramid level must be the finest, got {:?}",
            pyr.levels()
        )));
    }
    let mut pooled = pool_masked(conv, window, None, pyr)?;
    let grid = downsample_mask_to_grid(mask, window, finest)?;
    let c = pooled.channels;
    for (bin, &on) in grid.iter().enumerate() {
        if !on {
            pooled.values[bin * c..(bin + 1) * c].fill(0.0);
        }
    }
    Ok(pooled)
}
