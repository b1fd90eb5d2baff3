//! Convolutional feature masking.
//!
//! Every image pixel votes for the feature cell whose receptive-field center
//! is nearest (per axis, ties toward the smaller index, clamped to the map).
//! A cell is set when at least half of the pixels that voted for it are set;
//! cells that collected no pixel stay unset. The resulting mask multiplies
//! every channel of the feature map.

use crate::error::{Error, Result};
use crate::netgeom::NetGeometry;
use crate::types::{BinaryMask, FeatureMap, PixelBox, SegmentProposal};

/// Binary mask over feature-map cells.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeatureMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl FeatureMask {
    pub fn from_bits(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidInput("zero-sized feature mask".into()));
        }
        if bits.len() != height * width {
            return Err(Error::DimensionMismatch(format!(
                "feature mask {height}x{width} needs {} bits, got {}",
                height * width,
                bits.len()
            )));
        }
        Ok(Self { height, width, bits })
    }

    pub fn full(height: usize, width: usize) -> Result<Self> {
        Self::from_bits(height, width, vec![true; height * width])
    }

    pub fn empty(height: usize, width: usize) -> Result<Self> {
        Self::from_bits(height, width, vec![false; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Same bits viewed as an image mask, for PGM output.
    pub fn to_binary_mask(&self) -> BinaryMask {
        BinaryMask::from_bits(self.width, self.height, self.bits.clone()).expect("dims are valid")
    }

    pub fn from_binary_mask(m: &BinaryMask) -> Self {
        Self {
            height: m.height(),
            width: m.width(),
            bits: m.bits().to_vec(),
        }
    }
}

/// Per-axis pixel → cell assignment and bucket sizes.
struct AxisAssignment {
    cell: Vec<usize>,
    bucket: Vec<usize>,
}

impl AxisAssignment {
    fn new(g: &NetGeometry, pixels: usize, cells: usize) -> Self {
        let cell: Vec<usize> = (0..pixels).map(|p| g.nearest_index(p, cells)).collect();
        let mut bucket = vec![0; cells];
        for &c in &cell {
            bucket[c] += 1;
        }
        Self { cell, bucket }
    }
}

fn check_dims(fh: usize, fw: usize) -> Result<()> {
    if fh == 0 || fw == 0 {
        return Err(Error::InvalidInput(format!(
            "feature dims must be positive, got {fh}x{fw}"
        )));
    }
    Ok(())
}

fn project_region(
    g: &NetGeometry,
    mask: &BinaryMask,
    region: Option<PixelBox>,
    fh: usize,
    fw: usize,
) -> Result<FeatureMask> {
    check_dims(fh, fw)?;
    let xs = AxisAssignment::new(g, mask.width(), fw);
    let ys = AxisAssignment::new(g, mask.height(), fh);
    let mut set = vec![0usize; fh * fw];
    let r = region.unwrap_or(PixelBox {
        x0: 0,
        y0: 0,
        x1: mask.width() - 1,
        y1: mask.height() - 1,
    });
    for y in r.y0..=r.y1 {
        let row = ys.cell[y] * fw;
        for x in r.x0..=r.x1 {
            if mask.get(x, y) {
                set[row + xs.cell[x]] += 1;
            }
        }
    }
    let mut bits = vec![false; fh * fw];
    for v in 0..fh {
        for u in 0..fw {
            let total = ys.bucket[v] * xs.bucket[u];
            let s = set[v * fw + u];
            bits[v * fw + u] = total > 0 && 2 * s >= total;
        }
    }
    FeatureMask::from_bits(fh, fw, bits)
}

/// Projects an image-domain mask onto an `fh × fw` feature grid.
pub fn project_mask(g: &NetGeometry, image_mask: &BinaryMask, fh: usize, fw: usize) -> Result<FeatureMask> {
    project_region(g, image_mask, None, fh, fw)
}

/// [`project_mask`] restricted to the proposal's box, where all set pixels lie.
pub fn project_proposal(g: &NetGeometry, p: &SegmentProposal, fh: usize, fw: usize) -> Result<FeatureMask> {
    project_region(g, p.mask(), Some(p.bbox()), fh, fw)
}

/// [`project_mask`] for a mask whose set pixels all lie inside `region`.
pub fn project_mask_in(
    g: &NetGeometry,
    image_mask: &BinaryMask,
    region: PixelBox,
    fh: usize,
    fw: usize,
) -> Result<FeatureMask> {
    if !region.fits(image_mask.width(), image_mask.height()) {
        return Err(Error::InvalidInput(format!("region {region:?} outside mask")));
    }
    project_region(g, image_mask, Some(region), fh, fw)
}

/// Oracle for [`project_mask`]: every pixel scans every cell center for the
/// smallest squared 2-D distance; the row-major scan keeps the first minimum.
pub fn brute_force_project(g: &NetGeometry, image_mask: &BinaryMask, fh: usize, fw: usize) -> Result<FeatureMask> {
    check_dims(fh, fw)?;
    let mut total = vec![0usize; fh * fw];
    let mut set = vec![0usize; fh * fw];
    // Doubled coordinates keep half-pixel centers integral.
    let center2 = |u: usize| 2 * u as i64 * g.stride() + g.offset2();
    for y in 0..image_mask.height() {
        for x in 0..image_mask.width() {
            let mut best = (i64::MAX, 0usize);
            for v in 0..fh {
                let dy = 2 * y as i64 - center2(v);
                for u in 0..fw {
                    let dx = 2 * x as i64 - center2(u);
                    let d = dx * dx + dy * dy;
                    if d < best.0 {
                        best = (d, v * fw + u);
                    }
                }
            }
            total[best.1] += 1;
            if image_mask.get(x, y) {
                set[best.1] += 1;
            }
        }
    }
    let bits = total
        .iter()
        .zip(&set)
        .map(|(&t, &s)| t > 0 && s as f64 / t as f64 >= 0.5)
        .collect();
    FeatureMask::from_bits(fh, fw, bits)
}

/// Multiplies `m` onto every channel of `f`.
pub fn apply_mask(f: &FeatureMap, m: &FeatureMask) -> Result<FeatureMap> {
    if f.height() != m.height || f.width() != m.width {
        return Err(Error::DimensionMismatch(format!(
            "feature map {}x{} vs mask {}x{}",
            f.height(),
            f.width(),
            m.height,
            m.width
        )));
    }
    let plane = m.bits.len();
    let values = f
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| if m.bits[i % plane] { v } else { 0.0 })
        .collect();
    FeatureMap::new(f.channels(), f.height(), f.width(), values)
}
