//! Shared domain types: binary masks, pixel boxes, segment proposals,
//! feature maps and label maps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inclusive pixel rectangle `(x0, y0)-(x1, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 4]", into = "[usize; 4]")]
pub struct PixelBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl PixelBox {
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Result<Self> {
        if x0 > x1 || y0 > y1 {
            return Err(Error::InvalidInput(format!(
                "box ({x0},{y0})-({x1},{y1}) has negative extent"
            )));
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    /// True when the box lies inside a `width × height` image.
    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.x1 < width && self.y1 < height
    }
}

impl From<[usize; 4]> for PixelBox {
    fn from(v: [usize; 4]) -> Self {
        Self {
            x0: v[0],
            y0: v[1],
            x1: v[2],
            y1: v[3],
        }
    }
}

impl From<PixelBox> for [usize; 4] {
    fn from(b: PixelBox) -> Self {
        [b.x0, b.y0, b.x1, b.y1]
    }
}

/// Row-major boolean grid at image resolution.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    /// All-unset mask.
    pub fn new(width: usize, height: usize) -> Result<Self> {
        Self::from_bits(width, height, vec![false; width * height])
    }

    pub fn full(width: usize, height: usize) -> Result<Self> {
        Self::from_bits(width, height, vec![true; width * height])
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "mask dimensions must be positive, got {width}x{height}"
            )));
        }
        if bits.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "mask {width}x{height} needs {} bits, got {}",
                width * height,
                bits.len()
            )));
        }
        Ok(Self { width, height, bits })
    }

    /// Mask whose set pixels are exactly those of `rect`.
    pub fn from_box(width: usize, height: usize, rect: PixelBox) -> Result<Self> {
        if !rect.fits(width, height) {
            return Err(Error::InvalidInput(format!(
                "box {rect:?} outside {width}x{height} image"
            )));
        }
        Self::from_fn(width, height, |x, y| rect.contains(x, y))
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self::from_bits(width, height, bits)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    /// Number of set pixels.
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn same_dims(&self, other: &BinaryMask) -> bool {
        self.width == other.width && self.height == other.height
    }

    fn check_dims(&self, other: &BinaryMask) -> Result<()> {
        if self.same_dims(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "mask {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }

    pub fn intersection(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.check_dims(other)?;
        let bits = self.bits.iter().zip(&other.bits).map(|(&a, &b)| a && b).collect();
        BinaryMask::from_bits(self.width, self.height, bits)
    }

    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.check_dims(other)?;
        let bits = self.bits.iter().zip(&other.bits).map(|(&a, &b)| a || b).collect();
        BinaryMask::from_bits(self.width, self.height, bits)
    }

    /// Copy of `self` with every pixel outside `rect` cleared.
    pub fn clip_to_box(&self, rect: PixelBox) -> BinaryMask {
        let mut out = self.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                if !rect.contains(x, y) {
                    out.bits[y * self.width + x] = false;
                }
            }
        }
        out
    }

    /// Intersection-over-union of two equally sized masks; 0 when both are empty.
    pub fn iou(&self, other: &BinaryMask) -> Result<f64> {
        self.check_dims(other)?;
        let (mut inter, mut uni) = (0usize, 0usize);
        for (&a, &b) in self.bits.iter().zip(&other.bits) {
            inter += (a && b) as usize;
            uni += (a || b) as usize;
        }
        Ok(if uni == 0 { 0.0 } else { inter as f64 / uni as f64 })
    }

    /// Tight bounding box of the set pixels.
    pub fn bbox(&self) -> Result<PixelBox> {
        let mut b: Option<PixelBox> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if !self.get(x, y) {
                    continue;
                }
                b = Some(match b {
                    None => PixelBox {
                        x0: x,
                        y0: y,
                        x1: x,
                        y1: y,
                    },
                    Some(p) => PixelBox {
                        x0: p.x0.min(x),
                        y0: p.y0.min(y),
                        x1: p.x1.max(x),
                        y1: p.y1.max(y),
                    },
                });
            }
        }
        b.ok_or_else(|| Error::DegenerateProposal("mask has no set pixels".into()))
    }
}

/// Free-function form of [`BinaryMask::iou`].
pub fn mask_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    a.iou(b)
}

/// Free-function form of [`BinaryMask::bbox`].
pub fn bbox_of(mask: &BinaryMask) -> Result<PixelBox> {
    mask.bbox()
}

/// A segment proposal: a full-resolution mask, its tight box, and an id.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentProposal {
    id: String,
    mask: BinaryMask,
    bbox: PixelBox,
    area: usize,
}

impl SegmentProposal {
    /// Builds a proposal, computing its tight box. Empty masks are rejected.
    pub fn new(id: impl Into<String>, mask: BinaryMask) -> Result<Self> {
        let id = id.into();
        let bbox = mask
            .bbox()
            .map_err(|_| Error::DegenerateProposal(format!("proposal {id:?} has an empty mask")))?;
        let area = mask.count();
        Ok(Self { id, mask, bbox, area })
    }

    /// Builds a proposal and checks that `bbox` is the tight box of `mask`.
    pub fn with_box(id: impl Into<String>, mask: BinaryMask, bbox: PixelBox) -> Result<Self> {
        let p = Self::new(id, mask)?;
        if p.bbox != bbox {
            return Err(Error::InvalidInput(format!(
                "proposal {:?}: box {:?} is not the tight box {:?}",
                p.id, bbox, p.bbox
            )));
        }
        Ok(p)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn mask(&self) -> &BinaryMask {
        &self.mask
    }

    pub fn bbox(&self) -> PixelBox {
        self.bbox
    }

    /// Set-pixel count, cached at construction.
    pub fn area(&self) -> usize {
        self.area
    }
}

/// Dense `channels × height × width` activation tensor, channel-major then row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    values: Vec<f32>,
}

impl FeatureMap {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Result<Self> {
        Self::new(channels, height, width, vec![0.0; channels * height * width])
    }

    pub fn new(channels: usize, height: usize, width: usize, values: Vec<f32>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::InvalidInput(format!(
                "feature map dimensions must be positive, got {channels}x{height}x{width}"
            )));
        }
        let n = channels
            .checked_mul(height)
            .and_then(|v| v.checked_mul(width))
            .ok_or_else(|| Error::InvalidInput("feature map size overflows".into()))?;
        if values.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "feature map {channels}x{height}x{width} needs {n} values, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite feature value at index {i}")));
        }
        Ok(Self {
            channels,
            height,
            width,
            values,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.values[(c * self.height + y) * self.width + x]
    }

    /// One channel plane as a row-major slice.
    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.values[c * n..(c + 1) * n]
    }
}

/// Per-pixel category indices; 0 is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u16>,
}

pub const BACKGROUND: u16 = 0;

impl LabelMap {
    pub fn background(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![BACKGROUND; width * height])
    }

    pub fn new(width: usize, height: usize, labels: Vec<u16>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "label map dimensions must be positive, got {width}x{height}"
            )));
        }
        if labels.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "label map {width}x{height} needs {} labels, got {}",
                width * height,
                labels.len()
            )));
        }
        Ok(Self { width, height, labels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.labels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, label: u16) {
        self.labels[y * self.width + x] = label;
    }

    /// Checks that every label is below `num_categories`.
    pub fn check_categories(&self, num_categories: usize) -> Result<()> {
        match self.labels.iter().find(|&&l| l as usize >= num_categories) {
            Some(l) => Err(Error::InvalidInput(format!(
                "label {l} out of range for {num_categories} categories"
            ))),
            None => Ok(()),
        }
    }

    /// Mask of the pixels carrying `label`.
    pub fn mask_of(&self, label: u16) -> BinaryMask {
        BinaryMask::from_bits(
            self.width,
            self.height,
            self.labels.iter().map(|&l| l == label).collect(),
        )
        .expect("label map dims are valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(w: usize, h: usize, x0: usize, y0: usize, side: usize) -> BinaryMask {
        BinaryMask::from_fn(w, h, |x, y| x >= x0 && x < x0 + side && y >= y0 && y < y0 + side).unwrap()
    }

    #[test]
    fn iou_identity_and_disjoint() {
        let a = block(4, 4, 0, 0, 2);
        let b = block(4, 4, 2, 2, 2);
        assert_eq!(mask_iou(&a, &a).unwrap(), 1.0);
        assert_eq!(mask_iou(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn iou_shifted_blocks() {
        // 2x2 block at (0,0) vs the same block one row down: 2 shared, 6 total.
        let a = block(4, 4, 0, 0, 2);
        let b = block(4, 4, 0, 1, 2);
        assert_eq!(mask_iou(&a, &b).unwrap(), 2.0 / 6.0);
    }

    #[test]
    fn iou_empty_and_mismatch() {
        let e = BinaryMask::new(3, 3).unwrap();
        assert_eq!(mask_iou(&e, &e).unwrap(), 0.0);
        let other = BinaryMask::new(3, 4).unwrap();
        assert!(matches!(mask_iou(&e, &other), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn bbox_cases() {
        let full = BinaryMask::full(5, 5).unwrap();
        assert_eq!(bbox_of(&full).unwrap(), PixelBox::new(0, 0, 4, 4).unwrap());

        // Pixel at row 2, column 3.
        let mut point = BinaryMask::new(5, 5).unwrap();
        point.set(3, 2, true);
        assert_eq!(bbox_of(&point).unwrap(), PixelBox::new(3, 2, 3, 2).unwrap());

        // Pixels (row 0, col 0) and (row 2, col 4).
        let mut two = BinaryMask::new(5, 5).unwrap();
        two.set(0, 0, true);
        two.set(4, 2, true);
        assert_eq!(bbox_of(&two).unwrap(), PixelBox::new(0, 0, 4, 2).unwrap());

        assert!(matches!(
            bbox_of(&BinaryMask::new(2, 2).unwrap()),
            Err(Error::DegenerateProposal(_))
        ));
    }

    #[test]
    fn proposal_rejects_loose_box() {
        let m = block(6, 6, 1, 1, 2);
        assert!(SegmentProposal::with_box("a", m.clone(), PixelBox::new(1, 1, 2, 2).unwrap()).is_ok());
        assert!(SegmentProposal::with_box("a", m, PixelBox::new(0, 0, 2, 2).unwrap()).is_err());
        assert!(SegmentProposal::new("e", BinaryMask::new(2, 2).unwrap()).is_err());
    }

    #[test]
    fn feature_map_invariants() {
        assert!(FeatureMap::zeros(0, 2, 2).is_err());
        assert!(FeatureMap::new(1, 1, 2, vec![0.0]).is_err());
        assert!(FeatureMap::new(1, 1, 1, vec![f32::NAN]).is_err());
        let f = FeatureMap::new(2, 1, 2, vec![1., 2., 3., 4.]).unwrap();
        assert_eq!(f.get(1, 0, 0), 3.0);
        assert_eq!(f.plane(1), &[3.0, 4.0]);
    }

    #[test]
    fn label_map_category_check() {
        let l = LabelMap::new(2, 1, vec![0, 3]).unwrap();
        assert!(l.check_categories(4).is_ok());
        assert!(l.check_categories(3).is_err());
    }
}
