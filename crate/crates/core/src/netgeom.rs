//! Receptive-field geometry of a convolution/pooling stack.
//!
//! Geometry is one-dimensional and applied independently to both axes. Feature
//! index `u` depends on image indices `[u·S − P, u·S − P + RF − 1]`, so its
//! receptive-field center is `u·S + O` with `O = (RF − 1)/2 − P`. Border
//! clipping is ignored; centers of padded nets may fall outside the image.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::PixelBox;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv,
    Pool,
}

impl LayerKind {
    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Conv => "conv",
            LayerKind::Pool => "pool",
        }
    }
}

/// One layer of a stack: square kernel, stride and symmetric padding, in cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl LayerSpec {
    pub fn conv(kernel: usize, stride: usize, pad: usize) -> Self {
        Self {
            kind: LayerKind::Conv,
            kernel,
            stride,
            pad,
        }
    }

    pub fn pool(kernel: usize, stride: usize, pad: usize) -> Self {
        Self {
            kind: LayerKind::Pool,
            kernel,
            stride,
            pad,
        }
    }

    pub fn validate(&self, index: usize) -> Result<()> {
        if self.kernel == 0 || self.stride == 0 {
            return Err(Error::Layer {
                index,
                kind: self.kind.name(),
                reason: format!(
                    "kernel and stride must be >= 1 (kernel {}, stride {})",
                    self.kernel, self.stride
                ),
            });
        }
        Ok(())
    }

    /// Output length along one axis, or `None` when the input is too small.
    pub fn output_len(&self, n: usize) -> Option<usize> {
        let padded = n + 2 * self.pad;
        (padded >= self.kernel).then(|| (padded - self.kernel) / self.stride + 1)
    }
}

/// Closed-form receptive-field descriptor of a layer stack.
///
/// The center offset is stored doubled so that half-pixel centers stay exact
/// integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NetGeometry {
    stride: i64,
    rf_size: i64,
    offset2: i64,
}

#[derive(Serialize, Deserialize)]
struct GeometryJson {
    #[serde(rename = "S")]
    stride: i64,
    #[serde(rename = "RF")]
    rf_size: i64,
    #[serde(rename = "O")]
    offset: f64,
}

impl Serialize for NetGeometry {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        GeometryJson {
            stride: self.stride,
            rf_size: self.rf_size,
            offset: self.offset(),
        }
        .serialize(s)
    }
}

impl NetGeometry {
    /// Builds a geometry from stride, receptive-field size and doubled offset.
    pub fn new(stride: i64, rf_size: i64, offset2: i64) -> Result<Self> {
        if stride < 1 || rf_size < 1 {
            return Err(Error::InvalidInput(format!(
                "geometry needs S >= 1 and RF >= 1, got S={stride} RF={rf_size}"
            )));
        }
        Ok(Self {
            stride,
            rf_size,
            offset2,
        })
    }

    pub fn identity() -> Self {
        Self {
            stride: 1,
            rf_size: 1,
            offset2: 0,
        }
    }

    /// Cumulative stride `S` in image pixels per feature cell.
    pub fn stride(&self) -> i64 {
        self.stride
    }

    pub fn rf_size(&self) -> i64 {
        self.rf_size
    }

    /// Center offset `O`, possibly a half-integer.
    pub fn offset(&self) -> f64 {
        self.offset2 as f64 / 2.0
    }

    /// `2·O`, always an integer.
    pub fn offset2(&self) -> i64 {
        self.offset2
    }

    /// Image-domain receptive-field center of feature index `u`.
    pub fn center(&self, u: i64) -> f64 {
        (u * self.stride) as f64 + self.offset()
    }

    /// Index of the nearest center to image index `pixel`, ties toward the
    /// smaller index, clamped to `[0, n − 1]`.
    pub fn nearest_index(&self, pixel: usize, n: usize) -> usize {
        // Doubled coordinates: nearest u to t = (2p − 2O) / 2S, ties down,
        // is ceil((2p − 2O − S) / 2S).
        let num = 2 * pixel as i64 - self.offset2 - self.stride;
        let u = div_ceil(num, 2 * self.stride);
        u.clamp(0, n as i64 - 1) as usize
    }
}

fn div_floor(a: i64, b: i64) -> i64 {
    a.div_euclid(b)
}

fn div_ceil(a: i64, b: i64) -> i64 {
    -div_floor(-a, b)
}

/// Closed-form composition: `S = Π sᵢ`, `RF = 1 + Σ (kᵢ − 1)·Π_{j<i} sⱼ`,
/// `O = (RF − 1)/2 − Σ pᵢ·Π_{j<i} sⱼ`.
pub fn compose_geometry(layers: &[LayerSpec]) -> Result<NetGeometry> {
    if layers.is_empty() {
        return Err(Error::InvalidInput("empty layer list".into()));
    }
    let (mut jump, mut rf, mut pad) = (1i64, 1i64, 0i64);
    for (i, l) in layers.iter().enumerate() {
        l.validate(i)?;
        rf += (l.kernel as i64 - 1) * jump;
        pad += l.pad as i64 * jump;
        jump *= l.stride as i64;
    }
    NetGeometry::new(jump, rf, rf - 1 - 2 * pad)
}

/// Input interval `[lo, hi]` that top-level index `u` depends on, obtained by
/// pushing the interval down through every layer.
pub fn dependency_interval(layers: &[LayerSpec], u: i64) -> (i64, i64) {
    let (mut lo, mut hi) = (u, u);
    for l in layers.iter().rev() {
        let (k, s, p) = (l.kernel as i64, l.stride as i64, l.pad as i64);
        lo = lo * s - p;
        hi = hi * s - p + k - 1;
    }
    (lo, hi)
}

/// Oracle for [`compose_geometry`] built from explicit dependency intervals.
pub fn brute_force_geometry(layers: &[LayerSpec]) -> Result<NetGeometry> {
    if layers.is_empty() {
        return Err(Error::InvalidInput("empty layer list".into()));
    }
    for (i, l) in layers.iter().enumerate() {
        l.validate(i)?;
    }
    let (lo0, hi0) = dependency_interval(layers, 0);
    let (lo1, hi1) = dependency_interval(layers, 1);
    let stride = lo1 - lo0;
    let rf = hi0 - lo0 + 1;
    debug_assert_eq!(hi1 - lo1 + 1, rf);
    NetGeometry::new(stride, rf, lo0 + hi0)
}

/// Inclusive feature-cell rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl CellBox {
    pub fn full(height: usize, width: usize) -> Self {
        Self {
            x0: 0,
            y0: 0,
            x1: width - 1,
            y1: height - 1,
        }
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }

    pub fn contains(&self, other: &CellBox) -> bool {
        self.x0 <= other.x0 && self.y0 <= other.y0 && self.x1 >= other.x1 && self.y1 >= other.y1
    }
}

fn axis_extent(g: &NetGeometry, lo: usize, hi: usize, n: usize) -> (usize, usize) {
    // u ∈ [floor((lo − O)/S), ceil((hi − O)/S)], in doubled coordinates.
    let s2 = 2 * g.stride;
    let a = div_floor(2 * lo as i64 - g.offset2, s2);
    let b = div_ceil(2 * hi as i64 - g.offset2, s2);
    let last = n as i64 - 1;
    (a.clamp(0, last) as usize, b.clamp(0, last) as usize)
}

/// Smallest feature rectangle whose centers cover `rect`, clamped to the map.
pub fn feature_extent(g: &NetGeometry, rect: PixelBox, fh: usize, fw: usize) -> Result<CellBox> {
    if fh == 0 || fw == 0 {
        return Err(Error::InvalidInput("zero-sized feature map".into()));
    }
    let (x0, x1) = axis_extent(g, rect.x0, rect.x1, fw);
    let (y0, y1) = axis_extent(g, rect.y0, rect.y1, fh);
    Ok(CellBox { x0, y0, x1, y1 })
}
