//! A small deterministic convolutional network.
//!
//! Weights come from ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64(seed)`),
//! a portable generator whose stream is fixed across platforms. Conv layers
//! are filled in order, each in `[out][in][ky][kx]` order, one `next_u32()`
//! per weight mapped to `((u >> 8) / 2^24 · 2 − 1) · sqrt(6 / fan_in)`.
//! Biases are zero. Every conv is followed by a rectifier; pools take the max
//! over in-bounds cells.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netgeom::{compose_geometry, LayerKind, LayerSpec, NetGeometry};
use crate::types::{FeatureMap, PixelBox};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyLayer {
    #[serde(flatten)]
    pub geometry: LayerSpec,
    /// Output channels; required for conv layers, ignored for pools.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_channels: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyNetSpec {
    pub in_channels: usize,
    pub layers: Vec<ToyLayer>,
    pub seed: u64,
}

impl Default for ToyNetSpec {
    /// Three `k=3, s=2, p=1` convs with 8, 16, 32 output channels on RGB input
    /// (S = 8, RF = 15, O = 0).
    fn default() -> Self {
        let conv = |c| ToyLayer {
            geometry: LayerSpec::conv(3, 2, 1),
            out_channels: Some(c),
        };
        Self {
            in_channels: 3,
            layers: vec![conv(8), conv(16), conv(32)],
            seed: 0,
        }
    }
}

impl ToyNetSpec {
    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.geometry).collect()
    }

    pub fn geometry(&self) -> Result<NetGeometry> {
        compose_geometry(&self.layer_specs())
    }

    /// Channel count after the last layer.
    pub fn out_channels(&self) -> usize {
        self.layers.iter().fold(self.in_channels, |c, l| match l.geometry.kind {
            LayerKind::Conv => l.out_channels.unwrap_or(c),
            LayerKind::Pool => c,
        })
    }

    /// Output spatial size for an `h × w` input.
    pub fn output_dims(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let (mut h, mut w) = (h, w);
        for (i, l) in self.layers.iter().enumerate() {
            let g = l.geometry;
            match (g.output_len(h), g.output_len(w)) {
                (Some(nh), Some(nw)) => (h, w) = (nh, nw),
                _ => {
                    return Err(Error::Layer {
                        index: i,
                        kind: g.kind.name(),
                        reason: format!("input {h}x{w} too small for kernel {} with pad {}", g.kernel, g.pad),
                    })
                }
            }
        }
        Ok((h, w))
    }
}

#[derive(Debug, Clone)]
struct ConvParams {
    in_channels: usize,
    out_channels: usize,
    weights: Vec<f32>,
    bias: Vec<f32>,
}

#[derive(Debug, Clone)]
pub struct ToyNet {
    spec: ToyNetSpec,
    /// One entry per layer; `None` for pools.
    params: Vec<Option<ConvParams>>,
}

/// Maps a raw 32-bit draw onto `[-1, 1)` using its top 24 bits.
pub fn unit_symmetric(u: u32) -> f32 {
    (u >> 8) as f32 / (1u32 << 24) as f32 * 2.0 - 1.0
}

pub fn init_toynet(spec: &ToyNetSpec) -> Result<ToyNet> {
    if spec.in_channels == 0 {
        return Err(Error::InvalidInput("in_channels must be >= 1".into()));
    }
    if spec.layers.is_empty() {
        return Err(Error::InvalidInput("network has no layers".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut channels = spec.in_channels;
    let mut params = Vec::with_capacity(spec.layers.len());
    for (i, layer) in spec.layers.iter().enumerate() {
        let g = layer.geometry;
        g.validate(i)?;
        match g.kind {
            LayerKind::Pool => params.push(None),
            LayerKind::Conv => {
                let out = layer.out_channels.filter(|&c| c > 0).ok_or(Error::Layer {
                    index: i,
                    kind: "conv",
                    reason: "conv layer needs out_channels >= 1".into(),
                })?;
                let fan_in = channels * g.kernel * g.kernel;
                let scale = (6.0 / fan_in as f32).sqrt();
                let weights = (0..out * fan_in)
                    .map(|_| unit_symmetric(rng.next_u32()) * scale)
                    .collect();
                params.push(Some(ConvParams {
                    in_channels: channels,
                    out_channels: out,
                    weights,
                    bias: vec![0.0; out],
                }));
                channels = out;
            }
        }
    }
    Ok(ToyNet {
        spec: spec.clone(),
        params,
    })
}

fn conv_layer(input: &FeatureMap, p: &ConvParams, g: LayerSpec, oh: usize, ow: usize) -> FeatureMap {
    let (ih, iw) = (input.height(), input.width());
    let (k, s, pad) = (g.kernel, g.stride, g.pad as isize);
    let plane = oh * ow;
    let mut out = vec![0.0f32; p.out_channels * plane];
    out.par_chunks_mut(plane).enumerate().for_each(|(o, dst)| {
        dst.fill(p.bias[o]);
        for c in 0..p.in_channels {
            let src = input.plane(c);
            let wbase = (o * p.in_channels + c) * k * k;
            for ky in 0..k {
                for kx in 0..k {
                    let w = p.weights[wbase + ky * k + kx];
                    if w == 0.0 {
                        continue;
                    }
                    for y in 0..oh {
                        let iy = (y * s) as isize - pad + ky as isize;
                        if iy < 0 || iy >= ih as isize {
                            continue;
                        }
                        let row = &src[iy as usize * iw..(iy as usize + 1) * iw];
                        let drow = &mut dst[y * ow..(y + 1) * ow];
                        for (x, d) in drow.iter_mut().enumerate() {
                            let ix = (x * s) as isize - pad + kx as isize;
                            if ix >= 0 && ix < iw as isize {
                                *d += w * row[ix as usize];
                            }
                        }
                    }
                }
            }
        }
        for v in dst.iter_mut() {
            *v = v.max(0.0);
        }
    });
    FeatureMap::new(p.out_channels, oh, ow, out).expect("conv output dims are consistent")
}

fn pool_layer(input: &FeatureMap, g: LayerSpec, oh: usize, ow: usize) -> FeatureMap {
    let (ih, iw) = (input.height() as isize, input.width() as isize);
    let (k, s, pad) = (g.kernel as isize, g.stride as isize, g.pad as isize);
    let plane = oh * ow;
    let mut out = vec![0.0f32; input.channels() * plane];
    out.par_chunks_mut(plane).enumerate().for_each(|(c, dst)| {
        let src = input.plane(c);
        for y in 0..oh as isize {
            for x in 0..ow as isize {
                let mut m = f32::NEG_INFINITY;
                for iy in (y * s - pad).max(0)..(y * s - pad + k).min(ih) {
                    for ix in (x * s - pad).max(0)..(x * s - pad + k).min(iw) {
                        m = m.max(src[(iy * iw + ix) as usize]);
                    }
                }
                // A window lying entirely in padding sees nothing.
                dst[(y * ow as isize + x) as usize] = if m.is_finite() { m } else { 0.0 };
            }
        }
    });
    FeatureMap::new(input.channels(), oh, ow, out).expect("pool output dims are consistent")
}

impl ToyNet {
    pub fn spec(&self) -> &ToyNetSpec {
        &self.spec
    }

    pub fn geometry(&self) -> NetGeometry {
        self.spec.geometry().expect("validated at init")
    }

    /// Full-image forward pass.
    pub fn forward(&self, image: &FeatureMap) -> Result<FeatureMap> {
        if image.channels() != self.spec.in_channels {
            return Err(Error::DimensionMismatch(format!(
                "network expects {} input channels, image has {}",
                self.spec.in_channels,
                image.channels()
            )));
        }
        // Validate every layer's input size up front so the error names the layer.
        self.spec.output_dims(image.height(), image.width())?;
        let mut cur: Option<FeatureMap> = None;
        for (layer, params) in self.spec.layers.iter().zip(&self.params) {
            let input = cur.as_ref().unwrap_or(image);
            let g = layer.geometry;
            let oh = g.output_len(input.height()).expect("checked");
            let ow = g.output_len(input.width()).expect("checked");
            cur = Some(match params {
                Some(p) => conv_layer(input, p, g, oh, ow),
                None => pool_layer(input, g, oh, ow),
            });
        }
        Ok(cur.expect("at least one layer"))
    }

    /// Crop `rect`, warp it to `warp_side × warp_side` by nearest neighbour,
    /// and run the network on the warped crop.
    pub fn forward_region(&self, image: &FeatureMap, rect: PixelBox, warp_side: usize) -> Result<FeatureMap> {
        let warped = crop_and_warp(image, rect, warp_side)?;
        self.forward(&warped)
    }

    /// Conv weights as tensors (`C = out·in`, `H = W = kernel`), one per conv layer.
    pub fn weight_tensors(&self) -> Vec<FeatureMap> {
        self.spec
            .layers
            .iter()
            .zip(&self.params)
            .filter_map(|(l, p)| {
                p.as_ref().map(|p| {
                    let k = l.geometry.kernel;
                    FeatureMap::new(p.out_channels * p.in_channels, k, k, p.weights.clone())
                        .expect("weight dims are consistent")
                })
            })
            .collect()
    }

    /// Replaces the weights and bias of conv layer `layer`.
    pub fn set_conv_params(&mut self, layer: usize, weights: Vec<f32>, bias: Vec<f32>) -> Result<()> {
        let p = self
            .params
            .get_mut(layer)
            .and_then(|p| p.as_mut())
            .ok_or_else(|| Error::InvalidInput(format!("layer {layer} is not a conv layer")))?;
        if weights.len() != p.weights.len() || bias.len() != p.bias.len() {
            return Err(Error::DimensionMismatch(format!(
                "layer {layer} expects {} weights and {} biases",
                p.weights.len(),
                p.bias.len()
            )));
        }
        p.weights = weights;
        p.bias = bias;
        Ok(())
    }
}

/// Nearest-neighbour crop-and-resize to a square.
pub fn crop_and_warp(image: &FeatureMap, rect: PixelBox, side: usize) -> Result<FeatureMap> {
    if !rect.fits(image.width(), image.height()) {
        return Err(Error::InvalidInput(format!(
            "box {rect:?} outside {}x{} image",
            image.width(),
            image.height()
        )));
    }
    if side == 0 {
        return Err(Error::InvalidInput("warp side must be >= 1".into()));
    }
    let src_x: Vec<usize> = (0..side)
        .map(|i| rect.x0 + (2 * i + 1) * rect.width() / (2 * side))
        .collect();
    let src_y: Vec<usize> = (0..side)
        .map(|i| rect.y0 + (2 * i + 1) * rect.height() / (2 * side))
        .collect();
    let mut values = Vec::with_capacity(image.channels() * side * side);
    for c in 0..image.channels() {
        for &y in &src_y {
            for &x in &src_x {
                values.push(image.get(c, y, x));
            }
        }
    }
    FeatureMap::new(image.channels(), side, side, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_conv(k: usize, pad: usize, cin: usize, cout: usize, seed: u64) -> ToyNetSpec {
        ToyNetSpec {
            in_channels: cin,
            layers: vec![ToyLayer {
                geometry: LayerSpec::conv(k, 1, pad),
                out_channels: Some(cout),
            }],
            seed,
        }
    }

    fn ramp(c: usize, h: usize, w: usize) -> FeatureMap {
        let v = (0..c * h * w).map(|i| (i % 7) as f32 * 0.5).collect();
        FeatureMap::new(c, h, w, v).unwrap()
    }

    #[test]
    fn seeds_are_deterministic() {
        let a = init_toynet(&ToyNetSpec::default()).unwrap();
        let b = init_toynet(&ToyNetSpec::default()).unwrap();
        assert_eq!(a.weight_tensors(), b.weight_tensors());
        let c = init_toynet(&ToyNetSpec {
            seed: 1,
            ..ToyNetSpec::default()
        })
        .unwrap();
        assert_ne!(a.weight_tensors(), c.weight_tensors());
    }

    #[test]
    fn scalar_weight_follows_documented_stream() {
        let net = init_toynet(&single_conv(1, 0, 1, 1, 0)).unwrap();
        let w = net.weight_tensors()[0].values()[0];
        // Independent replay of the documented stream: first u32 of
        // ChaCha8(seed_from_u64(0)), top 24 bits onto [-1, 1), times sqrt(6).
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let u = rng.next_u32();
        let expected = ((u >> 8) as f64 / 16_777_216.0 * 2.0 - 1.0) as f32 * 6f32.sqrt();
        assert_eq!(w, expected);
    }

    #[test]
    fn identity_kernel_passes_input() {
        let mut net = init_toynet(&single_conv(1, 0, 1, 1, 3)).unwrap();
        net.set_conv_params(0, vec![1.0], vec![0.0]).unwrap();
        let x = ramp(1, 5, 4);
        assert_eq!(net.forward(&x).unwrap(), x);
    }

    #[test]
    fn zero_weights_give_zero_map() {
        let mut net = init_toynet(&single_conv(3, 1, 2, 2, 3)).unwrap();
        net.set_conv_params(0, vec![0.0; 36], vec![0.0; 2]).unwrap();
        let out = net.forward(&ramp(2, 6, 6)).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn box_filter_sums_nine() {
        let mut net = init_toynet(&single_conv(3, 0, 1, 1, 3)).unwrap();
        net.set_conv_params(0, vec![1.0; 9], vec![0.0]).unwrap();
        let x = FeatureMap::new(1, 5, 5, vec![0.75; 25]).unwrap();
        let out = net.forward(&x).unwrap();
        assert_eq!((out.height(), out.width()), (3, 3));
        assert!(out.values().iter().all(|&v| v == 9.0 * 0.75));
    }

    #[test]
    fn output_dims_follow_layer_arithmetic() {
        let spec = ToyNetSpec {
            in_channels: 3,
            layers: vec![
                ToyLayer {
                    geometry: LayerSpec::conv(5, 2, 2),
                    out_channels: Some(4),
                },
                ToyLayer {
                    geometry: LayerSpec::pool(3, 2, 1),
                    out_channels: None,
                },
                ToyLayer {
                    geometry: LayerSpec::conv(3, 1, 0),
                    out_channels: Some(6),
                },
            ],
            seed: 9,
        };
        let net = init_toynet(&spec).unwrap();
        for (h, w) in [(17, 23), (32, 32), (9, 40)] {
            let out = net.forward(&ramp(3, h, w)).unwrap();
            assert_eq!((out.height(), out.width()), spec.output_dims(h, w).unwrap());
            assert_eq!(out.channels(), 6);
            assert!(out.values().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn too_small_input_names_layer() {
        let net = init_toynet(&single_conv(5, 0, 1, 1, 0)).unwrap();
        let err = net.forward(&ramp(1, 3, 8)).unwrap_err();
        assert!(
            matches!(
                err,
                Error::Layer {
                    index: 0,
                    kind: "conv",
                    ..
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn inconsistent_spec_rejected() {
        let mut spec = single_conv(3, 1, 1, 1, 0);
        spec.layers[0].out_channels = None;
        assert!(init_toynet(&spec).is_err());
        let net = init_toynet(&single_conv(3, 1, 2, 1, 0)).unwrap();
        assert!(net.forward(&ramp(3, 8, 8)).is_err());
    }

    #[test]
    fn full_box_region_equals_forward() {
        let net = init_toynet(&ToyNetSpec::default()).unwrap();
        let img = ramp(3, 24, 24);
        let full = PixelBox::new(0, 0, 23, 23).unwrap();
        assert_eq!(net.forward_region(&img, full, 24).unwrap(), net.forward(&img).unwrap());
    }

    #[test]
    fn constant_image_regions_match() {
        let net = init_toynet(&ToyNetSpec::default()).unwrap();
        let img = FeatureMap::new(3, 32, 32, vec![0.4; 3 * 32 * 32]).unwrap();
        let a = net
            .forward_region(&img, PixelBox::new(0, 0, 9, 9).unwrap(), 16)
            .unwrap();
        let b = net
            .forward_region(&img, PixelBox::new(15, 12, 30, 31).unwrap(), 16)
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = ToyNetSpec::default();
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains(r#""kind":"conv","kernel":3,"stride":2,"pad":1,"out_channels":8"#));
        let back: ToyNetSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        let g = spec.geometry().unwrap();
        assert_eq!((g.stride(), g.rf_size(), g.offset()), (8, 15, 0.0));
    }
}
