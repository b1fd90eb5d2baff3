use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::netgeom::CellBox;
use crate::spp::{design_a_features, spp_pool, PyramidSpec};
use crate::toynet::ToyNet;
use crate::types::{FeatureMap, SegmentProposal};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub proposals: usize,
    /// Path (a): one forward pass over the whole image.
    pub conv_once_ms: f64,
    /// Path (a): projection, masking and pooling for every proposal.
    pub masking_ms: f64,
    /// Path (b): crop, warp, forward and pool for every proposal.
    pub per_region_ms: f64,
    /// `per_region_ms / (conv_once_ms + masking_ms)`.
    pub ratio: f64,
    pub threads: usize,
    /// FNV-1a hash of path (a)'s features; equal across repeats and thread counts.
    pub digest: String,
}

/// FNV-1a over the bit patterns of `values`.
pub fn features_digest<'a>(values: impl IntoIterator<Item = &'a [f32]>) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for x in v {
            for b in x.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
    }
    format!("{h:016x}")
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Times conv-once feature masking against per-region forward passes on the
/// first `count` proposals (cycled if fewer are given), inside a pool of
/// `threads` workers. Each timing is the median over `repeats` runs.
#[allow(clippy::too_many_arguments)]
pub fn benchmark(
    image: &FeatureMap,
    proposals: &[SegmentProposal],
    count: usize,
    net: &ToyNet,
    pyr: &PyramidSpec,
    warp_side: usize,
    repeats: usize,
    threads: usize,
) -> Result<BenchReport> {
    if proposals.is_empty() || count == 0 {
        return Err(Error::InvalidInput("benchmark needs at least one proposal".into()));
    }
    if repeats == 0 || threads == 0 {
        return Err(Error::InvalidInput("repeats and threads must be >= 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    let chosen: Vec<&SegmentProposal> = proposals.iter().cycle().take(count).collect();
    let g = net.geometry();
    let out_c = net.spec().out_channels();
    let (oh, ow) = net.spec().output_dims(warp_side, warp_side)?;

    pool.install(|| {
        let mut conv = Vec::with_capacity(repeats);
        let mut masking = Vec::with_capacity(repeats);
        let mut per_region = Vec::with_capacity(repeats);
        let mut digest: Option<String> = None;
        for _ in 0..repeats {
            let t = Instant::now();
            let fmap = net.forward(image)?;
            conv.push(ms(t));

            let t = Instant::now();
            let feats: Vec<Vec<f32>> = chosen
                .par_iter()
                .map(|p| {
                    let (a, b) = design_a_features(&fmap, p, &g, pyr)?;
                    let mut v = a.values;
                    v.extend_from_slice(&b.values);
                    Ok(v)
                })
                .collect::<Result<_>>()?;
            masking.push(ms(t));
            let d = features_digest(feats.iter().map(Vec::as_slice));
            match &digest {
                None => digest = Some(d),
                Some(prev) if *prev != d => {
                    return Err(Error::InvalidInput("conv-once features differ between repeats".into()))
                }
                _ => {}
            }

            let t = Instant::now();
            let full = CellBox::full(oh, ow);
            let pooled: Vec<Vec<f32>> = chosen
                .par_iter()
                .map(|p| {
                    let f = net.forward_region(image, p.bbox(), warp_side)?;
                    Ok(spp_pool(&f, full, pyr)?.values)
                })
                .collect::<Result<_>>()?;
            per_region.push(ms(t));
            debug_assert_eq!(pooled.len(), count);
            debug_assert!(pooled.iter().all(|v| v.len() == pyr.feature_len(out_c)));
        }
        let conv_once_ms = median(conv);
        let masking_ms = median(masking);
        let per_region_ms = median(per_region);
        Ok(BenchReport {
            proposals: count,
            conv_once_ms,
            masking_ms,
            per_region_ms,
            ratio: per_region_ms / (conv_once_ms + masking_ms),
            threads,
            digest: digest.expect("repeats >= 1"),
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toynet::{init_toynet, ToyNetSpec};
    use crate::types::{BinaryMask, PixelBox};

    #[test]
    fn report_shape_and_digest_stability() {
        let net = init_toynet(&ToyNetSpec::default()).unwrap();
        let img = FeatureMap::new(3, 32, 32, (0..3072).map(|i| (i % 13) as f32 / 13.0).collect()).unwrap();
        let props: Vec<SegmentProposal> = (0..3)
            .map(|i| {
                let b = PixelBox::new(i, i, 16 + i, 20 + i).unwrap();
                SegmentProposal::new(format!("p{i}"), BinaryMask::from_box(32, 32, b).unwrap()).unwrap()
            })
            .collect();
        let pyr = PyramidSpec::default();
        let a = benchmark(&img, &props, 5, &net, &pyr, 32, 2, 1).unwrap();
        let b = benchmark(&img, &props, 5, &net, &pyr, 32, 1, 2).unwrap();
        assert_eq!(a.proposals, 5);
        assert_eq!(a.threads, 1);
        assert_eq!(a.digest, b.digest);
        assert!(a.ratio > 0.0 && a.ratio.is_finite());
        assert!(benchmark(&img, &[], 5, &net, &pyr, 32, 1, 1).is_err());
    }

    #[test]
    fn digest_is_bitwise() {
        assert_ne!(features_digest([&[0.0f32][..]]), features_digest([&[-0.0f32][..]]));
        assert_eq!(
            features_digest([&[1.0f32, 2.0][..]]),
            features_digest([&[1.0f32][..], &[2.0][..]])
        );
    }
}
