use crate::error::{Error, Result};
use crate::types::{BinaryMask, FeatureMap, PixelBox};

/// Side of the reference square a proposal should cover after rescaling.
pub const TARGET_SIDE: u64 = 224;

/// Scale whose rescaled box area is nearest to `TARGET_SIDE²`; ties go to
/// the smaller scale. Compared exactly as `|A·s² − T²·e²|`.
pub fn assign_scale(rect: PixelBox, image_shorter_edge: usize, scales: &[usize]) -> Result<usize> {
    if scales.is_empty() {
        return Err(Error::InvalidInput("scale list is empty".into()));
    }
    if image_shorter_edge == 0 {
        return Err(Error::InvalidInput("image shorter edge is zero".into()));
    }
    let area = rect.area() as u128;
    let target = (TARGET_SIDE as u128).pow(2) * (image_shorter_edge as u128).pow(2);
    let mut best: Option<(u128, usize)> = None;
    for &s in scales {
        let d = (area * (s as u128).pow(2)).abs_diff(target);
        if best.is_none_or(|(bd, bs)| d < bd || (d == bd && s < bs)) {
            best = Some((d, s));
        }
    }
    Ok(best.expect("non-empty").1)
}

/// Image dims after resizing the shorter edge to `scale`.
pub fn scaled_dims(width: usize, height: usize, scale: usize) -> (usize, usize) {
    let short = width.min(height);
    let r = |n: usize| ((2 * n * scale + short) / (2 * short)).max(1);
    if width <= height {
        (scale, r(height))
    } else {
        (r(width), scale)
    }
}

/// Nearest-neighbour source index for each of `dst` samples over `src`.
pub fn resize_axis(src: usize, dst: usize) -> Vec<usize> {
    (0..dst).map(|i| ((2 * i + 1) * src / (2 * dst)).min(src - 1)).collect()
}

pub(crate) fn resize_image(image: &FeatureMap, width: usize, height: usize) -> Result<FeatureMap> {
    if width == image.width() && height == image.height() {
        return Ok(image.clone());
    }
    let xs = resize_axis(image.width(), width);
    let ys = resize_axis(image.height(), height);
    let mut values = Vec::with_capacity(image.channels() * width * height);
    for c in 0..image.channels() {
        let plane = image.plane(c);
        for &sy in &ys {
            let row = &plane[sy * image.width()..(sy + 1) * image.width()];
            values.extend(xs.iter().map(|&sx| row[sx]));
        }
    }
    FeatureMap::new(image.channels(), height, width, values)
}

fn scaled_span(map: &[usize], lo: usize, hi: usize) -> (usize, usize) {
    let first = map.iter().position(|&s| s >= lo && s <= hi);
    match first {
        Some(a) => {
            let b = map.iter().rposition(|&s| s >= lo && s <= hi).expect("found first");
            (a, b)
        }
        None => {
            // Downsampling skipped the span; keep the sample nearest its middle.
            let mid2 = lo + hi;
            let i = (0..map.len())
                .min_by_key(|&i| (2 * map[i]).abs_diff(mid2))
                .expect("non-empty axis");
            (i, i)
        }
    }
}

/// Mask and box of a region on an image resized to `width × height`.
/// The rescaled mask may be empty for regions thinner than a sample step.
pub fn scale_region(mask: &BinaryMask, rect: PixelBox, width: usize, height: usize) -> Result<(BinaryMask, PixelBox)> {
    if !rect.fits(mask.width(), mask.height()) {
        return Err(Error::InvalidInput(format!("box {rect:?} outside mask")));
    }
    if width == mask.width() && height == mask.height() {
        return Ok((mask.clone(), rect));
    }
    let xs = resize_axis(mask.width(), width);
    let ys = resize_axis(mask.height(), height);
    let (x0, x1) = scaled_span(&xs, rect.x0, rect.x1);
    let (y0, y1) = scaled_span(&ys, rect.y0, rect.y1);
    let mut out = BinaryMask::new(width, height)?;
    #[allow(clippy::needless_range_loop)]
    for y in y0..=y1 {
        for x in x0..=x1 {
            if mask.get(xs[x], ys[y]) {
                out.set(x, y, true);
            }
        }
    }
    Ok((out, PixelBox { x0, y0, x1, y1 }))
}
