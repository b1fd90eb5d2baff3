use super::extract::ScoredRegion;
use crate::error::{Error, Result};
use crate::types::{LabelMap, SegmentProposal};

/// Segment IoU of two proposals, counting the intersection over the overlap
/// of their boxes only.
pub fn proposal_iou(a: &SegmentProposal, b: &SegmentProposal) -> f64 {
    let (ba, bb) = (a.bbox(), b.bbox());
    let x0 = ba.x0.max(bb.x0);
    let y0 = ba.y0.max(bb.y0);
    let x1 = ba.x1.min(bb.x1);
    let y1 = ba.y1.min(bb.y1);
    let mut inter = 0usize;
    if x0 <= x1 && y0 <= y1 {
        for y in y0..=y1 {
            for x in x0..=x1 {
                if a.mask().get(x, y) && b.mask().get(x, y) {
                    inter += 1;
                }
            }
        }
    }
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}

/// Greedy pasting: highest score first (ties by proposal id, then category),
/// suppressing regions whose IoU with a pasted one exceeds `inhibit_iou`.
/// Labels are only written onto pixels that are still unlabeled.
pub fn paste(scored: &[ScoredRegion<'_>], width: usize, height: usize, inhibit_iou: f64) -> Result<LabelMap> {
    for r in scored {
        let m = r.proposal.mask();
        if m.width() != width || m.height() != height {
            return Err(Error::DimensionMismatch(format!(
                "proposal {} is {}x{}, canvas is {width}x{height}",
                r.proposal.id(),
                m.width(),
                m.height()
            )));
        }
        if !r.score.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite score for {}", r.proposal.id())));
        }
    }
    let mut order: Vec<&ScoredRegion<'_>> = scored.iter().filter(|r| r.score > 0.0).collect();
    order.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.proposal.id().cmp(b.proposal.id()))
            .then_with(|| a.category.cmp(&b.category))
    });

    let mut out = LabelMap::background(width, height)?;
    let mut written = vec![false; width * height];
    let mut pasted: Vec<&SegmentProposal> = Vec::new();
    for r in order {
        if pasted.iter().any(|p| proposal_iou(p, r.proposal) > inhibit_iou) {
            continue;
        }
        let b = r.proposal.bbox();
        for y in b.y0..=b.y1 {
            for x in b.x0..=b.x1 {
                if r.proposal.mask().get(x, y) && !written[y * width + x] {
                    written[y * width + x] = true;
                    out.set(x, y, r.category);
                }
            }
        }
        pasted.push(r.proposal);
    }
    Ok(out)
}
