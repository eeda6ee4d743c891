//! Region (Jaccard) and boundary F-measure scores, and their per-sequence
//! aggregation.
//!
//! The boundary score is the standard tolerance-matched variant: boundary
//! pixels are set pixels with an unset 4-neighbor or on the frame edge, and a
//! boundary pixel is matched when a boundary pixel of the other mask lies
//! within the Euclidean tolerance radius.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logits::LabelGrid;
use crate::mask::{BinaryMask, FrameSize};

/// Intersection over union; 1 when both masks are empty.
pub fn jaccard(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    let inter = pred.intersection_area(gt)?;
    let union = pred.union_area(gt)?;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

pub fn boundary(mask: &BinaryMask) -> BinaryMask {
    let size = mask.size();
    let (w, h) = (size.width(), size.height());
    BinaryMask::from_fn(size, |c, r| {
        mask.get(c, r)
            && (c == 0
                || r == 0
                || c + 1 == w
                || r + 1 == h
                || !mask.get(c - 1, r)
                || !mask.get(c + 1, r)
                || !mask.get(c, r - 1)
                || !mask.get(c, r + 1))
    })
}

/// 1% of the frame diagonal, rounded up to whole pixels.
pub fn default_tolerance(size: FrameSize) -> f64 {
    let diag = (size.width() as f64).hypot(size.height() as f64);
    (0.01 * diag).ceil()
}

fn dilate(mask: &BinaryMask, radius: f64) -> BinaryMask {
    let r = radius.floor() as isize;
    let offsets: Vec<(isize, isize)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .filter(|&(dx, dy)| ((dx * dx + dy * dy) as f64) <= radius * radius)
        .collect();
    let size = mask.size();
    let (w, h) = (size.width() as isize, size.height() as isize);
    let mut out = BinaryMask::empty(size);
    for (c, r) in mask.iter_set() {
        for &(dx, dy) in &offsets {
            let (x, y) = (c as isize + dx, r as isize + dy);
            if x >= 0 && y >= 0 && x < w && y < h {
                out.set(x as usize, y as usize, true);
            }
        }
    }
    out
}

/// Boundary F-measure with a pixel tolerance radius.
pub fn boundary_f(pred: &BinaryMask, gt: &BinaryMask, tolerance: f64) -> Result<f64> {
    if pred.size() != gt.size() {
        return Err(Error::mismatch("mask size", gt.size(), pred.size()));
    }
    if !(tolerance >= 0.0) {
        return Err(Error::invalid("tolerance", "must be non-negative"));
    }
    let pb = boundary(pred);
    let gb = boundary(gt);
    let (np, ng) = (pb.area(), gb.area());
    match (np, ng) {
        (0, 0) => return Ok(1.0),
        (0, _) | (_, 0) => return Ok(0.0),
        _ => {}
    }
    let precision = pb.intersection_area(&dilate(&gb, tolerance))? as f64 / np as f64;
    let recall = gb.intersection_area(&dilate(&pb, tolerance))? as f64 / ng as f64;
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectScore {
    pub id: u8,
    pub j: f64,
    pub f: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub j: f64,
    pub f: f64,
    pub jf: f64,
    pub per_object: Vec<ObjectScore>,
}

impl MetricReport {
    /// Averages per-object scores; `jf` is `(j + f) / 2`.
    pub fn from_objects(per_object: Vec<ObjectScore>) -> Self {
        let n = per_object.len().max(1) as f64;
        let j = per_object.iter().map(|o| o.j).sum::<f64>() / n;
        let f = per_object.iter().map(|o| o.f).sum::<f64>() / n;
        MetricReport {
            j,
            f,
            jf: (j + f) / 2.0,
            per_object,
        }
    }
}

/// Per-object J and F averaged over frames, then averaged over objects.
pub fn evaluate_sequence(
    preds: &[LabelGrid],
    gts: &[LabelGrid],
    tolerance: f64,
) -> Result<MetricReport> {
    if preds.len() != gts.len() {
        return Err(Error::Data(format!(
            "frame count mismatch: {} predicted, {} annotated",
            preds.len(),
            gts.len()
        )));
    }
    if gts.is_empty() {
        return Err(Error::Data("sequence has no frames".into()));
    }
    let objects = gts[0].objects();
    for (t, (p, g)) in preds.iter().zip(gts).enumerate() {
        if g.objects() != objects || p.objects() != objects {
            return Err(Error::Data(format!(
                "frame {t}: object ids differ (predicted 1..={}, annotated 1..={})",
                p.objects(),
                g.objects()
            )));
        }
        if p.size() != g.size() {
            return Err(Error::mismatch("frame size", g.size(), p.size()));
        }
    }
    let frames = gts.len() as f64;
    let mut per_object = Vec::with_capacity(objects as usize);
    for id in 1..=objects {
        let (mut j, mut f) = (0.0, 0.0);
        for (p, g) in preds.iter().zip(gts) {
            let (pm, gm) = (p.object_mask(id), g.object_mask(id));
            j += jaccard(&pm, &gm)?;
            f += boundary_f(&pm, &gm, tolerance)?;
        }
        per_object.push(ObjectScore {
            id,
            j: j / frames,
            f: f / frames,
        });
    }
    Ok(MetricReport::from_objects(per_object))
}
