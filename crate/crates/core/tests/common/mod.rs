//! Independent scalar-loop reference implementations used to cross-check the
//! library. Nothing here calls back into the code under test beyond plain
//! accessors.
#![allow(dead_code)]

use mpm_core::{BinaryMask, FrameSize, LabelGrid, LogitMap};

/// Anisotropic Gaussian evaluated pixel by pixel from the closed form.
pub fn gaussian_map(
    size: FrameSize,
    center: (f64, f64),
    extent: (f64, f64),
    scale: [f64; 2],
) -> Vec<f64> {
    let (w, h) = (size.width(), size.height());
    let sx = (scale[0] * extent.0).max(1e-3);
    let sy = (scale[1] * extent.1).max(1e-3);
    let mut out = vec![0.0; w * h];
    for row in 0..h {
        for col in 0..w {
            let x = (col as f64 + 0.5) / w as f64;
            let y = (row as f64 + 0.5) / h as f64;
            let e = (x - center.0).powi(2) / (2.0 * sx * sx) + (y - center.1).powi(2) / (2.0 * sy * sy);
            out[row * w + col] = (-e).exp().max(f64::MIN_POSITIVE);
        }
    }
    out
}

/// Mean per-pixel softmax cross-entropy, written out with log-sum-exp.
pub fn cross_entropy(channels: usize, pixels: usize, z: &[f64], labels: &[u8]) -> f64 {
    let mut total = 0.0;
    for p in 0..pixels {
        let m = (0..channels).map(|c| z[c * pixels + p]).fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = (0..channels).map(|c| (z[c * pixels + p] - m).exp()).sum();
        total += m + s.ln() - z[labels[p] as usize * pixels + p];
    }
    total / pixels as f64
}

/// Center and extent of one object's prior.
pub type Geometry = ((f64, f64), (f64, f64));

/// Loss of raw logits blended with one prior per object:
/// `z_l += beta * ln(G_l + eps)` on foreground channels.
pub fn blended_loss(
    raw: &LogitMap,
    geometries: &[Geometry],
    labels: &LabelGrid,
    beta: f64,
    scale: [f64; 2],
    eps: f64,
) -> f64 {
    let size = raw.size();
    let pixels = size.pixels();
    let mut z = raw.values().to_vec();
    for (l, &(center, extent)) in geometries.iter().enumerate() {
        let g = gaussian_map(size, center, extent, scale);
        for p in 0..pixels {
            z[(l + 1) * pixels + p] += beta * (g[p] + eps).ln();
        }
    }
    cross_entropy(raw.channels(), pixels, &z, labels.labels())
}

pub fn softplus_temperature(raw: f64) -> f64 {
    ((1.0 + raw.exp()).ln() + 1e-3).clamp(0.8, 2.0)
}

/// Fused logits for 16 branch-major scalars `[w_fg, w_bg, bias, temp_raw]`.
pub fn fuse(maps: &[LogitMap; 4], theta: &[f64]) -> Vec<f64> {
    let channels = maps[0].channels();
    let pixels = maps[0].size().pixels();
    let mut out = vec![0.0; channels * pixels];
    for (b, map) in maps.iter().enumerate() {
        let (w_fg, w_bg, bias, raw) = (theta[4 * b], theta[4 * b + 1], theta[4 * b + 2], theta[4 * b + 3]);
        let t = softplus_temperature(raw);
        for c in 0..channels {
            let w = if c == 0 { w_bg } else { w_fg };
            for p in 0..pixels {
                out[c * pixels + p] += w * map.get(c, p % map.size().width(), p / map.size().width()) / t + bias;
            }
        }
    }
    out
}

pub fn fusion_loss(maps: &[LogitMap; 4], labels: &LabelGrid, theta: &[f64]) -> f64 {
    let z = fuse(maps, theta);
    cross_entropy(maps[0].channels(), maps[0].size().pixels(), &z, labels.labels())
}

/// Set pixels with an unset 4-neighbour or touching the frame edge.
pub fn boundary_pixels(mask: &BinaryMask) -> Vec<(i64, i64)> {
    let size = mask.size();
    let (w, h) = (size.width() as i64, size.height() as i64);
    let at = |c: i64, r: i64| c >= 0 && r >= 0 && c < w && r < h && mask.get(c as usize, r as usize);
    let mut out = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if at(c, r) && (!at(c - 1, r) || !at(c + 1, r) || !at(c, r - 1) || !at(c, r + 1)) {
                out.push((c, r));
            }
        }
    }
    out
}

/// Region similarity as an exact fraction `(intersection, union)`.
pub fn jaccard_counts(a: &BinaryMask, b: &BinaryMask) -> (usize, usize) {
    let (mut inter, mut union) = (0, 0);
    for (x, y) in a.bits().iter().zip(b.bits()) {
        inter += usize::from(*x && *y);
        union += usize::from(*x || *y);
    }
    (inter, union)
}

pub fn jaccard(a: &BinaryMask, b: &BinaryMask) -> f64 {
    match jaccard_counts(a, b) {
        (_, 0) => 1.0,
        (i, u) => i as f64 / u as f64,
    }
}

/// Boundary F-measure by exhaustive pairwise distance search.
pub fn boundary_f(pred: &BinaryMask, gt: &BinaryMask, tol: f64) -> f64 {
    let pb = boundary_pixels(pred);
    let gb = boundary_pixels(gt);
    if pb.is_empty() && gb.is_empty() {
        return 1.0;
    }
    if pb.is_empty() || gb.is_empty() {
        return 0.0;
    }
    let near = |p: &(i64, i64), set: &[(i64, i64)]| {
        set.iter()
            .any(|q| (((p.0 - q.0).pow(2) + (p.1 - q.1).pow(2)) as f64).sqrt() <= tol)
    };
    let precision = pb.iter().filter(|p| near(p, &gb)).count() as f64 / pb.len() as f64;
    let recall = gb.iter().filter(|p| near(p, &pb)).count() as f64 / gb.len() as f64;
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Finite-difference step for gradient checks.
pub const FD_STEP: f64 = 1e-5;

/// Gradients below this magnitude are compared absolutely; central
/// differences carry about 1e-10 of rounding noise, so exact zeros (such as
/// the bias gradient) are otherwise unmeasurable.
pub const GRAD_FLOOR: f64 = 1e-5;

/// Central-difference gradient of `f`.
pub fn numeric_gradient(mut f: impl FnMut(&[f64]) -> f64, point: &[f64], h: f64) -> Vec<f64> {
    let mut probe = point.to_vec();
    (0..point.len())
        .map(|i| {
            probe[i] = point[i] + h;
            let plus = f(&probe);
            probe[i] = point[i] - h;
            let minus = f(&probe);
            probe[i] = point[i];
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// Relative error `|a - n| / max(|a|, |n|, floor)`, maximized over entries.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Parses rows of `#` (set) and `.` (unset).
pub fn ascii_mask(rows: &[&str]) -> BinaryMask {
    let size = FrameSize::new(rows[0].len(), rows.len()).unwrap();
    BinaryMask::from_fn(size, |c, r| rows[r].as_bytes()[c] == b'#')
}

/// Twenty small prediction/ground-truth pairs drawn by hand, covering
/// identity, disjointness, containment, shifts, holes, thin structures,
/// frame-edge contact and empty masks.
pub fn hand_pairs() -> Vec<(BinaryMask, BinaryMask)> {
    let p = |a: &[&str], b: &[&str]| (ascii_mask(a), ascii_mask(b));
    vec![
        p(&["##.", "##.", "..."], &["##.", "##.", "..."]),
        p(&["##..", "....", "....", "..##"], &["....", "....", "....", "..##"]),
        p(&["##.", "...", "..."], &["...", "...", ".##"]),
        p(&["....", ".##.", ".##.", "...."], &["####", "####", "####", "####"]),
        p(&["###.", "###.", "###.", "...."], &[".###", ".###", ".###", "...."]),
        p(&["#####", "#...#", "#...#", "#...#", "#####"], &["#####", "#####", "#####", "#####", "#####"]),
        p(&[".....", ".###.", ".#.#.", ".###.", "....."], &[".....", ".###.", ".###.", ".###.", "....."]),
        p(&["#....", ".#...", "..#..", "...#.", "....#"], &["....#", "...#.", "..#..", ".#...", "#...."]),
        p(&["....", "....", "....", "...."], &["....", "....", "....", "...."]),
        p(&["....", "....", "....", "...."], &["....", ".##.", ".##.", "...."]),
        p(&["######", "......", "......", "......", "......", "......"], &["......", "######", "......", "......", "......", "......"]),
        p(&["......", ".####.", ".####.", ".####.", ".####.", "......"], &["......", "......", "..####", "..####", "..####", "..####"]),
        p(&["#.#.#.", ".#.#.#", "#.#.#.", ".#.#.#"], &["######", "######", "######", "######"]),
        p(&["##....", "##....", "......", "......", "....##", "....##"], &["##....", "##....", "......", "......", "......", "......"]),
        p(&["#######", "#######", "#######", "#######", "#######", "#######", "#######"], &[".......", ".#####.", ".#####.", ".#####.", ".#####.", ".#####.", "......."]),
        p(&["..#..", ".###.", "#####", ".###.", "..#.."], &[".....", ".###.", ".###.", ".###.", "....."]),
        p(&["###.....", "###.....", "###.....", "........"], &["........", ".....###", ".....###", ".....###"]),
        p(&["#", "#", "#"], &["#", ".", "#"]),
        p(&["##########"], &["#####....."]),
        p(&["........", ".######.", ".#....#.", ".#.##.#.", ".#....#.", ".######.", "........"], &["........", ".######.", ".######.", ".######.", ".######.", ".######.", "........"]),
    ]
}
