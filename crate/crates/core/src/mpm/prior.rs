use serde::{Deserialize, Serialize};

use super::KinematicState;
use crate::error::{Error, Result};
use crate::logits::LogitMap;
use crate::mask::{FrameSize, NormalizedExtent, NormalizedPoint};

/// Smallest Gaussian std in normalized units.
pub const SIGMA_FLOOR: f64 = 1e-3;

/// Center and size that a prior is built from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorGeometry {
    pub center: NormalizedPoint,
    pub extent: NormalizedExtent,
}

impl PriorGeometry {
    pub fn sigmas(&self, sigma_scale: [f64; 2]) -> (f64, f64) {
        (
            (sigma_scale[0] * self.extent.w).max(SIGMA_FLOOR),
            (sigma_scale[1] * self.extent.h).max(SIGMA_FLOOR),
        )
    }
}

/// Image-sized map in `(0, 1]` peaking at the predicted object center.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPrior {
    size: FrameSize,
    values: Vec<f64>,
}

impl GaussianPrior {
    #[inline]
    pub fn size(&self) -> FrameSize {
        self.size
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.size.width() + col]
    }
}

/// Per-axis factors `gx(col)` and `gy(row)`; the prior is their outer product.
pub fn axis_profiles(
    geometry: &PriorGeometry,
    size: FrameSize,
    sigma_scale: [f64; 2],
) -> (Vec<f64>, Vec<f64>) {
    let (sx, sy) = geometry.sigmas(sigma_scale);
    let gx = (0..size.width())
        .map(|col| {
            let d = size.col_center(col) - geometry.center.x;
            (-d * d / (2.0 * sx * sx)).exp()
        })
        .collect();
    let gy = (0..size.height())
        .map(|row| {
            let d = size.row_center(row) - geometry.center.y;
            (-d * d / (2.0 * sy * sy)).exp()
        })
        .collect();
    (gx, gy)
}

/// Evaluates the anisotropic Gaussian at normalized pixel centers, with
/// `sigma = sigma_scale * extent` per axis.
pub fn gaussian_prior_at(
    geometry: &PriorGeometry,
    size: FrameSize,
    sigma_scale: [f64; 2],
) -> GaussianPrior {
    let (gx, gy) = axis_profiles(geometry, size, sigma_scale);
    let mut values = Vec::with_capacity(size.pixels());
    for &y in &gy {
        values.extend(gx.iter().map(|&x| (x * y).max(f64::MIN_POSITIVE)));
    }
    GaussianPrior { size, values }
}

/// Prior centered on the state's current position.
pub fn gaussian_prior(state: &KinematicState, sigma_scale: [f64; 2]) -> GaussianPrior {
    let geometry = PriorGeometry {
        center: state.position,
        extent: state.extent,
    };
    gaussian_prior_at(&geometry, state.size, sigma_scale)
}

/// Adds `beta * ln(G_l + epsilon)` to foreground channel `l` (priors are
/// indexed from the first foreground channel). Background passes through.
pub fn blend_logits(
    raw: &LogitMap,
    priors: &[GaussianPrior],
    beta: f64,
    epsilon: f64,
) -> Result<LogitMap> {
    if priors.len() != raw.objects() {
        return Err(Error::mismatch("prior count", raw.objects(), priors.len()));
    }
    if let Some(p) = priors.iter().find(|p| p.size != raw.size()) {
        return Err(Error::mismatch("prior size", raw.size(), p.size));
    }
    let mut out = raw.clone();
    if beta == 0.0 {
        return Ok(out);
    }
    for (l, prior) in priors.iter().enumerate() {
        for (z, &g) in out.channel_mut(l + 1).iter_mut().zip(&prior.values) {
            *z += beta * (g + epsilon).ln();
        }
    }
    out.check_finite()?;
    Ok(out)
}
