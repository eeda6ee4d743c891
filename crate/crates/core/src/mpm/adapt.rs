//! Online adaptation of the prior's scalar parameters `(beta, s_x, s_y)` on
//! annotated frames, with the segmentation logits held fixed.

use serde::{Deserialize, Serialize};

use super::prior::{PriorGeometry, SIGMA_FLOOR};
use super::MpmConfig;
use crate::error::{Error, Result};
use crate::logits::{cross_entropy_loss, softmax_cross_entropy, LabelGrid, LogitMap};
use crate::optim::{clip_global_norm, AdamW};

/// The learnable part of the module.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpmParams {
    pub beta: f64,
    pub sigma_scale: [f64; 2],
}

impl MpmParams {
    pub fn from_config(config: &MpmConfig) -> Self {
        MpmParams {
            beta: config.beta,
            sigma_scale: config.sigma_scale,
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.beta, self.sigma_scale[0], self.sigma_scale[1]]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        MpmParams {
            beta: v[0],
            sigma_scale: [v[1], v[2]],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub max_grad_norm: f64,
    pub steps_per_frame: usize,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        AdaptConfig {
            lr: 1e-4,
            weight_decay: 1e-6,
            max_grad_norm: 1.0,
            steps_per_frame: 5,
        }
    }
}

impl AdaptConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid("adapt.lr", "must be finite and non-negative"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::invalid("adapt.weight_decay", "must be non-negative"));
        }
        if !(self.max_grad_norm > 0.0) {
            return Err(Error::invalid("adapt.max_grad_norm", "must be positive"));
        }
        Ok(())
    }
}

/// Per-pixel prior terms for one object: `ln(G + eps)`, and the partial
/// derivatives of that log term with respect to `s_x` and `s_y`.
struct LogPrior {
    log_g: Vec<f64>,
    d_sx: Vec<f64>,
    d_sy: Vec<f64>,
}

fn log_prior(
    geometry: &PriorGeometry,
    raw: &LogitMap,
    sigma_scale: [f64; 2],
    epsilon: f64,
    with_grad: bool,
) -> LogPrior {
    let size = raw.size();
    let (sx, sy) = geometry.sigmas(sigma_scale);
    // dsigma/ds is the extent unless the floor is active
    let dsx_ds = if sigma_scale[0] * geometry.extent.w > SIGMA_FLOOR {
        geometry.extent.w
    } else {
        0.0
    };
    let dsy_ds = if sigma_scale[1] * geometry.extent.h > SIGMA_FLOOR {
        geometry.extent.h
    } else {
        0.0
    };
    let n = size.pixels();
    let mut out = LogPrior {
        log_g: Vec::with_capacity(n),
        d_sx: Vec::with_capacity(if with_grad { n } else { 0 }),
        d_sy: Vec::with_capacity(if with_grad { n } else { 0 }),
    };
    for row in 0..size.height() {
        let dy = size.row_center(row) - geometry.center.y;
        for col in 0..size.width() {
            let dx = size.col_center(col) - geometry.center.x;
            let g_raw = (-dx * dx / (2.0 * sx * sx) - dy * dy / (2.0 * sy * sy)).exp();
            let g = g_raw.max(f64::MIN_POSITIVE);
            out.log_g.push((g + epsilon).ln());
            if with_grad {
                // d ln(G+eps)/d sigma = G/(G+eps) * d^2/sigma^3, zero where G is floored
                let ratio = if g_raw >= f64::MIN_POSITIVE { g / (g + epsilon) } else { 0.0 };
                out.d_sx.push(ratio * dx * dx / (sx * sx * sx) * dsx_ds);
                out.d_sy.push(ratio * dy * dy / (sy * sy * sy) * dsy_ds);
            }
        }
    }
    out
}

fn blend_with(raw: &LogitMap, beta: f64, priors: &[LogPrior]) -> LogitMap {
    let mut out = raw.clone();
    for (l, prior) in priors.iter().enumerate() {
        for (z, lg) in out.channel_mut(l + 1).iter_mut().zip(&prior.log_g) {
            *z += beta * lg;
        }
    }
    out
}

fn check_inputs(raw: &LogitMap, geometries: &[PriorGeometry]) -> Result<()> {
    if geometries.len() != raw.objects() {
        return Err(Error::mismatch("prior count", raw.objects(), geometries.len()));
    }
    Ok(())
}

/// Cross-entropy of the blended logits against `labels`.
pub fn blended_loss(
    params: &MpmParams,
    raw: &LogitMap,
    geometries: &[PriorGeometry],
    labels: &LabelGrid,
    epsilon: f64,
) -> Result<f64> {
    check_inputs(raw, geometries)?;
    let priors: Vec<_> = geometries
        .iter()
        .map(|g| log_prior(g, raw, params.sigma_scale, epsilon, false))
        .collect();
    cross_entropy_loss(&blend_with(raw, params.beta, &priors), labels)
}

/// Loss and its analytic gradient with respect to `[beta, s_x, s_y]`.
pub fn blended_loss_and_grad(
    params: &MpmParams,
    raw: &LogitMap,
    geometries: &[PriorGeometry],
    labels: &LabelGrid,
    epsilon: f64,
) -> Result<(f64, [f64; 3])> {
    check_inputs(raw, geometries)?;
    let priors: Vec<_> = geometries
        .iter()
        .map(|g| log_prior(g, raw, params.sigma_scale, epsilon, true))
        .collect();
    let blended = blend_with(raw, params.beta, &priors);
    let (loss, dz) = softmax_cross_entropy(&blended, labels)?;
    let mut grad = [0.0; 3];
    for (l, prior) in priors.iter().enumerate() {
        for (p, &g) in dz.channel(l + 1).iter().enumerate() {
            grad[0] += g * prior.log_g[p];
            grad[1] += g * params.beta * prior.d_sx[p];
            grad[2] += g * params.beta * prior.d_sy[p];
        }
    }
    Ok((loss, grad))
}

/// AdamW-driven adaptation state for one video. Create a fresh adapter per
/// sequence.
#[derive(Clone, Debug)]
pub struct MpmAdapter {
    params: MpmParams,
    optimizer: AdamW,
    config: AdaptConfig,
}

impl MpmAdapter {
    pub fn new(params: MpmParams, config: AdaptConfig) -> Self {
        MpmAdapter {
            params,
            optimizer: AdamW::new(3, config.lr, config.weight_decay),
            config,
        }
    }

    pub fn params(&self) -> MpmParams {
        self.params
    }

    /// One clipped AdamW update. Returns the loss before the update. On a
    /// non-finite loss or gradient the parameters are left untouched.
    pub fn adapt_step(
        &mut self,
        raw: &LogitMap,
        geometries: &[PriorGeometry],
        labels: &LabelGrid,
        epsilon: f64,
    ) -> Result<f64> {
        let (loss, mut grad) = blended_loss_and_grad(&self.params, raw, geometries, labels, epsilon)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("motion prior adaptation step".into()));
        }
        clip_global_norm(&mut grad, self.config.max_grad_norm);
        let mut theta = self.params.to_array();
        self.optimizer.step(&mut theta, &grad)?;
        // keep the prior well-defined: beta >= 0, positive scales
        theta[0] = theta[0].max(0.0);
        theta[1] = theta[1].max(SIGMA_FLOOR);
        theta[2] = theta[2].max(SIGMA_FLOOR);
        self.params = MpmParams::from_slice(&theta);
        Ok(loss)
    }

    /// Runs `steps_per_frame` updates on one annotated frame.
    pub fn adapt_frame(
        &mut self,
        raw: &LogitMap,
        geometries: &[PriorGeometry],
        labels: &LabelGrid,
        epsilon: f64,
    ) -> Result<Vec<f64>> {
        (0..self.config.steps_per_frame)
            .map(|_| self.adapt_step(raw, geometries, labels, epsilon))
            .collect()
    }
}
