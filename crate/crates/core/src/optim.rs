//! Scalar-parameter optimization primitives: AdamW with decoupled weight
//! decay, linear-warmup cosine schedule, global-norm clipping, the clamped
//! softplus temperature map, and a central-difference gradient checker.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower clamp on effective branch temperatures.
pub const TEMPERATURE_MIN: f64 = 0.8;
/// Upper clamp on effective branch temperatures.
pub const TEMPERATURE_MAX: f64 = 2.0;
/// Offset added after the softplus.
pub const TEMPERATURE_OFFSET: f64 = 1e-3;

/// AdamW optimizer over a flat parameter vector.
///
/// ```text
/// m = b1 * m + (1 - b1) * g
/// v = b2 * v + (1 - b2) * g^2
/// theta -= lr * m_hat / (sqrt(v_hat) + eps) + lr * wd * theta
/// ```
#[derive(Clone, Debug)]
pub struct AdamW {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamW {
    pub fn new(params: usize, lr: f64, weight_decay: f64) -> Self {
        AdamW {
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; params],
            v: vec![0.0; params],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    /// One update at the optimizer's own learning rate.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        self.step_with_lr(params, grads, self.lr)
    }

    /// One update at an externally scheduled learning rate.
    pub fn step_with_lr(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(Error::mismatch("AdamW parameters", self.m.len(), params.len()));
        }
        if grads.len() != params.len() {
            return Err(Error::mismatch("AdamW gradients", params.len(), grads.len()));
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient component {i}")));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (((theta, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            let decay = lr * self.weight_decay * *theta;
            *theta -= lr * m_hat / (v_hat.sqrt() + self.eps) + decay;
        }
        Ok(())
    }
}

/// Linear warmup from zero, then half-cosine decay to zero at `total_steps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub base_lr: f64,
    pub warmup_steps: u64,
    pub total_steps: u64,
}

impl LrSchedule {
    pub fn new(base_lr: f64, warmup_steps: u64, total_steps: u64) -> Result<Self> {
        let s = LrSchedule {
            base_lr,
            warmup_steps,
            total_steps,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_lr >= 0.0 && self.base_lr.is_finite()) {
            return Err(Error::invalid("lr", "must be finite and non-negative"));
        }
        if self.warmup_steps > self.total_steps {
            return Err(Error::invalid(
                "warmup_steps",
                format!(
                    "{} exceeds total_steps {}",
                    self.warmup_steps, self.total_steps
                ),
            ));
        }
        Ok(())
    }

    pub fn lr_at(&self, step: u64) -> f64 {
        if step < self.warmup_steps {
            return self.base_lr * step as f64 / self.warmup_steps as f64;
        }
        if step >= self.total_steps {
            return 0.0;
        }
        let span = (self.total_steps - self.warmup_steps) as f64;
        let progress = (step - self.warmup_steps) as f64 / span;
        self.base_lr * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
    }
}

pub fn global_norm(grads: &[f64]) -> f64 {
    grads.iter().map(|g| g * g).sum::<f64>().sqrt()
}

/// Rescales `grads` in place so their L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > max_norm {
        let scale = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= scale);
        // Rounding can leave the result an ulp above the bound.
        while global_norm(grads) > max_norm {
            grads.iter_mut().for_each(|g| *g *= 1.0 - f64::EPSILON);
        }
    }
    norm
}

/// `log(1 + e^x)` in the overflow-safe form.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Effective temperature: `clamp(softplus(raw) + 1e-3, 0.8, 2.0)`.
pub fn softplus_temperature(raw: f64) -> f64 {
    (softplus(raw) + TEMPERATURE_OFFSET).clamp(TEMPERATURE_MIN, TEMPERATURE_MAX)
}

/// Derivative of [`softplus_temperature`]; zero wherever the clamp is active.
pub fn softplus_temperature_grad(raw: f64) -> f64 {
    let t = softplus(raw) + TEMPERATURE_OFFSET;
    if (TEMPERATURE_MIN..=TEMPERATURE_MAX).contains(&t) {
        sigmoid(raw)
    } else {
        0.0
    }
}

/// Step used by [`check_gradient`].
pub const FD_STEP: f64 = 1e-5;

/// Compares `analytic` to central differences of `f` at `point`.
///
/// Returns `max_i |fd_i - an_i| / max(1, |fd_i|, |an_i|)`.
pub fn check_gradient<F>(mut f: F, point: &[f64], analytic: &[f64]) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if point.len() != analytic.len() {
        return Err(Error::mismatch("analytic gradient", point.len(), analytic.len()));
    }
    let mut probe = point.to_vec();
    let mut worst = 0.0f64;
    for i in 0..point.len() {
        probe[i] = point[i] + FD_STEP;
        let plus = f(&probe)?;
        probe[i] = point[i] - FD_STEP;
        let minus = f(&probe)?;
        probe[i] = point[i];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!(
                "objective near coordinate {i} during gradient check"
            )));
        }
        let fd = (plus - minus) / (2.0 * FD_STEP);
        let an = analytic[i];
        let err = (fd - an).abs() / 1f64.max(fd.abs()).max(an.abs());
        worst = worst.max(err);
    }
    Ok(worst)
}
