//! Motion prediction: per-object kinematic state, Gaussian location priors,
//! and log-space blending of those priors into segmentation logits.
//!
//! Each tracked object carries a normalized centroid, bounding-box extent and
//! per-frame velocity. Valid observations are folded in with an exponential
//! moving average; when the object is not observed its position is advanced
//! by the last velocity and its size is held.

mod adapt;
mod prior;
mod tracker;

pub use adapt::{blended_loss, blended_loss_and_grad, AdaptConfig, MpmAdapter, MpmParams};
pub use prior::{
    axis_profiles, blend_logits, gaussian_prior, gaussian_prior_at, GaussianPrior, PriorGeometry,
    SIGMA_FLOOR,
};
pub use tracker::{track_sequence, FrameTrace, ObjectTrace, TrackOutput, TrackerSettings};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{BinaryMask, FrameSize, NormalizedExtent, NormalizedPoint};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpmConfig {
    /// EMA momentum on position and extent.
    pub alpha: f64,
    /// Weight of the log-prior added to foreground logits.
    pub beta: f64,
    /// Gaussian std per axis as a multiple of the object's extent.
    pub sigma_scale: [f64; 2],
    /// Stabilizer inside `log(G + epsilon)`.
    pub epsilon: f64,
    /// Observations with fewer set pixels count as missing.
    pub min_valid_area: usize,
}

impl Default for MpmConfig {
    fn default() -> Self {
        MpmConfig {
            alpha: 0.9,
            beta: 0.5,
            sigma_scale: [0.5, 0.5],
            epsilon: 1e-6,
            min_valid_area: 1,
        }
    }
}

impl MpmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid("mpm.alpha", format!("{} not in (0, 1)", self.alpha)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid("mpm.beta", format!("{} is not >= 0", self.beta)));
        }
        if !self.sigma_scale.iter().all(|s| *s > 0.0 && s.is_finite()) {
            return Err(Error::invalid(
                "mpm.sigma_scale",
                format!("{:?} must be positive", self.sigma_scale),
            ));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid("mpm.epsilon", "must be positive"));
        }
        if self.min_valid_area == 0 {
            return Err(Error::invalid("mpm.min_valid_area", "must be at least 1"));
        }
        Ok(())
    }
}

/// Per-frame displacement in normalized units.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Velocity {
    pub dx: f64,
    pub dy: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KinematicState {
    pub size: FrameSize,
    pub position: NormalizedPoint,
    pub extent: NormalizedExtent,
    pub velocity: Velocity,
    pub frames_since_observation: u32,
}

impl KinematicState {
    /// State from a first-frame annotation: normalized centroid and bounding
    /// box, zero velocity.
    pub fn init(first_mask: &BinaryMask) -> Result<Self> {
        let (position, extent) = first_mask
            .centroid()
            .zip(first_mask.extent())
            .ok_or_else(|| Error::EmptyMask("first-frame annotation has no set pixels".into()))?;
        Ok(KinematicState {
            size: first_mask.size(),
            position,
            extent,
            velocity: Velocity::default(),
            frames_since_observation: 0,
        })
    }

    /// Folds in one frame. A mask with at least `min_valid_area` pixels updates
    /// position and extent by EMA and sets the velocity to the displacement of
    /// the smoothed position; otherwise the position is extrapolated by the
    /// last velocity (clamped to the frame) and extent and velocity are kept.
    pub fn observe(&self, mask: Option<&BinaryMask>, config: &MpmConfig) -> Result<Self> {
        if let Some(m) = mask {
            if m.size() != self.size {
                return Err(Error::mismatch("observed mask size", self.size, m.size()));
            }
        }
        let observed = mask
            .filter(|m| m.area() >= config.min_valid_area)
            .and_then(|m| m.centroid().zip(m.extent()));

        let next = match observed {
            Some((centroid, extent)) => {
                let a = config.alpha;
                let position = NormalizedPoint {
                    x: a * self.position.x + (1.0 - a) * centroid.x,
                    y: a * self.position.y + (1.0 - a) * centroid.y,
                };
                let extent = NormalizedExtent {
                    w: a * self.extent.w + (1.0 - a) * extent.w,
                    h: a * self.extent.h + (1.0 - a) * extent.h,
                };
                KinematicState {
                    size: self.size,
                    position,
                    extent,
                    velocity: Velocity {
                        dx: position.x - self.position.x,
                        dy: position.y - self.position.y,
                    },
                    frames_since_observation: 0,
                }
            }
            None => KinematicState {
                position: self.predicted_position(),
                frames_since_observation: self.frames_since_observation + 1,
                ..*self
            },
        };
        Ok(next)
    }

    /// Constant-velocity estimate of the position one frame ahead.
    pub fn predicted_position(&self) -> NormalizedPoint {
        NormalizedPoint {
            x: self.position.x + self.velocity.dx,
            y: self.position.y + self.velocity.dy,
        }
        .clamped()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn size(w: usize, h: usize) -> FrameSize {
        FrameSize::new(w, h).unwrap()
    }

    fn state_at(x: f64, y: f64, dx: f64, dy: f64) -> KinematicState {
        KinematicState {
            size: size(100, 100),
            position: NormalizedPoint::new(x, y),
            extent: NormalizedExtent::new(0.1, 0.2),
            velocity: Velocity { dx, dy },
            frames_since_observation: 0,
        }
    }

    #[test]
    fn init_examples() {
        let s = KinematicState::init(&BinaryMask::full(size(4, 4))).unwrap();
        assert_eq!(s.position, NormalizedPoint::new(0.5, 0.5));
        assert_eq!(s.extent, NormalizedExtent::new(1.0, 1.0));
        assert_eq!(s.velocity, Velocity::default());

        let s = KinematicState::init(&BinaryMask::from_pixels(size(4, 4), &[(0, 0)]).unwrap())
            .unwrap();
        assert_eq!(s.position, NormalizedPoint::new(0.125, 0.125));
        assert_eq!(s.extent, NormalizedExtent::new(0.25, 0.25));

        let block = BinaryMask::from_fn(size(8, 8), |c, r| (2..=4).contains(&c) && (1..=3).contains(&r));
        let s = KinematicState::init(&block).unwrap();
        assert_eq!(s.position, NormalizedPoint::new(0.4375, 0.3125));
        assert_eq!(s.extent, NormalizedExtent::new(0.375, 0.375));
        assert_eq!(s.frames_since_observation, 0);
    }

    #[test]
    fn init_rejects_empty() {
        let err = KinematicState::init(&BinaryMask::empty(size(4, 4))).unwrap_err();
        assert!(matches!(err, Error::EmptyMask(_)));
    }

    #[test]
    fn ema_update_example() {
        // 10x10 frame, 2x2 block centered at (6, 6) px -> centroid (0.6, 0.6)
        let sz = size(10, 10);
        let mask = BinaryMask::from_fn(sz, |c, r| (5..=6).contains(&c) && (5..=6).contains(&r));
        assert_eq!(mask.centroid(), Some(NormalizedPoint::new(0.6, 0.6)));
        let prev = KinematicState {
            size: sz,
            ..state_at(0.4, 0.4, 0.0, 0.0)
        };
        let next = prev.observe(Some(&mask), &MpmConfig::default()).unwrap();
        assert!((next.position.x - 0.42).abs() < 1e-12);
        assert!((next.position.y - 0.42).abs() < 1e-12);
        assert!((next.velocity.dx - 0.02).abs() < 1e-12);
        assert!((next.velocity.dy - 0.02).abs() < 1e-12);
        assert!((next.extent.w - (0.9 * 0.1 + 0.1 * 0.2)).abs() < 1e-12);
    }

    #[test]
    fn absent_mask_extrapolates() {
        let prev = state_at(0.5, 0.5, 0.1, 0.0);
        let next = prev.observe(None, &MpmConfig::default()).unwrap();
        assert!((next.position.x - 0.6).abs() < 1e-12);
        assert_eq!(next.position.y, 0.5);
        assert_eq!(next.extent, prev.extent);
        assert_eq!(next.velocity, prev.velocity);
        assert_eq!(next.frames_since_observation, 1);
    }

    #[test]
    fn extrapolation_clamps_but_keeps_velocity() {
        let prev = state_at(0.95, 0.5, 0.1, 0.0);
        let next = prev.observe(None, &MpmConfig::default()).unwrap();
        assert_eq!(next.position, NormalizedPoint::new(1.0, 0.5));
        assert_eq!(next.velocity.dx, 0.1);
    }

    #[test]
    fn small_masks_count_as_missing() {
        let config = MpmConfig {
            min_valid_area: 3,
            ..MpmConfig::default()
        };
        let mut prev = state_at(0.5, 0.5, 0.01, 0.0);
        prev.frames_since_observation = 2;
        let tiny = BinaryMask::from_pixels(size(100, 100), &[(10, 10), (11, 10)]).unwrap();
        let next = prev.observe(Some(&tiny), &config).unwrap();
        assert_eq!(next.frames_since_observation, 3);
        assert!((next.position.x - 0.51).abs() < 1e-12);
    }

    #[test]
    fn observe_rejects_wrong_size() {
        let prev = state_at(0.5, 0.5, 0.0, 0.0);
        let mask = BinaryMask::full(size(10, 10));
        assert!(prev.observe(Some(&mask), &MpmConfig::default()).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(MpmConfig::default().validate().is_ok());
        for bad in [
            MpmConfig { alpha: 1.0, ..Default::default() },
            MpmConfig { alpha: 0.0, ..Default::default() },
            MpmConfig { beta: -0.1, ..Default::default() },
            MpmConfig { sigma_scale: [0.5, 0.0], ..Default::default() },
            MpmConfig { epsilon: 0.0, ..Default::default() },
            MpmConfig { min_valid_area: 0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }
}
