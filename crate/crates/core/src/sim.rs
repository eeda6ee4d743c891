//! Deterministic scripted scenarios: objects following piecewise-linear
//! waypoint paths with occlusion intervals, rasterized ground truth, and
//! synthetic noisy logits for each of the four fusion branches.
//!
//! Randomness comes from ChaCha8 seeded with the scenario's 64-bit seed; each
//! (branch, frame) pair reads its own stream so frames can be generated in any
//! order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{Branch, LogitStack};
use crate::logits::{LabelGrid, LogitMap};
use crate::mask::{BinaryMask, FrameSize, NormalizedPoint};
use crate::metrics::{evaluate_sequence, MetricReport};
use crate::mpm::{track_sequence, TrackOutput, TrackerSettings};

pub mod fixtures;

/// Logit given to the correct channel; every other channel gets its negation.
pub const LOGIT_MARGIN: f64 = 4.0;

/// Object footprint, sized in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Rectangle { width: f64, height: f64 },
    Ellipse { width: f64, height: f64 },
}

impl Shape {
    fn dims(&self) -> (f64, f64) {
        match *self {
            Shape::Rectangle { width, height } | Shape::Ellipse { width, height } => (width, height),
        }
    }

    /// Pixels whose centers fall inside the shape placed at `center`.
    pub fn rasterize(&self, center: NormalizedPoint, size: FrameSize) -> BinaryMask {
        let px = center.x * size.width() as f64;
        let py = center.y * size.height() as f64;
        let (w, h) = self.dims();
        let (hw, hh) = (w / 2.0, h / 2.0);
        match self {
            Shape::Rectangle { .. } => BinaryMask::from_fn(size, |c, r| {
                let (x, y) = (c as f64 + 0.5, r as f64 + 0.5);
                x >= px - hw && x < px + hw && y >= py - hh && y < py + hh
            }),
            Shape::Ellipse { .. } => BinaryMask::from_fn(size, |c, r| {
                let dx = (c as f64 + 0.5 - px) / hw;
                let dy = (r as f64 + 0.5 - py) / hh;
                dx * dx + dy * dy <= 1.0
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub frame: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectScript {
    pub id: u8,
    pub shape: Shape,
    pub waypoints: Vec<Waypoint>,
    /// Half-open `[start, end)` frame intervals during which the object is hidden.
    #[serde(default)]
    pub occlusions: Vec<[usize; 2]>,
}

impl ObjectScript {
    /// Linearly interpolated center; held constant outside the waypoint range.
    pub fn center_at(&self, frame: usize) -> NormalizedPoint {
        let wps = &self.waypoints;
        let first = wps[0];
        if frame <= first.frame {
            return NormalizedPoint::new(first.x, first.y);
        }
        for pair in wps.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if frame <= b.frame {
                let t = (frame - a.frame) as f64 / (b.frame - a.frame) as f64;
                return NormalizedPoint::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
            }
        }
        let last = wps[wps.len() - 1];
        NormalizedPoint::new(last.x, last.y)
    }

    pub fn is_occluded(&self, frame: usize) -> bool {
        self.occlusions.iter().any(|&[s, e]| frame >= s && frame < e)
    }

    fn validate(&self) -> Result<()> {
        let field = "scenario.objects";
        if self.waypoints.is_empty() {
            return Err(Error::invalid(field, format!("object {} has no waypoints", self.id)));
        }
        if self.waypoints.windows(2).any(|w| w[0].frame >= w[1].frame) {
            return Err(Error::invalid(
                field,
                format!("object {} waypoints must have strictly increasing frames", self.id),
            ));
        }
        if self
            .waypoints
            .iter()
            .any(|w| !(0.0..=1.0).contains(&w.x) || !(0.0..=1.0).contains(&w.y))
        {
            return Err(Error::invalid(
                field,
                format!("object {} waypoint centers must lie in [0, 1]", self.id),
            ));
        }
        let (w, h) = self.shape.dims();
        if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
            return Err(Error::invalid(field, format!("object {} shape must have positive size", self.id)));
        }
        let mut occ = self.occlusions.clone();
        occ.sort();
        if occ.iter().any(|[s, e]| s >= e) || occ.windows(2).any(|p| p[0][1] > p[1][0]) {
            return Err(Error::invalid(
                field,
                format!("object {} occlusion intervals must be non-empty and disjoint", self.id),
            ));
        }
        Ok(())
    }
}

/// How one synthetic branch corrupts the ground truth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchProfile {
    pub branch: Branch,
    #[serde(default)]
    pub noise_std: f64,
    /// Probability that an object is missed for a whole frame.
    #[serde(default)]
    pub dropout_prob: f64,
    /// Added to an object's channel over the footprints of the other objects.
    #[serde(default)]
    pub distractor_gain: f64,
}

impl BranchProfile {
    pub fn clean(branch: Branch) -> Self {
        BranchProfile {
            branch,
            noise_std: 0.0,
            dropout_prob: 0.0,
            distractor_gain: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::invalid("branches.noise_std", format!("{} for branch {}", self.noise_std, self.branch)));
        }
        if !(0.0..=1.0).contains(&self.dropout_prob) {
            return Err(Error::invalid(
                "branches.dropout_prob",
                format!("{} for branch {} not in [0, 1]", self.dropout_prob, self.branch),
            ));
        }
        if !(self.distractor_gain >= 0.0 && self.distractor_gain.is_finite()) {
            return Err(Error::invalid("branches.distractor_gain", "must be non-negative"));
        }
        Ok(())
    }
}

pub fn default_profiles() -> Vec<BranchProfile> {
    vec![
        BranchProfile { branch: Branch::Cutie, noise_std: 1.5, dropout_prob: 0.1, distractor_gain: 0.0 },
        BranchProfile { branch: Branch::Sam2, noise_std: 1.5, dropout_prob: 0.0, distractor_gain: 6.0 },
        BranchProfile { branch: Branch::FusedNoMpm, noise_std: 1.0, dropout_prob: 0.05, distractor_gain: 0.0 },
        BranchProfile { branch: Branch::FusedMpm, noise_std: 1.0, dropout_prob: 0.0, distractor_gain: 0.0 },
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_name")]
    pub name: String,
    pub size: FrameSize,
    pub frames: usize,
    pub objects: Vec<ObjectScript>,
    #[serde(default = "default_profiles")]
    pub branches: Vec<BranchProfile>,
    #[serde(default)]
    pub seed: u64,
}

fn default_name() -> String {
    "scenario".to_string()
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruthFrame {
    /// Visible footprint per object, indexed by `id - 1`.
    pub masks: Vec<BinaryMask>,
    pub labels: LabelGrid,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 {
            return Err(Error::invalid("scenario.frames", "must be at least 1"));
        }
        if self.objects.is_empty() {
            return Err(Error::invalid("scenario.objects", "need at least one object"));
        }
        let mut ids: Vec<u8> = self.objects.iter().map(|o| o.id).collect();
        ids.sort_unstable();
        if ids.iter().enumerate().any(|(i, &id)| id as usize != i + 1) {
            return Err(Error::invalid(
                "scenario.objects",
                format!("object ids must be unique and cover 1..={}, got {ids:?}", ids.len()),
            ));
        }
        for o in &self.objects {
            o.validate()?;
        }
        for (i, p) in self.branches.iter().enumerate() {
            p.validate()?;
            if self.branches[..i].iter().any(|q| q.branch == p.branch) {
                return Err(Error::invalid("scenario.branches", format!("branch {} listed twice", p.branch)));
            }
        }
        Ok(())
    }

    pub fn object_count(&self) -> u8 {
        self.objects.len() as u8
    }

    pub fn object(&self, id: u8) -> Option<&ObjectScript> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn profile(&self, branch: Branch) -> Result<&BranchProfile> {
        self.branches
            .iter()
            .find(|p| p.branch == branch)
            .ok_or_else(|| Error::invalid("scenario.branches", format!("no profile for branch {branch}")))
    }

    /// Ground truth at `frame`. Higher ids are drawn on top.
    pub fn render_gt(&self, frame: usize) -> Result<GroundTruthFrame> {
        if frame >= self.frames {
            return Err(Error::Data(format!(
                "frame {frame} out of range (scenario has {} frames)",
                self.frames
            )));
        }
        let raw: Vec<BinaryMask> = (1..=self.object_count())
            .map(|id| {
                let o = self.object(id).expect("validated ids");
                if o.is_occluded(frame) {
                    BinaryMask::empty(self.size)
                } else {
                    o.shape.rasterize(o.center_at(frame), self.size)
                }
            })
            .collect();
        let labels = LabelGrid::from_masks(self.size, &raw)?;
        Ok(GroundTruthFrame {
            masks: labels.object_masks(),
            labels,
        })
    }

    pub fn ground_truth(&self) -> Result<Vec<LabelGrid>> {
        (0..self.frames).map(|t| self.render_gt(t).map(|g| g.labels)).collect()
    }

    fn rng_for(&self, branch: Branch, frame: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((branch.index() as u64) << 32) | frame as u64);
        rng
    }

    /// Synthetic logits of `profile`'s branch for `frame`.
    pub fn branch_logits(&self, frame: usize, profile: &BranchProfile) -> Result<LogitMap> {
        let gt = self.render_gt(frame)?;
        synth_logits(&gt.labels, profile, &mut self.rng_for(profile.branch, frame))
    }

    pub fn logit_stack(&self, frame: usize) -> Result<LogitStack> {
        let maps = Branch::ALL.map(|b| self.profile(b).and_then(|p| self.branch_logits(frame, p)));
        let [a, b, c, d] = maps;
        LogitStack::new([a?, b?, c?, d?])
    }
}

/// Noisy `(N+1)`-channel logits from a label grid.
///
/// The correct channel gets `+LOGIT_MARGIN`, every other channel
/// `-LOGIT_MARGIN`. Each object is dropped for the frame with
/// `dropout_prob`; a dropped object's channel is pushed below every other
/// channel so it never wins. `distractor_gain` is added to each object's
/// channel over the other objects' footprints. Gaussian noise is added last.
pub fn synth_logits<R: Rng>(
    labels: &LabelGrid,
    profile: &BranchProfile,
    rng: &mut R,
) -> Result<LogitMap> {
    profile.validate()?;
    let size = labels.size();
    let plane = size.pixels();
    let objects = labels.objects() as usize;
    let channels = objects + 1;
    let dropped: Vec<bool> = (0..objects)
        .map(|_| profile.dropout_prob > 0.0 && rng.random::<f64>() < profile.dropout_prob)
        .collect();
    let is_dropped = |c: usize| c > 0 && dropped[c - 1];

    let mut values = vec![-LOGIT_MARGIN; channels * plane];
    for (p, &label) in labels.labels().iter().enumerate() {
        let target = if is_dropped(label as usize) { 0 } else { label as usize };
        values[target * plane + p] = LOGIT_MARGIN;
    }
    if profile.distractor_gain > 0.0 {
        for c in 1..channels {
            for (p, &label) in labels.labels().iter().enumerate() {
                if label != 0 && label as usize != c {
                    values[c * plane + p] += profile.distractor_gain;
                }
            }
        }
    }
    if profile.noise_std > 0.0 {
        let normal = Normal::new(0.0, profile.noise_std)
            .map_err(|e| Error::invalid("branches.noise_std", e.to_string()))?;
        for v in values.iter_mut() {
            *v += normal.sample(rng);
        }
    }
    for c in (1..channels).filter(|&c| is_dropped(c)) {
        for p in 0..plane {
            let floor = (0..channels)
                .filter(|&k| k != c)
                .map(|k| values[k * plane + p])
                .fold(f64::INFINITY, f64::min);
            values[c * plane + p] = floor - LOGIT_MARGIN;
        }
    }
    LogitMap::from_vec(channels, size, values)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackingRun {
    pub ground_truth: Vec<LabelGrid>,
    pub output: TrackOutput,
    pub report: MetricReport,
}

/// Simulates one branch over the whole scenario, runs the tracker on its
/// logits, and scores the predictions against the ground truth.
pub fn run_tracking(
    scenario: &Scenario,
    profile: &BranchProfile,
    settings: &TrackerSettings,
    tolerance: f64,
) -> Result<TrackingRun> {
    scenario.validate()?;
    let ground_truth = scenario.ground_truth()?;
    let logits = (0..scenario.frames)
        .map(|t| scenario.branch_logits(t, profile))
        .collect::<Result<Vec<_>>>()?;
    let output = track_sequence(&ground_truth[0], &logits, settings)?;
    let report = evaluate_sequence(&output.predictions, &ground_truth, tolerance)?;
    Ok(TrackingRun {
        ground_truth,
        output,
        report,
    })
}
