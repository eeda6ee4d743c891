//! Four-branch logit fusion.
//!
//! Each branch `b` contributes `W_b * (Z_b / T_b) + bias_b`, where `W_b`
//! applies `w_bg` to the background channel and `w_fg` to every object
//! channel, `T_b` is the clamped softplus temperature, and the bias is added
//! to every channel. The fused logits are the sum of the four contributions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logits::{softmax_cross_entropy, LabelGrid, LogitMap};
use crate::mask::FrameSize;
use crate::optim::{
    clip_global_norm, global_norm, softplus_temperature, softplus_temperature_grad, AdamW,
    LrSchedule,
};

pub const BRANCH_COUNT: usize = 4;
pub const PARAMS_PER_BRANCH: usize = 4;
pub const PARAM_COUNT: usize = BRANCH_COUNT * PARAMS_PER_BRANCH;

/// Upstream logit providers, in fusion order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    /// Query-based tracker on its original encoder.
    #[serde(rename = "C")]
    Cutie,
    /// Memory-attention segmenter.
    #[serde(rename = "S")]
    Sam2,
    /// Fused model, motion prior disabled.
    #[serde(rename = "M-")]
    FusedNoMpm,
    /// Fused model, motion prior enabled.
    #[serde(rename = "M+")]
    FusedMpm,
}

impl Branch {
    pub const ALL: [Branch; BRANCH_COUNT] =
        [Branch::Cutie, Branch::Sam2, Branch::FusedNoMpm, Branch::FusedMpm];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Short code used on the command line and in reports.
    pub fn code(self) -> &'static str {
        match self {
            Branch::Cutie => "C",
            Branch::Sam2 => "S",
            Branch::FusedNoMpm => "M-",
            Branch::FusedMpm => "M+",
        }
    }

    /// Long name used in parameter keys and directory names.
    pub fn name(self) -> &'static str {
        match self {
            Branch::Cutie => "cutie",
            Branch::Sam2 => "sam2",
            Branch::FusedNoMpm => "fused_no_mpm",
            Branch::FusedMpm => "fused_mpm",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Branch::ALL
            .into_iter()
            .find(|b| b.code().eq_ignore_ascii_case(s) || b.name() == s)
            .ok_or_else(|| Error::invalid("branch", format!("unknown branch `{s}` (expected C, S, M- or M+)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BranchParams {
    pub w_fg: f64,
    pub w_bg: f64,
    pub bias: f64,
    /// Pre-softplus temperature.
    pub temp_raw: f64,
}

impl Default for BranchParams {
    fn default() -> Self {
        BranchParams {
            w_fg: 1.0,
            w_bg: 1.0,
            bias: 0.0,
            temp_raw: 1.2,
        }
    }
}

impl BranchParams {
    pub fn temperature(&self) -> f64 {
        softplus_temperature(self.temp_raw)
    }

    fn weight(&self, channel: usize) -> f64 {
        if channel == 0 {
            self.w_bg
        } else {
            self.w_fg
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FusionParams {
    pub branches: [BranchParams; BRANCH_COUNT],
}

impl FusionParams {
    pub fn branch(&self, b: Branch) -> &BranchParams {
        &self.branches[b.index()]
    }

    pub fn branch_mut(&mut self, b: Branch) -> &mut BranchParams {
        &mut self.branches[b.index()]
    }

    /// Branch-major `[w_fg, w_bg, bias, temp_raw]` blocks.
    pub fn to_vec(&self) -> Vec<f64> {
        self.branches
            .iter()
            .flat_map(|b| [b.w_fg, b.w_bg, b.bias, b.temp_raw])
            .collect()
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.len() != PARAM_COUNT {
            return Err(Error::mismatch("fusion parameter vector", PARAM_COUNT, v.len()));
        }
        let mut params = FusionParams::default();
        for (b, chunk) in params.branches.iter_mut().zip(v.chunks_exact(PARAMS_PER_BRANCH)) {
            *b = BranchParams {
                w_fg: chunk[0],
                w_bg: chunk[1],
                bias: chunk[2],
                temp_raw: chunk[3],
            };
        }
        Ok(params)
    }

    /// The 16 scalars as `("<branch>.<field>", value)` pairs, in vector order.
    pub fn named_scalars(&self) -> Vec<(String, f64)> {
        const FIELDS: [&str; PARAMS_PER_BRANCH] = ["w_fg", "w_bg", "bias", "temp_raw"];
        let values = self.to_vec();
        Branch::ALL
            .iter()
            .flat_map(|b| FIELDS.iter().map(move |f| format!("{}.{f}", b.name())))
            .zip(values)
            .collect()
    }

    pub fn from_named_scalars<'a>(
        pairs: impl IntoIterator<Item = (&'a str, f64)>,
    ) -> Result<Self> {
        let names: Vec<String> = FusionParams::default()
            .named_scalars()
            .into_iter()
            .map(|(n, _)| n)
            .collect();
        let mut values = [None; PARAM_COUNT];
        for (key, value) in pairs {
            let idx = names.iter().position(|n| n == key).ok_or_else(|| {
                Error::Data(format!("unknown fusion parameter `{key}`"))
            })?;
            if !value.is_finite() {
                return Err(Error::NonFinite(format!("fusion parameter `{key}`")));
            }
            values[idx] = Some(value);
        }
        let missing: Vec<&str> = names
            .iter()
            .zip(&values)
            .filter(|(_, v)| v.is_none())
            .map(|(n, _)| n.as_str())
            .collect();
        if !missing.is_empty() {
            return Err(Error::Data(format!(
                "missing fusion parameters: {}",
                missing.join(", ")
            )));
        }
        FusionParams::from_slice(&values.map(|v| v.unwrap_or_default()))
    }

    pub fn temperatures(&self) -> [f64; BRANCH_COUNT] {
        self.branches.map(|b| b.temperature())
    }
}

/// Four aligned branch outputs of identical shape.
#[derive(Clone, Debug, PartialEq)]
pub struct LogitStack {
    maps: [LogitMap; BRANCH_COUNT],
}

impl LogitStack {
    pub fn new(maps: [LogitMap; BRANCH_COUNT]) -> Result<Self> {
        for (b, m) in Branch::ALL.iter().zip(&maps).skip(1) {
            if !m.same_shape(&maps[0]) {
                return Err(Error::mismatch(
                    "branch logit shape",
                    format!("{} channels at {}", maps[0].channels(), maps[0].size()),
                    format!("{} channels at {} for branch {b}", m.channels(), m.size()),
                ));
            }
        }
        for m in &maps {
            m.check_finite()?;
        }
        Ok(LogitStack { maps })
    }

    pub fn get(&self, b: Branch) -> &LogitMap {
        &self.maps[b.index()]
    }

    pub fn maps(&self) -> &[LogitMap; BRANCH_COUNT] {
        &self.maps
    }

    pub fn channels(&self) -> usize {
        self.maps[0].channels()
    }

    pub fn size(&self) -> FrameSize {
        self.maps[0].size()
    }
}

/// Builds an `(N+1)`-channel map from object-only logits by synthesizing
/// background as `-max` over the object channels at each pixel.
pub fn with_synthesized_background(
    objects: usize,
    size: FrameSize,
    foreground: &[f64],
) -> Result<LogitMap> {
    let plane = size.pixels();
    if objects == 0 || foreground.len() != objects * plane {
        return Err(Error::mismatch("foreground logits", objects * plane, foreground.len()));
    }
    let mut values = Vec::with_capacity((objects + 1) * plane);
    values.extend((0..plane).map(|p| {
        -(0..objects)
            .map(|c| foreground[c * plane + p])
            .fold(f64::NEG_INFINITY, f64::max)
    }));
    values.extend_from_slice(foreground);
    LogitMap::from_vec(objects + 1, size, values)
}

pub fn fuse(stack: &LogitStack, params: &FusionParams) -> Result<LogitMap> {
    let mut out = LogitMap::zeros(stack.channels(), stack.size())?;
    for (map, bp) in stack.maps.iter().zip(&params.branches) {
        let inv_t = 1.0 / bp.temperature();
        for c in 0..map.channels() {
            let w = bp.weight(c) * inv_t;
            for (f, &z) in out.channel_mut(c).iter_mut().zip(map.channel(c)) {
                *f += w * z + bp.bias;
            }
        }
    }
    out.check_finite()?;
    Ok(out)
}

/// Pixel-averaged cross-entropy of the fused logits.
pub fn fusion_loss(stack: &LogitStack, labels: &LabelGrid, params: &FusionParams) -> Result<f64> {
    crate::logits::cross_entropy_loss(&fuse(stack, params)?, labels)
}

/// Loss and its analytic gradient with respect to all 16 scalars, in
/// [`FusionParams::to_vec`] order.
pub fn fusion_loss_and_grad(
    stack: &LogitStack,
    labels: &LabelGrid,
    params: &FusionParams,
) -> Result<(f64, [f64; PARAM_COUNT])> {
    let fused = fuse(stack, params)?;
    let (loss, dfused) = softmax_cross_entropy(&fused, labels)?;
    let mut grad = [0.0; PARAM_COUNT];
    for (b, (map, bp)) in stack.maps.iter().zip(&params.branches).enumerate() {
        let t = bp.temperature();
        let (mut g_fg, mut g_bg, mut g_bias, mut g_t) = (0.0, 0.0, 0.0, 0.0);
        for c in 0..map.channels() {
            // sum over pixels of dL/dF * Z
            let mut gz = 0.0;
            let mut gsum = 0.0;
            for (&g, &z) in dfused.channel(c).iter().zip(map.channel(c)) {
                gz += g * z;
                gsum += g;
            }
            if c == 0 {
                g_bg += gz / t;
            } else {
                g_fg += gz / t;
            }
            g_bias += gsum;
            g_t -= bp.weight(c) * gz / (t * t);
        }
        let base = b * PARAMS_PER_BRANCH;
        grad[base] = g_fg;
        grad[base + 1] = g_bg;
        grad[base + 2] = g_bias;
        grad[base + 3] = g_t * softplus_temperature_grad(bp.temp_raw);
    }
    Ok((loss, grad))
}

#[derive(Clone, Debug, PartialEq)]
pub struct FusionSample {
    pub stack: LogitStack,
    pub labels: LabelGrid,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionTrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub warmup_steps: u64,
    pub max_grad_norm: f64,
    /// Passes over the dataset; one sample per step.
    pub epochs: u64,
    /// Overrides `epochs * dataset.len()` when set.
    pub steps: Option<u64>,
    /// Cosine horizon; defaults to the number of steps run.
    pub total_steps: Option<u64>,
    /// Starting value for every branch.
    pub init: BranchParams,
}

impl Default for FusionTrainConfig {
    fn default() -> Self {
        FusionTrainConfig {
            lr: 1e-5,
            weight_decay: 1e-4,
            warmup_steps: 200,
            max_grad_norm: 1.0,
            epochs: 8,
            steps: None,
            total_steps: None,
            init: BranchParams::default(),
        }
    }
}

impl FusionTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid("fusion.lr", "must be finite and non-negative"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::invalid("fusion.weight_decay", "must be non-negative"));
        }
        if !(self.max_grad_norm > 0.0) {
            return Err(Error::invalid("fusion.max_grad_norm", "must be positive"));
        }
        let i = &self.init;
        if ![i.w_fg, i.w_bg, i.bias, i.temp_raw].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("fusion.init", "values must be finite"));
        }
        Ok(())
    }

    pub fn initial_params(&self) -> FusionParams {
        FusionParams {
            branches: [self.init; BRANCH_COUNT],
        }
    }

    pub fn steps_for(&self, dataset_len: usize) -> u64 {
        self.steps.unwrap_or(self.epochs * dataset_len as u64)
    }

    pub fn schedule_for(&self, dataset_len: usize) -> Result<LrSchedule> {
        let steps = self.steps_for(dataset_len);
        let total = self.total_steps.unwrap_or(steps).max(self.warmup_steps);
        LrSchedule::new(self.lr, self.warmup_steps, total)
    }
}

/// One optimizer step's diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub sample: usize,
    pub lr: f64,
    pub loss: f64,
    pub grad_norm: f64,
    pub clipped_norm: f64,
    pub temperatures: [f64; BRANCH_COUNT],
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub params: FusionParams,
    pub trace: Vec<StepRecord>,
}

impl TrainOutcome {
    pub fn losses(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.loss).collect()
    }
}

/// Trains the fusion scalars with clipped AdamW under the warmup-cosine
/// schedule. Step `t` (1-based) uses sample `(t - 1) % len` and learning
/// rate `lr_at(t)`.
pub fn train_fusion(
    dataset: &[FusionSample],
    init: FusionParams,
    config: &FusionTrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Data("fusion training set is empty".into()));
    }
    let schedule = config.schedule_for(dataset.len())?;
    let steps = config.steps_for(dataset.len());
    let mut theta = init.to_vec();
    let mut optimizer = AdamW::new(PARAM_COUNT, config.lr, config.weight_decay);
    let mut trace = Vec::with_capacity(steps as usize);
    for step in 1..=steps {
        let sample_idx = ((step - 1) % dataset.len() as u64) as usize;
        let sample = &dataset[sample_idx];
        let params = FusionParams::from_slice(&theta)?;
        let (loss, mut grad) = fusion_loss_and_grad(&sample.stack, &sample.labels, &params)
            .map_err(|e| match e {
                Error::NonFinite(what) => Error::NonFinite(format!(
                    "{what} at step {step} (sample {sample_idx})"
                )),
                other => other,
            })?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!(
                "fusion loss at step {step} (sample {sample_idx})"
            )));
        }
        let grad_norm = clip_global_norm(&mut grad, config.max_grad_norm);
        let lr = schedule.lr_at(step);
        optimizer.step_with_lr(&mut theta, &grad, lr)?;
        trace.push(StepRecord {
            step,
            sample: sample_idx,
            lr,
            loss,
            grad_norm,
            clipped_norm: global_norm(&grad),
            temperatures: params.temperatures(),
        });
    }
    Ok(TrainOutcome {
        params: FusionParams::from_slice(&theta)?,
        trace,
    })
}
