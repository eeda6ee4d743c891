//! Per-class score grids, label grids, and the pixel-averaged softmax
//! cross-entropy shared by the tracker's adaptation loop and the fusion trainer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{BinaryMask, FrameSize};

/// Real-valued `(N+1) x H x W` score grid, channel-major. Channel 0 is background.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogitMap {
    channels: usize,
    size: FrameSize,
    values: Vec<f64>,
}

impl LogitMap {
    pub fn zeros(channels: usize, size: FrameSize) -> Result<Self> {
        Self::from_vec(channels, size, vec![0.0; channels * size.pixels()])
    }

    pub fn from_vec(channels: usize, size: FrameSize, values: Vec<f64>) -> Result<Self> {
        if channels < 2 {
            return Err(Error::invalid(
                "channels",
                format!("need background plus at least one object, got {channels}"),
            ));
        }
        if values.len() != channels * size.pixels() {
            return Err(Error::mismatch(
                "logit values",
                channels * size.pixels(),
                values.len(),
            ));
        }
        let map = LogitMap {
            channels,
            size,
            values,
        };
        map.check_finite()?;
        Ok(map)
    }

    pub fn from_fn(
        channels: usize,
        size: FrameSize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(channels * size.pixels());
        for c in 0..channels {
            for row in 0..size.height() {
                for col in 0..size.width() {
                    values.push(f(c, col, row));
                }
            }
        }
        Self::from_vec(channels, size, values)
    }

    pub fn check_finite(&self) -> Result<()> {
        if let Some(idx) = self.values.iter().position(|v| !v.is_finite()) {
            let plane = self.size.pixels();
            let (c, p) = (idx / plane, idx % plane);
            return Err(Error::NonFinite(format!(
                "logit channel {c} at ({}, {})",
                p % self.size.width(),
                p / self.size.width()
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Number of foreground channels `N`.
    #[inline]
    pub fn objects(&self) -> usize {
        self.channels - 1
    }

    #[inline]
    pub fn size(&self) -> FrameSize {
        self.size
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, channel: usize, col: usize, row: usize) -> f64 {
        self.values[channel * self.size.pixels() + row * self.size.width() + col]
    }

    pub fn channel(&self, channel: usize) -> &[f64] {
        let plane = self.size.pixels();
        &self.values[channel * plane..(channel + 1) * plane]
    }

    pub fn channel_mut(&mut self, channel: usize) -> &mut [f64] {
        let plane = self.size.pixels();
        &mut self.values[channel * plane..(channel + 1) * plane]
    }

    pub fn same_shape(&self, other: &LogitMap) -> bool {
        self.channels == other.channels && self.size == other.size
    }

    /// Per-pixel winning channel. Ties go to the lower channel index.
    pub fn argmax(&self) -> LabelGrid {
        let plane = self.size.pixels();
        let labels = (0..plane)
            .map(|p| {
                let mut best = 0usize;
                let mut best_val = self.values[p];
                for c in 1..self.channels {
                    let v = self.values[c * plane + p];
                    if v > best_val {
                        best = c;
                        best_val = v;
                    }
                }
                best as u8
            })
            .collect();
        LabelGrid {
            size: self.size,
            objects: self.objects() as u8,
            labels,
        }
    }
}

/// Multi-object label raster: value 0 is background, `1..=objects` are object ids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelGrid {
    size: FrameSize,
    objects: u8,
    labels: Vec<u8>,
}

impl LabelGrid {
    pub fn background(size: FrameSize, objects: u8) -> Self {
        LabelGrid {
            size,
            objects,
            labels: vec![0; size.pixels()],
        }
    }

    pub fn from_vec(size: FrameSize, objects: u8, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != size.pixels() {
            return Err(Error::mismatch("label grid", size.pixels(), labels.len()));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > objects) {
            return Err(Error::Data(format!(
                "label {bad} exceeds object count {objects}"
            )));
        }
        Ok(LabelGrid {
            size,
            objects,
            labels,
        })
    }

    /// Paints masks in order, so later masks win where they overlap.
    /// Mask `i` receives label `i + 1`.
    pub fn from_masks(size: FrameSize, masks: &[BinaryMask]) -> Result<Self> {
        if masks.len() > u8::MAX as usize {
            return Err(Error::invalid("objects", "at most 255 objects per grid"));
        }
        let mut grid = LabelGrid::background(size, masks.len() as u8);
        for (i, mask) in masks.iter().enumerate() {
            if mask.size() != size {
                return Err(Error::mismatch("mask size", size, mask.size()));
            }
            for (dst, &bit) in grid.labels.iter_mut().zip(mask.bits()) {
                if bit {
                    *dst = (i + 1) as u8;
                }
            }
        }
        Ok(grid)
    }

    #[inline]
    pub fn size(&self) -> FrameSize {
        self.size
    }

    #[inline]
    pub fn objects(&self) -> u8 {
        self.objects
    }

    #[inline]
    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> u8 {
        self.labels[row * self.size.width() + col]
    }

    pub fn object_mask(&self, id: u8) -> BinaryMask {
        let bits = self.labels.iter().map(|&l| l == id).collect();
        BinaryMask::from_bits(self.size, bits).expect("grid and mask share a size")
    }

    pub fn object_masks(&self) -> Vec<BinaryMask> {
        (1..=self.objects).map(|id| self.object_mask(id)).collect()
    }
}

/// Pixel-averaged softmax cross-entropy and its gradient with respect to
/// every logit. The gradient is `(softmax - onehot) / pixels`.
pub fn softmax_cross_entropy(logits: &LogitMap, labels: &LabelGrid) -> Result<(f64, LogitMap)> {
    check_labels(logits, labels)?;
    let plane = logits.size.pixels();
    let channels = logits.channels;
    let inv = 1.0 / plane as f64;
    let mut grad = vec![0.0; logits.values.len()];
    let mut total = 0.0;
    let mut probs = vec![0.0; channels];
    for p in 0..plane {
        let max = (0..channels)
            .map(|c| logits.values[c * plane + p])
            .fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (c, prob) in probs.iter_mut().enumerate() {
            *prob = (logits.values[c * plane + p] - max).exp();
            sum += *prob;
        }
        let target = labels.labels[p] as usize;
        total += max + sum.ln() - logits.values[target * plane + p];
        for (c, prob) in probs.iter().enumerate() {
            let onehot = if c == target { 1.0 } else { 0.0 };
            grad[c * plane + p] = (prob / sum - onehot) * inv;
        }
    }
    let loss = total * inv;
    if !loss.is_finite() {
        return Err(Error::NonFinite("cross-entropy loss".into()));
    }
    Ok((
        loss,
        LogitMap {
            channels,
            size: logits.size,
            values: grad,
        },
    ))
}

/// Loss only; same value as [`softmax_cross_entropy`].
pub fn cross_entropy_loss(logits: &LogitMap, labels: &LabelGrid) -> Result<f64> {
    check_labels(logits, labels)?;
    let plane = logits.size.pixels();
    let mut total = 0.0;
    for p in 0..plane {
        let max = (0..logits.channels)
            .map(|c| logits.values[c * plane + p])
            .fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = (0..logits.channels)
            .map(|c| (logits.values[c * plane + p] - max).exp())
            .sum();
        total += max + sum.ln() - logits.values[labels.labels[p] as usize * plane + p];
    }
    Ok(total / plane as f64)
}

fn check_labels(logits: &LogitMap, labels: &LabelGrid) -> Result<()> {
    if logits.size != labels.size {
        return Err(Error::mismatch("label grid size", logits.size, labels.size));
    }
    if labels.objects as usize + 1 > logits.channels {
        return Err(Error::mismatch(
            "label classes",
            format!("at most {} objects", logits.channels - 1),
            labels.objects,
        ));
    }
    Ok(())
}
