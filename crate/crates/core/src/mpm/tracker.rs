use serde::{Deserialize, Serialize};

use super::adapt::{AdaptConfig, MpmAdapter, MpmParams};
use super::prior::{blend_logits, gaussian_prior_at, PriorGeometry};
use super::{KinematicState, MpmConfig};
use crate::error::{Error, Result};
use crate::logits::{LabelGrid, LogitMap};
use crate::mask::NormalizedPoint;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackerSettings {
    pub mpm: MpmConfig,
    /// Blend the prior into the logits. States are tracked either way.
    pub use_prior: bool,
    /// Adapt `(beta, s_x, s_y)` on the annotated first frame.
    pub adapt: Option<AdaptConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectTrace {
    pub id: u8,
    /// Center of the prior used for this frame.
    pub predicted: NormalizedPoint,
    /// State after folding in this frame's mask.
    pub state: KinematicState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameTrace {
    pub frame: usize,
    pub objects: Vec<ObjectTrace>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackOutput {
    /// Predicted labels per frame; frame 0 is the annotation itself.
    pub predictions: Vec<LabelGrid>,
    pub trace: Vec<FrameTrace>,
    pub params: MpmParams,
    pub adapt_losses: Vec<f64>,
}

/// Runs the per-frame loop over a sequence of raw logits.
///
/// Frame 0 is the annotated frame: states are initialized from `first_labels`
/// and, when enabled, the prior parameters adapt against it. Every later frame
/// builds one prior per object at its constant-velocity prediction, blends,
/// takes the argmax, and observes each object's predicted mask.
pub fn track_sequence(
    first_labels: &LabelGrid,
    logits: &[LogitMap],
    settings: &TrackerSettings,
) -> Result<TrackOutput> {
    settings.mpm.validate()?;
    if let Some(adapt) = &settings.adapt {
        adapt.validate()?;
    }
    let objects = first_labels.objects();
    for (t, frame) in logits.iter().enumerate() {
        if frame.size() != first_labels.size() {
            return Err(Error::mismatch("logit frame size", first_labels.size(), frame.size()));
        }
        if frame.objects() != objects as usize {
            return Err(Error::Data(format!(
                "frame {t}: logits have {} object channels, annotation has {objects} objects",
                frame.objects()
            )));
        }
    }

    let mut states = (1..=objects)
        .map(|id| {
            KinematicState::init(&first_labels.object_mask(id)).map_err(|_| {
                Error::EmptyMask(format!("object {id} is absent from the first annotated frame"))
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut params = MpmParams::from_config(&settings.mpm);
    let mut adapt_losses = Vec::new();
    if let (true, Some(adapt), Some(first)) = (settings.use_prior, settings.adapt, logits.first()) {
        let geometries: Vec<_> = states
            .iter()
            .map(|s| PriorGeometry {
                center: s.position,
                extent: s.extent,
            })
            .collect();
        let mut adapter = MpmAdapter::new(params, adapt);
        adapt_losses = adapter.adapt_frame(first, &geometries, first_labels, settings.mpm.epsilon)?;
        params = adapter.params();
    }

    let mut predictions = Vec::with_capacity(logits.len());
    let mut trace = Vec::with_capacity(logits.len());
    if !logits.is_empty() {
        predictions.push(first_labels.clone());
        trace.push(FrameTrace {
            frame: 0,
            objects: states
                .iter()
                .enumerate()
                .map(|(i, s)| ObjectTrace {
                    id: (i + 1) as u8,
                    predicted: s.position,
                    state: *s,
                })
                .collect(),
        });
    }

    for (t, raw) in logits.iter().enumerate().skip(1) {
        let geometries: Vec<_> = states
            .iter()
            .map(|s| PriorGeometry {
                center: s.predicted_position(),
                extent: s.extent,
            })
            .collect();
        let labels = if settings.use_prior {
            let priors: Vec<_> = geometries
                .iter()
                .map(|g| gaussian_prior_at(g, raw.size(), params.sigma_scale))
                .collect();
            blend_logits(raw, &priors, params.beta, settings.mpm.epsilon)?.argmax()
        } else {
            raw.argmax()
        };
        let mut objects_trace = Vec::with_capacity(states.len());
        for (i, state) in states.iter_mut().enumerate() {
            let id = (i + 1) as u8;
            let mask = labels.object_mask(id);
            *state = state.observe(Some(&mask), &settings.mpm)?;
            objects_trace.push(ObjectTrace {
                id,
                predicted: geometries[i].center,
                state: *state,
            });
        }
        predictions.push(labels);
        trace.push(FrameTrace {
            frame: t,
            objects: objects_trace,
        });
    }

    Ok(TrackOutput {
        predictions,
        trace,
        params,
        adapt_losses,
    })
}
