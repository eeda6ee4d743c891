//! JSON documents written by `track`, `fuse-train` and `evaluate`.

use mpm_core::fusion::StepRecord;
use mpm_core::metrics::MetricReport;
use mpm_core::mpm::{FrameTrace, MpmParams};
use mpm_core::Branch;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceScore {
    pub sequence: String,
    pub tolerance: f64,
    #[serde(flatten)]
    pub report: MetricReport,
}

/// Scores averaged over sequences, with the per-sequence breakdown.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub j: f64,
    pub f: f64,
    pub jf: f64,
    pub sequences: Vec<SequenceScore>,
}

impl Evaluation {
    pub fn from_sequences(sequences: Vec<SequenceScore>) -> Self {
        let n = sequences.len().max(1) as f64;
        let j = sequences.iter().map(|s| s.report.j).sum::<f64>() / n;
        let f = sequences.iter().map(|s| s.report.f).sum::<f64>() / n;
        Evaluation { j, f, jf: (j + f) / 2.0, sequences }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchEvaluation {
    pub branch: Branch,
    #[serde(flatten)]
    pub evaluation: Evaluation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackReport {
    pub mpm: bool,
    pub branches: Vec<BranchEvaluation>,
}

/// Per-frame kinematic states for one tracked sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackTrace {
    pub sequence: String,
    pub branch: Branch,
    pub mpm: bool,
    /// Prior parameters after first-frame adaptation.
    pub params: MpmParams,
    pub adapt_losses: Vec<f64>,
    pub frames: Vec<FrameTrace>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    pub steps: Vec<StepRecord>,
}
