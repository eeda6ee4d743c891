//! Motion-prediction spatial priors and four-branch logit fusion for video
//! object segmentation, with the metrics and scenario simulator used to
//! verify them.
//!
//! The crate is organized bottom-up:
//!
//! - [`mask`]: binary masks, normalized centroid and bounding-box extent.
//! - [`logits`]: per-class score grids, label grids, softmax cross-entropy.
//! - [`optim`]: AdamW, warmup-cosine schedule, clipping, clamped softplus.
//! - [`mpm`]: kinematic state, Gaussian priors, logit blending, adaptation.
//! - [`fusion`]: the four-branch scalar fusion and its trainer.
//! - [`metrics`]: Jaccard, boundary F, J&F.
//! - [`sim`]: scripted scenarios and synthetic branch logits.
//! - [`io`], [`config`]: file formats and run configuration.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod fusion;
pub mod io;
pub mod logits;
pub mod mask;
pub mod metrics;
pub mod mpm;
pub mod optim;
pub mod sim;

pub use error::{Error, ErrorKind, Result};
pub use fusion::{fuse, train_fusion, Branch, BranchParams, FusionParams, LogitStack};
pub use logits::{LabelGrid, LogitMap};
pub use mask::{BinaryMask, FrameSize, NormalizedExtent, NormalizedPoint};
pub use metrics::{boundary_f, evaluate_sequence, jaccard, MetricReport};
pub use mpm::{KinematicState, MpmConfig};
pub use sim::{BranchProfile, Scenario};
