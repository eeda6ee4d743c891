//! Canned scenarios used by the tests, the acceptance harness and the sample
//! configs shipped with the CLI.

use crate::error::Result;
use crate::fusion::{Branch, FusionSample};
use crate::mask::FrameSize;

use super::{BranchProfile, ObjectScript, Scenario, Shape, Waypoint};

/// Frame at which the occluded object of [`constant_velocity_occlusion`]
/// becomes visible again.
pub const OCCLUSION_REAPPEAR_FRAME: usize = 25;

/// Pixels per frame travelled by the object in [`constant_velocity_occlusion`].
pub const OCCLUSION_SPEED_PX: f64 = 0.05;

pub const CROSSING_SEED: u64 = 11;

fn clean_profiles() -> Vec<BranchProfile> {
    Branch::ALL.iter().map(|&b| BranchProfile::clean(b)).collect()
}

/// One ellipse moving right at constant speed, hidden for frames 20..25.
/// Noise-free logits on every branch.
pub fn constant_velocity_occlusion() -> Scenario {
    let size = FrameSize::new(64, 64).expect("non-zero size");
    let frames = 40;
    let x0 = 0.3;
    let x1 = x0 + OCCLUSION_SPEED_PX * (frames - 1) as f64 / size.width() as f64;
    Scenario {
        name: "occlusion".into(),
        size,
        frames,
        objects: vec![ObjectScript {
            id: 1,
            shape: Shape::Ellipse { width: 12.0, height: 12.0 },
            waypoints: vec![
                Waypoint { frame: 0, x: x0, y: 0.5 },
                Waypoint { frame: frames - 1, x: x1, y: 0.5 },
            ],
            occlusions: vec![[20, OCCLUSION_REAPPEAR_FRAME]],
        }],
        branches: clean_profiles(),
        seed: 0,
    }
}

/// Two identical ellipses on crossing diagonal paths. Every branch adds a
/// strong distractor response on the other object and unit Gaussian noise.
pub fn crossing_distractors(seed: u64) -> Scenario {
    let ellipse = Shape::Ellipse { width: 10.0, height: 10.0 };
    let path = |x0: f64, x1: f64| {
        vec![
            Waypoint { frame: 0, x: x0, y: 0.4 },
            Waypoint { frame: 39, x: x1, y: 0.6 },
        ]
    };
    Scenario {
        name: "crossing".into(),
        size: FrameSize::new(64, 64).expect("non-zero size"),
        frames: 40,
        objects: vec![
            ObjectScript { id: 1, shape: ellipse, waypoints: path(0.15, 0.85), occlusions: vec![] },
            ObjectScript { id: 2, shape: ellipse, waypoints: path(0.85, 0.15), occlusions: vec![] },
        ],
        branches: Branch::ALL
            .iter()
            .map(|&branch| BranchProfile {
                branch,
                noise_std: 1.0,
                dropout_prob: 0.0,
                distractor_gain: 6.0,
            })
            .collect(),
        seed,
    }
}

/// Two objects, 30 frames, no occlusion and no noise.
pub fn noiseless_two_objects() -> Scenario {
    Scenario {
        name: "two_objects".into(),
        size: FrameSize::new(48, 32).expect("non-zero size"),
        frames: 30,
        objects: vec![
            ObjectScript {
                id: 1,
                shape: Shape::Rectangle { width: 8.0, height: 6.0 },
                waypoints: vec![
                    Waypoint { frame: 0, x: 0.2, y: 0.3 },
                    Waypoint { frame: 29, x: 0.5, y: 0.35 },
                ],
                occlusions: vec![],
            },
            ObjectScript {
                id: 2,
                shape: Shape::Ellipse { width: 9.0, height: 7.0 },
                waypoints: vec![
                    Waypoint { frame: 0, x: 0.8, y: 0.75 },
                    Waypoint { frame: 15, x: 0.7, y: 0.65 },
                    Waypoint { frame: 29, x: 0.75, y: 0.7 },
                ],
                occlusions: vec![],
            },
        ],
        branches: clean_profiles(),
        seed: 0,
    }
}

/// `perfect` gets noise-free logits; the other branches are swamped by noise
/// well above the logit margin.
pub fn oracle_branch(perfect: Branch, seed: u64) -> Scenario {
    let mut scenario = noiseless_two_objects();
    scenario.name = format!("oracle_{}", perfect.name());
    scenario.size = FrameSize::new(24, 16).expect("non-zero size");
    scenario.frames = 12;
    scenario.seed = seed;
    scenario.branches = Branch::ALL
        .iter()
        .map(|&branch| {
            if branch == perfect {
                BranchProfile::clean(branch)
            } else {
                BranchProfile { branch, noise_std: 8.0, dropout_prob: 0.0, distractor_gain: 0.0 }
            }
        })
        .collect();
    scenario
}

/// Every frame of `scenario` as a fusion training sample.
pub fn fusion_dataset(scenario: &Scenario) -> Result<Vec<FusionSample>> {
    scenario.validate()?;
    (0..scenario.frames)
        .map(|t| {
            Ok(FusionSample {
                stack: scenario.logit_stack(t)?,
                labels: scenario.render_gt(t)?.labels,
            })
        })
        .collect()
}
