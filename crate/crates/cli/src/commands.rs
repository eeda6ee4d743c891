use std::fs;
use std::path::Path;

use log::info;
use mpm_core::config::RunConfig;
use mpm_core::fusion::{train_fusion, FusionSample, LogitStack};
use mpm_core::io::{
    decode_fusion_params, encode_fusion_params, encode_label_sequence, encode_logits,
    read_label_sequence, Manifest,
};
use mpm_core::metrics::{default_tolerance, evaluate_sequence};
use mpm_core::mpm::{track_sequence, TrackerSettings};
use mpm_core::sim::fixtures;
use mpm_core::{Branch, Error, LabelGrid, Result};
use serde::Serialize;

use crate::layout::{check_sequence_name, gt_file, label_files, logit_file, DataDir};
use crate::report::{
    BranchEvaluation, Evaluation, LossTrace, SequenceScore, TrackReport, TrackTrace,
};
use crate::{
    Cli, Command, DefaultsArgs, EvaluateArgs, FuseTrainArgs, SampleScenario, SimulateArgs,
    Toggle, TrackArgs,
};

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Defaults(args) => defaults(args),
        Command::Simulate(args) => simulate(args),
        Command::Track(args) => track(args),
        Command::FuseTrain(args) => fuse_train(args),
        Command::Evaluate(args) => evaluate(args),
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    RunConfig::from_json(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    Ok((serde_json::to_string_pretty(value)? + "\n").into_bytes())
}

fn check_tolerance(tolerance: Option<f64>) -> Result<()> {
    match tolerance {
        Some(t) if !(t >= 0.0 && t.is_finite()) => {
            Err(Error::Config(format!("--tolerance must be a non-negative number, got {t}")))
        }
        _ => Ok(()),
    }
}

fn defaults(args: &DefaultsArgs) -> Result<()> {
    let scenario = args.scenario.map(|s| match s {
        SampleScenario::TwoObjects => fixtures::noiseless_two_objects(),
        SampleScenario::Occlusion => fixtures::constant_velocity_occlusion(),
        SampleScenario::Crossing => fixtures::crossing_distractors(fixtures::CROSSING_SEED),
        SampleScenario::Oracle => fixtures::oracle_branch(Branch::FusedMpm, 0),
    });
    let config = RunConfig { scenario, ..RunConfig::default() };
    print!("{}", config.to_json()?);
    Ok(())
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let config = load_config(Some(&args.config))?;
    let mut scenario = config.scenario()?.clone();
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    check_sequence_name(&scenario.name)?;
    let branches = if args.branches.is_empty() { Branch::ALL.to_vec() } else { args.branches.clone() };
    let profiles = branches
        .iter()
        .map(|&b| scenario.profile(b).copied())
        .collect::<Result<Vec<_>>>()?;

    let out = &args.out;
    let mut manifest = Manifest::new("simulate");
    let gt = scenario.ground_truth()?;
    manifest.write(out, &gt_file(&scenario.name), &encode_label_sequence(&gt)?)?;
    for profile in &profiles {
        for t in 0..scenario.frames {
            let map = scenario.branch_logits(t, profile)?;
            manifest.write(out, &logit_file(profile.branch, &scenario.name, t), &encode_logits(&map))?;
        }
    }
    manifest.write(out, "scenario.json", &to_json(&scenario)?)?;
    manifest.finish(out)?;
    info!(
        "simulated {} frames x {} branches of `{}` into {}",
        scenario.frames,
        profiles.len(),
        scenario.name,
        out.display()
    );
    Ok(())
}

fn track(args: &TrackArgs) -> Result<()> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(toggle) = args.mpm {
        config.track.mpm = toggle == Toggle::On;
    }
    check_tolerance(args.tolerance)?;
    let tolerance = args.tolerance.or(config.track.tolerance);
    let branches = if args.branches.is_empty() { vec![config.track.branch] } else { args.branches.clone() };
    let settings = TrackerSettings {
        mpm: config.mpm,
        use_prior: config.track.mpm,
        adapt: config.adapt,
    };

    let data = DataDir::new(&args.data);
    let sequences = data.sequences()?;
    let out = &args.out;
    let mut manifest = Manifest::new("track");
    let mut evaluations = Vec::new();
    for &branch in &branches {
        let mut scores = Vec::new();
        for name in &sequences {
            let gt = data.ground_truth(name)?;
            let logits = data.logits(branch, name, &gt)?;
            let output = track_sequence(&gt[0], &logits, &settings)?;
            let tol = tolerance.unwrap_or_else(|| default_tolerance(gt[0].size()));
            let report = evaluate_sequence(&output.predictions, &gt, tol)?;
            info!("{branch} {name}: J {:.4} F {:.4} J&F {:.4}", report.j, report.f, report.jf);

            let dir = branch.name();
            manifest.write(out, &format!("{dir}/pred/{name}.lbl"), &encode_label_sequence(&output.predictions)?)?;
            let trace = TrackTrace {
                sequence: name.clone(),
                branch,
                mpm: settings.use_prior,
                params: output.params,
                adapt_losses: output.adapt_losses,
                frames: output.trace,
            };
            manifest.write(out, &format!("{dir}/trace/{name}.json"), &to_json(&trace)?)?;
            scores.push(SequenceScore { sequence: name.clone(), tolerance: tol, report });
        }
        evaluations.push(BranchEvaluation { branch, evaluation: Evaluation::from_sequences(scores) });
    }
    let report = TrackReport { mpm: settings.use_prior, branches: evaluations };
    manifest.write(out, "report.json", &to_json(&report)?)?;
    manifest.finish(out)?;
    Ok(())
}

fn fusion_dataset(data: &DataDir) -> Result<Vec<FusionSample>> {
    let mut samples = Vec::new();
    for name in data.sequences()? {
        let gt = data.ground_truth(&name)?;
        let mut per_branch = Branch::ALL
            .iter()
            .map(|&b| data.logits(b, &name, &gt).map(|v| v.into_iter()))
            .collect::<Result<Vec<_>>>()?;
        for labels in gt {
            let maps: [_; 4] = std::array::from_fn(|b| per_branch[b].next().expect("one map per frame"));
            samples.push(FusionSample { stack: LogitStack::new(maps)?, labels });
        }
    }
    Ok(samples)
}

fn fuse_train(args: &FuseTrainArgs) -> Result<()> {
    let config = load_config(args.config.as_deref())?;
    let init = match &args.resume {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            decode_fusion_params(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
        }
        None => config.fusion.initial_params(),
    };
    let dataset = fusion_dataset(&DataDir::new(&args.data))?;
    info!(
        "training fusion on {} samples for {} steps",
        dataset.len(),
        config.fusion.steps_for(dataset.len())
    );
    let outcome = train_fusion(&dataset, init, &config.fusion)?;
    if let Some(last) = outcome.trace.last() {
        info!("final loss {:.6} at step {}", last.loss, last.step);
    }

    let out = &args.out;
    let mut manifest = Manifest::new("fuse-train");
    manifest.write(out, "params.json", encode_fusion_params(&outcome.params).as_bytes())?;
    manifest.write(out, "loss_trace.json", &to_json(&LossTrace { steps: outcome.trace })?)?;
    manifest.finish(out)?;
    Ok(())
}

fn label_inputs(path: &Path) -> Result<Vec<(String, Vec<LabelGrid>)>> {
    let inputs: Vec<(String, Vec<LabelGrid>)> = if path.is_dir() {
        label_files(path)?
            .into_iter()
            .map(|(name, p)| Ok((name, read_label_sequence(&p)?)))
            .collect::<Result<_>>()?
    } else {
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("sequence")
            .to_string();
        vec![(name, read_label_sequence(path)?)]
    };
    if let Some((name, _)) = inputs.iter().find(|(_, frames)| frames.is_empty()) {
        return Err(Error::Data(format!("sequence {name} in {} has no frames", path.display())));
    }
    Ok(inputs)
}

fn evaluate(args: &EvaluateArgs) -> Result<()> {
    check_tolerance(args.tolerance)?;
    let gts = label_inputs(&args.gt)?;
    let preds = label_inputs(&args.pred)?;
    let single = !args.gt.is_dir() && !args.pred.is_dir();
    let missing: Vec<&str> = gts
        .iter()
        .filter(|(n, _)| !single && !preds.iter().any(|(p, _)| p == n))
        .map(|(n, _)| n.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Data(format!("no predictions for sequences: {}", missing.join(", "))));
    }
    let mut scores = Vec::new();
    for (i, (name, gt)) in gts.iter().enumerate() {
        let pred = if single { &preds[i].1 } else { &preds.iter().find(|(p, _)| p == name).expect("checked").1 };
        let tol = args.tolerance.unwrap_or_else(|| default_tolerance(gt[0].size()));
        let report = evaluate_sequence(pred, gt, tol).map_err(|e| match e {
            Error::Data(msg) => Error::Data(format!("sequence {name}: {msg}")),
            other => other,
        })?;
        scores.push(SequenceScore { sequence: name.clone(), tolerance: tol, report });
    }
    let evaluation = Evaluation::from_sequences(scores);
    info!("J {:.4} F {:.4} J&F {:.4}", evaluation.j, evaluation.f, evaluation.jf);
    let mut manifest = Manifest::new("evaluate");
    manifest.write(&args.out, "report.json", &to_json(&evaluation)?)?;
    manifest.finish(&args.out)?;
    Ok(())
}
