use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mpm_core::config::RunConfig;
use mpm_core::io::{decode_fusion_params, encode_label_sequence, read_label_sequence};
use mpm_core::sim::fixtures;
use mpm_core::{Branch, FrameSize, FusionParams, LabelGrid};
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn mpm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpm")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = mpm(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn fails_with(args: &[&str], code: i32) -> String {
    let out = mpm(args);
    assert_eq!(out.status.code(), Some(code), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, edit: impl FnOnce(&mut RunConfig)) -> PathBuf {
    let text = fs::read_to_string(fixture("two_objects.json")).unwrap();
    let mut config = RunConfig::from_json(&text).unwrap();
    edit(&mut config);
    let path = dir.join(name);
    fs::write(&path, config.to_json().unwrap()).unwrap();
    path
}

fn simulate(fixture_name: &str, out: &Path) {
    ok(&["simulate", "--config", p(&fixture(fixture_name)), "--out", p(out)]);
}

#[test]
fn fixture_files_match_library_scenarios() {
    let cases = [
        ("two_objects.json", fixtures::noiseless_two_objects()),
        ("occlusion.json", fixtures::constant_velocity_occlusion()),
        ("crossing.json", fixtures::crossing_distractors(fixtures::CROSSING_SEED)),
        ("oracle.json", fixtures::oracle_branch(Branch::FusedMpm, 0)),
    ];
    for (file, scenario) in cases {
        let config = RunConfig::from_json(&fs::read_to_string(fixture(file)).unwrap()).unwrap();
        assert_eq!(config.scenario.as_ref(), Some(&scenario), "{file}");
    }
}

#[test]
fn defaults_print_training_protocol() {
    let out = ok(&["defaults"]);
    let config = RunConfig::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(config, RunConfig::default());
}

#[test]
fn simulate_writes_labels_and_logits() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    simulate("two_objects.json", &data);
    let gt = read_label_sequence(&data.join("gt/two_objects.lbl")).unwrap();
    assert_eq!(gt.len(), 30);
    for b in Branch::ALL {
        let frames = fs::read_dir(data.join("logits").join(b.name()).join("two_objects")).unwrap().count();
        assert_eq!(frames, 30);
    }
    let manifest = json(&data.join("manifest.json"));
    assert_eq!(manifest["entries"].as_array().unwrap().len(), 1 + 4 * 30 + 1);
}

#[test]
fn simulate_honours_branch_subset_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    let cfg = fixture("crossing.json");
    ok(&["simulate", "--config", p(&cfg), "--out", p(&a), "--branches", "S", "--seed", "1"]);
    ok(&["simulate", "--config", p(&cfg), "--out", p(&b), "--branches", "sam2", "--seed", "1"]);
    ok(&["simulate", "--config", p(&cfg), "--out", p(&c), "--branches", "S", "--seed", "2"]);
    assert!(!a.join("logits/cutie").exists());
    let read = |d: &Path| fs::read(d.join("manifest.json")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn invalid_configs_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let zero = write_config(dir.path(), "zero.json", |c| c.scenario.as_mut().unwrap().frames = 0);
    let msg = fails_with(&["simulate", "--config", p(&zero), "--out", p(&dir.path().join("o"))], 2);
    assert!(msg.contains("scenario.frames"), "{msg}");

    let broken = dir.path().join("broken.json");
    fs::write(&broken, "{\n  \"mpm\": {\n    \"alpha\": 0.9,,\n  }\n}\n").unwrap();
    let msg = fails_with(&["track", "--config", p(&broken), "--data", "x", "--out", "y"], 2);
    assert!(msg.contains("line 3"), "{msg}");

    let msg = fails_with(&["simulate", "--config", p(&dir.path().join("missing.json")), "--out", "o"], 2);
    assert!(msg.contains("missing.json"), "{msg}");

    fails_with(&["track", "--data", "x", "--out", "y", "--mpm", "maybe"], 2);
    fails_with(&["track", "--data", "x", "--out", "y", "--branches", "Q"], 2);
}

#[test]
fn noiseless_pipeline_scores_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    simulate("two_objects.json", &data);
    for toggle in ["off", "on"] {
        let out = dir.path().join(toggle);
        ok(&["track", "--data", p(&data), "--out", p(&out), "--mpm", toggle]);
        let report = json(&out.join("report.json"));
        assert_eq!(report["mpm"], Value::Bool(toggle == "on"));
        assert_eq!(report["branches"][0]["branch"], "M-");
        assert_eq!(report["branches"][0]["jf"], 1.0);
        let trace = json(&out.join("fused_no_mpm/trace/two_objects.json"));
        assert_eq!(trace["frames"].as_array().unwrap().len(), 30);

        let eval = dir.path().join(format!("eval_{toggle}"));
        ok(&["evaluate", "--pred", p(&out.join("fused_no_mpm/pred")), "--gt", p(&data.join("gt")), "--out", p(&eval)]);
        assert_eq!(json(&eval.join("report.json"))["jf"], 1.0);
    }
}

#[test]
fn prior_does_not_hurt_on_occlusion_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    simulate("occlusion.json", &data);
    let mut j = Vec::new();
    for toggle in ["on", "off"] {
        let out = dir.path().join(toggle);
        ok(&["track", "--data", p(&data), "--out", p(&out), "--mpm", toggle, "--branches", "M+", "--tolerance", "1"]);
        j.push(json(&out.join("report.json"))["branches"][0]["j"].as_f64().unwrap());
    }
    assert!(j[0] >= j[1], "{j:?}");
}

#[test]
fn malformed_label_header_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    simulate("two_objects.json", &data);
    let gt = data.join("gt/two_objects.lbl");
    let mut bytes = fs::read(&gt).unwrap();
    bytes[6..10].copy_from_slice(&0u32.to_le_bytes());
    fs::write(&gt, bytes).unwrap();
    let msg = fails_with(&["track", "--data", p(&data), "--out", p(&dir.path().join("o"))], 3);
    assert!(msg.contains("width"), "{msg}");
}

#[test]
fn missing_logit_frames_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    simulate("two_objects.json", &data);
    fs::remove_file(data.join("logits/fused_no_mpm/two_objects/frame_00007.lgt")).unwrap();
    let msg = fails_with(&["track", "--data", p(&data), "--out", p(&dir.path().join("o"))], 3);
    assert!(msg.contains("frame 7"), "{msg}");
}

#[test]
fn zero_lr_training_keeps_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    simulate("two_objects.json", &data);
    let cfg = write_config(dir.path(), "cfg.json", |c| {
        c.fusion.lr = 0.0;
        c.fusion.steps = Some(40);
    });
    let out = dir.path().join("fuse");
    ok(&["fuse-train", "--config", p(&cfg), "--data", p(&data), "--out", p(&out)]);
    let params = decode_fusion_params(&fs::read_to_string(out.join("params.json")).unwrap()).unwrap();
    assert_eq!(params, FusionParams::default());
    assert_eq!(json(&out.join("loss_trace.json"))["steps"].as_array().unwrap().len(), 40);
}

#[test]
fn oracle_branch_weights_are_largest_in_output() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    simulate("oracle.json", &data);
    let out = dir.path().join("fuse");
    ok(&["fuse-train", "--config", p(&fixture("oracle.json")), "--data", p(&data), "--out", p(&out)]);
    let params = json(&out.join("params.json"));
    for key in ["w_fg", "w_bg"] {
        let best = params[format!("fused_mpm.{key}")].as_f64().unwrap();
        for other in ["cutie", "sam2", "fused_no_mpm"] {
            assert!(best > params[format!("{other}.{key}")].as_f64().unwrap());
        }
    }
}

#[test]
fn resume_with_no_steps_round_trips_params() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    simulate("oracle.json", &data);
    let first = dir.path().join("first");
    let cfg = write_config(dir.path(), "short.json", |c| {
        c.fusion.lr = 0.01;
        c.fusion.steps = Some(30);
    });
    ok(&["fuse-train", "--config", p(&cfg), "--data", p(&data), "--out", p(&first)]);
    let zero = write_config(dir.path(), "zero.json", |c| c.fusion.steps = Some(0));
    let second = dir.path().join("second");
    let saved = first.join("params.json");
    ok(&["fuse-train", "--config", p(&zero), "--data", p(&data), "--out", p(&second), "--resume", p(&saved)]);
    assert_eq!(fs::read(saved).unwrap(), fs::read(second.join("params.json")).unwrap());
}

#[test]
fn diverging_training_exits_with_code_4() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    simulate("two_objects.json", &data);
    let cfg = write_config(dir.path(), "huge.json", |c| c.fusion.init.w_fg = 1e308);
    let msg = fails_with(&["fuse-train", "--config", p(&cfg), "--data", p(&data), "--out", p(&dir.path().join("o"))], 4);
    assert!(msg.contains("step 1"), "{msg}");
}

#[test]
fn evaluate_scores_hand_built_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let sz = FrameSize::new(3, 1).unwrap();
    let write = |name: &str, labels: Vec<u8>, objects: u8| {
        let path = dir.path().join(name);
        fs::write(&path, encode_label_sequence(&[LabelGrid::from_vec(sz, objects, labels).unwrap()]).unwrap()).unwrap();
        path
    };
    let gt = write("gt.lbl", vec![1, 1, 0], 1);
    let third = write("third.lbl", vec![0, 1, 1], 1);
    let empty = write("empty.lbl", vec![0, 0, 0], 1);
    let two = write("two.lbl", vec![0, 1, 2], 2);

    let eval = |pred: &Path| {
        let out = dir.path().join("eval");
        ok(&["evaluate", "--pred", p(pred), "--gt", p(&gt), "--out", p(&out), "--tolerance", "0"]);
        json(&out.join("report.json"))
    };
    assert_eq!(eval(&gt)["jf"], 1.0);
    assert_eq!(eval(&empty)["jf"], 0.0);
    let r = eval(&third);
    assert_eq!(r["j"].as_f64().unwrap(), 1.0 / 3.0);
    // boundary pixels: both masks are all-boundary; one of two matches each way
    assert_eq!(r["f"].as_f64().unwrap(), 0.5);

    let msg = fails_with(&["evaluate", "--pred", p(&two), "--gt", p(&gt), "--out", p(&dir.path().join("x"))], 3);
    assert!(msg.contains("1..=2") && msg.contains("1..=1"), "{msg}");
}

#[test]
fn evaluate_requires_every_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let (gt, pred) = (dir.path().join("gt"), dir.path().join("pred"));
    fs::create_dir_all(&gt).unwrap();
    fs::create_dir_all(&pred).unwrap();
    let grid = encode_label_sequence(&[LabelGrid::background(FrameSize::new(2, 2).unwrap(), 1)]).unwrap();
    for name in ["a", "b"] {
        fs::write(gt.join(format!("{name}.lbl")), &grid).unwrap();
    }
    fs::write(pred.join("a.lbl"), &grid).unwrap();
    let msg = fails_with(&["evaluate", "--pred", p(&pred), "--gt", p(&gt), "--out", p(&dir.path().join("o"))], 3);
    assert!(msg.contains("b"), "{msg}");
}
