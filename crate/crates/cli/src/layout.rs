//! Directory layout shared by the commands.
//!
//! ```text
//! <data>/scenario.json
//! <data>/gt/<sequence>.lbl
//! <data>/logits/<branch>/<sequence>/frame_00000.lgt
//! <data>/manifest.json
//! ```
//!
//! Branch directories use the long branch names (`cutie`, `sam2`,
//! `fused_no_mpm`, `fused_mpm`).

use std::fs;
use std::path::{Path, PathBuf};

use mpm_core::io::{read_label_sequence, read_logits};
use mpm_core::{Branch, Error, LabelGrid, LogitMap, Result};

pub fn gt_file(sequence: &str) -> String {
    format!("gt/{sequence}.lbl")
}

pub fn logit_file(branch: Branch, sequence: &str, frame: usize) -> String {
    format!("logits/{}/{sequence}/frame_{frame:05}.lgt", branch.name())
}

/// Sequence names must be usable as file names on every platform.
pub fn check_sequence_name(name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "scenario name `{name}` may only contain letters, digits, `_` and `-`"
        )))
    }
}

/// Sorted `.lbl` stems of a directory.
pub fn label_files(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|e| Error::Io { path: dir.display().to_string(), source: e })?
            .path();
        if path.extension().is_some_and(|e| e == "lbl") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.push((stem.to_string(), path.clone()));
            }
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(Error::Data(format!("no .lbl files in {}", dir.display())));
    }
    Ok(out)
}

/// A data directory as written by `simulate`.
pub struct DataDir {
    root: PathBuf,
}

impl DataDir {
    pub fn new(root: &Path) -> Self {
        DataDir { root: root.to_path_buf() }
    }

    pub fn sequences(&self) -> Result<Vec<String>> {
        Ok(label_files(&self.root.join("gt"))?.into_iter().map(|(n, _)| n).collect())
    }

    pub fn ground_truth(&self, sequence: &str) -> Result<Vec<LabelGrid>> {
        let frames = read_label_sequence(&self.root.join(gt_file(sequence)))?;
        if frames.is_empty() {
            return Err(Error::Data(format!("sequence {sequence} has no frames")));
        }
        Ok(frames)
    }

    /// All frames of one branch, checked against the ground-truth shape.
    pub fn logits(&self, branch: Branch, sequence: &str, gt: &[LabelGrid]) -> Result<Vec<LogitMap>> {
        gt.iter()
            .enumerate()
            .map(|(t, labels)| {
                let path = self.root.join(logit_file(branch, sequence, t));
                if !path.exists() {
                    return Err(Error::Data(format!(
                        "missing frame {t} of branch {branch} for sequence {sequence}: {}",
                        path.display()
                    )));
                }
                let map = read_logits(&path)?;
                if map.size() != labels.size() || map.objects() != labels.objects() as usize {
                    return Err(Error::Data(format!(
                        "{}: logits are {} with {} objects, ground truth is {} with {} objects",
                        path.display(),
                        map.size(),
                        map.objects(),
                        labels.size(),
                        labels.objects()
                    )));
                }
                Ok(map)
            })
            .collect()
    }
}
