//! On-disk formats.
//!
//! All integers are little-endian.
//!
//! Label sequence (`.lbl`):
//!
//! ```text
//! magic   [u8; 4] = "MLBL"
//! version u16     = 1
//! width   u32
//! height  u32
//! frames  u32
//! objects u8
//! labels  [u8; frames * height * width]   row-major per frame
//! ```
//!
//! Logit frame (`.lgt`):
//!
//! ```text
//! magic    [u8; 4] = "MLGT"
//! version  u16     = 1
//! channels u32
//! width    u32
//! height   u32
//! values   [f32; channels * height * width]   channel-major, then row-major
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fusion::FusionParams;
use crate::logits::{LabelGrid, LogitMap};
use crate::mask::FrameSize;

pub const LABEL_MAGIC: [u8; 4] = *b"MLBL";
pub const LOGIT_MAGIC: [u8; 4] = *b"MLGT";
pub const FORMAT_VERSION: u16 = 1;
const LABEL_HEADER_LEN: usize = 4 + 2 + 4 + 4 + 4 + 1;
const LOGIT_HEADER_LEN: usize = 4 + 2 + 4 + 4 + 4;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    file: &'a str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, field: &'static str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format {
                file: self.file.to_string(),
                field,
                reason: format!("truncated at byte {}", self.pos),
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn magic(&mut self, expected: [u8; 4]) -> Result<()> {
        let got = self.take(4, "magic")?;
        if got != expected {
            return Err(Error::Format {
                file: self.file.to_string(),
                field: "magic",
                reason: format!(
                    "expected {:?}, found {:?}",
                    String::from_utf8_lossy(&expected),
                    String::from_utf8_lossy(got)
                ),
            });
        }
        let version = u16::from_le_bytes(self.take(2, "version")?.try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(self.bad("version", format!("unsupported version {version}")));
        }
        Ok(())
    }

    fn u32(&mut self, field: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, field)?.try_into().unwrap()))
    }

    fn bad(&self, field: &'static str, reason: impl Into<String>) -> Error {
        Error::Format {
            file: self.file.to_string(),
            field,
            reason: reason.into(),
        }
    }

    fn dims(&mut self) -> Result<FrameSize> {
        let width = self.u32("width")? as usize;
        let height = self.u32("height")? as usize;
        if width == 0 {
            return Err(self.bad("width", "must be at least 1"));
        }
        if height == 0 {
            return Err(self.bad("height", "must be at least 1"));
        }
        FrameSize::new(width, height)
    }
}

pub fn encode_label_sequence(frames: &[LabelGrid]) -> Result<Vec<u8>> {
    let first = frames
        .first()
        .ok_or_else(|| Error::Data("cannot write an empty label sequence".into()))?;
    let (size, objects) = (first.size(), first.objects());
    let mut out = Vec::with_capacity(LABEL_HEADER_LEN + frames.len() * size.pixels());
    out.extend_from_slice(&LABEL_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(size.width() as u32).to_le_bytes());
    out.extend_from_slice(&(size.height() as u32).to_le_bytes());
    out.extend_from_slice(&(frames.len() as u32).to_le_bytes());
    out.push(objects);
    for (t, f) in frames.iter().enumerate() {
        if f.size() != size || f.objects() != objects {
            return Err(Error::Data(format!(
                "frame {t} is {} with {} objects, sequence is {size} with {objects}",
                f.size(),
                f.objects()
            )));
        }
        out.extend_from_slice(f.labels());
    }
    Ok(out)
}

pub fn decode_label_sequence(bytes: &[u8], file: &str) -> Result<Vec<LabelGrid>> {
    let mut r = Reader { bytes, pos: 0, file };
    r.magic(LABEL_MAGIC)?;
    let size = r.dims()?;
    let frames = r.u32("frames")? as usize;
    if frames == 0 {
        return Err(r.bad("frames", "must be at least 1"));
    }
    let objects = r.take(1, "objects")?[0];
    let expected = frames * size.pixels();
    if bytes.len() - r.pos != expected {
        return Err(r.bad(
            "frames",
            format!(
                "header promises {frames} frames of {size} ({expected} bytes), body has {}",
                bytes.len() - r.pos
            ),
        ));
    }
    (0..frames)
        .map(|t| {
            let body = r.take(size.pixels(), "labels")?;
            LabelGrid::from_vec(size, objects, body.to_vec()).map_err(|e| {
                r.bad("labels", format!("frame {t}: {e}"))
            })
        })
        .collect()
}

pub fn encode_logits(map: &LogitMap) -> Vec<u8> {
    let size = map.size();
    let mut out = Vec::with_capacity(LOGIT_HEADER_LEN + map.values().len() * 4);
    out.extend_from_slice(&LOGIT_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(map.channels() as u32).to_le_bytes());
    out.extend_from_slice(&(size.width() as u32).to_le_bytes());
    out.extend_from_slice(&(size.height() as u32).to_le_bytes());
    for &v in map.values() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_logits(bytes: &[u8], file: &str) -> Result<LogitMap> {
    let mut r = Reader { bytes, pos: 0, file };
    r.magic(LOGIT_MAGIC)?;
    let channels = r.u32("channels")? as usize;
    if channels < 2 {
        return Err(r.bad("channels", format!("need at least 2, found {channels}")));
    }
    let size = r.dims()?;
    let count = channels * size.pixels();
    if bytes.len() - r.pos != count * 4 {
        return Err(r.bad(
            "values",
            format!("expected {} bytes of f32 data, found {}", count * 4, bytes.len() - r.pos),
        ));
    }
    let values = r
        .take(count * 4, "values")?
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    LogitMap::from_vec(channels, size, values)
}

/// Writes through a temporary file in the destination directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| Error::io(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn read_label_sequence(path: &Path) -> Result<Vec<LabelGrid>> {
    decode_label_sequence(&read_file(path)?, &path.display().to_string())
}

pub fn read_logits(path: &Path) -> Result<LogitMap> {
    decode_logits(&read_file(path)?, &path.display().to_string())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Serializes the 16 fusion scalars as a flat JSON object, one per line, in
/// branch order. Values round-trip exactly.
pub fn encode_fusion_params(params: &FusionParams) -> String {
    let body: Vec<String> = params
        .named_scalars()
        .into_iter()
        .map(|(k, v)| format!("  \"{k}\": {}", serde_json::Value::from(v)))
        .collect();
    format!("{{\n{}\n}}\n", body.join(",\n"))
}

pub fn decode_fusion_params(text: &str) -> Result<FusionParams> {
    let map: BTreeMap<String, f64> = serde_json::from_str(text)?;
    FusionParams::from_named_scalars(map.iter().map(|(k, v)| (k.as_str(), *v)))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the manifest's directory, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Content listing written next to every command's outputs.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Manifest {
            command: command.to_string(),
            entries: Vec::new(),
        }
    }

    /// Writes `bytes` atomically under `root` and records it.
    pub fn write(&mut self, root: &Path, relative: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&root.join(relative), bytes)?;
        self.entries.push(ManifestEntry {
            path: relative.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut sorted = self.clone();
        sorted.entries.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(serde_json::to_string_pretty(&sorted)? + "\n")
    }

    /// Writes `manifest.json` under `root`.
    pub fn finish(&self, root: &Path) -> Result<PathBuf> {
        let path = root.join("manifest.json");
        write_atomic(&path, self.to_json()?.as_bytes())?;
        Ok(path)
    }
}
