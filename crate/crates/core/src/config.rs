//! Run configuration shared by every command. JSON on disk; every section is
//! optional and falls back to the defaults below.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{Branch, FusionTrainConfig};
use crate::mpm::{AdaptConfig, MpmConfig};
use crate::sim::Scenario;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackConfig {
    /// Branch whose logits are tracked.
    pub branch: Branch,
    /// Blend the motion prior into the logits.
    pub mpm: bool,
    /// Boundary tolerance in pixels; 1% of the diagonal when unset.
    pub tolerance: Option<f64>,
}

impl Default for TrackConfig {
    fn default() -> Self {
        TrackConfig {
            branch: Branch::FusedNoMpm,
            mpm: true,
            tolerance: None,
        }
    }
}

fn default_adapt() -> Option<AdaptConfig> {
    Some(AdaptConfig::default())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub mpm: MpmConfig,
    /// First-frame adaptation of the prior; `null` disables it.
    #[serde(default = "default_adapt")]
    pub adapt: Option<AdaptConfig>,
    #[serde(default)]
    pub track: TrackConfig,
    #[serde(default)]
    pub fusion: FusionTrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: None,
            mpm: MpmConfig::default(),
            adapt: default_adapt(),
            track: TrackConfig::default(),
            fusion: FusionTrainConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses and validates. Syntax errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| {
            Error::Config(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(s) = &self.scenario {
            s.validate()?;
        }
        self.mpm.validate()?;
        if let Some(a) = &self.adapt {
            a.validate()?;
        }
        if let Some(t) = self.track.tolerance {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::invalid("track.tolerance", "must be non-negative"));
            }
        }
        self.fusion.validate()?;
        Ok(())
    }

    pub fn scenario(&self) -> Result<&Scenario> {
        self.scenario
            .as_ref()
            .ok_or_else(|| Error::invalid("scenario", "this command needs a `scenario` section"))
    }
}
