use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stabiliser_core::{AnchorConfig, DetectorSpec, DeviceParams, SgSpec, Vec3};

use crate::error::CliError;

/// One cable: a named device anchor and vest attachment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedAnchor {
    pub name: String,
    #[serde(flatten)]
    pub anchor: AnchorConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

/// Everything a run needs, loaded from a TOML file. Physical quantities carry
/// their unit in the key name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Uniform marker jitter added to trajectories before processing; 0 disables it.
    #[serde(default)]
    pub jitter_m: f64,
    /// Tracked body point at rest, used by the generators.
    #[serde(default = "default_start")]
    pub start_m: Vec3,
    #[serde(default)]
    pub device: DeviceParams,
    #[serde(default)]
    pub detector: DetectorSpec,
    #[serde(default)]
    pub sg: SgSpec,
    #[serde(default = "default_anchors")]
    pub anchors: Vec<NamedAnchor>,
    #[serde(default)]
    pub io: IoPaths,
}

fn default_start() -> Vec3 {
    Vec3::new(0.05, 0.0, 0.95)
}

/// Left and right cables from the wheelchair frame behind the seat to the
/// vest, either side of the tracked upper-back point.
fn default_anchors() -> Vec<NamedAnchor> {
    vec![
        NamedAnchor {
            name: "left".into(),
            anchor: AnchorConfig {
                device_anchor: Vec3::new(-0.25, 0.15, 0.45),
                body_anchor_offset: Vec3::new(0.0, 0.12, 0.0),
            },
        },
        NamedAnchor {
            name: "right".into(),
            anchor: AnchorConfig {
                device_anchor: Vec3::new(-0.25, -0.15, 0.45),
                body_anchor_offset: Vec3::new(0.0, -0.12, 0.0),
            },
        },
    ]
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            jitter_m: 0.0,
            start_m: default_start(),
            device: DeviceParams::default(),
            detector: DetectorSpec::default(),
            sg: SgSpec::default(),
            anchors: default_anchors(),
            io: IoPaths::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let config: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let invalid = |e: &dyn std::fmt::Display| CliError::Config(e.to_string());
        self.device.validate().map_err(|e| invalid(&e))?;
        self.detector.validate().map_err(|e| invalid(&e))?;
        self.sg.validate().map_err(|e| invalid(&e))?;
        if self.anchors.is_empty() {
            return Err(CliError::Config("at least one anchor is required".into()));
        }
        for a in &self.anchors {
            a.anchor.validate().map_err(|e| invalid(&format_args!("anchor '{}': {e}", a.name)))?;
        }
        if !self.start_m.is_finite() {
            return Err(CliError::Config("start_m must be finite".into()));
        }
        if !(self.jitter_m.is_finite() && self.jitter_m >= 0.0) {
            return Err(CliError::Config("jitter_m must be >= 0".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn primary_anchor(&self) -> &NamedAnchor {
        &self.anchors[0]
    }
}
