//! Run configuration: one JSON document shared by every subcommand.
//! Unknown keys are rejected; flags override file values; the effective
//! configuration is echoed next to each output.

use std::path::Path;

use serde::{Deserialize, Serialize};

use iristex::data::SynthSpec;
use iristex::train::TrainConfig;
use iristex::Result;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    /// Fraction of classes held out from training for verification.
    pub test_fraction: f32,
    /// Seed for the class split and gallery/probe assignment.
    pub seed: u64,
    /// Fold count for the cross-dataset protocol.
    pub folds: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            test_fraction: 0.2,
            seed: 7,
            folds: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub synth: SynthSpec,
    pub stage1: TrainConfig,
    pub stage2: TrainConfig,
    pub protocol: ProtocolConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            synth: SynthSpec::default(),
            stage1: TrainConfig::stage1(),
            stage2: TrainConfig::stage2(),
            protocol: ProtocolConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                Ok(serde_json::from_str(&text)?)
            }
        }
    }

    /// Echo the effective configuration into the directory holding `out`
    /// (for file outputs) or into `out` itself (for directory outputs).
    pub fn echo(&self, out: &Path, out_is_dir: bool) -> Result<()> {
        let target = if out_is_dir {
            out.join("config.json")
        } else {
            let stem = out
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "run".into());
            out.with_file_name(format!("{stem}.config.json"))
        };
        if let Some(parent) = target.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        std::fs::write(target, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
