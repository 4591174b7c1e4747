//! Toolkit configuration: one TOML file describing the robot, the
//! environment randomization, and run defaults. Every field has a default,
//! so an empty file is a valid configuration.

use crate::env::EnvConfig;
use crate::motion::RobotSpec;
use crate::Result;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToolkitConfig {
    pub robot: RobotSpec,
    pub env: EnvConfig,
    /// Default seed for commands that are not given `--seed`.
    pub seed: u64,
    /// Where the reward-baseline artifact lives.
    pub baseline_path: PathBuf,
    /// Default output directory for artifacts and tables.
    pub out_dir: PathBuf,
}

impl Default for ToolkitConfig {
    fn default() -> Self {
        ToolkitConfig {
            robot: RobotSpec::default(),
            env: EnvConfig::default(),
            seed: 0,
            baseline_path: PathBuf::from("baseline.throwsim"),
            out_dir: PathBuf::from("runs"),
        }
    }
}

impl ToolkitConfig {
    /// Field-level validation of both specs (ranges, signs, ordering).
    pub fn validate(&self) -> Result<()> {
        self.robot.validate()?;
        self.env.validate()
    }

    pub fn from_toml(text: &str) -> Result<ToolkitConfig> {
        let config: ToolkitConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<ToolkitConfig> {
        ToolkitConfig::from_toml(&fs::read_to_string(path)?)
    }
}
