//! Run manifests: the command, its full parameter set and timing, written next
//! to each output so that the run can be replayed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub command: String,
    /// Every argument of the command, enough to rerun it.
    pub parameters: serde_json::Value,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub wall_time: f64,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: &str, parameters: &impl Serialize, seed: Option<u64>) -> CliResult<Self> {
        Ok(RunManifest {
            command: command.to_string(),
            parameters: serde_json::to_value(parameters)?,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time: 0.0,
            outputs: Vec::new(),
        })
    }

    /// `<out>.manifest.json`.
    pub fn path_for(out: &Path) -> PathBuf {
        let mut s = out.as_os_str().to_os_string();
        s.push(".manifest.json");
        PathBuf::from(s)
    }

    pub fn write(&self, out: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(Self::path_for(out), text + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }
}
