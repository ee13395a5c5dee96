use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliResult;

/// Written next to each command's primary output. Together with the inputs
/// it determines the outputs of `prepare` and `train` bit for bit.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub tool_version: &'static str,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: &'static str, config: impl Serialize) -> Self {
        Self {
            command,
            tool_version: env!("CARGO_PKG_VERSION"),
            seed: None,
            config: serde_json::to_value(config).expect("config serializes"),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn write_next_to(&self, primary: &Path) -> CliResult<PathBuf> {
        let path = sidecar(primary, "manifest.json");
        let mut bytes = serde_json::to_vec_pretty(self).map_err(emolyric::Error::from)?;
        bytes.push(b'\n');
        emolyric::io::write_atomic(&path, &bytes)?;
        Ok(path)
    }
}

/// `out/model.lyc` + `history.csv` → `out/model.history.csv`.
pub fn sidecar(primary: &Path, suffix: &str) -> PathBuf {
    primary.with_extension(suffix)
}
