//! Optional JSON config file. Precedence is flag > config file > default.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CliResult;

/// Every tunable, keyed by its flag name in snake_case.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub keep_negatives: Option<bool>,
    pub seq_len: Option<usize>,
    pub embed_size: Option<usize>,
    pub conv_filters: Option<usize>,
    pub kernel_size: Option<usize>,
    pub pool_size: Option<usize>,
    pub dropout: Option<f64>,
    pub min_freq: Option<usize>,
    pub max_vocab: Option<usize>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub adam_epsilon: Option<f64>,
    pub val_fraction: Option<f64>,
    pub seed: Option<u64>,
    pub k: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = emolyric::io::read_to_string(path)?;
        let cfg = serde_json::from_str(&text).map_err(|e| emolyric::Error::from(e).in_file(path))?;
        Ok(cfg)
    }
}

/// Flag if given, else config file value, else default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}
