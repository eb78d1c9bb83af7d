//! Run configuration: defaults, then an optional TOML file, then flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::AugmentConfig;
use crate::eval::EvalParams;
use crate::trainctl::TrainConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub gt: Option<PathBuf>,
    pub dets: Option<PathBuf>,
    pub images: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
}

/// Fully merged settings for one invocation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: PathsConfig,
    pub augment: AugmentConfig,
    pub train: TrainConfig,
    pub eval: EvalParams,
}

impl RunConfig {
    /// Parses TOML text; keys not known to the schema are rejected.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|s| line_col(text, s.start))
                .unwrap_or((0, 0));
            Error::Config(format!("line {line}, column {column}: {}", e.message()))
        })
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                Self::from_toml(&text)
            }
        }
    }

    /// Pushes the single seed into every component that draws randomness.
    pub fn finalize(mut self) -> Result<Self> {
        self.augment.seed = self.seed;
        self.augment.validate()?;
        self.train.validate()?;
        self.eval.validate()?;
        Ok(self)
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}
