use std::fs;
use std::path::Path;

use contourreg::experiment::{OptimizerConfig, PhantomSpec};
use contourreg::losses::LossConfig;
use contourreg::{Error, Result};
use serde::{Deserialize, Serialize};

/// Settings shared by every subcommand. Missing keys take their defaults and
/// command-line flags override the file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub loss: LossConfig,
    pub optimizer: OptimizerConfig,
    pub phantom: PhantomSpec,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::NotFound(path.to_path_buf())
            } else {
                Error::Io {
                    path: path.to_path_buf(),
                    source: e,
                }
            }
        })?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidArgument(format!("config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        self.optimizer.validate()?;
        self.phantom.validate()
    }
}
