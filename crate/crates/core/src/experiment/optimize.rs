use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{total_loss, LogitField, LossConfig, LossReport};
use crate::volume::LabelVolume;

/// Fixed-step gradient descent on a free per-voxel logit field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub rng_seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: DEFAULT_LEARNING_RATE,
            iterations: 400,
            rng_seed: 0,
        }
    }
}

pub const DEFAULT_LEARNING_RATE: f64 = 2000.0;

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidArgument("iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// Descends `dice + ce + alpha * cr` from all-zero logits. Returns the final
/// logits and the loss evaluated before each step.
pub fn optimize_logits(
    targets: &LabelVolume,
    loss_cfg: &LossConfig,
    opt_cfg: &OptimizerConfig,
) -> Result<(LogitField, Vec<LossReport>)> {
    loss_cfg.validate()?;
    opt_cfg.validate()?;
    let mut logits = LogitField::zeros(*targets.geometry(), loss_cfg.num_classes)?;
    let mut trace = Vec::with_capacity(opt_cfg.iterations);
    let lr = opt_cfg.learning_rate;
    for iteration in 0..opt_cfg.iterations {
        let (report, grad) = total_loss(&logits, targets, loss_cfg)?;
        if !report.is_finite() {
            return Err(Error::Diverged { iteration });
        }
        trace.push(report);
        logits
            .update(|i, z| *z -= lr * grad[i])
            .map_err(|_| Error::Diverged { iteration })?;
    }
    Ok((logits, trace))
}
