use serde::{Deserialize, Serialize};

use super::TrainerError;
use crate::nonlinear::{LogTable, SigmoidTable};
use crate::numeric::FixedPointParams;
use crate::rss::TruncMode;

pub const DEFAULT_LOSS_THRESHOLD: f64 = 1e-4;
pub const DEFAULT_EPOCH_CAP: u32 = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy")]
pub enum StopPolicy {
    /// Exactly this many epochs.
    Fixed { epochs: u32 },
    /// Stop at the first epoch whose opened loss is below `threshold`, or
    /// after `cap` epochs.
    LossThreshold { threshold: f64, cap: u32 },
}

impl StopPolicy {
    pub fn fixed(epochs: u32) -> Self {
        StopPolicy::Fixed { epochs }
    }

    pub fn loss_threshold(threshold: f64, cap: u32) -> Self {
        StopPolicy::LossThreshold { threshold, cap }
    }

    /// Upper bound on the number of epochs.
    pub fn max_epochs(&self) -> u32 {
        match self {
            StopPolicy::Fixed { epochs } => *epochs,
            StopPolicy::LossThreshold { cap, .. } => *cap,
        }
    }

    pub fn needs_loss(&self) -> bool {
        matches!(self, StopPolicy::LossThreshold { .. })
    }
}

impl Default for StopPolicy {
    fn default() -> Self {
        StopPolicy::fixed(100)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeighting {
    #[default]
    Off,
    /// Scale each sample's error by n / (2 n_class).
    Balanced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub stop: StopPolicy,
    pub truncation: TruncMode,
    pub fixed_point: FixedPointParams,
    pub class_weighting: ClassWeighting,
    pub seed: u64,
    /// Compute and open the loss every epoch even when the stopping policy
    /// does not need it.
    #[serde(default)]
    pub track_loss: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 0.1,
            momentum: 0.9,
            stop: StopPolicy::default(),
            truncation: TruncMode::Probabilistic,
            fixed_point: FixedPointParams::default(),
            class_weighting: ClassWeighting::Off,
            seed: 0,
            track_loss: false,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), TrainerError> {
        let bad = |msg: String| Err(TrainerError::InvalidConfig(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        match self.stop {
            StopPolicy::LossThreshold { threshold, cap } => {
                if !(threshold > 0.0 && threshold.is_finite()) {
                    return bad(format!("loss threshold must be positive, got {threshold}"));
                }
                if cap == 0 {
                    return bad("epoch cap must be at least 1".into());
                }
            }
            StopPolicy::Fixed { epochs } if epochs == 0 => {
                return bad("epoch count must be at least 1".into());
            }
            StopPolicy::Fixed { .. } => {}
        }
        FixedPointParams::new(self.fixed_point.frac_bits())?;
        SigmoidTable::new(&self.fixed_point)?;
        if self.computes_loss() {
            LogTable::new(&self.fixed_point)?;
        }
        let ulp = 1.0 / self.fixed_point.scale();
        if self.learning_rate < ulp {
            return bad(format!("learning rate {} rounds to zero at this precision", self.learning_rate));
        }
        Ok(())
    }

    pub fn computes_loss(&self) -> bool {
        self.track_loss || self.stop.needs_loss()
    }
}
