//! Fixed-point logistic function, natural logarithm and cross-entropy over
//! shares, each paired with a cleartext twin that performs the identical
//! integer arithmetic.

mod log;
mod loss;
mod sigmoid;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use log::{log_budget, log_fixed, log_secure, LogTable, LOG_MAX_FRAC_BITS};
pub use loss::{cross_entropy, cross_entropy_fixed, cross_entropy_loss, loss_budget};
pub use sigmoid::{
    sigmoid, sigmoid_budget, sigmoid_fixed, sigmoid_secure, SigmoidTable, SIGMOID_CLAMP,
    SIGMOID_MAX_FRAC_BITS, SIGN_WIDTH, SLOPE_BITS,
};

pub(crate) use loss::{loss_shares, mean_extra_bits, neg_inverse};

use crate::numeric::FixedPointParams;
use crate::rss::RssError;

/// Worst-case deviation of the spline from the logistic function on [-8, 8],
/// including output rounding at 16 fractional bits.
pub const SIGMOID_ERROR_BOUND: f64 = 2.3e-4;

/// Worst-case deviation of the logarithm on [2^-16, 1] at 16 fractional bits.
pub const LOG_ERROR_BOUND: f64 = 5e-5;

#[derive(Debug, Error)]
pub enum NonlinearError {
    #[error(transparent)]
    Rss(#[from] RssError),
    #[error("{frac_bits} fractional bits not supported (max {max})")]
    UnsupportedPrecision { frac_bits: u32, max: u32 },
    #[error("approximation contract cannot be met: {0}")]
    Unsatisfiable(String),
}

/// Accuracy contract of an approximation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxSpec {
    pub input_range: (f64, f64),
    pub max_abs_error: f64,
    /// Distance of the output clamp from 0 and 1.
    pub clamp_epsilon: f64,
}

impl ApproxSpec {
    pub fn sigmoid(params: &FixedPointParams) -> Self {
        ApproxSpec {
            input_range: (-8.0, 8.0),
            max_abs_error: 2f64.powi(-10),
            clamp_epsilon: 1.0 / params.scale(),
        }
    }

    pub fn log(params: &FixedPointParams) -> Self {
        ApproxSpec {
            input_range: (1.0 / params.scale(), 1.0),
            max_abs_error: 2f64.powi(-8),
            clamp_epsilon: 1.0 / params.scale(),
        }
    }

    fn check_common(&self, params: &FixedPointParams) -> Result<(), NonlinearError> {
        let ulp = 1.0 / params.scale();
        if self.clamp_epsilon < ulp {
            return Err(NonlinearError::Unsatisfiable(format!(
                "clamp epsilon {} below one ulp {ulp}",
                self.clamp_epsilon
            )));
        }
        if self.input_range.0 > self.input_range.1 {
            return Err(NonlinearError::Unsatisfiable("empty input range".into()));
        }
        Ok(())
    }

    pub(crate) fn check_sigmoid(&self, params: &FixedPointParams) -> Result<(), NonlinearError> {
        self.check_common(params)?;
        let ulp = 1.0 / params.scale();
        if self.clamp_epsilon > ulp {
            return Err(NonlinearError::Unsatisfiable(format!(
                "outputs saturate at {ulp} from the ends, not {}",
                self.clamp_epsilon
            )));
        }
        if self.max_abs_error > 2f64.powi(-10) || self.max_abs_error < SIGMOID_ERROR_BOUND {
            return Err(NonlinearError::Unsatisfiable(format!(
                "sigmoid error target {} outside [{SIGMOID_ERROR_BOUND}, 2^-10]",
                self.max_abs_error
            )));
        }
        if self.input_range.0 < -SIGMOID_CLAMP || self.input_range.1 > SIGMOID_CLAMP {
            return Err(NonlinearError::Unsatisfiable(format!(
                "accuracy only holds on [-{SIGMOID_CLAMP}, {SIGMOID_CLAMP}]"
            )));
        }
        Ok(())
    }

    pub(crate) fn check_log(&self, params: &FixedPointParams) -> Result<(), NonlinearError> {
        self.check_common(params)?;
        if self.max_abs_error < LOG_ERROR_BOUND {
            return Err(NonlinearError::Unsatisfiable(format!(
                "log error target {} below {LOG_ERROR_BOUND}",
                self.max_abs_error
            )));
        }
        if self.input_range.0 < 1.0 / params.scale() || self.input_range.1 > 1.0 {
            return Err(NonlinearError::Unsatisfiable("log domain is [2^-f, 1]".into()));
        }
        Ok(())
    }
}
