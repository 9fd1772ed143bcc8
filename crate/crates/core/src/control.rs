//! Feedback law cancelling the Larmor precession.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LqrParams {
    /// Weight of the transverse spin estimate in the control, 1/s.
    #[serde(rename = "lambda_hz")]
    pub lambda_gain: f64,
}

impl Default for LqrParams {
    fn default() -> Self {
        Self { lambda_gain: 1.0 }
    }
}

impl LqrParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_gain >= 0.0) || !self.lambda_gain.is_finite() {
            return Err(invalid("lambda_hz", "must be non-negative and finite"));
        }
        Ok(())
    }
}

/// `u = -omega_est - lambda * y_est`. `omega_est` is the full estimated
/// precession rate, carrier included.
pub fn lqr_control(omega_est: f64, y_mean_est: f64, prm: &LqrParams) -> f64 {
    -omega_est - prm.lambda_gain * y_mean_est
}
