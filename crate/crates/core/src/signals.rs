//! True field waveforms: Ornstein-Uhlenbeck fluctuations and a filtered
//! Van der Pol oscillator producing a cardiac-like trace.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// `d omega = -chi (omega - omega_bar) dt + sqrt(q) dW`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OupParams {
    #[serde(rename = "chi_hz")]
    pub chi: f64,
    #[serde(rename = "q_omega_rad2_s3")]
    pub q_omega: f64,
    #[serde(rename = "omega_bar_rad_s")]
    pub omega_bar: f64,
}

impl OupParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.chi > 0.0) || !self.chi.is_finite() {
            return Err(invalid("chi_hz", "must be positive and finite"));
        }
        if !(self.q_omega >= 0.0) || !self.q_omega.is_finite() {
            return Err(invalid(
                "q_omega_rad2_s3",
                "must be non-negative and finite",
            ));
        }
        if !self.omega_bar.is_finite() {
            return Err(invalid("omega_bar_rad_s", "must be finite"));
        }
        Ok(())
    }

    /// Long-run variance `q / (2 chi)`.
    pub fn stationary_variance(&self) -> f64 {
        self.q_omega / (2.0 * self.chi)
    }

    /// Euler-Maruyama step of the frequency.
    pub fn step(&self, omega: f64, dw: f64, dt: f64) -> f64 {
        omega - self.chi * (omega - self.omega_bar) * dt + self.q_omega.sqrt() * dw
    }
}

/// Coefficients of the filtered Van der Pol system
///
/// ```text
/// d nu      = -p omega dt
/// d omega   = [(k/m) nu + 2 (c/m) (1 - upsilon) omega] dt
/// d upsilon = [(|nu| - nu) / (2T) - upsilon / T] dt
/// ```
///
/// `omega` is read directly as the field deviation from the carrier in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VdpParams {
    pub p: f64,
    pub k: f64,
    pub m: f64,
    pub c: f64,
    #[serde(rename = "t_filter_s")]
    pub t_filter: f64,
    pub init: [f64; 3],
    /// Density of the white frequency noise corrupting the drive.
    #[serde(rename = "noise_density_rad2_s")]
    pub noise_density: f64,
}

impl Default for VdpParams {
    fn default() -> Self {
        Self {
            p: 1e3,
            k: 1.0,
            m: 0.00098,
            c: 1.0,
            t_filter: 0.003,
            init: [0.0045; 3],
            noise_density: 0.0,
        }
    }
}

impl VdpParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("p", self.p),
            ("k", self.k),
            ("m", self.m),
            ("c", self.c),
            ("t_filter_s", self.t_filter),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(name, "must be positive and finite"));
            }
        }
        if !self.init.iter().all(|v| v.is_finite()) {
            return Err(invalid("init", "must be finite"));
        }
        if !(self.noise_density >= 0.0) || !self.noise_density.is_finite() {
            return Err(invalid("noise_density_rad2_s", "must be non-negative"));
        }
        Ok(())
    }

    pub fn initial_state(&self) -> VdpState {
        VdpState {
            nu: self.init[0],
            omega: self.init[1],
            upsilon: self.init[2],
        }
    }

    /// Right-hand side of the three ODEs.
    pub fn rate(&self, s: &VdpState) -> VdpState {
        VdpState {
            nu: -self.p * s.omega,
            omega: self.k / self.m * s.nu + 2.0 * self.c / self.m * (1.0 - s.upsilon) * s.omega,
            upsilon: (s.nu.abs() - s.nu) / (2.0 * self.t_filter) - s.upsilon / self.t_filter,
        }
    }

    /// Explicit midpoint step.
    pub fn step(&self, s: &VdpState, dt: f64) -> VdpState {
        let k1 = self.rate(s);
        let mid = s.advanced(&k1, 0.5 * dt);
        let k2 = self.rate(&mid);
        s.advanced(&k2, dt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VdpState {
    pub nu: f64,
    pub omega: f64,
    pub upsilon: f64,
}

impl VdpState {
    fn advanced(&self, rate: &VdpState, dt: f64) -> VdpState {
        VdpState {
            nu: self.nu + rate.nu * dt,
            omega: self.omega + rate.omega * dt,
            upsilon: self.upsilon + rate.upsilon * dt,
        }
    }
}

/// Phase advanced by the noisy drive over one step: `omega dt + sqrt(q_n) dW`.
pub fn noisy_drive_increment(omega_clean: f64, dw_n: f64, dt: f64, noise_density: f64) -> f64 {
    omega_clean * dt + noise_density.sqrt() * dw_n
}

/// State of the true field generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SignalState {
    Oup { omega: f64 },
    Vdp(VdpState),
}

impl SignalState {
    /// Clean field deviation (VdP) or full frequency (OUP), in rad/s.
    pub fn omega(&self) -> f64 {
        match self {
            SignalState::Oup { omega } => *omega,
            SignalState::Vdp(s) => s.omega,
        }
    }
}
