//! Conditional spin-moment dynamics of a continuously probed atomic ensemble.
//!
//! All spin quantities are normalized by `sqrt(N)`: `X = Jx / sqrt(N)` and
//! likewise for `Y`, `Z`. Variances and the covariance use the symmetrized
//! definition `C_ab = (<{Ja, Jb}> - 2 <Ja><Jb>) / (2N)`, so a coherent spin
//! state polarized along x has `mean_x = sqrt(N)/2` and `var_y = var_z = 1/4`.
//!
//! The truth integrator is Euler-Maruyama. The Wiener increment used to
//! advance the moments must also be passed to [`photocurrent_sample`] for the
//! same step, since backaction and detector shot noise are one and the same
//! noise source.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Gyromagnetic ratio of the Rb-87 F=2 ground state, in rad s^-1 T^-1.
pub const RB87_GYROMAGNETIC_RATIO: f64 = 2.0 * std::f64::consts::PI * 7.0e9;

/// Largest admissible `dt * M * n_mean`.
pub const STABILITY_LIMIT: f64 = 0.1;

/// Absolute slack tolerated on `cov_xy^2 <= var_x * var_y` before the step is
/// rejected. Violations inside the band are clamped back onto the boundary.
const PSD_REPAIR_BAND: f64 = 1e-9;

/// Physical constants of the ensemble and probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorParams {
    /// Mean atom number.
    pub n_mean: f64,
    /// Shot-to-shot standard deviation of the atom number.
    pub n_sigma: f64,
    /// Measurement strength M.
    #[serde(rename = "meas_strength_hz")]
    pub meas_strength: f64,
    /// Detection efficiency in [0, 1].
    pub efficiency: f64,
    /// Local (single-atom) dephasing rate.
    #[serde(rename = "kappa_loc_hz")]
    pub kappa_loc: f64,
    /// Collective dephasing rate.
    #[serde(rename = "kappa_coll_hz")]
    pub kappa_coll: f64,
    /// Nominal Larmor frequency.
    #[serde(rename = "omega_bar_rad_s")]
    pub omega_bar: f64,
    /// Integration time step.
    #[serde(rename = "dt_s")]
    pub dt: f64,
}

impl SensorParams {
    /// Warm Rb-87 vapour: N = 1e13 +- 1e11, M = 1e-8 Hz, eta = 1, T2 = 10 ms
    /// from purely local dephasing, 30 kHz Larmor carrier, dt = 0.1 us.
    pub fn warm_rubidium() -> Self {
        Self {
            n_mean: 1e13,
            n_sigma: 1e11,
            meas_strength: 1e-8,
            efficiency: 1.0,
            kappa_loc: 100.0,
            kappa_coll: 0.0,
            omega_bar: 2.0 * std::f64::consts::PI * 30e3,
            dt: 1e-7,
        }
    }

    /// `dt * M * n_mean`, the fraction of a backaction time covered per step.
    pub fn stability_number(&self) -> f64 {
        self.dt * self.meas_strength * self.n_mean
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.n_mean,
            self.n_sigma,
            self.meas_strength,
            self.efficiency,
            self.kappa_loc,
            self.kappa_coll,
            self.omega_bar,
            self.dt,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(invalid("sensor", "all parameters must be finite"));
        }
        if self.n_mean <= 0.0 {
            return Err(invalid("n_mean", "must be positive"));
        }
        if self.n_sigma < 0.0 {
            return Err(invalid("n_sigma", "must be non-negative"));
        }
        if self.meas_strength < 0.0 {
            return Err(invalid("meas_strength_hz", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(invalid("efficiency", "must lie in [0, 1]"));
        }
        if self.kappa_loc < 0.0 || self.kappa_coll < 0.0 {
            return Err(invalid("kappa", "dephasing rates must be non-negative"));
        }
        if self.dt <= 0.0 {
            return Err(invalid("dt_s", "must be positive"));
        }
        if self.stability_number() > STABILITY_LIMIT {
            return Err(invalid(
                "dt_s",
                format!(
                    "dt * M * n_mean = {:.3} exceeds {STABILITY_LIMIT}; reduce dt",
                    self.stability_number()
                ),
            ));
        }
        Ok(())
    }
}

/// Conditional first and second moments of the normalized collective spin.
///
/// The same type is used for time derivatives (per-second rates of each
/// component), e.g. the output of [`atomic_drift`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AtomicMoments {
    pub mean_x: f64,
    pub mean_y: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub var_z: f64,
    pub cov_xy: f64,
}

impl AtomicMoments {
    pub fn to_array(&self) -> [f64; 6] {
        [
            self.mean_x,
            self.mean_y,
            self.var_x,
            self.var_y,
            self.var_z,
            self.cov_xy,
        ]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self {
            mean_x: a[0],
            mean_y: a[1],
            var_x: a[2],
            var_y: a[3],
            var_z: a[4],
            cov_xy: a[5],
        }
    }

    /// `self + rate * dt`, component-wise.
    pub fn advanced(&self, rate: &AtomicMoments, dt: f64) -> Self {
        Self {
            mean_x: self.mean_x + rate.mean_x * dt,
            mean_y: self.mean_y + rate.mean_y * dt,
            var_x: self.var_x + rate.var_x * dt,
            var_y: self.var_y + rate.var_y * dt,
            var_z: self.var_z + rate.var_z * dt,
            cov_xy: self.cov_xy + rate.cov_xy * dt,
        }
    }
}

/// Coherent spin state of `n_atoms` spin-1/2 particles polarized along x.
pub fn css_initial_state(n_atoms: f64) -> Result<AtomicMoments> {
    if !(n_atoms > 0.0) {
        return Err(invalid("n_atoms", "must be positive"));
    }
    Ok(AtomicMoments {
        mean_x: n_atoms.sqrt() / 2.0,
        mean_y: 0.0,
        var_x: 0.0,
        var_y: 0.25,
        var_z: 0.25,
        cov_xy: 0.0,
    })
}

/// Deterministic part of the conditional moment equations.
///
/// `omega_eff` is the total precession rate `omega + u` about z.
pub fn atomic_drift(
    s: &AtomicMoments,
    omega_eff: f64,
    p: &SensorParams,
    n_atoms: f64,
) -> AtomicMoments {
    let (kc, kl, m, eta) = (p.kappa_coll, p.kappa_loc, p.meas_strength, p.efficiency);
    let w = omega_eff;
    AtomicMoments {
        mean_x: -w * s.mean_y - 0.5 * (kc + 2.0 * kl + m) * s.mean_x,
        mean_y: w * s.mean_x - 0.5 * (kc + 2.0 * kl) * s.mean_y,
        var_x: -2.0 * w * s.cov_xy
            + kc * (s.var_y + s.mean_y * s.mean_y - s.var_x)
            + kl * (0.5 - 2.0 * s.var_x)
            + m * (s.var_z - s.var_x - 4.0 * eta * n_atoms * s.cov_xy * s.cov_xy),
        var_y: 2.0 * w * s.cov_xy
            + kc * (s.var_x + s.mean_x * s.mean_x - s.var_y)
            + kl * (0.5 - 2.0 * s.var_y)
            - 4.0 * eta * m * n_atoms * s.var_y * s.var_y,
        var_z: m * (s.var_x + s.mean_x * s.mean_x - s.var_z),
        cov_xy: w * (s.var_x - s.var_y)
            - kc * (2.0 * s.cov_xy + s.mean_x * s.mean_y)
            - 2.0 * kl * s.cov_xy
            - 0.5 * m * s.cov_xy * (1.0 + 8.0 * eta * n_atoms * s.var_y),
    }
}

/// Coefficients multiplying `dW` on `(mean_x, mean_y)`. The second moments
/// carry no diffusion.
pub fn atomic_diffusion(s: &AtomicMoments, p: &SensorParams, n_atoms: f64) -> (f64, f64) {
    let g = 2.0 * (p.efficiency * p.meas_strength * n_atoms).sqrt();
    (g * s.cov_xy, g * s.var_y)
}

/// Result of one truth step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthStep {
    pub moments: AtomicMoments,
    /// The covariance was clamped back onto the PSD boundary.
    pub psd_repaired: bool,
}

/// Advances the conditional moments by one Euler-Maruyama step.
///
/// `omega_drive + u` is the precession rate during the step and `dw` the
/// measurement Wiener increment (variance `p.dt`). The returned error carries
/// step index 0; callers running a loop should relabel it with
/// [`Error::at_step`].
pub fn step_truth(
    s: &AtomicMoments,
    omega_drive: f64,
    u: f64,
    dw: f64,
    p: &SensorParams,
    n_atoms: f64,
) -> Result<TruthStep> {
    let drift = atomic_drift(s, omega_drive + u, p, n_atoms);
    let (gx, gy) = atomic_diffusion(s, p, n_atoms);
    let mut next = s.advanced(&drift, p.dt);
    next.mean_x += gx * dw;
    next.mean_y += gy * dw;

    let unstable = |detail: String| Error::IntegrationInstability { step: 0, detail };
    if !next.to_array().iter().all(|v| v.is_finite()) {
        return Err(unstable("non-finite moment".into()));
    }
    for (name, v) in [
        ("var_x", &mut next.var_x),
        ("var_y", &mut next.var_y),
        ("var_z", &mut next.var_z),
    ] {
        if *v < 0.0 {
            if *v < -PSD_REPAIR_BAND {
                return Err(unstable(format!("{name} = {v:e} < 0")));
            }
            *v = 0.0;
        }
    }
    let norm2 = next.mean_x * next.mean_x + next.mean_y * next.mean_y;
    if norm2 > 0.25 * n_atoms * (1.0 + 1e-6) {
        return Err(unstable(format!(
            "mean spin length^2 {norm2:e} exceeds N/4 = {:e}",
            0.25 * n_atoms
        )));
    }

    let bound = next.var_x * next.var_y;
    let excess = next.cov_xy * next.cov_xy - bound;
    let mut psd_repaired = false;
    if excess > 0.0 {
        if excess > PSD_REPAIR_BAND + 1e-6 * bound {
            return Err(unstable(format!(
                "cov_xy^2 exceeds var_x * var_y by {excess:e}"
            )));
        }
        next.cov_xy = next.cov_xy.signum() * bound.sqrt();
        psd_repaired = true;
    }
    Ok(TruthStep {
        moments: next,
        psd_repaired,
    })
}

/// Photocurrent increment `y dt` for the step driven by `dw`.
pub fn photocurrent_sample(s: &AtomicMoments, dw: f64, p: &SensorParams, n_atoms: f64) -> f64 {
    let eta = p.efficiency;
    2.0 * eta * (p.meas_strength * n_atoms).sqrt() * s.mean_y * p.dt + eta.sqrt() * dw
}

/// Transverse coherence time `1 / (kappa_coll/2 + kappa_loc)`.
pub fn t2_time(p: &SensorParams) -> Result<f64> {
    let rate = 0.5 * p.kappa_coll + p.kappa_loc;
    if rate > 0.0 {
        Ok(1.0 / rate)
    } else {
        Err(Error::InfiniteCoherenceTime)
    }
}

/// Spin-squeezing parameter in dB, normalized so the coherent state gives 0 dB:
/// `xi^2 = N var_y / mean_x^2`.
pub fn squeezing_db(s: &AtomicMoments, n_atoms: f64) -> Result<f64> {
    if s.mean_x == 0.0 {
        return Err(Error::UndefinedSqueezing);
    }
    let xi2 = n_atoms * s.var_y / (s.mean_x * s.mean_x);
    Ok(10.0 * xi2.log10())
}

/// Off-resonant Faraday probe geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSetup {
    pub power_w: f64,
    /// Detuning from the atomic line, in Hz (not rad/s).
    pub detuning_hz: f64,
    pub beam_area_cm2: f64,
    pub oscillator_strength: f64,
    /// Wavelength of the atomic transition.
    pub wavelength_m: f64,
}

impl ProbeSetup {
    /// Rb D1 line with a 0.0503 cm^2 beam.
    pub fn rb_d1(power_w: f64, detuning_hz: f64) -> Self {
        Self {
            power_w,
            detuning_hz,
            beam_area_cm2: 0.0503,
            oscillator_strength: 0.34,
            wavelength_m: 794.8e-9,
        }
    }
}

const SPEED_OF_LIGHT_CM_S: f64 = 2.997_924_58e10;
const CLASSICAL_ELECTRON_RADIUS_CM: f64 = 2.82e-13;
const PLANCK_J_S: f64 = 6.626_070_15e-34;

/// Measurement strength `M = g^2 Ndot / 4` of a dispersive probe, where
/// `g = c r_e f_osc / (A Delta)` and `Ndot = P / (h nu)`.
pub fn measurement_strength_from_probe(probe: &ProbeSetup) -> Result<f64> {
    let ProbeSetup {
        power_w,
        detuning_hz,
        beam_area_cm2,
        oscillator_strength,
        wavelength_m,
    } = *probe;
    if detuning_hz == 0.0 {
        return Err(invalid("detuning_hz", "zero detuning diverges"));
    }
    for (name, v) in [
        ("power_w", power_w),
        ("detuning_hz", detuning_hz),
        ("beam_area_cm2", beam_area_cm2),
        ("oscillator_strength", oscillator_strength),
        ("wavelength_m", wavelength_m),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(invalid(name, "must be positive and finite"));
        }
    }
    let line_hz = SPEED_OF_LIGHT_CM_S * 1e-2 / wavelength_m;
    let probe_hz = line_hz - detuning_hz;
    if probe_hz <= 0.0 {
        return Err(invalid("detuning_hz", "exceeds the optical frequency"));
    }
    let coupling = SPEED_OF_LIGHT_CM_S * CLASSICAL_ELECTRON_RADIUS_CM * oscillator_strength
        / (beam_area_cm2 * detuning_hz);
    let photon_flux = power_w / (PLANCK_J_S * probe_hz);
    Ok(coupling * coupling * photon_flux / 4.0)
}
