//! Lower bounds on the tracking error imposed by dephasing and field noise.
//!
//! All frequencies are deviations from the carrier; the carrier has no effect
//! on the mean squared error.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::experiment::sample_atom_number;

/// Parameters of a bound evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundQuery {
    /// Elapsed tracking time, s.
    pub t: f64,
    /// Mean atom number.
    pub n_atoms: f64,
    /// Shot-to-shot standard deviation of the atom number.
    pub n_sigma: f64,
    /// rad^2 s^-3.
    pub q_omega: f64,
    pub kappa_loc: f64,
    pub kappa_coll: f64,
    /// Prior standard deviation of the field, rad/s.
    pub sigma0: f64,
    /// Field decay rate, only used by the discrete forms.
    pub chi: f64,
}

impl BoundQuery {
    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0) {
            return Err(invalid("t", "must be positive"));
        }
        if !(self.n_atoms > 0.0) {
            return Err(invalid("n_atoms", "must be positive"));
        }
        if !(self.n_sigma >= 0.0) {
            return Err(invalid("n_sigma", "must be non-negative"));
        }
        if !(self.q_omega >= 0.0) || !(self.kappa_loc >= 0.0) || !(self.kappa_coll >= 0.0) {
            return Err(invalid("rates", "must be non-negative"));
        }
        if self.kappa_loc == 0.0 && self.kappa_coll == 0.0 {
            return Err(Error::DegenerateBound("no dephasing: the bound vanishes"));
        }
        if !(self.sigma0 >= 0.0) {
            return Err(invalid("sigma0", "must be non-negative"));
        }
        Ok(())
    }

    pub fn kappa(&self) -> f64 {
        effective_dephasing(self.n_atoms, self.kappa_loc, self.kappa_coll)
    }
}

/// `kappa_coll + 2 kappa_loc / n`.
pub fn effective_dephasing(n: f64, kappa_loc: f64, kappa_coll: f64) -> f64 {
    kappa_coll + 2.0 * kappa_loc / n
}

/// Flat-prior bound `sqrt(q kappa) coth(t sqrt(q / kappa))`.
pub fn cs_bound_amse(q: &BoundQuery) -> Result<f64> {
    q.validate()?;
    if q.q_omega == 0.0 {
        return Err(Error::DegenerateBound(
            "q_omega = 0: use sql_bound for a static field",
        ));
    }
    let kappa = q.kappa();
    let a = (q.q_omega * kappa).sqrt();
    let x = q.t * (q.q_omega / kappa).sqrt();
    // tanh saturates to 1 instead of overflowing like cosh/sinh
    Ok(a / x.tanh())
}

/// Finite-prior bound
///
/// ```text
/// V(t) = [a s0^2 cosh x + a^2 sinh x] / [a cosh x + s0^2 sinh x],
/// a = sqrt(q kappa), x = t sqrt(q / kappa)
/// ```
///
/// evaluated as `(s0^2 + a th) / (1 + s0^2 th / a)` with `th = tanh x`, which
/// stays finite for large `x` and reduces to `s0^2 kappa / (kappa + s0^2 t)`
/// at `q = 0`.
pub fn cs_bound_finite_prior(q: &BoundQuery) -> Result<f64> {
    q.validate()?;
    let s2 = q.sigma0 * q.sigma0;
    let kappa = q.kappa();
    if q.q_omega == 0.0 {
        return Ok(s2 * kappa / (kappa + s2 * q.t));
    }
    let a = (q.q_omega * kappa).sqrt();
    let x = q.t * (q.q_omega / kappa).sqrt();
    let th = x.tanh();
    Ok((s2 + a * th) / (1.0 + s2 * th / a))
}

/// Standard quantum limit `kappa(N) / t` for a static field.
pub fn sql_bound(t: f64, n: f64, kappa_loc: f64, kappa_coll: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid("t", "must be positive"));
    }
    if !(n > 0.0) {
        return Err(invalid("n_atoms", "must be positive"));
    }
    Ok(effective_dephasing(n, kappa_loc, kappa_coll) / t)
}

/// One-step transition variance of the field process over `dt`.
pub fn discrete_process_variance(q_omega: f64, chi: f64, dt: f64) -> f64 {
    if chi == 0.0 {
        return q_omega * dt;
    }
    -q_omega / (2.0 * chi) * (-2.0 * chi * dt).exp_m1()
}

/// Per-step dephasing variance `kappa / dt`.
pub fn discrete_dephasing_variance(kappa: f64, dt: f64) -> f64 {
    kappa / dt
}

/// Iterates `V_k = V_P + V_Q V_{k-1} / (V_Q + V_{k-1})` from `V_0 = sigma0^2`.
pub fn variance_recursion(v_p: f64, v_q: f64, sigma0_sq: f64, k: u64) -> f64 {
    let mut v = sigma0_sq;
    for _ in 0..k {
        v = v_p + v_q * v / (v_q + v);
    }
    v
}

/// The six constants of the closed-form solution of the variance recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormConstants {
    pub w_plus: f64,
    pub w_minus: f64,
    pub u_plus: f64,
    pub u_minus: f64,
    pub v_plus: f64,
    pub v_minus: f64,
}

impl ClosedFormConstants {
    pub fn new(v_p: f64, v_q: f64, sigma0_sq: f64) -> Self {
        let s = (v_p * (4.0 * v_q + v_p)).sqrt();
        Self {
            w_plus: 2.0 * v_p * v_q + sigma0_sq * v_p + sigma0_sq * s,
            w_minus: -2.0 * v_p * v_q - sigma0_sq * v_p + sigma0_sq * s,
            u_plus: -v_p + 2.0 * sigma0_sq + s,
            u_minus: v_p - 2.0 * sigma0_sq + s,
            v_plus: 2.0 * v_q + v_p + s,
            v_minus: 2.0 * v_q + v_p - s,
        }
    }

    /// `(W+ V+^k + W- V-^k) / (U- V-^k + U+ V+^k)` with raw powers. Overflows
    /// for large `k`; kept for checking the constants.
    pub fn evaluate_direct(&self, k: i32) -> f64 {
        let (p, m) = (self.v_plus.powi(k), self.v_minus.powi(k));
        (self.w_plus * p + self.w_minus * m) / (self.u_minus * m + self.u_plus * p)
    }

    /// Limit for `k -> infinity`.
    pub fn asymptote(&self) -> f64 {
        self.w_plus / self.u_plus
    }
}

/// Closed-form solution of [`variance_recursion`].
///
/// Equivalent to the ratio of the [`ClosedFormConstants`] expressions but
/// rewritten around the attracting fixed point `l+ = (V_P + s)/2`,
/// `s = sqrt(V_P (4 V_Q + V_P))`, so that only `r^k = (V-/V+)^k` appears:
///
/// ```text
/// V_k = l+ + s (s0^2 - l+) r^k / [(s0^2 - l-) - (s0^2 - l+) r^k]
/// ```
pub fn variance_closed_form(v_p: f64, v_q: f64, sigma0_sq: f64, k: u64) -> f64 {
    if k == 0 {
        return sigma0_sq;
    }
    let s = (v_p * (4.0 * v_q + v_p)).sqrt();
    if s == 0.0 {
        return sigma0_sq * v_q / (v_q + k as f64 * sigma0_sq);
    }
    let l_plus = 0.5 * (v_p + s);
    let l_minus = -v_p * v_q / l_plus;
    let v_plus = 2.0 * v_q + v_p + s;
    let ln_r = (-2.0 * s / v_plus).ln_1p();
    let kr = k as f64 * ln_r;
    let rk = kr.exp();
    let a = sigma0_sq - l_plus;
    // (s0^2 - l-) - a r^k, written to avoid cancellation in 1 - r^k
    let denom = sigma0_sq * -kr.exp_m1() + l_plus * rk - l_minus;
    l_plus + s * a * rk / denom
}

/// Bound at the mean atom number, optionally with a Monte Carlo estimate of
/// its average over the atom-number distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NAveragedBound {
    /// Flat-prior bound at the mean atom number.
    pub at_mean: f64,
    /// Sample mean of the flat-prior bound over drawn atom numbers.
    pub jensen_mean: Option<f64>,
    pub draws: usize,
}

/// Flat-prior bound at `q.n_atoms`. With `draws > 0`, also averages the bound
/// over `N ~ Normal(n_atoms, n_sigma)` to expose the convexity gap.
pub fn n_averaged_bound(q: &BoundQuery, draws: usize, seed: u64) -> Result<NAveragedBound> {
    let at_mean = cs_bound_amse(q)?;
    if draws == 0 {
        return Ok(NAveragedBound {
            at_mean,
            jensen_mean: None,
            draws,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    for _ in 0..draws {
        let n = sample_atom_number(q.n_atoms, q.n_sigma, &mut rng)?;
        sum += cs_bound_amse(&BoundQuery { n_atoms: n, ..*q })?;
    }
    Ok(NAveragedBound {
        at_mean,
        jensen_mean: Some(sum / draws as f64),
        draws,
    })
}
