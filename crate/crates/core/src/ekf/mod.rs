//! Extended Kalman filter for the joint atomic + field state.
//!
//! The estimate holds the six atomic moments followed by the field
//! components: one (`omega`) for the Ornstein-Uhlenbeck model, three
//! (`nu, omega, upsilon`) for the Van der Pol model. Measurement noise enters
//! both the photocurrent and the spin dynamics, so the gain carries the
//! cross-correlation term `G S`. In continuous time
//!
//! ```text
//! K  = (Sigma H^T + G S) / R
//! dx = f dt + K (y dt - H x dt)
//! dSigma = [A Sigma + Sigma A^T + G (Q - S S^T / R) G^T - Sigma H^T H Sigma / R] dt,
//! A  = F - G S H / R
//! ```
//!
//! with `Q = diag(1, q_K)`, `R = eta`, `S = (sqrt(eta), 0)^T`.
//!
//! Each step applies the exact one-step predictor of the model linearized
//! over `dt` (`Phi = I + F dt`), conditioning on the photocurrent increment:
//!
//! ```text
//! C_xz  = (Phi Sigma H^T + G S) dt,   C_zz = (R + H Sigma H^T dt) dt
//! x'    = x + f dt + C_xz / C_zz (y dt - H x dt)
//! Sigma' = Phi Sigma Phi^T + G Q G^T dt - C_xz C_xz^T / C_zz
//! ```
//!
//! This agrees with the equations above to first order in `dt`, stays
//! positive semidefinite, and remains stable while `H Sigma H^T dt / R` is of
//! order one, which happens during the first microseconds with a broad prior.

mod jacobians;

use nalgebra::{DMatrix, SMatrix, SVector};
use serde::{Deserialize, Serialize};

pub use jacobians::{drift, jacobian_f, jacobian_g, measurement_row};

use crate::error::{invalid, Error, Result};
use crate::sensor::{css_initial_state, SensorParams};

/// Field model carried by the filter.
pub trait SignalModel<const D: usize> {
    /// Index of the field-frequency component in the estimate.
    fn omega_index(&self) -> usize;
    /// Total precession rate implied by the estimate, carrier included.
    fn larmor(&self, x: &SVector<f64, D>) -> f64;
    /// Writes the field rows of the drift.
    fn signal_drift(&self, x: &SVector<f64, D>, f: &mut SVector<f64, D>);
    /// Writes the field rows of the drift Jacobian.
    fn signal_jacobian(&self, x: &SVector<f64, D>, f: &mut SMatrix<f64, D, D>);
    /// Spectral density of the noise driving the field frequency.
    fn process_noise(&self) -> f64;
    /// Initial field estimate and its covariance diagonal.
    fn initial_signal(&self, prior_sigma0: f64) -> ([f64; 3], [f64; 3]);
}

/// Ornstein-Uhlenbeck field model used by the filter, possibly mismatched
/// from the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OupModel {
    #[serde(rename = "chi_hz")]
    pub chi_k: f64,
    #[serde(rename = "q_rad2_s3")]
    pub q_k: f64,
    #[serde(rename = "omega_bar_rad_s")]
    pub omega_bar: f64,
}

impl SignalModel<7> for OupModel {
    fn omega_index(&self) -> usize {
        6
    }

    fn larmor(&self, x: &SVector<f64, 7>) -> f64 {
        x[6]
    }

    fn signal_drift(&self, x: &SVector<f64, 7>, f: &mut SVector<f64, 7>) {
        f[6] = -self.chi_k * (x[6] - self.omega_bar);
    }

    fn signal_jacobian(&self, _x: &SVector<f64, 7>, f: &mut SMatrix<f64, 7, 7>) {
        f[(6, 6)] = -self.chi_k;
    }

    fn process_noise(&self) -> f64 {
        self.q_k
    }

    fn initial_signal(&self, prior_sigma0: f64) -> ([f64; 3], [f64; 3]) {
        (
            [self.omega_bar, 0.0, 0.0],
            [prior_sigma0 * prior_sigma0, 0.0, 0.0],
        )
    }
}

/// Van der Pol field model. The filter's `omega` is the deviation from the
/// carrier `omega_bar`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VdpModel {
    pub p: f64,
    pub k: f64,
    pub m: f64,
    pub c: f64,
    #[serde(rename = "t_filter_s")]
    pub t_filter: f64,
    #[serde(rename = "q_rad2_s")]
    pub q_k: f64,
    #[serde(rename = "omega_bar_rad_s")]
    pub omega_bar: f64,
    /// Initial `(nu, omega, upsilon)` estimate.
    pub init_estimate: [f64; 3],
}

impl SignalModel<9> for VdpModel {
    fn omega_index(&self) -> usize {
        7
    }

    fn larmor(&self, x: &SVector<f64, 9>) -> f64 {
        self.omega_bar + x[7]
    }

    fn signal_drift(&self, x: &SVector<f64, 9>, f: &mut SVector<f64, 9>) {
        let (nu, om, up) = (x[6], x[7], x[8]);
        f[6] = -self.p * om;
        f[7] = self.k / self.m * nu + 2.0 * self.c / self.m * (1.0 - up) * om;
        f[8] = (nu.abs() - nu) / (2.0 * self.t_filter) - up / self.t_filter;
    }

    fn signal_jacobian(&self, x: &SVector<f64, 9>, f: &mut SMatrix<f64, 9, 9>) {
        let (nu, om, up) = (x[6], x[7], x[8]);
        f[(6, 7)] = -self.p;
        f[(7, 6)] = self.k / self.m;
        f[(7, 7)] = 2.0 * self.c * (1.0 - up) / self.m;
        f[(7, 8)] = -2.0 * self.c * om / self.m;
        // d|nu|/dnu taken as 0 at the kink
        let sign = if nu > 0.0 {
            1.0
        } else if nu < 0.0 {
            -1.0
        } else {
            0.0
        };
        f[(8, 6)] = (sign - 1.0) / (2.0 * self.t_filter);
        f[(8, 8)] = -1.0 / self.t_filter;
    }

    fn process_noise(&self) -> f64 {
        self.q_k
    }

    fn initial_signal(&self, prior_sigma0: f64) -> ([f64; 3], [f64; 3]) {
        let v = prior_sigma0 * prior_sigma0;
        (self.init_estimate, [v; 3])
    }
}

/// Sensor constants as known to the filter (mean atom number) plus its field
/// model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EkfModel<S> {
    pub sensor: SensorParams,
    pub signal: S,
}

pub type OupEkf = EkfModel<OupModel>;
pub type VdpEkf = EkfModel<VdpModel>;

/// `Q = diag(1, q_K)`, `R = eta`, `S = (sqrt(eta), 0)^T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub q: SMatrix<f64, 2, 2>,
    pub r: f64,
    pub s: SVector<f64, 2>,
}

impl NoiseModel {
    pub fn new(efficiency: f64, q_k: f64) -> Result<Self> {
        if !(efficiency >= 0.0) || !(q_k >= 0.0) {
            return Err(invalid("noise", "efficiency and q_K must be non-negative"));
        }
        Ok(Self {
            q: SMatrix::<f64, 2, 2>::new(1.0, 0.0, 0.0, q_k),
            r: efficiency,
            s: SVector::<f64, 2>::new(efficiency.sqrt(), 0.0),
        })
    }

    pub fn for_model<S: SignalModel<D>, const D: usize>(model: &EkfModel<S>) -> Result<Self> {
        Self::new(model.sensor.efficiency, model.signal.process_noise())
    }

    /// No photocurrent information reaches the filter.
    pub fn is_blind(&self) -> bool {
        self.r == 0.0
    }
}

/// Estimate and covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EkfState<const D: usize> {
    pub estimate: SVector<f64, D>,
    pub sigma: SMatrix<f64, D, D>,
    /// Number of steps where small negative eigenvalues were floored.
    pub eigen_floors: usize,
}

impl<const D: usize> EkfState<D> {
    pub fn sigma_omega<S: SignalModel<D>>(&self, model: &EkfModel<S>) -> f64 {
        let i = model.signal.omega_index();
        self.sigma[(i, i)]
    }
}

/// Continuous-time gain `K = (Sigma H^T + G S) / R`. A blind filter
/// (`R = 0`) gets zero gain.
pub fn kalman_gain<const D: usize>(
    sigma: &SMatrix<f64, D, D>,
    h: &SMatrix<f64, 1, D>,
    noise: &NoiseModel,
    g: &SMatrix<f64, D, 2>,
) -> SVector<f64, D> {
    if noise.is_blind() {
        return SVector::zeros();
    }
    (sigma * h.transpose() + g * noise.s) / noise.r
}

/// Right-hand side of the continuous covariance equation.
pub fn riccati_rhs<const D: usize>(
    sigma: &SMatrix<f64, D, D>,
    f: &SMatrix<f64, D, D>,
    g: &SMatrix<f64, D, 2>,
    h: &SMatrix<f64, 1, D>,
    noise: &NoiseModel,
) -> SMatrix<f64, D, D> {
    if noise.is_blind() {
        return f * sigma + sigma * f.transpose() + g * noise.q * g.transpose();
    }
    let rinv = 1.0 / noise.r;
    let gs = g * noise.s;
    let a = f - gs * h * rinv;
    let q_eff = noise.q - noise.s * noise.s.transpose() * rinv;
    let sh = sigma * h.transpose();
    a * sigma + sigma * a.transpose() + g * q_eff * g.transpose() - sh * sh.transpose() * rinv
}

/// One covariance step for frozen `F`, `G`, `H`. Returns the new covariance
/// (symmetrized, not yet checked) and the discrete gain applied to the
/// innovation `y dt - H x dt`.
pub fn covariance_step<const D: usize>(
    sigma: &SMatrix<f64, D, D>,
    f: &SMatrix<f64, D, D>,
    g: &SMatrix<f64, D, 2>,
    h: &SMatrix<f64, 1, D>,
    noise: &NoiseModel,
    dt: f64,
) -> (SMatrix<f64, D, D>, SVector<f64, D>) {
    let phi = SMatrix::<f64, D, D>::identity() + f * dt;
    let mut next = phi * sigma * phi.transpose() + g * noise.q * g.transpose() * dt;
    let mut gain = SVector::<f64, D>::zeros();
    if !noise.is_blind() {
        let sh = sigma * h.transpose();
        let c_xz = phi * sh + g * noise.s;
        let c_zz = noise.r + (h * sh)[0] * dt;
        gain = c_xz / c_zz;
        next -= c_xz * c_xz.transpose() * (dt / c_zz);
    }
    ((next + next.transpose()) * 0.5, gain)
}

/// Symmetric positive-semidefiniteness check with tolerance
/// `1e-9 trace(Sigma)`. Eigenvalues that are negative but inside the
/// tolerance are floored at zero and counted in `floors`.
pub fn check_psd<const D: usize>(
    sigma: SMatrix<f64, D, D>,
    floors: &mut usize,
) -> Result<SMatrix<f64, D, D>> {
    let trace = sigma.trace();
    if !trace.is_finite() {
        return Err(Error::FilterDivergence {
            step: 0,
            min_eigenvalue: f64::NAN,
        });
    }
    let tol = 1e-9 * trace.abs().max(f64::MIN_POSITIVE);
    let shifted = sigma + SMatrix::<f64, D, D>::identity() * tol;
    if shifted.cholesky().is_some() {
        return Ok(sigma);
    }
    // rare path: dynamic storage avoids extra dimension bounds on D
    let eig = DMatrix::from_column_slice(D, D, sigma.as_slice()).symmetric_eigen();
    let min = eig.eigenvalues.min();
    if min < -tol {
        return Err(Error::FilterDivergence {
            step: 0,
            min_eigenvalue: min,
        });
    }
    *floors += 1;
    let clipped = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0)));
    let rebuilt = &eig.eigenvectors * clipped * eig.eigenvectors.transpose();
    Ok(SMatrix::<f64, D, D>::from_column_slice(rebuilt.as_slice()))
}

/// Initial estimate: coherent spin state at the mean atom number with a
/// known (zero-covariance) atomic block, and the model's field prior.
pub fn init_ekf<S: SignalModel<D>, const D: usize>(
    model: &EkfModel<S>,
    prior_sigma0: f64,
) -> Result<EkfState<D>> {
    if !(prior_sigma0 > 0.0) {
        return Err(invalid("prior_sigma_rad_s", "must be positive"));
    }
    let css = css_initial_state(model.sensor.n_mean)?.to_array();
    let mut estimate = SVector::<f64, D>::zeros();
    estimate.fixed_rows_mut::<6>(0).copy_from_slice(&css);
    let mut sigma = SMatrix::<f64, D, D>::zeros();
    let (x0, v0) = model.signal.initial_signal(prior_sigma0);
    for i in 6..D {
        estimate[i] = x0[i - 6];
        sigma[(i, i)] = v0[i - 6];
    }
    Ok(EkfState {
        estimate,
        sigma,
        eigen_floors: 0,
    })
}

/// Advances the filter by one step given the photocurrent increment `y dt`
/// and the control `u` applied during the step.
pub fn ekf_step<S: SignalModel<D>, const D: usize>(
    state: &EkfState<D>,
    y_increment: f64,
    u: f64,
    model: &EkfModel<S>,
    noise: &NoiseModel,
) -> Result<EkfState<D>> {
    let dt = model.sensor.dt;
    let x = &state.estimate;
    let f = drift(x, u, model);
    let fj = jacobian_f(x, u, model);
    let g = jacobian_g(x, model);
    let h = measurement_row::<D>(&model.sensor);
    let (sigma, k) = covariance_step(&state.sigma, &fj, &g, &h, noise, dt);
    let innovation = y_increment - (h * x)[0] * dt;
    let estimate = x + f * dt + k * innovation;
    if !estimate.iter().all(|v| v.is_finite()) {
        return Err(Error::FilterDivergence {
            step: 0,
            min_eigenvalue: f64::NAN,
        });
    }
    let mut floors = state.eigen_floors;
    let sigma = check_psd(sigma, &mut floors)?;
    Ok(EkfState {
        estimate,
        sigma,
        eigen_floors: floors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sensor() -> SensorParams {
        SensorParams::warm_rubidium()
    }

    fn oup() -> OupEkf {
        EkfModel {
            sensor: sensor(),
            signal: OupModel {
                chi_k: 1.0,
                q_k: 1e6,
                omega_bar: sensor().omega_bar,
            },
        }
    }

    #[test]
    fn measurement_row_values() {
        let mut p = SensorParams {
            meas_strength: 1e-8,
            n_mean: 1e13,
            ..sensor()
        };
        let h = measurement_row::<7>(&p);
        assert!((h[(0, 1)] - 632.455_532).abs() < 1e-5);
        assert_eq!(h.iter().filter(|v| **v != 0.0).count(), 1);
        assert_eq!(measurement_row::<9>(&p)[(0, 1)], h[(0, 1)]);
        p.efficiency = 0.0;
        assert_eq!(measurement_row::<7>(&p).norm(), 0.0);
    }

    #[test]
    fn initial_state() {
        let m = oup();
        let s = init_ekf(&m, 10.0).unwrap();
        assert_eq!(s.sigma[(6, 6)], 100.0);
        assert_eq!(s.estimate[6], m.sensor.omega_bar);
        let css = css_initial_state(m.sensor.n_mean).unwrap().to_array();
        for (e, c) in s.estimate.iter().zip(css) {
            assert_eq!(*e, c);
        }
        assert_eq!(s.sigma.fixed_view::<6, 6>(0, 0).norm(), 0.0);
        assert!(init_ekf(&m, 0.0).is_err());

        let v = EkfModel {
            sensor: sensor(),
            signal: VdpModel {
                p: 1e3,
                k: 1.0,
                m: 0.00098,
                c: 1.0,
                t_filter: 0.003,
                q_k: 2.5e-7,
                omega_bar: 0.0,
                init_estimate: [3.0045; 3],
            },
        };
        let s = init_ekf(&v, 10.0).unwrap();
        assert_eq!(&s.estimate.as_slice()[6..], &[3.0045; 3]);
        assert_eq!(s.sigma[(8, 8)], 100.0);
    }

    #[test]
    fn gain_limits() {
        let m = oup();
        let s = init_ekf(&m, 10.0).unwrap();
        let g = jacobian_g(&s.estimate, &m);
        let h = measurement_row::<7>(&m.sensor);
        let noise = NoiseModel::for_model(&m).unwrap();
        let k0 = kalman_gain(&SMatrix::zeros(), &h, &noise, &g);
        assert_eq!(k0, g * noise.s / noise.r);
        let uncorrelated = NoiseModel {
            s: SVector::zeros(),
            ..noise
        };
        let k1 = kalman_gain(&s.sigma, &h, &uncorrelated, &g);
        assert_eq!(k1, s.sigma * h.transpose() / noise.r);
    }

    #[test]
    fn gain_matches_backaction_at_css() {
        // with an exact estimate the gain reproduces the diffusion of mean_y
        let m = oup();
        let s = init_ekf(&m, 10.0).unwrap();
        let g = jacobian_g(&s.estimate, &m);
        let h = measurement_row::<7>(&m.sensor);
        let noise = NoiseModel::for_model(&m).unwrap();
        let k = kalman_gain(&SMatrix::zeros(), &h, &noise, &g);
        let expected = 2.0 * (m.sensor.meas_strength * m.sensor.n_mean).sqrt() * 0.25;
        assert!((k[1] - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn blind_filter_predicts_only() {
        let mut m = oup();
        m.sensor.efficiency = 0.0;
        let noise = NoiseModel::for_model(&m).unwrap();
        let s = init_ekf(&m, 10.0).unwrap();
        let u = -m.sensor.omega_bar;
        let next = ekf_step(&s, 0.37, u, &m, &noise).unwrap();
        let f = drift(&s.estimate, u, &m);
        assert_eq!(next.estimate, s.estimate + f * m.sensor.dt);
        let fj = jacobian_f(&s.estimate, u, &m);
        let g = jacobian_g(&s.estimate, &m);
        let phi = SMatrix::<f64, 7, 7>::identity() + fj * m.sensor.dt;
        let expect = phi * s.sigma * phi.transpose() + g * noise.q * g.transpose() * m.sensor.dt;
        assert!((next.sigma - expect).norm() < 1e-12 * expect.norm());
    }

    #[test]
    fn vdp_kink_branch() {
        let v = VdpModel {
            p: 1e3,
            k: 1.0,
            m: 0.00098,
            c: 1.0,
            t_filter: 0.003,
            q_k: 0.0,
            omega_bar: 0.0,
            init_estimate: [0.0; 3],
        };
        let mut f = SMatrix::<f64, 9, 9>::zeros();
        let mut x = SVector::<f64, 9>::zeros();
        for (nu, want) in [(-1.0, -1.0 / 0.003), (1.0, 0.0), (0.0, -0.5 / 0.003)] {
            x[6] = nu;
            x[8] = 1.0;
            v.signal_jacobian(&x, &mut f);
            assert!((f[(8, 6)] - want).abs() < 1e-9);
            assert_eq!(f[(7, 7)], 0.0);
        }
    }

    #[test]
    fn step_is_first_order_consistent() {
        let m = oup();
        let noise = NoiseModel::for_model(&m).unwrap();
        let mut s = init_ekf(&m, 10.0).unwrap();
        // a generic positive definite covariance
        let b = SMatrix::<f64, 7, 7>::from_fn(|i, j| ((i * 7 + j) as f64 * 0.37).sin());
        s.sigma = b * b.transpose() * 1e-2;
        let u = -s.estimate[6];
        let fj = jacobian_f(&s.estimate, u, &m);
        let g = jacobian_g(&s.estimate, &m);
        let h = measurement_row::<7>(&m.sensor);
        let rhs = riccati_rhs(&s.sigma, &fj, &g, &h, &noise);
        let k_cont = kalman_gain(&s.sigma, &h, &noise, &g);
        let mut prev = f64::INFINITY;
        for dt in [1e-8, 1e-9, 1e-10] {
            let (next, k) = covariance_step(&s.sigma, &fj, &g, &h, &noise, dt);
            let err = ((next - s.sigma) / dt - rhs).norm() / rhs.norm();
            assert!(err < prev * 0.2, "dt = {dt}: {err}");
            prev = err;
            // the gain picks up an O(F dt) correction; F carries the carrier
            assert!((k - k_cont).norm() / k_cont.norm() < 1e6 * dt);
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn broad_prior_stays_positive() {
        let m = oup();
        let noise = NoiseModel::for_model(&m).unwrap();
        let mut s = init_ekf(&m, 10.0).unwrap();
        for _ in 0..20_000 {
            let u = -s.estimate[6];
            s = ekf_step(&s, 0.0, u, &m, &noise).unwrap();
        }
        assert!(s.sigma[(6, 6)] < 10.0 && s.sigma[(6, 6)] > 0.0);
    }

    #[test]
    fn divergence_detected() {
        let mut floors = 0;
        let bad = SMatrix::<f64, 2, 2>::new(1.0, 0.0, 0.0, -1.0);
        let err = check_psd(bad, &mut floors).unwrap_err();
        assert!(matches!(err, Error::FilterDivergence { .. }));
    }
}
