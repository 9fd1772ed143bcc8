//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use magtrack::ekf::{
    covariance_step, jacobian_f, jacobian_g, measurement_row, EkfModel, NoiseModel, OupModel,
};
use magtrack::sensor::{css_initial_state, SensorParams};
use nalgebra::{DMatrix, SMatrix, SVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type M7 = SMatrix<f64, 7, 7>;
pub type V7 = SVector<f64, 7>;

/// Sensor with rates low enough that dt = 1e-7 resolves every filter time
/// scale.
pub fn slow_sensor() -> SensorParams {
    SensorParams {
        n_mean: 1e10,
        n_sigma: 0.0,
        meas_strength: 1e-8,
        efficiency: 1.0,
        kappa_loc: 100.0,
        kappa_coll: 0.0,
        omega_bar: 2.0 * std::f64::consts::PI * 30e3,
        dt: 1e-7,
    }
}

pub fn slow_model() -> EkfModel<OupModel> {
    let sensor = slow_sensor();
    EkfModel {
        sensor,
        signal: OupModel {
            chi_k: 1.0,
            q_k: 1e6,
            omega_bar: sensor.omega_bar,
        },
    }
}

/// Jacobians held at the coherent state with the field compensated.
pub struct Frozen {
    pub f: M7,
    pub g: SMatrix<f64, 7, 2>,
    pub h: SMatrix<f64, 1, 7>,
    pub noise: NoiseModel,
}

pub fn frozen() -> Frozen {
    let m = slow_model();
    let css = css_initial_state(m.sensor.n_mean).unwrap().to_array();
    let mut x = V7::zeros();
    for i in 0..6 {
        x[i] = css[i];
    }
    x[6] = m.sensor.omega_bar;
    let u = -x[6];
    Frozen {
        f: jacobian_f(&x, u, &m),
        g: jacobian_g(&x, &m),
        h: measurement_row::<7>(&m.sensor),
        noise: NoiseModel::for_model(&m).unwrap(),
    }
}

/// Solves `A X + X A^T + C = 0` through the Kronecker form.
pub fn lyapunov(a: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let big = id.kronecker(a) + a.kronecker(&id);
    let rhs = DMatrix::from_column_slice(n * n, 1, (-c).as_slice());
    let sol = big.lu().solve(&rhs).expect("Lyapunov operator is singular");
    DMatrix::from_column_slice(n, n, sol.as_slice())
}

/// Stabilizing solution of the filter algebraic Riccati equation
///
/// ```text
/// F P + P F^T + G Q G^T - (P H^T + G S)(P H^T + G S)^T / R = 0
/// ```
///
/// by Newton-Kleinman iteration on the decorrelated form. `F - G S H / R`
/// must be stable so that the zero gain is a valid start.
pub fn care_newton_kleinman(fz: &Frozen) -> M7 {
    let n = 7;
    let f = DMatrix::from_column_slice(n, n, fz.f.as_slice());
    let g = DMatrix::from_column_slice(n, 2, fz.g.as_slice());
    let h = DMatrix::from_column_slice(1, n, fz.h.as_slice());
    let r = fz.noise.r;
    let s = DMatrix::from_column_slice(2, 1, fz.noise.s.as_slice());
    let q = DMatrix::from_column_slice(2, 2, fz.noise.q.as_slice());

    let a = &f - &g * &s * &h / r;
    let qt = &g * (&q - &s * s.transpose() / r) * g.transpose();
    let mut p = DMatrix::<f64>::zeros(n, n);
    for _ in 0..100 {
        let l = &p * h.transpose() / r;
        let ac = &a - &l * &h;
        let c = &qt + &l * l.transpose() * r;
        let next = lyapunov(&ac, &c);
        let next = (&next + next.transpose()) * 0.5;
        let change = (&next - &p).norm() / next.norm().max(f64::MIN_POSITIVE);
        p = next;
        if change < 1e-14 {
            break;
        }
    }
    M7::from_column_slice(p.as_slice())
}

/// Fixed point of the filter's one-step covariance map at step `dt`.
pub fn discrete_fixed_point(fz: &Frozen, dt: f64) -> M7 {
    let mut sigma = M7::zeros();
    sigma[(6, 6)] = 100.0;
    for _ in 0..2_000_000 {
        let (next, _) = covariance_step(&sigma, &fz.f, &fz.g, &fz.h, &fz.noise, dt);
        let change = (next - sigma).norm() / next.norm();
        sigma = next;
        if change < 1e-15 {
            break;
        }
    }
    sigma
}

/// Relative gap between the dt -> 0 extrapolation of the filter's
/// stationary covariance and the algebraic Riccati solution, together with
/// the relative Riccati residual of that solution.
pub fn frozen_riccati_gap() -> (f64, f64) {
    let fz = frozen();
    let reference = care_newton_kleinman(&fz);
    let h0 = 4e-8;
    let s1 = discrete_fixed_point(&fz, h0);
    let s2 = discrete_fixed_point(&fz, h0 / 2.0);
    let s4 = discrete_fixed_point(&fz, h0 / 4.0);
    // two Richardson levels for an error expansion in powers of dt
    let extrapolated = (s4 * 8.0 - s2 * 6.0 + s1) / 3.0;
    let gap = (extrapolated - reference).norm() / reference.norm();

    let rhs = magtrack::ekf::riccati_rhs(&reference, &fz.f, &fz.g, &fz.h, &fz.noise);
    let scale = (fz.f * reference).norm();
    (gap, rhs.norm() / scale)
}

/// Checkpoint of the linear Kalman filter consistency run.
#[derive(Debug, Clone, Copy)]
pub struct KfCheckpoint {
    pub t: f64,
    pub mse: f64,
    pub sigma: f64,
    /// Standard error of `mse` for Gaussian errors with variance `sigma`.
    pub stderr: f64,
}

/// Runs the filter on the Euler discretization of the frozen linear model,
/// with the truth drawn from the same model and prior, and compares the
/// empirical squared error of the field component with the filter variance.
pub fn linear_kf_consistency(trajectories: usize, seed: u64) -> Vec<KfCheckpoint> {
    let fz = frozen();
    let dt = 1e-7;
    let steps = 5000;
    let checkpoints = [100, 500, 1000, 2500, 5000];
    let phi = M7::identity() + fz.f * dt;
    let sqdt = dt.sqrt();
    let sq_q = fz.noise.q[(1, 1)].sqrt();
    let sq_r = fz.noise.r.sqrt();
    let sigma0 = 10.0;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = move || -> f64 { StandardNormal.sample(&mut rng) };
    let mut truth: Vec<V7> = (0..trajectories)
        .map(|_| {
            let mut x = V7::zeros();
            x[6] = sigma0 * normal();
            x
        })
        .collect();
    let mut est = vec![V7::zeros(); trajectories];
    let mut sigma = M7::zeros();
    sigma[(6, 6)] = sigma0 * sigma0;

    let mut out = Vec::new();
    for k in 1..=steps {
        let (next, gain) = covariance_step(&sigma, &fz.f, &fz.g, &fz.h, &fz.noise, dt);
        for (x, xh) in truth.iter_mut().zip(est.iter_mut()) {
            let dw = sqdt * normal();
            let dw_w = sqdt * normal();
            let z = (fz.h * *x)[0] * dt + sq_r * dw;
            let innov = z - (fz.h * *xh)[0] * dt;
            *xh = phi * *xh + gain * innov;
            let mut kick = fz.g.column(0) * dw;
            kick[6] += sq_q * dw_w;
            *x = phi * *x + kick;
        }
        sigma = next;
        if checkpoints.contains(&k) {
            let n = trajectories as f64;
            let mse = truth
                .iter()
                .zip(&est)
                .map(|(x, xh)| (x[6] - xh[6]).powi(2))
                .sum::<f64>()
                / n;
            let s = sigma[(6, 6)];
            out.push(KfCheckpoint {
                t: k as f64 * dt,
                mse,
                sigma: s,
                stderr: s * (2.0 / n).sqrt(),
            });
        }
    }
    out
}

/// Largest relative entry mismatch between the analytic drift Jacobian and
/// central differences over random estimates, for the 7- and 9-dimensional
/// filters. Entries below the difference quotient's roundoff level are
/// compared at that level.
pub fn jacobian_fd_worst(states: usize, seed: u64) -> f64 {
    use magtrack::ekf::{drift, VdpModel};
    use rand::Rng;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sensor = SensorParams {
        kappa_coll: 3.0,
        ..SensorParams::warm_rubidium()
    };
    let oup = EkfModel {
        sensor,
        signal: OupModel {
            chi_k: 2.0,
            q_k: 1e6,
            omega_bar: sensor.omega_bar,
        },
    };
    let vdp = EkfModel {
        sensor,
        signal: VdpModel {
            p: 1e3,
            k: 1.0,
            m: 0.00098,
            c: 1.0,
            t_filter: 0.003,
            q_k: 1e-6,
            omega_bar: sensor.omega_bar,
            init_estimate: [0.0; 3],
        },
    };
    let half = sensor.n_mean.sqrt() / 2.0;
    let atomic = |rng: &mut ChaCha8Rng| -> [f64; 6] {
        [
            rng.random_range(0.1..1.0) * half,
            rng.random_range(-1e-3..1e-3) * half,
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
            rng.random_range(-0.5..0.5),
        ]
    };

    fn column_check<const D: usize>(
        x: &SVector<f64, D>,
        analytic: &SMatrix<f64, D, D>,
        f: impl Fn(&SVector<f64, D>) -> SVector<f64, D>,
    ) -> f64 {
        // size of the largest term in each row, for the roundoff floor
        let fx = f(x);
        let row_scale: Vec<f64> = (0..D)
            .map(|i| fx[i].abs() + (0..D).map(|k| (analytic[(i, k)] * x[k]).abs()).sum::<f64>())
            .collect();
        let mut worst: f64 = 0.0;
        for j in 0..D {
            // the drift is at most quadratic away from the |nu| kink, so
            // central differences are exact and eps only sets the roundoff
            let eps = 1e-2 * x[j].abs().max(1.0);
            let mut xp = *x;
            let mut xm = *x;
            xp[j] += eps;
            xm[j] -= eps;
            let fd = (f(&xp) - f(&xm)) / (2.0 * eps);
            for i in 0..D {
                let an = analytic[(i, j)];
                let resolution = 1e-15 * row_scale[i] / eps;
                let err = (fd[i] - an).abs() / (an.abs() + 1e5 * resolution).max(f64::MIN_POSITIVE);
                worst = worst.max(err);
            }
        }
        worst
    }

    let mut worst: f64 = 0.0;
    for _ in 0..states {
        let a = atomic(&mut rng);
        let mut x = SVector::<f64, 7>::zeros();
        x.fixed_rows_mut::<6>(0).copy_from_slice(&a);
        x[6] = sensor.omega_bar + rng.random_range(-20.0..20.0);
        let u = -sensor.omega_bar + rng.random_range(-5.0..5.0);
        let jf = jacobian_f(&x, u, &oup);
        worst = worst.max(column_check(&x, &jf, |y| drift(y, u, &oup)));

        let a = atomic(&mut rng);
        let mut x = SVector::<f64, 9>::zeros();
        x.fixed_rows_mut::<6>(0).copy_from_slice(&a);
        let nu: f64 = rng.random_range(0.1..8.0);
        x[6] = if rng.random::<bool>() { nu } else { -nu };
        x[7] = rng.random_range(-3.0..8.0);
        x[8] = rng.random_range(0.0..3.0);
        let u = -sensor.omega_bar + rng.random_range(-5.0..5.0);
        let jf = jacobian_f(&x, u, &vdp);
        worst = worst.max(column_check(&x, &jf, |y| drift(y, u, &vdp)));
    }
    worst
}
