use nalgebra::{SMatrix, SVector};

use super::{EkfModel, SignalModel};
use crate::sensor::{atomic_drift, AtomicMoments};

pub(crate) fn atomic_part<const D: usize>(x: &SVector<f64, D>) -> AtomicMoments {
    AtomicMoments::from_array([x[0], x[1], x[2], x[3], x[4], x[5]])
}

/// Noise-free drift `f(x, u, 0)` of the joint estimate.
pub fn drift<S: SignalModel<D>, const D: usize>(
    x: &SVector<f64, D>,
    u: f64,
    model: &EkfModel<S>,
) -> SVector<f64, D> {
    let p = &model.sensor;
    let w = model.signal.larmor(x) + u;
    let a = atomic_drift(&atomic_part(x), w, p, p.n_mean).to_array();
    let mut f = SVector::<f64, D>::zeros();
    f.fixed_rows_mut::<6>(0).copy_from_slice(&a);
    model.signal.signal_drift(x, &mut f);
    f
}

/// `F = df/dx` at `(x, u)`.
pub fn jacobian_f<S: SignalModel<D>, const D: usize>(
    x: &SVector<f64, D>,
    u: f64,
    model: &EkfModel<S>,
) -> SMatrix<f64, D, D> {
    let p = &model.sensor;
    let (kc, kl, m) = (p.kappa_coll, p.kappa_loc, p.meas_strength);
    let en = p.efficiency * p.n_mean;
    let w = model.signal.larmor(x) + u;
    let (mx, my, vx, vy, c) = (x[0], x[1], x[2], x[3], x[5]);
    let wi = model.signal.omega_index();

    let mut f = SMatrix::<f64, D, D>::zeros();
    f[(0, 0)] = -0.5 * (kc + 2.0 * kl + m);
    f[(0, 1)] = -w;
    f[(0, wi)] = -my;

    f[(1, 0)] = w;
    f[(1, 1)] = -0.5 * (kc + 2.0 * kl);
    f[(1, wi)] = mx;

    f[(2, 1)] = 2.0 * kc * my;
    f[(2, 2)] = -kc - 2.0 * kl - m;
    f[(2, 3)] = kc;
    f[(2, 4)] = m;
    f[(2, 5)] = -2.0 * w - 8.0 * m * en * c;
    f[(2, wi)] = -2.0 * c;

    f[(3, 0)] = 2.0 * kc * mx;
    f[(3, 2)] = kc;
    f[(3, 3)] = -kc - 2.0 * kl - 8.0 * m * en * vy;
    f[(3, 5)] = 2.0 * w;
    f[(3, wi)] = 2.0 * c;

    f[(4, 0)] = 2.0 * m * mx;
    f[(4, 2)] = m;
    f[(4, 4)] = -m;

    f[(5, 0)] = -kc * my;
    f[(5, 1)] = -kc * mx;
    f[(5, 2)] = w;
    f[(5, 3)] = -w - 4.0 * m * en * c;
    f[(5, 5)] = -2.0 * kc - 2.0 * kl - 0.5 * m * (1.0 + 8.0 * en * vy);
    f[(5, wi)] = vx - vy;

    model.signal.signal_jacobian(x, &mut f);
    f
}

/// `G = df/dxi`: column 0 is the measurement noise, column 1 the signal noise.
pub fn jacobian_g<S: SignalModel<D>, const D: usize>(
    x: &SVector<f64, D>,
    model: &EkfModel<S>,
) -> SMatrix<f64, D, 2> {
    let p = &model.sensor;
    let g0 = 2.0 * (p.efficiency * p.meas_strength * p.n_mean).sqrt();
    let mut g = SMatrix::<f64, D, 2>::zeros();
    g[(0, 0)] = g0 * x[5];
    g[(1, 0)] = g0 * x[3];
    g[(model.signal.omega_index(), 1)] = 1.0;
    g
}

/// Measurement row `H`: `2 eta sqrt(M N_mean)` on the `mean_y` slot.
pub fn measurement_row<const D: usize>(p: &crate::sensor::SensorParams) -> SMatrix<f64, 1, D> {
    let mut h = SMatrix::<f64, 1, D>::zeros();
    h[(0, 1)] = 2.0 * p.efficiency * (p.meas_strength * p.n_mean).sqrt();
    h
}
