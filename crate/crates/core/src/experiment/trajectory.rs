//! One closed-loop run: truth, photocurrent, filter, feedback.

use serde::Serialize;

use super::config::{FilterConfig, ScenarioConfig, SignalConfig};
use super::rng::{stream, Channel, NoiseSource, SeededNoise};
use super::sample_atom_number;
use crate::control::lqr_control;
use crate::ekf::{ekf_step, init_ekf, EkfModel, NoiseModel, SignalModel};
use crate::error::Result;
use crate::sensor::{css_initial_state, photocurrent_sample, squeezing_db, step_truth};
use crate::signals::{noisy_drive_increment, OupParams, VdpParams, VdpState};

/// Recorded time series of one trajectory. Frequencies are deviations from
/// the carrier `omega_bar`, except `u`, which is the raw control.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub index: usize,
    pub t: Vec<f64>,
    /// Field the estimate is scored against: the process itself for the
    /// Ornstein-Uhlenbeck signal, the clean waveform for the Van der Pol one.
    pub omega_true: Vec<f64>,
    /// Field actually driving the spins, averaged over the preceding stride.
    pub omega_drive: Vec<f64>,
    pub omega_est: Vec<f64>,
    pub u: Vec<f64>,
    /// Photocurrent increment `y dt` of the last step before the sample.
    pub y_increment: Vec<f64>,
    pub squeezing_db: Vec<f64>,
    /// Filter variance of the frequency estimate.
    pub sigma_omega: Vec<f64>,
    pub drawn_n: f64,
    pub psd_repairs: usize,
    pub eigen_floors: usize,
}

impl TrajectoryRecord {
    fn with_capacity(index: usize, n: usize, drawn_n: f64) -> Self {
        Self {
            index,
            t: Vec::with_capacity(n),
            omega_true: Vec::with_capacity(n),
            omega_drive: Vec::with_capacity(n),
            omega_est: Vec::with_capacity(n),
            u: Vec::with_capacity(n),
            y_increment: Vec::with_capacity(n),
            squeezing_db: Vec::with_capacity(n),
            sigma_omega: Vec::with_capacity(n),
            drawn_n,
            psd_repairs: 0,
            eigen_floors: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// True field generator.
enum Truth {
    Oup {
        prm: OupParams,
        omega: f64,
    },
    Vdp {
        prm: VdpParams,
        state: VdpState,
        omega_bar: f64,
    },
}

impl Truth {
    /// Deviation the estimate is scored against.
    fn reference(&self) -> f64 {
        match self {
            Truth::Oup { prm, omega } => omega - prm.omega_bar,
            Truth::Vdp { state, .. } => state.omega,
        }
    }

    /// Returns the precession rate during the step and advances the field.
    fn advance(&mut self, dt: f64, noise: &mut impl NoiseSource) -> f64 {
        let dw = dt.sqrt() * noise.signal();
        match self {
            Truth::Oup { prm, omega } => {
                let drive = *omega;
                *omega = prm.step(*omega, dw, dt);
                drive
            }
            Truth::Vdp {
                prm,
                state,
                omega_bar,
            } => {
                let phase = noisy_drive_increment(state.omega, dw, dt, prm.noise_density);
                *state = prm.step(state, dt);
                *omega_bar + phase / dt
            }
        }
    }
}

/// Runs trajectory `index` with the scenario's seeded noise streams.
pub fn run_trajectory(cfg: &ScenarioConfig, index: usize) -> Result<TrajectoryRecord> {
    let mut noise = SeededNoise::new(cfg.run.seed, index as u64);
    run_trajectory_with(cfg, index, &mut noise)
}

/// Runs trajectory `index` drawing the measurement and field noise from
/// `noise`. The atom number still comes from the seeded stream.
pub fn run_trajectory_with(
    cfg: &ScenarioConfig,
    index: usize,
    noise: &mut impl NoiseSource,
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    let mut n_rng = stream(cfg.run.seed, index as u64, Channel::AtomNumber);
    let n = sample_atom_number(cfg.sensor.n_mean, cfg.sensor.n_sigma, &mut n_rng)?;
    match (&cfg.signal, &cfg.filter) {
        (SignalConfig::Oup(s), FilterConfig::Oup(f)) => {
            let prm = cfg.oup_params(s);
            let omega = prm.omega_bar + s.sigma0_rad_s * noise.signal();
            let truth = Truth::Oup { prm, omega };
            simulate(
                cfg,
                &cfg.oup_filter(f),
                f.prior_sigma_rad_s,
                truth,
                n,
                index,
                noise,
            )
        }
        (SignalConfig::Vdp(s), FilterConfig::Vdp(f)) => {
            let truth = Truth::Vdp {
                prm: *s,
                state: s.initial_state(),
                omega_bar: cfg.sensor.omega_bar,
            };
            simulate(
                cfg,
                &cfg.vdp_filter(f),
                f.prior_sigma_rad_s,
                truth,
                n,
                index,
                noise,
            )
        }
        _ => unreachable!("validated"),
    }
}

fn simulate<S: SignalModel<D>, const D: usize>(
    cfg: &ScenarioConfig,
    model: &EkfModel<S>,
    prior_sigma: f64,
    mut truth: Truth,
    n: f64,
    index: usize,
    noise: &mut impl NoiseSource,
) -> Result<TrajectoryRecord> {
    let p = &cfg.sensor;
    let dt = p.dt;
    let omega_bar = p.omega_bar;
    let stride = cfg.run.record_stride;
    let n_steps = cfg.n_steps();
    let wi = model.signal.omega_index();

    let noise_model = NoiseModel::for_model(model)?;
    let mut atoms = css_initial_state(n)?;
    let mut filter = init_ekf(model, prior_sigma)?;
    let control =
        |x: &nalgebra::SVector<f64, D>| lqr_control(model.signal.larmor(x), x[1], &cfg.control);
    let mut u = control(&filter.estimate);

    let mut rec = TrajectoryRecord::with_capacity(index, n_steps / stride + 1, n);
    let push = |rec: &mut TrajectoryRecord,
                t: f64,
                truth_dev: f64,
                drive_dev: f64,
                est: f64,
                u: f64,
                ydt: f64,
                sq: f64,
                sig: f64| {
        rec.t.push(t);
        rec.omega_true.push(truth_dev);
        rec.omega_drive.push(drive_dev);
        rec.omega_est.push(est);
        rec.u.push(u);
        rec.y_increment.push(ydt);
        rec.squeezing_db.push(sq);
        rec.sigma_omega.push(sig);
    };
    let sq0 = squeezing_db(&atoms, n).unwrap_or(f64::NAN);
    push(
        &mut rec,
        0.0,
        truth.reference(),
        truth.reference(),
        model.signal.larmor(&filter.estimate) - omega_bar,
        u,
        0.0,
        sq0,
        filter.sigma[(wi, wi)],
    );

    let mut drive_acc = 0.0;
    for k in 0..n_steps {
        let dw = dt.sqrt() * noise.measurement();
        let ydt = photocurrent_sample(&atoms, dw, p, n);
        let drive = truth.advance(dt, noise);
        drive_acc += drive - omega_bar;
        let stepped = step_truth(&atoms, drive, u, dw, p, n).map_err(|e| e.at_step(k))?;
        atoms = stepped.moments;
        rec.psd_repairs += stepped.psd_repaired as usize;
        filter = ekf_step(&filter, ydt, u, model, &noise_model).map_err(|e| e.at_step(k))?;
        u = control(&filter.estimate);

        if (k + 1) % stride == 0 {
            let sq = squeezing_db(&atoms, n).unwrap_or(f64::NAN);
            push(
                &mut rec,
                (k + 1) as f64 * dt,
                truth.reference(),
                drive_acc / stride as f64,
                model.signal.larmor(&filter.estimate) - omega_bar,
                u,
                ydt,
                sq,
                filter.sigma[(wi, wi)],
            );
            drive_acc = 0.0;
        }
    }
    rec.eigen_floors = filter.eigen_floors;
    Ok(rec)
}
