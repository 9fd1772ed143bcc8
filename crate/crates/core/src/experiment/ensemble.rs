//! Monte Carlo ensembles and their statistics.

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ScenarioConfig, SignalConfig};
use super::trajectory::{run_trajectory, TrajectoryRecord};
use crate::bounds::{cs_bound_finite_prior, BoundQuery};
use crate::error::{Error, Result};

/// Trajectories simulated concurrently before folding into the statistics.
const BATCH: usize = 32;

/// Pointwise statistics on the recording grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub t: Vec<f64>,
    /// Mean squared error of the frequency estimate.
    pub amse: Vec<f64>,
    /// Standard error of `amse`.
    pub amse_stderr: Vec<f64>,
    pub mean_sigma_omega: Vec<f64>,
    pub mean_squeezing_db: Vec<f64>,
    /// Finite-prior lower bound at the mean atom number (field-noise
    /// scenarios only).
    pub bound: Option<Vec<f64>>,
    pub n_used: usize,
    pub psd_repairs: usize,
    pub eigen_floors: usize,
}

/// Full result of an ensemble run.
#[derive(Debug, Clone)]
pub struct EnsembleOutput {
    pub stats: EnsembleStats,
    /// Complete records of the first `run.sample_records` trajectories.
    pub samples: Vec<TrajectoryRecord>,
    /// Trajectories that failed, with their error.
    pub failures: Vec<(usize, Error)>,
}

/// Which recorded series the estimate is compared with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reference {
    /// `omega_true`: the field process, or the clean waveform.
    Clean,
    /// `omega_drive`: the stride-averaged field that actually drove the spins.
    Drive,
}

/// Single-pass running mean and variance.
#[derive(Debug, Clone)]
struct Welford {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(len: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    fn push(&mut self, xs: impl Iterator<Item = f64>) {
        self.n += 1;
        let n = self.n as f64;
        for ((m, s), x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(xs) {
            let d = x - *m;
            *m += d / n;
            *s += d * (x - *m);
        }
    }

    fn stderr(&self) -> Vec<f64> {
        if self.n < 2 {
            return vec![f64::NAN; self.mean.len()];
        }
        let n = self.n as f64;
        self.m2.iter().map(|s| (s / (n - 1.0) / n).sqrt()).collect()
    }
}

fn squared_errors<'a>(
    r: &'a TrajectoryRecord,
    reference: Reference,
) -> impl Iterator<Item = f64> + 'a {
    let truth = match reference {
        Reference::Clean => &r.omega_true,
        Reference::Drive => &r.omega_drive,
    };
    r.omega_est
        .iter()
        .zip(truth)
        .map(|(e, t)| (e - t) * (e - t))
}

/// Pointwise mean of `(omega_est - reference)^2` over the records.
pub fn amse_series(records: &[TrajectoryRecord], reference: Reference) -> Result<Vec<f64>> {
    let first = records.first().ok_or(Error::InvalidParameter {
        name: "records",
        reason: "at least one record is required".into(),
    })?;
    if records.iter().any(|r| r.t != first.t) {
        return Err(Error::GridMismatch);
    }
    let mut acc = Welford::new(first.len());
    for r in records {
        acc.push(squared_errors(r, reference));
    }
    Ok(acc.mean)
}

struct Accumulator {
    t: Vec<f64>,
    err: Welford,
    sigma: Welford,
    squeezing: Welford,
    psd_repairs: usize,
    eigen_floors: usize,
}

impl Accumulator {
    fn new(t: Vec<f64>) -> Self {
        let n = t.len();
        Self {
            t,
            err: Welford::new(n),
            sigma: Welford::new(n),
            squeezing: Welford::new(n),
            psd_repairs: 0,
            eigen_floors: 0,
        }
    }

    fn push(&mut self, r: &TrajectoryRecord, reference: Reference) -> Result<()> {
        if r.t != self.t {
            return Err(Error::GridMismatch);
        }
        self.err.push(squared_errors(r, reference));
        self.sigma.push(r.sigma_omega.iter().copied());
        self.squeezing.push(r.squeezing_db.iter().copied());
        self.psd_repairs += r.psd_repairs;
        self.eigen_floors += r.eigen_floors;
        Ok(())
    }
}

/// Lower bound on the recording grid for field-noise scenarios.
pub fn bound_series(cfg: &ScenarioConfig, t: &[f64]) -> Option<Vec<f64>> {
    let SignalConfig::Oup(s) = &cfg.signal else {
        return None;
    };
    let q = BoundQuery {
        t: 1.0,
        n_atoms: cfg.sensor.n_mean,
        n_sigma: cfg.sensor.n_sigma,
        q_omega: s.q_omega_rad2_s3,
        kappa_loc: cfg.sensor.kappa_loc,
        kappa_coll: cfg.sensor.kappa_coll,
        sigma0: s.sigma0_rad_s,
        chi: s.chi_hz,
    };
    t.iter()
        .map(|&t| {
            if t == 0.0 {
                Some(q.sigma0 * q.sigma0)
            } else {
                cs_bound_finite_prior(&BoundQuery { t, ..q }).ok()
            }
        })
        .collect()
}

/// Runs all trajectories of the scenario on the current rayon pool.
///
/// Trajectories are folded into the statistics in index order, so the
/// result does not depend on the number of worker threads. Fails if more
/// than 1% of the trajectories fail.
pub fn run_ensemble(cfg: &ScenarioConfig) -> Result<EnsembleOutput> {
    cfg.validate()?;
    let total = cfg.run.trajectories;
    let reference = Reference::Clean;
    let mut acc: Option<Accumulator> = None;
    let mut samples = Vec::new();
    let mut failures = Vec::new();

    for start in (0..total).step_by(BATCH) {
        let end = (start + BATCH).min(total);
        let batch: Vec<Result<TrajectoryRecord>> = (start..end)
            .into_par_iter()
            .map(|i| run_trajectory(cfg, i))
            .collect();
        for (i, res) in (start..end).zip(batch) {
            match res {
                Ok(rec) => {
                    let a = acc.get_or_insert_with(|| Accumulator::new(rec.t.clone()));
                    a.push(&rec, reference)?;
                    if i < cfg.run.sample_records {
                        samples.push(rec);
                    }
                }
                Err(e) => failures.push((i, e)),
            }
        }
    }

    if failures.len() * 100 > total || acc.is_none() {
        let first = failures
            .first()
            .map(|(_, e)| e.clone())
            .expect("an empty ensemble has failures");
        return Err(Error::EnsembleFailed {
            failed: failures.len(),
            total,
            first: Box::new(first),
        });
    }
    let acc = acc.expect("checked above");
    let bound = bound_series(cfg, &acc.t);
    let stats = EnsembleStats {
        amse_stderr: acc.err.stderr(),
        amse: acc.err.mean,
        mean_sigma_omega: acc.sigma.mean,
        mean_squeezing_db: acc.squeezing.mean,
        bound,
        n_used: acc.err.n,
        psd_repairs: acc.psd_repairs,
        eigen_floors: acc.eigen_floors,
        t: acc.t,
    };
    Ok(EnsembleOutput {
        stats,
        samples,
        failures,
    })
}

fn window(t: &[f64], t0: f64, t1: f64) -> impl Iterator<Item = usize> + '_ {
    // half-grid slack so that window edges on grid points are included
    let eps = if t.len() > 1 {
        0.5 * (t[1] - t[0])
    } else {
        0.0
    };
    t.iter()
        .enumerate()
        .filter(move |(_, &x)| x >= t0 - eps && x <= t1 + eps)
        .map(|(i, _)| i)
}

fn window_mean(t: &[f64], v: &[f64], t0: f64, t1: f64) -> f64 {
    let (sum, n) = window(t, t0, t1).fold((0.0, 0usize), |(s, n), i| (s + v[i], n + 1));
    sum / n as f64
}

/// Plateau summaries of an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlateauSummary {
    pub t_start: f64,
    pub t_end: f64,
    /// Square root of the window-averaged mean squared error.
    pub sqrt_amse: f64,
    /// Square root of the window-averaged filter variance.
    pub sqrt_sigma_omega: f64,
    pub sqrt_bound: Option<f64>,
}

pub fn plateau(stats: &EnsembleStats, t0: f64, t1: f64) -> PlateauSummary {
    PlateauSummary {
        t_start: t0,
        t_end: t1,
        sqrt_amse: window_mean(&stats.t, &stats.amse, t0, t1).sqrt(),
        sqrt_sigma_omega: window_mean(&stats.t, &stats.mean_sigma_omega, t0, t1).sqrt(),
        sqrt_bound: stats
            .bound
            .as_ref()
            .map(|b| window_mean(&stats.t, b, t0, t1).sqrt()),
    }
}

/// Spin-squeezing milestones of the ensemble mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SqueezingSummary {
    /// First recorded time with negative mean squeezing.
    pub onset_s: Option<f64>,
    pub min_db: f64,
    pub t_min_s: f64,
}

pub fn squeezing_summary(stats: &EnsembleStats) -> SqueezingSummary {
    let onset_s = stats
        .t
        .iter()
        .zip(&stats.mean_squeezing_db)
        // the coherent state sits at 0 dB up to rounding
        .find(|(_, s)| **s < -1e-9)
        .map(|(t, _)| *t);
    let (i_min, min_db) = stats
        .mean_squeezing_db
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, s)| !s.is_nan())
        .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    SqueezingSummary {
        onset_s,
        min_db,
        t_min_s: stats.t[i_min],
    }
}

/// Times of the R-wave maxima of a waveform: local maxima above half the
/// global maximum, separated by at least `min_gap` seconds.
pub fn r_peaks(t: &[f64], w: &[f64], min_gap: f64) -> Vec<f64> {
    let top = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut peaks: Vec<(f64, f64)> = Vec::new();
    for i in 1..w.len().saturating_sub(1) {
        if w[i] > 0.5 * top && w[i] >= w[i - 1] && w[i] > w[i + 1] {
            match peaks.last_mut() {
                Some(last) if t[i] - last.0 < min_gap => {
                    if w[i] > last.1 {
                        *last = (t[i], w[i]);
                    }
                }
                _ => peaks.push((t[i], w[i])),
            }
        }
    }
    peaks.into_iter().map(|p| p.0).collect()
}

/// Error summary around a heartbeat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleSummary {
    pub cycle: usize,
    pub t_peak_s: f64,
    pub period_s: f64,
    /// Largest root mean squared error within 1 ms of the R-wave.
    pub r_wave_sqrt_amse: f64,
    /// Mean root mean squared error over the cycle centred on the R-wave.
    pub cycle_mean_sqrt_amse: f64,
}

/// Summary of cycle `cycle` (1-based) using the clean waveform recorded in
/// `clean`. `None` if that many R-waves are not on the grid.
pub fn cycle_summary(stats: &EnsembleStats, clean: &[f64], cycle: usize) -> Option<CycleSummary> {
    let peaks = r_peaks(&stats.t, clean, 5e-3);
    if cycle < 2 || peaks.len() < cycle {
        return None;
    }
    let tp = peaks[cycle - 1];
    let period = tp - peaks[cycle - 2];
    let t_end = *stats.t.last()?;
    if tp + 0.5 * period > t_end + 1e-12 {
        return None;
    }
    let rmse: Vec<f64> = stats.amse.iter().map(|v| v.sqrt()).collect();
    let r_wave = window(&stats.t, tp - 1e-3, tp + 1e-3)
        .map(|i| rmse[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let cycle_mean = window_mean(&stats.t, &rmse, tp - 0.5 * period, tp + 0.5 * period);
    Some(CycleSummary {
        cycle,
        t_peak_s: tp,
        period_s: period,
        r_wave_sqrt_amse: r_wave,
        cycle_mean_sqrt_amse: cycle_mean,
    })
}
