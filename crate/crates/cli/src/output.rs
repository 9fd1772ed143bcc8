//! CSV series, JSON summaries and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use magtrack::experiment::{
    cycle_summary, plateau, squeezing_summary, EnsembleOutput, ScenarioConfig,
};
use magtrack::sensor::RB87_GYROMAGNETIC_RATIO;
use serde::{Deserialize, Serialize};
use serde_json::json;

/// Bumped whenever a column is renamed, removed or reordered.
pub const CSV_SCHEMA_VERSION: u32 = 1;

pub const ENSEMBLE_COLUMNS: [&str; 7] = [
    "t_s",
    "amse_rad2_s2",
    "sqrt_amse",
    "ekf_var_mean",
    "squeezing_mean_db",
    "bound_rad2_s2",
    "amse_stderr_rad2_s2",
];

/// Appended to the ensemble table for heartbeat scenarios; taken from
/// trajectory 0.
pub const MCG_COLUMNS: [&str; 4] = ["clean_rad_s", "noisy_rad_s", "clean_pt", "noisy_pt"];

pub const TRAJECTORY_COLUMNS: [&str; 10] = [
    "trajectory",
    "t_s",
    "omega_true_rad_s",
    "omega_drive_rad_s",
    "omega_est_rad_s",
    "u_rad_s",
    "y_increment",
    "squeezing_db",
    "ekf_var_rad2_s2",
    "omega_est_pt",
];

/// Field in picotesla corresponding to a precession-rate deviation.
pub fn rad_s_to_pt(w: f64) -> f64 {
    w / RB87_GYROMAGNETIC_RATIO * 1e12
}

fn rad_s_to_hz(w: f64) -> f64 {
    w / (2.0 * std::f64::consts::PI)
}

fn num(v: f64) -> String {
    v.to_string()
}

pub fn ensemble_header(mcg: bool) -> Vec<&'static str> {
    let mut h = ENSEMBLE_COLUMNS.to_vec();
    if mcg {
        h.extend(MCG_COLUMNS);
    }
    h
}

pub fn write_ensemble_csv(path: &Path, out: &EnsembleOutput, mcg: bool) -> Result<()> {
    let s = &out.stats;
    let mut w = csv::Writer::from_path(path).with_context(|| path.display().to_string())?;
    w.write_record(ensemble_header(mcg))?;
    let first = out.samples.first();
    for i in 0..s.t.len() {
        let bound = s.bound.as_ref().map(|b| num(b[i])).unwrap_or_default();
        let mut row = vec![
            num(s.t[i]),
            num(s.amse[i]),
            num(s.amse[i].sqrt()),
            num(s.mean_sigma_omega[i]),
            num(s.mean_squeezing_db[i]),
            bound,
            num(s.amse_stderr[i]),
        ];
        if mcg {
            let (clean, noisy) = first
                .map(|r| (r.omega_true[i], r.omega_drive[i]))
                .unwrap_or((f64::NAN, f64::NAN));
            row.extend([
                num(clean),
                num(noisy),
                num(rad_s_to_pt(clean)),
                num(rad_s_to_pt(noisy)),
            ]);
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectory_csv(path: &Path, out: &EnsembleOutput) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| path.display().to_string())?;
    w.write_record(TRAJECTORY_COLUMNS)?;
    for r in &out.samples {
        for i in 0..r.len() {
            w.write_record([
                r.index.to_string(),
                num(r.t[i]),
                num(r.omega_true[i]),
                num(r.omega_drive[i]),
                num(r.omega_est[i]),
                num(r.u[i]),
                num(r.y_increment[i]),
                num(r.squeezing_db[i]),
                num(r.sigma_omega[i]),
                num(rad_s_to_pt(r.omega_est[i])),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Scalar results. Plateaus cover the last 80% and the last half of the
/// horizon; errors are given in rad/s and in Hz.
pub fn summary(cfg: &ScenarioConfig, out: &EnsembleOutput) -> serde_json::Value {
    let s = &out.stats;
    let horizon = s.t.last().copied().unwrap_or(0.0);
    let plateaus: Vec<_> = [0.2, 0.5]
        .iter()
        .map(|f| {
            let p = plateau(s, f * horizon, horizon);
            json!({
                "t_start_s": p.t_start,
                "t_end_s": p.t_end,
                "sqrt_amse_rad_s": p.sqrt_amse,
                "sqrt_amse_hz": rad_s_to_hz(p.sqrt_amse),
                "sqrt_ekf_var_rad_s": p.sqrt_sigma_omega,
                "sqrt_bound_rad_s": p.sqrt_bound,
                "sqrt_bound_hz": p.sqrt_bound.map(rad_s_to_hz),
            })
        })
        .collect();
    let sq = squeezing_summary(s);
    let cycles: Vec<_> = match out.samples.first() {
        Some(r) if cfg.is_mcg() => (2..)
            .map_while(|c| cycle_summary(s, &r.omega_true, c))
            .map(|c| {
                json!({
                    "cycle": c.cycle,
                    "t_peak_s": c.t_peak_s,
                    "period_s": c.period_s,
                    "r_wave_sqrt_amse_rad_s": c.r_wave_sqrt_amse,
                    "r_wave_sqrt_amse_hz": rad_s_to_hz(c.r_wave_sqrt_amse),
                    "cycle_mean_sqrt_amse_rad_s": c.cycle_mean_sqrt_amse,
                })
            })
            .collect(),
        _ => Vec::new(),
    };
    json!({
        "scenario": cfg.name,
        "trajectories_requested": cfg.run.trajectories,
        "trajectories_used": s.n_used,
        "failures": out.failures.iter().map(|(i, e)| json!({"trajectory": i, "error": e.to_string()})).collect::<Vec<_>>(),
        "psd_repairs": s.psd_repairs,
        "eigen_floors": s.eigen_floors,
        "plateaus": plateaus,
        "squeezing": {
            "onset_s": sq.onset_s,
            "min_db": sq.min_db,
            "t_min_s": sq.t_min_s,
        },
        "cycles": cycles,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub command: String,
    pub source: String,
    pub seed: Option<u64>,
    pub seed_generated: bool,
    pub threads: usize,
    pub runtime_s: f64,
    pub csv_schema: u32,
    /// Resolved scenario as TOML; re-parses to the configuration that ran.
    pub config: Option<String>,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(self)? + "\n")
            .with_context(|| path.display().to_string())?;
        Ok(path)
    }
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")
        .with_context(|| path.display().to_string())
}
