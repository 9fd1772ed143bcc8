//! Scenario configuration. Keys carry their units.

use serde::{Deserialize, Serialize};

use crate::control::LqrParams;
use crate::ekf::{EkfModel, OupModel, VdpModel};
use crate::error::{invalid, Result};
use crate::sensor::SensorParams;
use crate::signals::{OupParams, VdpParams};

/// True field process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SignalConfig {
    Oup(OupSignal),
    Vdp(VdpParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OupSignal {
    pub chi_hz: f64,
    pub q_omega_rad2_s3: f64,
    /// Spread of the initial field around the carrier.
    pub sigma0_rad_s: f64,
}

/// Field model assumed by the filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FilterConfig {
    Oup(OupFilter),
    Vdp(VdpFilter),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OupFilter {
    pub chi_hz: f64,
    pub q_rad2_s3: f64,
    pub prior_sigma_rad_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VdpFilter {
    pub p: f64,
    pub k: f64,
    pub m: f64,
    pub c: f64,
    pub t_filter_s: f64,
    pub q_rad2_s: f64,
    pub init_estimate: [f64; 3],
    /// Standard deviation of each field component in the initial covariance.
    pub prior_sigma_rad_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub horizon_s: f64,
    pub trajectories: usize,
    pub seed: u64,
    /// Steps between recorded samples.
    pub record_stride: usize,
    /// Number of full per-trajectory records kept in the output.
    #[serde(default = "default_sample_records")]
    pub sample_records: usize,
}

fn default_sample_records() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub sensor: SensorParams,
    pub signal: SignalConfig,
    pub filter: FilterConfig,
    #[serde(default)]
    pub control: LqrParams,
    pub run: RunConfig,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.sensor.validate()?;
        self.control.validate()?;
        let r = &self.run;
        if !(r.horizon_s > 0.0) || !r.horizon_s.is_finite() {
            return Err(invalid("horizon_s", "must be positive"));
        }
        if r.trajectories == 0 {
            return Err(invalid("trajectories", "must be at least 1"));
        }
        if r.record_stride == 0 {
            return Err(invalid("record_stride", "must be at least 1"));
        }
        match (&self.signal, &self.filter) {
            (SignalConfig::Oup(s), FilterConfig::Oup(f)) => {
                self.oup_params(s).validate()?;
                if !(s.sigma0_rad_s >= 0.0) {
                    return Err(invalid("sigma0_rad_s", "must be non-negative"));
                }
                if !(f.chi_hz >= 0.0) || !(f.q_rad2_s3 > 0.0) {
                    return Err(invalid("filter", "chi_hz >= 0 and q_rad2_s3 > 0 required"));
                }
                if !(f.prior_sigma_rad_s > 0.0) {
                    return Err(invalid("prior_sigma_rad_s", "must be positive"));
                }
            }
            (SignalConfig::Vdp(s), FilterConfig::Vdp(f)) => {
                s.validate()?;
                for (name, v) in [
                    ("p", f.p),
                    ("k", f.k),
                    ("m", f.m),
                    ("c", f.c),
                    ("t_filter_s", f.t_filter_s),
                    ("prior_sigma_rad_s", f.prior_sigma_rad_s),
                ] {
                    if !(v > 0.0) {
                        return Err(invalid(name, "filter constants must be positive"));
                    }
                }
                if !(f.q_rad2_s >= 0.0) {
                    return Err(invalid("q_rad2_s", "must be non-negative"));
                }
            }
            _ => {
                return Err(invalid(
                    "filter.kind",
                    "must match signal.kind (oup with oup, vdp with vdp)",
                ))
            }
        }
        Ok(())
    }

    /// Number of integration steps covering the horizon.
    pub fn n_steps(&self) -> usize {
        (self.run.horizon_s / self.sensor.dt).round() as usize
    }

    pub fn oup_params(&self, s: &OupSignal) -> OupParams {
        OupParams {
            chi: s.chi_hz,
            q_omega: s.q_omega_rad2_s3,
            omega_bar: self.sensor.omega_bar,
        }
    }

    pub fn oup_filter(&self, f: &OupFilter) -> EkfModel<OupModel> {
        EkfModel {
            sensor: self.sensor,
            signal: OupModel {
                chi_k: f.chi_hz,
                q_k: f.q_rad2_s3,
                omega_bar: self.sensor.omega_bar,
            },
        }
    }

    pub fn vdp_filter(&self, f: &VdpFilter) -> EkfModel<VdpModel> {
        EkfModel {
            sensor: self.sensor,
            signal: VdpModel {
                p: f.p,
                k: f.k,
                m: f.m,
                c: f.c,
                t_filter: f.t_filter_s,
                q_k: f.q_rad2_s,
                omega_bar: self.sensor.omega_bar,
                init_estimate: f.init_estimate,
            },
        }
    }

    pub fn is_mcg(&self) -> bool {
        matches!(self.signal, SignalConfig::Vdp(_))
    }
}
