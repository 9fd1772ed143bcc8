//! Named scenarios.

use super::config::*;
use crate::control::LqrParams;
use crate::sensor::SensorParams;
use crate::signals::VdpParams;

pub const PRESET_NAMES: [&str; 5] = ["fig2", "fig3", "fig3-mismatched", "fig4", "large-m"];

const DEFAULT_TRAJECTORIES: usize = 200;
const DEFAULT_SEED: u64 = 20_251_018;

fn oup_scenario(name: &str, kappa_coll: f64, chi_k: f64, q_k: f64) -> ScenarioConfig {
    ScenarioConfig {
        name: name.into(),
        sensor: SensorParams {
            kappa_coll,
            ..SensorParams::warm_rubidium()
        },
        signal: SignalConfig::Oup(OupSignal {
            chi_hz: 1.0,
            q_omega_rad2_s3: 1e6,
            sigma0_rad_s: 10.0,
        }),
        filter: FilterConfig::Oup(OupFilter {
            chi_hz: chi_k,
            q_rad2_s3: q_k,
            prior_sigma_rad_s: 10.0,
        }),
        control: LqrParams::default(),
        run: RunConfig {
            horizon_s: 0.01,
            trajectories: DEFAULT_TRAJECTORIES,
            seed: DEFAULT_SEED,
            record_stride: 100,
            sample_records: 5,
        },
    }
}

/// Built-in scenario by name.
pub fn preset(name: &str) -> Option<ScenarioConfig> {
    let cfg = match name {
        // local dephasing only
        "fig2" => oup_scenario(name, 0.0, 1.0, 1e6),
        // weak collective dephasing, matched filter
        "fig3" => oup_scenario(name, 1e-5, 1.0, 1e6),
        // same truth, filter expects half the diffusion and ten times the decay
        "fig3-mismatched" => oup_scenario(name, 1e-5, 10.0, 5e5),
        "fig4" => {
            let q_n = 2.5e-7;
            let vdp = VdpParams {
                noise_density: q_n,
                ..VdpParams::default()
            };
            ScenarioConfig {
                name: name.into(),
                sensor: SensorParams::warm_rubidium(),
                signal: SignalConfig::Vdp(vdp),
                filter: FilterConfig::Vdp(VdpFilter {
                    p: vdp.p,
                    k: vdp.k,
                    m: vdp.m,
                    c: vdp.c,
                    t_filter_s: vdp.t_filter,
                    q_rad2_s: q_n,
                    init_estimate: [3.0045; 3],
                    prior_sigma_rad_s: 10.0,
                }),
                control: LqrParams::default(),
                run: RunConfig {
                    // covers the third heartbeat cycle
                    horizon_s: 0.07,
                    trajectories: DEFAULT_TRAJECTORIES,
                    seed: DEFAULT_SEED,
                    record_stride: 100,
                    sample_records: 5,
                },
            }
        }
        // strong probing; dt shrinks with M N so only a short window is practical
        "large-m" => {
            let mut cfg = oup_scenario(name, 1e-9, 1.0, 1e6);
            cfg.sensor.meas_strength = 1e-3;
            cfg.sensor.dt = 5e-12;
            cfg.run.horizon_s = 2e-5;
            cfg.run.trajectories = 20;
            cfg.run.record_stride = 1000;
            cfg
        }
        _ => return None,
    };
    Some(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_validate() {
        for name in PRESET_NAMES {
            let cfg = preset(name).unwrap();
            cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(cfg.name, name);
        }
        assert!(preset("nope").is_none());
    }
}
