//! Short closed-loop runs of the preset scenarios.

use magtrack::experiment::{plateau, preset, run_ensemble, ScenarioConfig, SignalConfig};

fn shortened(name: &str, trajectories: usize, horizon: f64) -> ScenarioConfig {
    let mut cfg = preset(name).unwrap();
    cfg.run.trajectories = trajectories;
    cfg.run.horizon_s = horizon;
    cfg
}

#[test]
fn feedback_cancels_the_precession() {
    let cfg = shortened("fig2", 16, 0.01);
    let out = run_ensemble(&cfg).unwrap();
    let rmse = plateau(&out.stats, 1e-3, 0.01).sqrt_amse;
    let w_bar = cfg.sensor.omega_bar;
    let (mut sum, mut n) = (0.0, 0usize);
    for r in &out.samples {
        for i in 0..r.len() {
            if r.t[i] >= 1e-3 {
                sum += (r.omega_drive[i] + w_bar + r.u[i]).abs();
                n += 1;
            }
        }
    }
    let residual = sum / n as f64;
    assert!(
        residual < 3.0 * rmse,
        "mean |w + u| = {residual}, rmse {rmse}"
    );
}

/// Plateau errors over [15, 35] ms, 16 trajectories, preset seed.
const A_FROZEN: f64 = 1.775012286331976;
const B_FROZEN: f64 = 0.040859834052618414;

#[test]
fn heartbeat_without_drive_noise_is_tracked_better() {
    let noisy = shortened("fig4", 16, 0.035);
    let mut clean = noisy.clone();
    let SignalConfig::Vdp(v) = &mut clean.signal else {
        unreachable!()
    };
    v.noise_density = 0.0;
    let a = plateau(&run_ensemble(&noisy).unwrap().stats, 0.015, 0.035).sqrt_amse;
    let b = plateau(&run_ensemble(&clean).unwrap().stats, 0.015, 0.035).sqrt_amse;
    assert!(b < a, "clean {b} vs noisy {a}");
    // loose enough to survive libm differences between platforms
    assert!((a - A_FROZEN).abs() < 1e-6 * A_FROZEN, "noisy {a}");
    assert!((b - B_FROZEN).abs() < 1e-6 * B_FROZEN, "clean {b}");
}
