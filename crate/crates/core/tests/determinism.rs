use magtrack::experiment::{preset, run_ensemble, run_trajectory, ScenarioConfig, PRESET_NAMES};

fn small(name: &str, trajectories: usize) -> ScenarioConfig {
    let mut cfg = preset(name).unwrap();
    cfg.run.horizon_s = 5e-4;
    cfg.run.trajectories = trajectories;
    cfg
}

#[test]
fn trajectories_are_reproducible() {
    for name in ["fig2", "fig4"] {
        let cfg = small(name, 1);
        let a = run_trajectory(&cfg, 3).unwrap();
        let b = run_trajectory(&cfg, 3).unwrap();
        assert_eq!(a, b, "{name}");
        let c = run_trajectory(&cfg, 4).unwrap();
        assert_ne!(a.omega_est, c.omega_est);
        let mut other = cfg.clone();
        other.run.seed += 1;
        assert_ne!(a.omega_est, run_trajectory(&other, 3).unwrap().omega_est);
    }
}

#[test]
fn ensembles_do_not_depend_on_thread_count() {
    let cfg = small("fig3", 70);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_ensemble(&cfg).unwrap())
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one.stats, four.stats);
    assert_eq!(one.samples, four.samples);
    assert_eq!(one.stats.n_used, 70);
}

#[test]
fn presets_round_trip_through_toml() {
    for name in PRESET_NAMES {
        let cfg = preset(name).unwrap();
        let text = toml::to_string(&cfg).unwrap();
        let back: ScenarioConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg, "{name}:\n{text}");
    }
}

#[test]
fn unknown_keys_are_rejected() {
    let text = toml::to_string(&preset("fig4").unwrap()).unwrap();
    for (anchor, extra) in [
        ("[sensor]\n", "[sensor]\nbogus = 1.0\n"),
        ("[signal]\n", "[signal]\nbogus = 1.0\n"),
        ("[run]\n", "[run]\nbogus = 1\n"),
    ] {
        let bad = text.replacen(anchor, extra, 1);
        assert_ne!(bad, text, "anchor {anchor:?} missing");
        let err = toml::from_str::<ScenarioConfig>(&bad).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }
}

#[test]
fn mismatched_signal_and_filter_kinds_fail_validation() {
    let mut cfg = preset("fig2").unwrap();
    cfg.filter = preset("fig4").unwrap().filter;
    assert!(cfg.validate().is_err());
}
