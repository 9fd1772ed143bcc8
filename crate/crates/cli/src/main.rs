//! `magtrack`: closed-loop magnetometer simulations and tracking-error bounds.

mod bound;
mod output;
mod scenario;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use magtrack::experiment::{preset, run_ensemble, SignalConfig, PRESET_NAMES};

use crate::output::RunManifest;
use crate::scenario::{ConfigError, Overrides, Source};

const VERSION: &str = env!("MAGTRACK_VERSION");

#[derive(Parser)]
#[command(name = "magtrack", version = VERSION, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track an Ornstein-Uhlenbeck field.
    SimulateOup(SimArgs),
    /// Track a heartbeat-like waveform.
    SimulateMcg(SimArgs),
    /// Tabulate the tracking-error bounds.
    Bound {
        #[command(flatten)]
        args: bound::BoundArgs,
        /// Directory for bound.csv and the manifest; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Built-in scenarios.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    /// Print a preset as a configuration file.
    Show {
        name: String,
    },
}

#[derive(Args)]
struct SimArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    trajectories: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Integration step, s.
    #[arg(long)]
    dt: Option<f64>,
    /// Simulated time, s.
    #[arg(long)]
    horizon: Option<f64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn init_pool(threads: Option<usize>) -> Result<usize> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            bail!(ConfigError {
                message: "--threads must be at least 1".into()
            });
        }
        b = b.num_threads(n);
    }
    b.build_global()?;
    Ok(rayon::current_num_threads())
}

fn simulate(a: &SimArgs, mcg: bool) -> Result<()> {
    let command = if mcg { "simulate-mcg" } else { "simulate-oup" };
    let ov = Overrides {
        trajectories: a.trajectories,
        seed: a.seed,
        dt: a.dt,
        horizon: a.horizon,
    };
    let loaded = scenario::load(a.preset.as_deref(), a.config.as_deref(), &ov)?;
    let cfg = loaded.config;
    let is_vdp = matches!(cfg.signal, SignalConfig::Vdp(_));
    if is_vdp != mcg {
        let other = if is_vdp {
            "simulate-mcg"
        } else {
            "simulate-oup"
        };
        bail!(ConfigError {
            message: format!("scenario `{}` is for {other}", cfg.name),
        });
    }
    if loaded.generated_seed {
        eprintln!("seed: {} (generated)", cfg.run.seed);
    }
    let threads = init_pool(a.threads)?;

    let start = Instant::now();
    let out = run_ensemble(&cfg)?;
    let runtime = start.elapsed().as_secs_f64();
    for (i, e) in &out.failures {
        eprintln!("warning: trajectory {i} dropped: {e}");
    }

    fs::create_dir_all(&a.out).with_context(|| a.out.display().to_string())?;
    let ensemble = a.out.join("ensemble.csv");
    let trajectories = a.out.join("trajectories.csv");
    let summary = a.out.join("summary.json");
    let config = a.out.join("scenario.toml");
    output::write_ensemble_csv(&ensemble, &out, mcg)?;
    output::write_trajectory_csv(&trajectories, &out)?;
    output::write_json(&summary, &output::summary(&cfg, &out))?;
    let config_text = toml::to_string(&cfg)?;
    fs::write(&config, &config_text)?;

    let source = match &loaded.source {
        Source::Preset(name) => format!("preset:{name}"),
        Source::File { path, .. } => path.display().to_string(),
    };
    let mut manifest = RunManifest {
        version: VERSION.into(),
        command: command.into(),
        source,
        seed: Some(cfg.run.seed),
        seed_generated: loaded.generated_seed,
        threads,
        runtime_s: runtime,
        csv_schema: output::CSV_SCHEMA_VERSION,
        config: Some(config_text),
        outputs: vec![ensemble, trajectories, summary, config],
    };
    manifest.outputs.push(a.out.join("manifest.json"));
    let path = manifest.write(&a.out)?;
    eprintln!(
        "{} trajectories in {runtime:.1} s; wrote {}",
        out.stats.n_used,
        path.display()
    );
    Ok(())
}

fn bound_cmd(args: &bound::BoundArgs, out: Option<&Path>) -> Result<()> {
    let start = Instant::now();
    let table = bound::table(args)?;
    let Some(dir) = out else {
        return bound::write_csv(&table, std::io::stdout().lock());
    };
    fs::create_dir_all(dir).with_context(|| dir.display().to_string())?;
    let csv = dir.join("bound.csv");
    bound::write_csv(&table, fs::File::create(&csv)?)?;
    let manifest = RunManifest {
        version: VERSION.into(),
        command: "bound".into(),
        source: std::env::args().skip(1).collect::<Vec<_>>().join(" "),
        seed: None,
        seed_generated: false,
        threads: 1,
        runtime_s: start.elapsed().as_secs_f64(),
        csv_schema: output::CSV_SCHEMA_VERSION,
        config: None,
        outputs: vec![csv, dir.join("manifest.json")],
    };
    manifest.write(dir)?;
    Ok(())
}

fn presets(action: &PresetAction) -> Result<()> {
    match action {
        PresetAction::List => {
            for name in PRESET_NAMES {
                let cfg = preset(name).expect("listed presets exist");
                let kind = match cfg.signal {
                    SignalConfig::Oup(_) => "simulate-oup",
                    SignalConfig::Vdp(_) => "simulate-mcg",
                };
                println!(
                    "{name:<16} {kind:<13} {} trajectories, {:e} s, dt {:e} s",
                    cfg.run.trajectories, cfg.run.horizon_s, cfg.sensor.dt
                );
            }
        }
        PresetAction::Show { name } => {
            let Some(cfg) = preset(name) else {
                bail!(ConfigError {
                    message: format!(
                        "unknown preset `{name}` (available: {})",
                        PRESET_NAMES.join(", ")
                    ),
                });
            };
            print!("{}", toml::to_string(&cfg)?);
        }
    }
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match e.downcast_ref::<magtrack::Error>() {
        Some(magtrack::Error::InvalidParameter { .. })
        | Some(magtrack::Error::DegenerateBound(_)) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::SimulateOup(a) => simulate(a, false),
        Command::SimulateMcg(a) => simulate(a, true),
        Command::Bound { args, out } => bound_cmd(args, out.as_deref()),
        Command::Presets { action } => presets(action),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
