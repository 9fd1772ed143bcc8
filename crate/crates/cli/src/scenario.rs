//! Loading scenarios from presets or files and applying command-line
//! overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use magtrack::experiment::{preset, ScenarioConfig, PRESET_NAMES};
use magtrack::Error;

/// A configuration problem, reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError {
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

fn config_error(message: impl Into<String>) -> ConfigError {
    ConfigError {
        message: message.into(),
    }
}

/// Where the scenario text came from.
#[derive(Debug, Clone)]
pub enum Source {
    Preset(String),
    File { path: PathBuf, text: String },
}

impl Source {
    fn label(&self) -> String {
        match self {
            Source::Preset(name) => format!("preset `{name}`"),
            Source::File { path, .. } => path.display().to_string(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub trajectories: Option<usize>,
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
}

pub struct Loaded {
    pub config: ScenarioConfig,
    pub source: Source,
    /// Set when neither the file nor the flags supplied a seed.
    pub generated_seed: bool,
}

/// 1-based line of the first `key = ...` assignment in `text`.
fn key_line(text: &str, key: &str) -> Option<usize> {
    let key = key.rsplit('.').next().unwrap_or(key);
    text.lines()
        .position(|l| {
            l.trim_start()
                .strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|i| i + 1)
}

fn missing_seed(table: &toml::Table) -> bool {
    table
        .get("run")
        .and_then(|v| v.as_table())
        .is_some_and(|run| !run.contains_key("seed"))
}

fn parse_file(path: &Path) -> Result<(toml::Table, String), ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    // toml reports the line and column of syntax errors itself
    let table: toml::Table = text
        .parse()
        .map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    Ok((table, text))
}

pub fn load(
    preset_name: Option<&str>,
    config: Option<&Path>,
    ov: &Overrides,
) -> Result<Loaded, ConfigError> {
    let (mut cfg, source, generated_seed) = match (preset_name, config) {
        (Some(_), Some(_)) => {
            return Err(config_error("--preset and --config are mutually exclusive"))
        }
        (None, None) => return Err(config_error("one of --preset or --config is required")),
        (Some(name), None) => {
            let cfg = preset(name).ok_or_else(|| {
                config_error(format!(
                    "unknown preset `{name}` (available: {})",
                    PRESET_NAMES.join(", ")
                ))
            })?;
            (cfg, Source::Preset(name.to_owned()), false)
        }
        (None, Some(path)) => {
            let (mut table, text) = parse_file(path)?;
            let at = |e: toml::de::Error| config_error(format!("{}: {e}", path.display()));
            // deserializing the text keeps line numbers in the error
            let direct = toml::from_str::<ScenarioConfig>(&text);
            let mut generated = false;
            let cfg = match direct {
                Ok(cfg) => cfg,
                Err(e) if missing_seed(&table) => {
                    // toml integers are signed; keep the seed in range.
                    // A --seed flag replaces the placeholder below.
                    let seed = match ov.seed {
                        Some(_) => 0,
                        None => {
                            generated = true;
                            rand::random::<u64>() >> 1
                        }
                    };
                    let run = table.get_mut("run").and_then(|v| v.as_table_mut());
                    run.expect("checked by missing_seed")
                        .insert("seed".into(), toml::Value::Integer(seed as i64));
                    // if something besides the seed is wrong, the text error names it
                    table.try_into().map_err(|_| at(e))?
                }
                Err(e) => return Err(at(e)),
            };
            let source = Source::File {
                path: path.to_owned(),
                text,
            };
            (cfg, source, generated)
        }
    };

    if let Some(n) = ov.trajectories {
        cfg.run.trajectories = n;
    }
    if let Some(seed) = ov.seed {
        cfg.run.seed = seed;
    }
    if let Some(dt) = ov.dt {
        cfg.sensor.dt = dt;
    }
    if let Some(h) = ov.horizon {
        cfg.run.horizon_s = h;
    }
    if cfg.name.is_empty() {
        if let Source::File { path, .. } = &source {
            cfg.name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
        }
    }

    cfg.validate().map_err(|e| anchor(&e, &source, ov))?;
    Ok(Loaded {
        config: cfg,
        source,
        generated_seed,
    })
}

/// Attaches the offending line (or flag) to a validation error.
fn anchor(e: &Error, source: &Source, ov: &Overrides) -> ConfigError {
    let Error::InvalidParameter { name, .. } = e else {
        return config_error(format!("{}: {e}", source.label()));
    };
    let flag = match *name {
        "dt_s" if ov.dt.is_some() => Some("--dt"),
        "horizon_s" if ov.horizon.is_some() => Some("--horizon"),
        "trajectories" if ov.trajectories.is_some() => Some("--trajectories"),
        _ => None,
    };
    if let Some(flag) = flag {
        return config_error(format!("{flag}: {e}"));
    }
    match source {
        Source::File { path, text } => match key_line(text, name) {
            Some(line) => config_error(format!("{}:{line}: {e}", path.display())),
            None => config_error(format!("{}: {e}", path.display())),
        },
        Source::Preset(_) => config_error(format!("{}: {e}", source.label())),
    }
}
