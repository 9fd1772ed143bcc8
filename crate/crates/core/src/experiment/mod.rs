//! Closed-loop trajectories, Monte Carlo ensembles and their summaries.

mod config;
mod ensemble;
mod presets;
mod rng;
mod trajectory;

pub use config::{
    FilterConfig, OupFilter, OupSignal, RunConfig, ScenarioConfig, SignalConfig, VdpFilter,
};
pub use ensemble::{
    amse_series, bound_series, cycle_summary, plateau, r_peaks, run_ensemble, squeezing_summary,
    CycleSummary, EnsembleOutput, EnsembleStats, PlateauSummary, Reference, SqueezingSummary,
};
pub use presets::{preset, PRESET_NAMES};
pub use rng::{sample_atom_number, stream, Channel, NoiseSource, SeededNoise, Silent};
pub use trajectory::{run_trajectory, run_trajectory_with, TrajectoryRecord};
