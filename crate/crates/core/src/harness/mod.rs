//! Experiment driver: per-cell campaigns, twin training, multi-start
//! optimization, verification on the simulated link, and the sweep over
//! supply power and filter configurations.

mod config;
pub mod io;
mod pipeline;
mod sweep;

pub use config::{parse_cell_selector, Cell, ExperimentConfig, LinkTemplate, TwinConfig};
pub use pipeline::{
    compute_baselines, dataset_for, model_for, optimize_cell, prepare_cell, read_profile,
    relative_spread, run_cell, simulate_campaign, starts_from, train_cell, verify_profile,
    write_baselines, write_evaluation, write_profile, write_training_curve, Baseline, Baselines,
    CellResult, Multistart, PreparedCell, Verification, Workspace,
};
pub use sweep::{run_campaign, run_sweep, CellOutcome, GffGain, SweepResult};
