//! Experiment orchestration: configuration, a deterministic worker pool,
//! Monte Carlo sweeps, property checks, CSV tables and SVG plots.

pub mod acceptance;
pub mod checks;
pub mod config;
pub mod experiments;
pub mod plot;
pub mod pool;
pub mod stats;
pub mod table;

pub use checks::{run_checks, CheckReport};
pub use config::{ExperimentConfig, ExperimentKind};
pub use experiments::{
    build_instance, run_cyclefind_demo, run_experiment, run_mle_vs_ode, run_ode_curve, run_phase_diagram,
    run_trials, trial_seed, ExperimentOutput, TrialResult,
};
pub use plot::{emit_plot, PlotKind};
pub use pool::{default_workers, run_pool};
pub use stats::{summarize, Summary};
pub use table::{Cell, CsvData, Table};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("CSV schema mismatch: {0}")]
    Schema(String),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Match(#[from] crate::matching::MatchError),
    #[error(transparent)]
    Ode(#[from] crate::asymptotics::OdeError),
    #[error(transparent)]
    Cycle(#[from] crate::cyclefinder::CycleError),
    #[error(transparent)]
    Posterior(#[from] crate::posterior::PosteriorError),
    #[error(transparent)]
    Dist(#[from] crate::dist::DistError),
    #[error(transparent)]
    Path(#[from] crate::paths::PathError),
}
