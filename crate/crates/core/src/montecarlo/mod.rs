//! Seeded Monte-Carlo experiments over random populations.
//!
//! Each draw samples a population from a bounded Pareto stake distribution,
//! certifies (or rejects) ex post stability of a threshold strategy, and for
//! stable draws scores a family of representative equilibria. Draws are pure
//! functions of `(config, draw_index)`, so any thread count gives the same
//! results.

mod config;
mod experiment;
mod output;
mod sampling;

pub use config::{baseline_config, g_preset, ExperimentConfig, Sweep, SweepParam, G_PRESETS};
pub use experiment::{
    run_draw, run_experiment, run_single, DrawResult, Experiment, ReferenceOutcome, ReferenceSummary, RunOutput,
    RunSummary, SweepRun,
};
pub use output::{fmt_sig9, write_draws_csv, write_experiment, write_objectives_csv, write_run, write_summary_json};
pub use sampling::{sample_pareto, sample_population, Stream, TypeDistribution};
