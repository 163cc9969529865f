//! Experiment harness for the Prox-PEP solver: synthetic problem families,
//! multi-seed horizon sweeps with reproducible manifests, rate fitting, and
//! quantile reports.

pub mod experiment;
pub mod generate;
pub mod ratefit;
pub mod report;

pub use experiment::{
    check_experiment, execute_run, run_experiment, CoeffConfig, ExperimentConfig, Manifest,
    MetricsMode, RunArtifacts, RunId,
};
pub use generate::{
    generate_from_config, generate_problem, load_problem_config, write_problem_config, Family,
    ProblemConfig,
};
pub use ratefit::{quantile_report, rate_fit, QuantileReport, RateFit};
pub use report::{build_report, collect_summaries, Report};
