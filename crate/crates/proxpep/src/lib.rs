//! Prox-PEP: a stochastic proximal partial-exact-penalty solver for weakly
//! convex programs with expectation equality and inequality constraints.
//!
//! The crate is organized around the solver pipeline:
//!
//! - [`problem`]: feasible sets, oracles, assumption validation
//! - [`model`]: per-iteration quadratic approximations and derived constants
//! - [`slack`]: exact scalar slack minimization and its shrinkage bounds
//! - [`subproblem`]: the strongly convex joint proximal subproblem
//! - [`driver`]: the main loop with parameter scheduling and dual ascent
//! - [`metrics`]: stationarity measures, Moreau machinery, threshold formulas
//! - [`io`]: columnar trajectory / metrics files and digests

pub mod driver;
pub mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod problem;
pub mod rng;
pub mod slack;
pub mod subproblem;
pub mod vecops;

pub use driver::{
    dual_update, penalty_update, phase_transition, run, run_with_options, schedule_params,
    AlgoParams, DualState, Phase, RunOptions, ScheduleCoeffs, Trajectory,
};
pub use error::{Error, Result};
pub use metrics::{
    kkt_report, lagrangian_grad, moreau, moreau_grad, prox_residual, thresholds,
    trajectory_metrics, KktReport, MetricsOptions, MetricsSeries, ThresholdReport, ThresholdState,
};
pub use model::{build_models, derived_constants, eval_models, DerivedConstants, QuadModelSet};
pub use problem::{
    ConvexFeasibleSet, DeterministicEval, ProblemConstants, SampleRecord, SetKind,
    StochasticProgram, ValidationReport,
};
pub use slack::{shrinkage_bounds, slack_prox, ActiveRegion, SlackProxResult};
pub use subproblem::{brute_force, objective, solve, SubproblemInstance, SubproblemSolution};
