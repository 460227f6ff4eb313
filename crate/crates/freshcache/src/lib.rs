//! Freshness modelling for hierarchical cache systems.
//!
//! A source holds `n` files, each rewritten by independent Poisson update
//! processes. Copies propagate through one or more relay caches to end
//! users, each link polling at a Poisson request rate chosen by us. A copy
//! is *fresh* while it equals the source version; the long-run fraction of
//! time a copy is fresh is its freshness.
//!
//! The crate provides:
//!
//! * closed-form freshness for single hops, serial cache chains and
//!   shared-cache fan-outs ([`analytics`]),
//! * an alternating block solver that splits per-node request budgets
//!   across files to maximise total user freshness ([`optimizer`]),
//! * a discrete-event simulator for cross-checking the closed forms on
//!   sample paths ([`sim`]),
//! * a scenario runner with JSON configs, parameter sweeps and CSV output
//!   ([`scenario`]), also exposed through the `freshcache` binary.
//!
//! With the default `parallel` feature, simulation replications and sweep
//! points fan out over a rayon pool; disabling default features yields a
//! fully sequential build with bit-identical results.

#![forbid(unsafe_code)]

pub mod analytics;
mod exec;
pub mod model;
pub mod optimizer;
pub mod scenario;
pub mod sim;

pub use model::{
    freshness_report, total_objective, validate, FreshnessReport, IterationRecord,
    RateAllocation, SolveTrace, SourceProfile, Topology, ValidationError,
};
pub use optimizer::{
    alternating_maximize, baseline_allocation, build_sigma, kkt_residuals, threshold_inner_solve,
    BaselinePolicy, InnerProblem, InnerSolution, NodeId, OptimizerSettings,
};
pub use scenario::{
    geometric_lambdas, preset, preset_names, run_scenario, ScenarioConfig, ScenarioResult,
    ScenarioRow,
};
pub use sim::{
    default_horizon, simulate_file, simulate_system, FileEstimate, LinkSuccess, NodeEstimate,
    SimConfig, SystemEstimate,
};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// One or more model invariants are violated; the list is exhaustive.
    #[error("validation failed: {}", model::join_errors(.0))]
    Invalid(Vec<ValidationError>),
    /// A node index does not exist in the given topology.
    #[error("no such node: {0}")]
    UnknownNode(NodeId),
    /// A configuration value or combination is unusable.
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
