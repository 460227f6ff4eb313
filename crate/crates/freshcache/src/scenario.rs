//! Declarative scenario configs and the batch runner behind the CLI.
//!
//! A scenario is one JSON document: a source (explicit update rates or a
//! geometric popularity profile), a topology with its budgets, the
//! policies to evaluate, optional Monte Carlo settings, and parameter
//! sweeps. [`run_scenario`] expands the sweeps into points, solves every
//! point under every policy, optionally cross-checks by simulation, and
//! emits one flat CSV table plus a JSON manifest echoing the full
//! config.
//!
//! Sweep semantics: ranges inside one group combine as a cross product,
//! separate groups concatenate. A budget range can target one stage or
//! user with a 1-based `index`. Points run independently (and in
//! parallel with the `parallel` feature); row order in the output is
//! always group order, then point order, then policy, node, file, with
//! each policy's summary row last.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::exec::map_indexed;
use crate::model::{
    cache_label, freshness_report, user_label, RateAllocation, SolveTrace, SourceProfile, Topology,
};
use crate::optimizer::{alternating_maximize, baseline_allocation, kkt_residuals, BaselinePolicy};
use crate::sim::{default_horizon, simulate_system, SimConfig, SystemEstimate};
use crate::Error;

/// Update rates with a geometric popularity falloff.
///
/// Rates are proportional to `ratio^i` for files `i = 1..=n` and scale
/// so they sum to `total`. `ratio = 1` gives a flat profile; small
/// ratios concentrate almost all update traffic on the first files.
pub fn geometric_lambdas(total: f64, ratio: f64, n: usize) -> Result<Vec<f64>, Error> {
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Config(format!(
            "total update rate must be positive and finite, got {total}"
        )));
    }
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::Config(format!(
            "popularity ratio must lie in (0, 1], got {ratio}"
        )));
    }
    if n == 0 {
        return Err(Error::Config("need at least one file".into()));
    }
    let mut powers = Vec::with_capacity(n);
    let mut p = 1.0;
    for _ in 0..n {
        p *= ratio;
        powers.push(p);
    }
    let sum: f64 = powers.iter().sum();
    Ok(powers.into_iter().map(|p| total * p / sum).collect())
}

/// Where the per-file update rates come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceSpec {
    /// Geometric profile: `n` files, rates summing to `a` with ratio `q`.
    Geometric {
        a: f64,
        q: f64,
        n: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cache_success: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        user_success: Option<Vec<f64>>,
    },
    /// Rates listed outright.
    Explicit {
        lambdas: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cache_success: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        user_success: Option<Vec<f64>>,
    },
}

impl SourceSpec {
    /// Materialize the per-file profile this spec describes.
    pub fn build(&self) -> Result<SourceProfile, Error> {
        let (lambdas, weights, cache_success, user_success) = match self {
            SourceSpec::Geometric {
                a,
                q,
                n,
                weights,
                cache_success,
                user_success,
            } => (
                geometric_lambdas(*a, *q, *n)?,
                weights,
                cache_success,
                user_success,
            ),
            SourceSpec::Explicit {
                lambdas,
                weights,
                cache_success,
                user_success,
            } => (lambdas.clone(), weights, cache_success, user_success),
        };
        Ok(SourceProfile {
            lambdas,
            weights: weights.clone(),
            cache_success: cache_success.clone(),
            user_success: user_success.clone(),
        })
    }
}

/// Node layout and per-node budgets; the file count comes from the source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologySpec {
    SingleCache {
        cache_budget: f64,
        user_budget: f64,
    },
    SerialChain {
        cache_budgets: Vec<f64>,
        user_budget: f64,
    },
    MultiUser {
        cache_budget: f64,
        user_budgets: Vec<f64>,
    },
}

impl TopologySpec {
    /// Attach the file count and produce the runnable topology.
    pub fn build(&self, n: usize) -> Topology {
        match self {
            TopologySpec::SingleCache {
                cache_budget,
                user_budget,
            } => Topology::SingleCache {
                n,
                cache_budget: *cache_budget,
                user_budget: *user_budget,
            },
            TopologySpec::SerialChain {
                cache_budgets,
                user_budget,
            } => Topology::SerialChain {
                n,
                cache_budgets: cache_budgets.clone(),
                user_budget: *user_budget,
            },
            TopologySpec::MultiUser {
                cache_budget,
                user_budgets,
            } => Topology::MultiUser {
                n,
                cache_budget: *cache_budget,
                user_budgets: user_budgets.clone(),
            },
        }
    }
}

/// Solver knobs in config form; defaults match
/// [`OptimizerSettings::default`](crate::OptimizerSettings).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSpec {
    pub max_outer_iterations: usize,
    pub objective_tolerance: f64,
    pub kkt_tolerance: f64,
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        let s = crate::optimizer::OptimizerSettings::default();
        Self {
            max_outer_iterations: s.max_outer_iterations,
            objective_tolerance: s.objective_tolerance,
            kkt_tolerance: s.kkt_tolerance,
        }
    }
}

impl OptimizerSpec {
    /// The solver settings this spec describes.
    pub fn settings(&self) -> crate::optimizer::OptimizerSettings {
        crate::optimizer::OptimizerSettings {
            max_outer_iterations: self.max_outer_iterations,
            objective_tolerance: self.objective_tolerance,
            kkt_tolerance: self.kkt_tolerance,
        }
    }
}

/// Monte Carlo settings; presence turns simulation columns on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSpec {
    /// Simulated time; defaults to [`default_horizon`] of the smallest
    /// update rate at the point.
    pub horizon: Option<f64>,
    pub replications: u32,
    pub seed: u64,
    pub warmup: f64,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            horizon: None,
            replications: 20,
            seed: 0,
            warmup: 0.0,
        }
    }
}

/// How request rates are chosen at each point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    Optimized,
    LambdaProportional,
    LambdaInverse,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::Optimized => "optimized",
            Policy::LambdaProportional => "lambda-proportional",
            Policy::LambdaInverse => "lambda-inverse",
        }
    }
}

/// A swept parameter: which knob, where, and the values to visit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRange {
    pub param: SweepParam,
    /// 1-based stage or user selector for budget sweeps on topologies
    /// with several; omit where there is only one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Q,
    A,
    CacheBudget,
    UserBudget,
}

impl SweepParam {
    fn name(self) -> &'static str {
        match self {
            SweepParam::Q => "q",
            SweepParam::A => "a",
            SweepParam::CacheBudget => "cache_budget",
            SweepParam::UserBudget => "user_budget",
        }
    }
}

/// Ranges crossed together into one grid of points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGroup {
    pub params: Vec<SweepRange>,
}

/// One runnable scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario_id: String,
    pub source: SourceSpec,
    pub topology: TopologySpec,
    #[serde(default)]
    pub optimizer: OptimizerSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSpec>,
    #[serde(default = "default_policies")]
    pub policies: Vec<Policy>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweeps: Vec<SweepGroup>,
}

fn default_policies() -> Vec<Policy> {
    vec![Policy::Optimized]
}

impl ScenarioConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, Error> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

/// One output row; summary rows carry the node label `total`, no file
/// column, and the convergence diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRow {
    pub scenario_id: String,
    pub sweep_param: String,
    pub sweep_value: String,
    pub policy: String,
    pub node: String,
    pub file: Option<usize>,
    pub lambda: Option<f64>,
    pub rate: Option<f64>,
    /// Per-node freshness, or the weighted total on summary rows.
    pub freshness: f64,
    pub sim_mean: Option<f64>,
    pub sim_half_width: Option<f64>,
    pub kkt_residual: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
}

const CSV_HEADER: [&str; 14] = [
    "scenario_id",
    "sweep_param",
    "sweep_value",
    "policy",
    "node",
    "file",
    "lambda",
    "rate",
    "freshness",
    "sim_mean",
    "sim_half_width",
    "kkt_residual",
    "iterations",
    "converged",
];

fn sci(x: f64) -> String {
    format!("{x:.11e}")
}

fn record(row: &ScenarioRow) -> [String; 14] {
    [
        row.scenario_id.clone(),
        row.sweep_param.clone(),
        row.sweep_value.clone(),
        row.policy.clone(),
        row.node.clone(),
        row.file.map(|f| f.to_string()).unwrap_or_default(),
        row.lambda.map(sci).unwrap_or_default(),
        row.rate.map(sci).unwrap_or_default(),
        sci(row.freshness),
        row.sim_mean.map(sci).unwrap_or_default(),
        row.sim_half_width.map(sci).unwrap_or_default(),
        row.kkt_residual.map(sci).unwrap_or_default(),
        row.iterations.map(|i| i.to_string()).unwrap_or_default(),
        row.converged.map(|c| c.to_string()).unwrap_or_default(),
    ]
}

/// Output table of [`run_scenario`] with the config that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub rows: Vec<ScenarioRow>,
    pub config: ScenarioConfig,
    /// Number of sweep points the scenario expanded into.
    pub points: usize,
}

impl ScenarioResult {
    pub fn to_csv_string(&self) -> String {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(CSV_HEADER).expect("in-memory write");
        for row in &self.rows {
            wtr.write_record(record(row)).expect("in-memory write");
        }
        let bytes = wtr.into_inner().expect("in-memory flush");
        String::from_utf8(bytes).expect("csv output is utf-8")
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), Error> {
        Ok(fs::write(path, self.to_csv_string())?)
    }

    /// Reproducibility sidecar: the full config echoed back with the
    /// package version and output shape.
    pub fn manifest(&self) -> serde_json::Value {
        serde_json::json!({
            "scenario_id": self.config.scenario_id,
            "version": env!("CARGO_PKG_VERSION"),
            "points": self.points,
            "row_count": self.rows.len(),
            "config": self.config,
        })
    }
}

struct PointSpec {
    sweep_param: String,
    sweep_value: String,
    source: SourceSpec,
    topology: TopologySpec,
}

fn apply_sweep(
    source: &mut SourceSpec,
    topology: &mut TopologySpec,
    range: &SweepRange,
    value: f64,
) -> Result<(), Error> {
    let index_for = |len: usize| -> Result<usize, Error> {
        let idx = range.index.unwrap_or(1);
        if idx == 0 || idx > len {
            return Err(Error::Config(format!(
                "{} sweep index {idx} outside 1..={len}",
                range.param.name()
            )));
        }
        Ok(idx - 1)
    };
    match range.param {
        SweepParam::Q => match source {
            SourceSpec::Geometric { q, .. } => *q = value,
            SourceSpec::Explicit { .. } => {
                return Err(Error::Config(
                    "q sweeps need a geometric source".into(),
                ))
            }
        },
        SweepParam::A => match source {
            SourceSpec::Geometric { a, .. } => *a = value,
            SourceSpec::Explicit { .. } => {
                return Err(Error::Config(
                    "a sweeps need a geometric source".into(),
                ))
            }
        },
        SweepParam::CacheBudget => match topology {
            TopologySpec::SingleCache { cache_budget, .. }
            | TopologySpec::MultiUser { cache_budget, .. } => {
                index_for(1)?;
                *cache_budget = value;
            }
            TopologySpec::SerialChain { cache_budgets, .. } => {
                let idx = index_for(cache_budgets.len())?;
                cache_budgets[idx] = value;
            }
        },
        SweepParam::UserBudget => match topology {
            TopologySpec::SingleCache { user_budget, .. }
            | TopologySpec::SerialChain { user_budget, .. } => {
                index_for(1)?;
                *user_budget = value;
            }
            TopologySpec::MultiUser { user_budgets, .. } => {
                let idx = index_for(user_budgets.len())?;
                user_budgets[idx] = value;
            }
        },
    }
    Ok(())
}

fn range_label(range: &SweepRange) -> String {
    match range.index {
        Some(idx) => format!("{}[{idx}]", range.param.name()),
        None => range.param.name().to_string(),
    }
}

fn expand_points(cfg: &ScenarioConfig) -> Result<Vec<PointSpec>, Error> {
    if cfg.sweeps.is_empty() {
        return Ok(vec![PointSpec {
            sweep_param: String::new(),
            sweep_value: String::new(),
            source: cfg.source.clone(),
            topology: cfg.topology.clone(),
        }]);
    }
    let mut points = Vec::new();
    for group in &cfg.sweeps {
        if group.params.is_empty() {
            return Err(Error::Config("sweep group without parameters".into()));
        }
        for range in &group.params {
            if range.values.is_empty() {
                return Err(Error::Config(format!(
                    "{} sweep has no values",
                    range.param.name()
                )));
            }
        }
        let label = group
            .params
            .iter()
            .map(range_label)
            .collect::<Vec<_>>()
            .join(";");
        // Odometer over the group's value lists, last range fastest.
        let sizes: Vec<usize> = group.params.iter().map(|r| r.values.len()).collect();
        let total: usize = sizes.iter().product();
        for mut flat in 0..total {
            let mut choice = vec![0usize; sizes.len()];
            for pos in (0..sizes.len()).rev() {
                choice[pos] = flat % sizes[pos];
                flat /= sizes[pos];
            }
            let mut source = cfg.source.clone();
            let mut topology = cfg.topology.clone();
            let mut values = Vec::with_capacity(sizes.len());
            for (range, &pick) in group.params.iter().zip(&choice) {
                let value = range.values[pick];
                apply_sweep(&mut source, &mut topology, range, value)?;
                values.push(format!("{value}"));
            }
            points.push(PointSpec {
                sweep_param: label.clone(),
                sweep_value: values.join(";"),
                source,
                topology,
            });
        }
    }
    Ok(points)
}

/// Full row block for one evaluated allocation: per-node, per-file rows
/// in node order, then the summary row. The summary's residual column is
/// the worst stationarity residual of the allocation regardless of how
/// it was produced; iteration diagnostics appear only with a trace.
#[allow(clippy::too_many_arguments)]
fn point_rows(
    scenario_id: &str,
    sweep_param: &str,
    sweep_value: &str,
    policy: &str,
    profile: &SourceProfile,
    topo: &Topology,
    alloc: &RateAllocation,
    trace: Option<&SolveTrace>,
    estimate: Option<&SystemEstimate>,
) -> Result<Vec<ScenarioRow>, Error> {
    let report = freshness_report(profile, topo, alloc)?;
    let residuals = kkt_residuals(profile, topo, alloc)?;
    let max_residual = residuals.into_iter().fold(0.0, f64::max);

    let mut rows = Vec::new();
    let mut push_node =
        |label: String, rates: &[f64], freshness: &[f64], sim: Option<Vec<crate::sim::NodeEstimate>>| {
            for (i, (&rate, &fresh)) in rates.iter().zip(freshness).enumerate() {
                rows.push(ScenarioRow {
                    scenario_id: scenario_id.to_string(),
                    sweep_param: sweep_param.to_string(),
                    sweep_value: sweep_value.to_string(),
                    policy: policy.to_string(),
                    node: label.clone(),
                    file: Some(i + 1),
                    lambda: Some(profile.lambdas[i]),
                    rate: Some(rate),
                    freshness: fresh,
                    sim_mean: sim.as_ref().map(|e| e[i].mean),
                    sim_half_width: sim.as_ref().map(|e| e[i].half_width),
                    kkt_residual: None,
                    iterations: None,
                    converged: None,
                });
            }
        };
    for r in 0..topo.num_caches() {
        let sim_col = estimate.map(|est| est.files.iter().map(|f| f.caches[r]).collect());
        push_node(
            cache_label(r),
            &alloc.cache_rates[r],
            &report.cache_freshness[r],
            sim_col,
        );
    }
    for k in 0..topo.num_users() {
        let sim_col = estimate.map(|est| est.files.iter().map(|f| f.users[k]).collect());
        push_node(
            user_label(k),
            &alloc.user_rates[k],
            &report.user_freshness[k],
            sim_col,
        );
    }
    rows.push(ScenarioRow {
        scenario_id: scenario_id.to_string(),
        sweep_param: sweep_param.to_string(),
        sweep_value: sweep_value.to_string(),
        policy: policy.to_string(),
        node: "total".to_string(),
        file: None,
        lambda: None,
        rate: None,
        freshness: report.grand_total,
        sim_mean: estimate.map(|e| e.grand_total.mean),
        sim_half_width: estimate.map(|e| e.grand_total.half_width),
        kkt_residual: Some(max_residual),
        iterations: trace.map(|t| t.iterations_used),
        converged: trace.map(|t| t.converged),
    });
    Ok(rows)
}

/// Rows for one externally produced allocation against the config's base
/// point, labeled with `policy`. Sweeps in the config are ignored here;
/// pass a trace to surface its iteration diagnostics.
pub fn allocation_rows(
    cfg: &ScenarioConfig,
    policy: &str,
    alloc: &RateAllocation,
    trace: Option<&SolveTrace>,
    estimate: Option<&SystemEstimate>,
) -> Result<Vec<ScenarioRow>, Error> {
    let profile = cfg.source.build()?;
    let topo = cfg.topology.build(profile.n());
    point_rows(
        &cfg.scenario_id,
        "",
        "",
        policy,
        &profile,
        &topo,
        alloc,
        trace,
        estimate,
    )
}

fn run_point(cfg: &ScenarioConfig, point: &PointSpec) -> Result<Vec<ScenarioRow>, Error> {
    let profile = point.source.build()?;
    let topo = point.topology.build(profile.n());
    let settings = cfg.optimizer.settings();
    let sim_cfg = cfg.simulation.map(|spec| {
        let min_rate = profile.lambdas.iter().copied().fold(f64::INFINITY, f64::min);
        SimConfig {
            horizon: spec.horizon.unwrap_or_else(|| default_horizon(min_rate)),
            replications: spec.replications,
            seed: spec.seed,
            warmup: spec.warmup,
        }
    });

    let mut rows = Vec::new();
    for &policy in &cfg.policies {
        let (alloc, trace): (RateAllocation, Option<SolveTrace>) = match policy {
            Policy::Optimized => {
                let (alloc, trace) = alternating_maximize(&profile, &topo, settings, None)?;
                (alloc, Some(trace))
            }
            Policy::LambdaProportional => (
                baseline_allocation(BaselinePolicy::LambdaProportional, &profile, &topo)?,
                None,
            ),
            Policy::LambdaInverse => (
                baseline_allocation(BaselinePolicy::LambdaInverse, &profile, &topo)?,
                None,
            ),
        };
        let estimate: Option<SystemEstimate> = match &sim_cfg {
            Some(c) => Some(simulate_system(&profile, &topo, &alloc, c)?),
            None => None,
        };
        rows.extend(point_rows(
            &cfg.scenario_id,
            &point.sweep_param,
            &point.sweep_value,
            policy.name(),
            &profile,
            &topo,
            &alloc,
            trace.as_ref(),
            estimate.as_ref(),
        )?);
    }
    Ok(rows)
}

/// Expand the sweeps and evaluate every point under every policy.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult, Error> {
    if cfg.policies.is_empty() {
        return Err(Error::Config("need at least one policy".into()));
    }
    let points = expand_points(cfg)?;
    let outcomes = map_indexed(points.len(), |p| run_point(cfg, &points[p]));
    let mut rows = Vec::new();
    for outcome in outcomes {
        rows.extend(outcome?);
    }
    Ok(ScenarioResult {
        rows,
        config: cfg.clone(),
        points: points.len(),
    })
}

/// Names accepted by [`preset`], in display order.
pub fn preset_names() -> &'static [&'static str] {
    &["example1", "example2", "example3", "example4", "example5"]
}

/// Built-in scenario configs exercising each topology and sweep style.
pub fn preset(name: &str) -> Option<ScenarioConfig> {
    use serde_json::json;
    let value = match name {
        // Skewed source, tight budgets: the solver drops the hottest
        // files entirely.
        "example1" => json!({
            "scenario_id": "example1",
            "source": {"kind": "geometric", "a": 10.0, "q": 0.7, "n": 15},
            "topology": {"kind": "single_cache", "cache_budget": 5.0, "user_budget": 10.0},
        }),
        // Optimized vs both baselines while the popularity skew and the
        // total update rate vary one at a time.
        "example2" => {
            let qs: Vec<f64> = (1..=10).map(|i| f64::from(i) / 10.0).collect();
            let totals: Vec<f64> = (1..=20).map(f64::from).collect();
            json!({
                "scenario_id": "example2",
                "source": {"kind": "geometric", "a": 10.0, "q": 0.7, "n": 20},
                "topology": {"kind": "single_cache", "cache_budget": 15.0, "user_budget": 10.0},
                "policies": ["optimized", "lambda-proportional", "lambda-inverse"],
                "sweeps": [
                    {"params": [{"param": "q", "values": qs}]},
                    {"params": [{"param": "a", "values": totals}]},
                ],
            })
        }
        // Freshness against cache budget for three skew levels.
        "example3" => {
            let budgets: Vec<f64> = (2..=20).map(|i| f64::from(i) * 0.5).collect();
            json!({
                "scenario_id": "example3",
                "source": {"kind": "geometric", "a": 2.0, "q": 0.75, "n": 15},
                "topology": {"kind": "single_cache", "cache_budget": 5.0, "user_budget": 10.0},
                "sweeps": [
                    {"params": [
                        {"param": "q", "values": [0.5, 0.75, 1.0]},
                        {"param": "cache_budget", "values": budgets},
                    ]},
                ],
            })
        }
        // Two-stage chain; the stage next to the source gets more budget.
        "example4" => json!({
            "scenario_id": "example4",
            "source": {"kind": "geometric", "a": 10.0, "q": 0.7, "n": 10},
            "topology": {"kind": "serial_chain", "cache_budgets": [4.0, 10.0], "user_budget": 20.0},
            "sweeps": [
                {"params": [{"param": "cache_budget", "index": 1, "values": [4.0, 8.0]}]},
            ],
        }),
        // Two users with very different budgets behind one cache.
        "example5" => json!({
            "scenario_id": "example5",
            "source": {"kind": "geometric", "a": 10.0, "q": 0.7, "n": 10},
            "topology": {"kind": "multi_user", "cache_budget": 10.0, "user_budgets": [5.0, 20.0]},
        }),
        _ => return None,
    };
    Some(serde_json::from_value(value).expect("presets parse"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_is_flat_at_ratio_one() {
        let l = geometric_lambdas(10.0, 1.0, 5).unwrap();
        assert_eq!(l, vec![2.0; 5]);
    }

    #[test]
    fn geometric_halves_at_ratio_half() {
        let l = geometric_lambdas(3.0, 0.5, 2).unwrap();
        assert!((l[0] - 2.0).abs() < 1e-12);
        assert!((l[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn geometric_sums_to_the_total_and_decreases() {
        let l = geometric_lambdas(7.3, 0.63, 9).unwrap();
        let sum: f64 = l.iter().sum();
        assert!((sum - 7.3).abs() < 1e-12 * 7.3);
        for pair in l.windows(2) {
            assert!(pair[1] < pair[0]);
        }
    }

    #[test]
    fn geometric_rejects_bad_parameters() {
        assert!(geometric_lambdas(0.0, 0.5, 3).is_err());
        assert!(geometric_lambdas(1.0, 0.0, 3).is_err());
        assert!(geometric_lambdas(1.0, 1.2, 3).is_err());
        assert!(geometric_lambdas(1.0, 0.5, 0).is_err());
    }

    fn tiny_config(policies: &[&str], sweeps: serde_json::Value) -> ScenarioConfig {
        serde_json::from_value(serde_json::json!({
            "scenario_id": "tiny",
            "source": {"kind": "explicit", "lambdas": [1.0, 2.0]},
            "topology": {"kind": "single_cache", "cache_budget": 2.0, "user_budget": 2.0},
            "policies": policies,
            "sweeps": sweeps,
        }))
        .unwrap()
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg: ScenarioConfig = serde_json::from_str(
            r#"{
                "scenario_id": "min",
                "source": {"kind": "explicit", "lambdas": [1.0]},
                "topology": {"kind": "single_cache", "cache_budget": 1.0, "user_budget": 1.0}
            }"#,
        )
        .unwrap();
        assert_eq!(cfg.policies, vec![Policy::Optimized]);
        assert_eq!(cfg.optimizer, OptimizerSpec::default());
        assert!(cfg.simulation.is_none());
        assert!(cfg.sweeps.is_empty());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let result: Result<ScenarioConfig, _> = serde_json::from_str(
            r#"{
                "scenario_id": "bad",
                "source": {"kind": "explicit", "lambdas": [1.0]},
                "topology": {"kind": "single_cache", "cache_budget": 1.0, "user_budget": 1.0},
                "horizon": 10.0
            }"#,
        );
        assert!(result.is_err());
    }

    #[test]
    fn groups_cross_inside_and_concatenate_across() {
        let cfg = tiny_config(
            &["optimized"],
            serde_json::json!([
                {"params": [
                    {"param": "cache_budget", "values": [1.0, 2.0]},
                    {"param": "user_budget", "values": [1.0, 2.0, 3.0]},
                ]},
                {"params": [{"param": "user_budget", "values": [5.0]}]},
            ]),
        );
        let points = expand_points(&cfg).unwrap();
        assert_eq!(points.len(), 7);
        assert_eq!(points[0].sweep_param, "cache_budget;user_budget");
        assert_eq!(points[0].sweep_value, "1;1");
        assert_eq!(points[1].sweep_value, "1;2");
        assert_eq!(points[5].sweep_value, "2;3");
        assert_eq!(points[6].sweep_param, "user_budget");
        assert_eq!(points[6].sweep_value, "5");
    }

    #[test]
    fn sweeps_validate_their_targets() {
        let q_on_explicit = tiny_config(
            &["optimized"],
            serde_json::json!([{"params": [{"param": "q", "values": [0.5]}]}]),
        );
        assert!(run_scenario(&q_on_explicit).is_err());

        let bad_index = tiny_config(
            &["optimized"],
            serde_json::json!([{"params": [{"param": "cache_budget", "index": 2, "values": [1.0]}]}]),
        );
        assert!(run_scenario(&bad_index).is_err());

        let empty_values = tiny_config(
            &["optimized"],
            serde_json::json!([{"params": [{"param": "a", "values": []}]}]),
        );
        assert!(run_scenario(&empty_values).is_err());
    }

    #[test]
    fn row_layout_is_nodes_files_then_total() {
        let cfg = tiny_config(
            &["optimized", "lambda-proportional", "lambda-inverse"],
            serde_json::json!([]),
        );
        let result = run_scenario(&cfg).unwrap();
        assert_eq!(result.points, 1);
        // 3 policies x (2 nodes x 2 files + 1 summary).
        assert_eq!(result.rows.len(), 15);
        let first = &result.rows[0];
        assert_eq!(first.node, "cache 1");
        assert_eq!(first.file, Some(1));
        let summary = &result.rows[4];
        assert_eq!(summary.node, "total");
        assert_eq!(summary.policy, "optimized");
        assert_eq!(summary.converged, Some(true));
        assert!(summary.kkt_residual.unwrap() <= 1e-8);
        let baseline_summary = &result.rows[9];
        assert_eq!(baseline_summary.policy, "lambda-proportional");
        assert_eq!(baseline_summary.converged, None);
    }

    #[test]
    fn csv_output_is_stable_across_runs() {
        let cfg = tiny_config(
            &["optimized", "lambda-inverse"],
            serde_json::json!([{"params": [{"param": "user_budget", "values": [1.0, 4.0]}]}]),
        );
        let a = run_scenario(&cfg).unwrap().to_csv_string();
        let b = run_scenario(&cfg).unwrap().to_csv_string();
        assert_eq!(a, b);
        let header = a.lines().next().unwrap();
        assert_eq!(header.split(',').count(), 14);
        assert!(header.starts_with("scenario_id,sweep_param,sweep_value,policy,node,file"));
    }

    #[test]
    fn simulation_columns_fill_when_requested() {
        let mut cfg = tiny_config(&["optimized"], serde_json::json!([]));
        cfg.simulation = Some(SimulationSpec {
            horizon: Some(300.0),
            replications: 3,
            seed: 1,
            warmup: 0.0,
        });
        let result = run_scenario(&cfg).unwrap();
        for row in &result.rows {
            let mean = row.sim_mean.expect("simulation requested");
            assert!(row.sim_half_width.is_some());
            if row.node != "total" {
                assert!((0.0..=1.0).contains(&mean));
            }
        }
    }

    #[test]
    fn presets_parse_and_the_first_runs() {
        for name in preset_names() {
            assert!(preset(name).is_some(), "{name} missing");
        }
        assert!(preset("nope").is_none());
        let result = run_scenario(&preset("example1").unwrap()).unwrap();
        assert_eq!(result.points, 1);
        let summary = result.rows.last().unwrap();
        assert_eq!(summary.node, "total");
        assert_eq!(summary.converged, Some(true));
    }

    #[test]
    fn manifest_echoes_identity_and_shape() {
        let cfg = tiny_config(&["optimized"], serde_json::json!([]));
        let result = run_scenario(&cfg).unwrap();
        let manifest = result.manifest();
        assert_eq!(manifest["scenario_id"], "tiny");
        assert_eq!(manifest["points"], 1);
        assert_eq!(manifest["row_count"], result.rows.len());
        assert_eq!(manifest["config"]["scenario_id"], "tiny");
        assert!(manifest["version"].is_string());
    }
}
