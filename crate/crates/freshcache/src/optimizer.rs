//! Request-rate optimization by alternating exact block solves.
//!
//! Fixing every node but one reduces the system objective to
//!
//! ```text
//!     maximize  sum_i sigma_i * x_i / (x_i + lambda_i)
//!     subject   sum_i x_i = B,   x_i >= 0,
//! ```
//!
//! where `sigma_i` collects the file weight and the freshness factors of
//! all other hops. The subproblem is concave with the stationarity
//! condition `sigma_i * lambda_i / (x_i + lambda_i)^2 = beta` on files
//! with positive rate, giving
//!
//! ```text
//!     x_i = sqrt(sigma_i * lambda_i / beta) - lambda_i                (1)
//!     sqrt(beta) = sum_{i in S} sqrt(sigma_i * lambda_i)
//!                  / (B + sum_{i in S} lambda_i)                      (2)
//! ```
//!
//! over the active set `S = { i : sigma_i / lambda_i > beta }`. The
//! solver alternates (2) with removal of files whose ratio
//! `phi_i = sigma_i / lambda_i` falls at or below `beta`; each round
//! either removes a file or terminates, and the file with the largest
//! `phi_i` always survives, so at most `n` rounds run. The active set is
//! an upper set in the `phi` order: whoever beats a supported file's
//! ratio is supported too.
//!
//! [`alternating_maximize`] cycles exact block solves over all cache
//! stages and then all users. Each block can only raise the objective, so
//! the trace is non-decreasing and converges to a stationary point of the
//! joint problem; different initial allocations may reach different
//! stationary points.

use crate::model::{
    cache_label, check, objective_unchecked, user_label, IterationRecord, RateAllocation,
    SolveTrace, SourceProfile, Topology, ValidationError,
};
use crate::analytics::single_hop_freshness;
use crate::Error;

/// One budget-constrained block subproblem in the form above.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerProblem {
    /// Nonnegative objective coefficients, one per file.
    pub sigmas: Vec<f64>,
    /// Positive effective update rates, one per file.
    pub lambdas: Vec<f64>,
    /// Total request rate to distribute.
    pub budget: f64,
}

impl InnerProblem {
    pub fn new(sigmas: Vec<f64>, lambdas: Vec<f64>, budget: f64) -> Result<Self, Error> {
        let mut errors = Vec::new();
        if sigmas.len() != lambdas.len() || lambdas.is_empty() {
            errors.push(ValidationError::DimensionMismatch {
                what: "inner problem coefficients".into(),
                expected: lambdas.len().max(1),
                found: sigmas.len(),
            });
        }
        for (i, &s) in sigmas.iter().enumerate() {
            if !(s >= 0.0 && s.is_finite()) {
                errors.push(ValidationError::NegativeSigma { file: i, value: s });
            }
        }
        for (i, &l) in lambdas.iter().enumerate() {
            if !(l > 0.0 && l.is_finite()) {
                errors.push(ValidationError::NonpositiveLambda { file: i, value: l });
            }
        }
        if !(budget > 0.0 && budget.is_finite()) {
            errors.push(ValidationError::NonpositiveBudget {
                node: "inner problem".into(),
                value: budget,
            });
        }
        if errors.is_empty() {
            Ok(Self {
                sigmas,
                lambdas,
                budget,
            })
        } else {
            Err(Error::Invalid(errors))
        }
    }
}

/// Result of [`threshold_inner_solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolution {
    /// Optimal rates; zero outside the active set, positive inside.
    pub rates: Vec<f64>,
    /// Common marginal value `beta` of budget on the active set, 0 when
    /// degenerate.
    pub multiplier: f64,
    /// True when every `sigma_i` is zero: nothing is worth requesting and
    /// all rates are zero.
    pub degenerate: bool,
}

/// Exact solution of an [`InnerProblem`] by threshold deactivation.
///
/// The returned rates sum to the budget within `1e-12 * budget` unless
/// the problem is degenerate. Files tied at `phi_i == beta` stay out of
/// the active set.
pub fn threshold_inner_solve(problem: &InnerProblem) -> InnerSolution {
    let n = problem.lambdas.len();
    let sqrt_prod: Vec<f64> = (0..n)
        .map(|i| (problem.sigmas[i] * problem.lambdas[i]).sqrt())
        .collect();
    let phi: Vec<f64> = (0..n)
        .map(|i| problem.sigmas[i] / problem.lambdas[i])
        .collect();

    let mut active: Vec<bool> = problem.sigmas.iter().map(|&s| s > 0.0).collect();
    loop {
        let mut sum_sqrt = 0.0;
        let mut sum_lambda = 0.0;
        for i in 0..n {
            if active[i] {
                sum_sqrt += sqrt_prod[i];
                sum_lambda += problem.lambdas[i];
            }
        }
        if sum_sqrt == 0.0 {
            return InnerSolution {
                rates: vec![0.0; n],
                multiplier: 0.0,
                degenerate: true,
            };
        }

        let sqrt_beta = sum_sqrt / (problem.budget + sum_lambda);
        let beta = sqrt_beta * sqrt_beta;
        let mut removed = false;
        for i in 0..n {
            if active[i] && phi[i] <= beta {
                active[i] = false;
                removed = true;
            }
        }
        if !removed {
            let rates: Vec<f64> = (0..n)
                .map(|i| {
                    if active[i] {
                        sqrt_prod[i] / sqrt_beta - problem.lambdas[i]
                    } else {
                        0.0
                    }
                })
                .collect();
            return InnerSolution {
                rates,
                multiplier: beta,
                degenerate: false,
            };
        }
    }
}

/// A request-setting node in a topology, 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeId {
    Cache(usize),
    User(usize),
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            NodeId::Cache(r) => write!(f, "{}", cache_label(r)),
            NodeId::User(k) => write!(f, "{}", user_label(k)),
        }
    }
}

fn node_in_range(topo: &Topology, node: NodeId) -> bool {
    match node {
        NodeId::Cache(r) => r < topo.num_caches(),
        NodeId::User(k) => k < topo.num_users(),
    }
}

/// Block subproblem for one node given everyone else's current rates.
///
/// The coefficient of file `i` multiplies the node's own hop factor in
/// the objective: the file weight, the summed user factors of all users
/// behind the node, and the hop factors of every other cache stage.
/// Files another node has abandoned arrive here with `sigma_i == 0` and
/// stay at rate zero, which keeps dead files dead across blocks. Lossy
/// links enter through the effective update rates `lambda_i / p_i`.
pub fn build_sigma(
    profile: &SourceProfile,
    topo: &Topology,
    alloc: &RateAllocation,
    node: NodeId,
) -> Result<InnerProblem, Error> {
    check(profile, topo, alloc)?;
    if !node_in_range(topo, node) {
        return Err(Error::UnknownNode(node));
    }
    Ok(inner_problem_unchecked(profile, topo, alloc, node))
}

fn inner_problem_unchecked(
    profile: &SourceProfile,
    topo: &Topology,
    alloc: &RateAllocation,
    node: NodeId,
) -> InnerProblem {
    let n = profile.n();
    let mut sigmas = Vec::with_capacity(n);
    let mut lambdas = Vec::with_capacity(n);
    for i in 0..n {
        let (sigma, lambda) = match node {
            NodeId::Cache(r) => {
                let users: f64 = alloc
                    .user_rates
                    .iter()
                    .map(|row| single_hop_freshness(row[i], profile.user_lambda(i)))
                    .sum();
                let others: f64 = alloc
                    .cache_rates
                    .iter()
                    .enumerate()
                    .filter(|&(l, _)| l != r)
                    .map(|(_, row)| single_hop_freshness(row[i], profile.cache_lambda(i)))
                    .product();
                (users * others, profile.cache_lambda(i))
            }
            NodeId::User(_) => {
                let chain: f64 = alloc
                    .cache_rates
                    .iter()
                    .map(|row| single_hop_freshness(row[i], profile.cache_lambda(i)))
                    .product();
                (chain, profile.user_lambda(i))
            }
        };
        sigmas.push(profile.weight(i) * sigma);
        lambdas.push(lambda);
    }
    let budget = match node {
        NodeId::Cache(r) => topo.cache_budget(r),
        NodeId::User(k) => topo.user_budget(k),
    };
    InnerProblem {
        sigmas,
        lambdas,
        budget,
    }
}

fn node_rates(alloc: &RateAllocation, node: NodeId) -> &[f64] {
    match node {
        NodeId::Cache(r) => &alloc.cache_rates[r],
        NodeId::User(k) => &alloc.user_rates[k],
    }
}

fn set_node_rates(alloc: &mut RateAllocation, node: NodeId, rates: Vec<f64>) {
    match node {
        NodeId::Cache(r) => alloc.cache_rates[r] = rates,
        NodeId::User(k) => alloc.user_rates[k] = rates,
    }
}

fn all_nodes(topo: &Topology) -> Vec<NodeId> {
    (0..topo.num_caches())
        .map(NodeId::Cache)
        .chain((0..topo.num_users()).map(NodeId::User))
        .collect()
}

/// Solver knobs. The defaults converge every bundled scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSettings {
    /// Upper bound on outer cycles over all blocks.
    pub max_outer_iterations: usize,
    /// Convergence needs the objective to move less than this over a full
    /// cycle...
    pub objective_tolerance: f64,
    /// ...and every node's stationarity residual below this.
    pub kkt_tolerance: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            max_outer_iterations: 10_000,
            objective_tolerance: 1e-10,
            kkt_tolerance: 1e-8,
        }
    }
}

fn check_settings(settings: &OptimizerSettings) -> Result<(), Error> {
    if settings.max_outer_iterations == 0 {
        return Err(Error::Config(
            "max_outer_iterations must be at least 1".into(),
        ));
    }
    for (name, v) in [
        ("objective_tolerance", settings.objective_tolerance),
        ("kkt_tolerance", settings.kkt_tolerance),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Config(format!(
                "{name} must be positive and finite, got {v}"
            )));
        }
    }
    Ok(())
}

fn support_sets(alloc: &RateAllocation) -> Vec<Vec<usize>> {
    alloc
        .cache_rates
        .iter()
        .chain(alloc.user_rates.iter())
        .map(|row| {
            row.iter()
                .enumerate()
                .filter(|&(_, &x)| x > 0.0)
                .map(|(i, _)| i)
                .collect()
        })
        .collect()
}

/// Maximize weighted total user freshness over all request rates by
/// cycling exact block solves: cache stages in chain order, then users.
///
/// `init` defaults to every node spreading its budget uniformly. Returns
/// the final allocation and the per-cycle [`SolveTrace`]; `converged` is
/// set once the objective moves less than `objective_tolerance` over a
/// cycle while the worst stationarity residual is below `kkt_tolerance`.
/// A non-converged trace is still a valid allocation, just not certified
/// stationary.
pub fn alternating_maximize(
    profile: &SourceProfile,
    topo: &Topology,
    settings: OptimizerSettings,
    init: Option<&RateAllocation>,
) -> Result<(RateAllocation, SolveTrace), Error> {
    check_settings(&settings)?;
    let mut alloc = match init {
        Some(given) => given.clone(),
        None => RateAllocation::uniform(topo),
    };
    check(profile, topo, &alloc)?;

    let nodes = all_nodes(topo);
    let mut trace = SolveTrace::default();
    let mut prev = objective_unchecked(profile, &alloc);
    for cycle in 1..=settings.max_outer_iterations {
        for &node in &nodes {
            let problem = inner_problem_unchecked(profile, topo, &alloc, node);
            let solution = threshold_inner_solve(&problem);
            set_node_rates(&mut alloc, node, solution.rates);
        }
        let objective = objective_unchecked(profile, &alloc);
        let max_residual = nodes
            .iter()
            .map(|&node| node_residual(profile, topo, &alloc, node))
            .fold(0.0, f64::max);
        trace.iterations.push(IterationRecord {
            objective,
            max_kkt_residual: max_residual,
            support: support_sets(&alloc),
        });
        trace.iterations_used = cycle;
        if (objective - prev).abs() < settings.objective_tolerance
            && max_residual < settings.kkt_tolerance
        {
            trace.converged = true;
            break;
        }
        prev = objective;
    }
    Ok((alloc, trace))
}

fn node_residual(
    profile: &SourceProfile,
    topo: &Topology,
    alloc: &RateAllocation,
    node: NodeId,
) -> f64 {
    let problem = inner_problem_unchecked(profile, topo, alloc, node);
    let rates = node_rates(alloc, node);
    let grad = |i: usize| {
        let denom = rates[i] + problem.lambdas[i];
        problem.sigmas[i] * problem.lambdas[i] / (denom * denom)
    };

    let support: Vec<usize> = (0..rates.len()).filter(|&i| rates[i] > 0.0).collect();
    // With an empty support the budget sits unused, so any positive
    // gradient is pure violation measured against a zero multiplier.
    let multiplier = if support.is_empty() {
        0.0
    } else {
        support.iter().map(|&i| grad(i)).sum::<f64>() / support.len() as f64
    };
    let mut deviation = 0.0_f64;
    for &i in &support {
        deviation = deviation.max((grad(i) - multiplier).abs());
    }
    let mut excess = 0.0_f64;
    for (i, &rate) in rates.iter().enumerate() {
        if rate == 0.0 {
            excess = excess.max(grad(i) - multiplier);
        }
    }
    deviation + excess
}

/// Stationarity residual per node, caches first then users.
///
/// On each node's supported files the objective gradient with respect to
/// the node's own rate must be a common constant (the budget's marginal
/// value); the residual adds the largest deviation from that constant and
/// the largest positive gradient excess among the node's zero-rate files.
/// Small residuals certify a stationary point of the joint problem.
pub fn kkt_residuals(
    profile: &SourceProfile,
    topo: &Topology,
    alloc: &RateAllocation,
) -> Result<Vec<f64>, Error> {
    check(profile, topo, alloc)?;
    Ok(all_nodes(topo)
        .into_iter()
        .map(|node| node_residual(profile, topo, alloc, node))
        .collect())
}

/// Budget split rules that ignore the freshness interplay across hops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselinePolicy {
    /// Every node splits its budget proportionally to `lambda_i`.
    LambdaProportional,
    /// Every node splits its budget proportionally to `1 / lambda_i`.
    LambdaInverse,
}

/// Allocation under a [`BaselinePolicy`]; every node saturates its budget.
pub fn baseline_allocation(
    policy: BaselinePolicy,
    profile: &SourceProfile,
    topo: &Topology,
) -> Result<RateAllocation, Error> {
    check(profile, topo, &RateAllocation::zeros(topo))?;
    let shares: Vec<f64> = profile
        .lambdas
        .iter()
        .map(|&l| match policy {
            BaselinePolicy::LambdaProportional => l,
            BaselinePolicy::LambdaInverse => 1.0 / l,
        })
        .collect();
    let total: f64 = shares.iter().sum();
    let split = |budget: f64| -> Vec<f64> {
        shares.iter().map(|&s| budget * s / total).collect()
    };
    Ok(RateAllocation {
        cache_rates: (0..topo.num_caches())
            .map(|r| split(topo.cache_budget(r)))
            .collect(),
        user_rates: (0..topo.num_users())
            .map(|k| split(topo.user_budget(k)))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::freshness_report;
    use crate::scenario::geometric_lambdas;

    const EPS: f64 = 1e-12;

    fn problem(sigmas: Vec<f64>, lambdas: Vec<f64>, budget: f64) -> InnerProblem {
        InnerProblem::new(sigmas, lambdas, budget).unwrap()
    }

    #[test]
    fn inner_solve_symmetric_files_split_evenly() {
        let sol = threshold_inner_solve(&problem(vec![1.0, 1.0], vec![1.0, 1.0], 2.0));
        assert!((sol.rates[0] - 1.0).abs() < EPS, "got {:?}", sol.rates);
        assert!((sol.rates[1] - 1.0).abs() < EPS);
        assert!((sol.multiplier - 0.25).abs() < EPS, "got {}", sol.multiplier);
        assert!(!sol.degenerate);
    }

    #[test]
    fn inner_solve_favors_the_slower_file() {
        // lambda = (3, 1), budget 1: sqrt(beta) = (sqrt(3) + 1) / 5.
        let sol = threshold_inner_solve(&problem(vec![1.0, 1.0], vec![3.0, 1.0], 1.0));
        assert!(
            (sol.rates[0] - 0.169_872_981_077_807).abs() < 1e-9,
            "got {:?}",
            sol.rates
        );
        assert!((sol.rates[1] - 0.830_127_018_922_193).abs() < 1e-9);
        let expected_beta = ((3.0_f64.sqrt() + 1.0) / 5.0).powi(2);
        assert!((sol.multiplier - expected_beta).abs() < EPS);
    }

    #[test]
    fn inner_solve_deactivates_hopeless_files() {
        // First round: sqrt(beta) = (sqrt(10) + 1) / 11.5, beta ~ 0.131,
        // and phi_1 = 0.1 <= beta kicks file 1 out of the active set.
        let sol = threshold_inner_solve(&problem(vec![1.0, 1.0], vec![10.0, 1.0], 0.5));
        assert_eq!(sol.rates[0], 0.0, "got {:?}", sol.rates);
        assert!((sol.rates[1] - 0.5).abs() < EPS);
        assert!((sol.multiplier - 4.0 / 9.0).abs() < EPS);
    }

    #[test]
    fn inner_solve_flags_all_zero_sigmas() {
        let sol = threshold_inner_solve(&problem(vec![0.0, 0.0], vec![1.0, 2.0], 1.0));
        assert!(sol.degenerate);
        assert_eq!(sol.rates, vec![0.0, 0.0]);
        assert_eq!(sol.multiplier, 0.0);
    }

    #[test]
    fn inner_solve_saturates_the_budget() {
        let p = problem(vec![0.3, 2.0, 0.9], vec![4.0, 0.2, 1.1], 2.5);
        let sol = threshold_inner_solve(&p);
        let sum: f64 = sol.rates.iter().sum();
        assert!(
            (sum - p.budget).abs() <= 1e-12 * p.budget,
            "rates sum to {sum}"
        );
        assert!(sol.rates.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn inner_problem_rejects_bad_input() {
        assert!(InnerProblem::new(vec![1.0], vec![0.0], 1.0).is_err());
        assert!(InnerProblem::new(vec![-1.0], vec![1.0], 1.0).is_err());
        assert!(InnerProblem::new(vec![1.0], vec![1.0], 0.0).is_err());
        assert!(InnerProblem::new(vec![1.0, 1.0], vec![1.0], 1.0).is_err());
    }

    fn single(n: usize, cache_budget: f64, user_budget: f64) -> Topology {
        Topology::SingleCache {
            n,
            cache_budget,
            user_budget,
        }
    }

    #[test]
    fn sigma_for_single_cache_is_the_user_factor() {
        let profile = SourceProfile::new(vec![1.0]);
        let topo = single(1, 2.0, 3.0);
        let alloc = RateAllocation {
            cache_rates: vec![vec![2.0]],
            user_rates: vec![vec![3.0]],
        };
        let p = build_sigma(&profile, &topo, &alloc, NodeId::Cache(0)).unwrap();
        assert!((p.sigmas[0] - 0.75).abs() < EPS, "got {:?}", p.sigmas);
        assert_eq!(p.budget, 2.0);
    }

    #[test]
    fn sigma_for_shared_cache_sums_user_factors() {
        let profile = SourceProfile::new(vec![1.0]);
        let topo = Topology::MultiUser {
            n: 1,
            cache_budget: 1.0,
            user_budgets: vec![1.0, 1.0],
        };
        let alloc = RateAllocation {
            cache_rates: vec![vec![1.0]],
            user_rates: vec![vec![1.0], vec![1.0]],
        };
        let p = build_sigma(&profile, &topo, &alloc, NodeId::Cache(0)).unwrap();
        assert!((p.sigmas[0] - 1.0).abs() < EPS, "got {:?}", p.sigmas);
    }

    #[test]
    fn sigma_for_chain_stage_takes_the_other_hops() {
        let profile = SourceProfile::new(vec![1.0]);
        let topo = Topology::SerialChain {
            n: 1,
            cache_budgets: vec![1.0, 1.0],
            user_budget: 1.0,
        };
        let alloc = RateAllocation {
            cache_rates: vec![vec![1.0], vec![1.0]],
            user_rates: vec![vec![1.0]],
        };
        let p = build_sigma(&profile, &topo, &alloc, NodeId::Cache(1)).unwrap();
        assert!((p.sigmas[0] - 0.25).abs() < EPS, "got {:?}", p.sigmas);
    }

    #[test]
    fn sigma_rejects_out_of_range_nodes() {
        let profile = SourceProfile::new(vec![1.0]);
        let topo = single(1, 1.0, 1.0);
        let alloc = RateAllocation::uniform(&topo);
        assert!(matches!(
            build_sigma(&profile, &topo, &alloc, NodeId::Cache(1)),
            Err(Error::UnknownNode(NodeId::Cache(1)))
        ));
        assert!(matches!(
            build_sigma(&profile, &topo, &alloc, NodeId::User(2)),
            Err(Error::UnknownNode(NodeId::User(2)))
        ));
    }

    #[test]
    fn identical_files_keep_the_uniform_split() {
        let profile = SourceProfile::new(vec![1.0, 1.0, 1.0]);
        let topo = single(3, 3.0, 3.0);
        let (alloc, trace) =
            alternating_maximize(&profile, &topo, OptimizerSettings::default(), None).unwrap();
        assert!(trace.converged);
        for row in alloc.cache_rates.iter().chain(alloc.user_rates.iter()) {
            for &x in row {
                assert!((x - 1.0).abs() < 1e-9, "got {row:?}");
            }
        }
    }

    #[test]
    fn single_file_takes_the_whole_budget() {
        let profile = SourceProfile::new(vec![2.0]);
        let topo = single(1, 4.0, 7.0);
        let (alloc, trace) =
            alternating_maximize(&profile, &topo, OptimizerSettings::default(), None).unwrap();
        assert!(trace.converged);
        assert!((alloc.cache_rates[0][0] - 4.0).abs() < 1e-12 * 4.0);
        assert!((alloc.user_rates[0][0] - 7.0).abs() < 1e-12 * 7.0);
    }

    #[test]
    fn skewed_sources_drop_the_hottest_files() {
        let lambdas = geometric_lambdas(10.0, 0.7, 15).unwrap();
        let profile = SourceProfile::new(lambdas);
        let topo = single(15, 5.0, 10.0);
        let (alloc, trace) =
            alternating_maximize(&profile, &topo, OptimizerSettings::default(), None).unwrap();
        assert!(trace.converged, "ran {} cycles", trace.iterations_used);
        for i in 0..4 {
            assert_eq!(alloc.cache_rates[0][i], 0.0, "file {i} should be dropped");
            assert_eq!(alloc.user_rates[0][i], 0.0, "file {i} should be dropped");
        }
        for i in 4..15 {
            assert!(alloc.cache_rates[0][i] > 0.0, "file {i} should be kept");
            assert!(alloc.user_rates[0][i] > 0.0, "file {i} should be kept");
        }
        let residuals = kkt_residuals(&profile, &topo, &alloc).unwrap();
        assert!(residuals.iter().all(|&r| r <= 1e-8), "residuals {residuals:?}");
    }

    #[test]
    fn objective_trace_never_decreases() {
        let lambdas = geometric_lambdas(10.0, 0.7, 15).unwrap();
        let profile = SourceProfile::new(lambdas);
        let topo = single(15, 5.0, 10.0);
        let (_, trace) =
            alternating_maximize(&profile, &topo, OptimizerSettings::default(), None).unwrap();
        for pair in trace.iterations.windows(2) {
            assert!(
                pair[1].objective >= pair[0].objective - 1e-12,
                "objective dropped: {} -> {}",
                pair[0].objective,
                pair[1].objective
            );
        }
    }

    #[test]
    fn residuals_vanish_at_a_fixed_point_and_not_elsewhere() {
        let profile = SourceProfile::new(vec![1.0, 1.0]);
        let topo = single(2, 2.0, 2.0);
        let (alloc, trace) =
            alternating_maximize(&profile, &topo, OptimizerSettings::default(), None).unwrap();
        assert!(trace.converged);
        let at_opt = kkt_residuals(&profile, &topo, &alloc).unwrap();
        assert!(at_opt.iter().all(|&r| r <= 1e-8), "got {at_opt:?}");

        let mut skewed = alloc.clone();
        skewed.cache_rates[0] = vec![1.5, 0.5];
        let residuals = kkt_residuals(&profile, &topo, &skewed).unwrap();
        assert!(residuals[0] > 1e-4, "got {residuals:?}");
    }

    #[test]
    fn lambda_proportional_matches_hand_computation() {
        let profile = SourceProfile::new(vec![2.0, 1.0]);
        let topo = single(2, 3.0, 3.0);
        let alloc =
            baseline_allocation(BaselinePolicy::LambdaProportional, &profile, &topo).unwrap();
        assert!((alloc.cache_rates[0][0] - 2.0).abs() < EPS);
        assert!((alloc.cache_rates[0][1] - 1.0).abs() < EPS);
    }

    #[test]
    fn lambda_inverse_matches_hand_computation() {
        let profile = SourceProfile::new(vec![2.0, 1.0]);
        let topo = single(2, 3.0, 3.0);
        let alloc = baseline_allocation(BaselinePolicy::LambdaInverse, &profile, &topo).unwrap();
        assert!((alloc.cache_rates[0][0] - 1.0).abs() < EPS, "{:?}", alloc.cache_rates);
        assert!((alloc.cache_rates[0][1] - 2.0).abs() < EPS);
    }

    #[test]
    fn lambda_proportional_equalizes_per_file_freshness() {
        let lambdas = geometric_lambdas(4.0, 0.5, 6).unwrap();
        let a: f64 = lambdas.iter().sum();
        let (cap, user) = (8.0, 12.0);
        let profile = SourceProfile::new(lambdas);
        let topo = single(6, cap, user);
        let alloc =
            baseline_allocation(BaselinePolicy::LambdaProportional, &profile, &topo).unwrap();
        let report = freshness_report(&profile, &topo, &alloc).unwrap();
        let expected = (user / (user + a)) * (cap / (cap + a));
        for &f in &report.user_freshness[0] {
            assert!((f - expected).abs() < 1e-12, "got {f}, expected {expected}");
        }
    }

    #[test]
    fn baselines_saturate_every_budget() {
        let profile = SourceProfile::new(vec![0.5, 1.5, 3.0]);
        let topo = Topology::SerialChain {
            n: 3,
            cache_budgets: vec![2.0, 5.0],
            user_budget: 1.0,
        };
        for policy in [BaselinePolicy::LambdaProportional, BaselinePolicy::LambdaInverse] {
            let alloc = baseline_allocation(policy, &profile, &topo).unwrap();
            for (r, row) in alloc.cache_rates.iter().enumerate() {
                let sum: f64 = row.iter().sum();
                let budget = topo.cache_budget(r);
                assert!((sum - budget).abs() <= 1e-12 * budget);
            }
            let sum: f64 = alloc.user_rates[0].iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12);
        }
    }
}
