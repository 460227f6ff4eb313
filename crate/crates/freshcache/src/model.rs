//! Domain types shared by the analytic, optimizing and simulating layers.
//!
//! A [`SourceProfile`] describes the files at the source: update rates
//! `lambda_i`, optional importance weights and optional per-file
//! transmission success probabilities for cache and user links. A
//! [`Topology`] fixes the relay layout and per-node request budgets, and a
//! [`RateAllocation`] assigns per-file request rates to every node.
//!
//! All three are plain data. [`validate`] is the single authority on
//! whether a combination is usable; operations that need validity run it
//! first and report every violation at once. File and node indices in the
//! Rust API are 0-based; rendered messages and reports use 1-based
//! positions.

use crate::analytics::single_hop_freshness;
use crate::Error;

/// Rates summing to `budget * (1 + tol)` or less count as within budget.
pub const BUDGET_RELATIVE_TOLERANCE: f64 = 1e-9;

/// Per-file source parameters.
///
/// `weights`, `cache_success` and `user_success` may be omitted; they
/// default to 1 for every file. Success probabilities model lossy links:
/// a request on a lossy link succeeds with the given probability and has
/// no effect otherwise, which thins the effective request rate from `r`
/// to `p * r`.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceProfile {
    /// Poisson update rate per file, all positive.
    pub lambdas: Vec<f64>,
    /// Importance weight per file, nonnegative; `None` means all 1.
    pub weights: Option<Vec<f64>>,
    /// Success probability in (0, 1] for every cache link, per file.
    pub cache_success: Option<Vec<f64>>,
    /// Success probability in (0, 1] for every user link, per file.
    pub user_success: Option<Vec<f64>>,
}

impl SourceProfile {
    /// Profile with unit weights and loss-free links.
    pub fn new(lambdas: Vec<f64>) -> Self {
        Self {
            lambdas,
            weights: None,
            cache_success: None,
            user_success: None,
        }
    }

    /// Number of files.
    pub fn n(&self) -> usize {
        self.lambdas.len()
    }

    pub(crate) fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }

    pub(crate) fn cache_success_at(&self, i: usize) -> f64 {
        self.cache_success.as_ref().map_or(1.0, |p| p[i])
    }

    pub(crate) fn user_success_at(&self, i: usize) -> f64 {
        self.user_success.as_ref().map_or(1.0, |q| q[i])
    }

    /// Update rate file `i` appears to have through a lossy cache link:
    /// a request rate `c` with success probability `p` gives freshness
    /// `p*c / (p*c + lambda) = c / (c + lambda/p)`.
    pub(crate) fn cache_lambda(&self, i: usize) -> f64 {
        self.lambdas[i] / self.cache_success_at(i)
    }

    /// Same substitution for user links.
    pub(crate) fn user_lambda(&self, i: usize) -> f64 {
        self.lambdas[i] / self.user_success_at(i)
    }
}

/// Relay layout plus per-node request budgets.
///
/// Every variant records `n`, the number of files it is meant to serve;
/// [`validate`] insists it matches the profile and allocation.
#[derive(Debug, Clone, PartialEq)]
pub enum Topology {
    /// Source -> cache -> user.
    SingleCache {
        n: usize,
        cache_budget: f64,
        user_budget: f64,
    },
    /// Source -> cache 1 -> ... -> cache m -> user.
    SerialChain {
        n: usize,
        cache_budgets: Vec<f64>,
        user_budget: f64,
    },
    /// Source -> cache -> users 1..d in parallel.
    MultiUser {
        n: usize,
        cache_budget: f64,
        user_budgets: Vec<f64>,
    },
}

impl Topology {
    /// Number of files the topology serves.
    pub fn n(&self) -> usize {
        match *self {
            Topology::SingleCache { n, .. }
            | Topology::SerialChain { n, .. }
            | Topology::MultiUser { n, .. } => n,
        }
    }

    /// Number of cache stages between source and user(s).
    pub fn num_caches(&self) -> usize {
        match self {
            Topology::SingleCache { .. } | Topology::MultiUser { .. } => 1,
            Topology::SerialChain { cache_budgets, .. } => cache_budgets.len(),
        }
    }

    /// Number of users.
    pub fn num_users(&self) -> usize {
        match self {
            Topology::SingleCache { .. } | Topology::SerialChain { .. } => 1,
            Topology::MultiUser { user_budgets, .. } => user_budgets.len(),
        }
    }

    /// Request budget of cache stage `r` (0-based).
    ///
    /// Panics if `r` is out of range; use [`validate`] to vet indices
    /// coming from outside.
    pub fn cache_budget(&self, r: usize) -> f64 {
        match self {
            Topology::SingleCache { cache_budget, .. }
            | Topology::MultiUser { cache_budget, .. } => {
                assert!(r == 0, "cache index {r} out of range for a single-cache layout");
                *cache_budget
            }
            Topology::SerialChain { cache_budgets, .. } => cache_budgets[r],
        }
    }

    /// Request budget of user `k` (0-based).
    pub fn user_budget(&self, k: usize) -> f64 {
        match self {
            Topology::SingleCache { user_budget, .. }
            | Topology::SerialChain { user_budget, .. } => {
                assert!(k == 0, "user index {k} out of range for a single-user layout");
                *user_budget
            }
            Topology::MultiUser { user_budgets, .. } => user_budgets[k],
        }
    }
}

/// Per-node, per-file request rates.
///
/// `cache_rates[r][i]` is the rate cache stage `r` polls its upstream for
/// file `i`; `user_rates[k][i]` is the rate user `k` polls its cache.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateAllocation {
    pub cache_rates: Vec<Vec<f64>>,
    pub user_rates: Vec<Vec<f64>>,
}

impl RateAllocation {
    /// Every node spreads its budget evenly over all files.
    pub fn uniform(topo: &Topology) -> Self {
        let n = topo.n().max(1);
        let spread = |budget: f64| vec![budget / n as f64; topo.n()];
        Self {
            cache_rates: (0..topo.num_caches())
                .map(|r| spread(topo.cache_budget(r)))
                .collect(),
            user_rates: (0..topo.num_users())
                .map(|k| spread(topo.user_budget(k)))
                .collect(),
        }
    }

    /// All-zero rates in the shape the topology expects.
    pub fn zeros(topo: &Topology) -> Self {
        Self {
            cache_rates: vec![vec![0.0; topo.n()]; topo.num_caches()],
            user_rates: vec![vec![0.0; topo.n()]; topo.num_users()],
        }
    }
}

/// Closed-form freshness of every copy in the system.
#[derive(Debug, Clone, PartialEq)]
pub struct FreshnessReport {
    /// `cache_freshness[r][i]`: freshness of file `i` at cache stage `r`.
    pub cache_freshness: Vec<Vec<f64>>,
    /// `user_freshness[k][i]`: freshness of file `i` at user `k`.
    pub user_freshness: Vec<Vec<f64>>,
    /// Weighted per-user totals `sum_i w_i * F_u(k, i)`.
    pub total_per_user: Vec<f64>,
    /// Sum of the per-user totals; equals [`total_objective`].
    pub grand_total: f64,
}

/// One outer cycle of the alternating solver.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Weighted total user freshness after the cycle.
    pub objective: f64,
    /// Worst per-node stationarity residual after the cycle.
    pub max_kkt_residual: f64,
    /// Files with positive rate per node, caches first then users.
    pub support: Vec<Vec<usize>>,
}

/// Convergence record of one [`crate::alternating_maximize`] run.
///
/// The objective sequence is non-decreasing up to float roundoff: every
/// block update exactly solves a concave subproblem in its own rates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveTrace {
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
    pub iterations_used: usize,
}

/// A single violated invariant found by [`validate`].
///
/// Index fields are 0-based; rendered messages print 1-based positions.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ValidationError {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("update rate for file {} must be positive and finite, found {value}", file + 1)]
    NonpositiveLambda { file: usize, value: f64 },
    #[error("weight for file {} must be nonnegative and finite, found {value}", file + 1)]
    NegativeWeight { file: usize, value: f64 },
    #[error("{which} success probability for file {} must lie in (0, 1], found {value}", file + 1)]
    SuccessOutOfRange {
        which: &'static str,
        file: usize,
        value: f64,
    },
    #[error("budget for {node} must be positive and finite, found {value}")]
    NonpositiveBudget { node: String, value: f64 },
    #[error("rate at {node} for file {} must be nonnegative and finite, found {value}", file + 1)]
    NegativeRate {
        node: String,
        file: usize,
        value: f64,
    },
    #[error("rates at {node} sum to {sum}, exceeding the budget {budget}")]
    BudgetExceeded { node: String, sum: f64, budget: f64 },
    #[error("coefficient for file {} must be nonnegative and finite, found {value}", file + 1)]
    NegativeSigma { file: usize, value: f64 },
}

pub(crate) fn join_errors(errors: &[ValidationError]) -> String {
    errors
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub(crate) fn cache_label(r: usize) -> String {
    format!("cache {}", r + 1)
}

pub(crate) fn user_label(k: usize) -> String {
    format!("user {}", k + 1)
}

/// Check a profile, topology and allocation against every model
/// invariant and return all violations, empty when the triple is usable.
///
/// Checked: consistent dimensions everywhere; `lambda_i > 0`; weights
/// nonnegative; success probabilities in (0, 1]; budgets positive; rates
/// nonnegative; per-node rate sums within budget up to
/// [`BUDGET_RELATIVE_TOLERANCE`]. Pure: no input is mutated.
pub fn validate(
    profile: &SourceProfile,
    topo: &Topology,
    alloc: &RateAllocation,
) -> Vec<ValidationError> {
    let mut errors = Vec::new();
    let n = profile.n();

    if topo.n() != n {
        errors.push(ValidationError::DimensionMismatch {
            what: "topology file count".into(),
            expected: n,
            found: topo.n(),
        });
    }
    for (i, &l) in profile.lambdas.iter().enumerate() {
        if !(l > 0.0 && l.is_finite()) {
            errors.push(ValidationError::NonpositiveLambda { file: i, value: l });
        }
    }
    if let Some(w) = &profile.weights {
        if w.len() != n {
            errors.push(ValidationError::DimensionMismatch {
                what: "weights".into(),
                expected: n,
                found: w.len(),
            });
        }
        for (i, &v) in w.iter().enumerate() {
            if !(v >= 0.0 && v.is_finite()) {
                errors.push(ValidationError::NegativeWeight { file: i, value: v });
            }
        }
    }
    for (which, probs) in [
        ("cache", &profile.cache_success),
        ("user", &profile.user_success),
    ] {
        if let Some(p) = probs {
            if p.len() != n {
                errors.push(ValidationError::DimensionMismatch {
                    what: format!("{which} success probabilities"),
                    expected: n,
                    found: p.len(),
                });
            }
            for (i, &v) in p.iter().enumerate() {
                if !(v > 0.0 && v <= 1.0) {
                    errors.push(ValidationError::SuccessOutOfRange {
                        which,
                        file: i,
                        value: v,
                    });
                }
            }
        }
    }

    let m = topo.num_caches();
    let d = topo.num_users();
    if m == 0 {
        errors.push(ValidationError::DimensionMismatch {
            what: "cache stages".into(),
            expected: 1,
            found: 0,
        });
    }
    if d == 0 {
        errors.push(ValidationError::DimensionMismatch {
            what: "users".into(),
            expected: 1,
            found: 0,
        });
    }
    for r in 0..m {
        let b = topo.cache_budget(r);
        if !(b > 0.0 && b.is_finite()) {
            errors.push(ValidationError::NonpositiveBudget {
                node: cache_label(r),
                value: b,
            });
        }
    }
    for k in 0..d {
        let b = topo.user_budget(k);
        if !(b > 0.0 && b.is_finite()) {
            errors.push(ValidationError::NonpositiveBudget {
                node: user_label(k),
                value: b,
            });
        }
    }

    if alloc.cache_rates.len() != m {
        errors.push(ValidationError::DimensionMismatch {
            what: "cache rate rows".into(),
            expected: m,
            found: alloc.cache_rates.len(),
        });
    }
    if alloc.user_rates.len() != d {
        errors.push(ValidationError::DimensionMismatch {
            what: "user rate rows".into(),
            expected: d,
            found: alloc.user_rates.len(),
        });
    }

    let mut check_row = |label: String, rates: &[f64], budget: f64| {
        if rates.len() != n {
            errors.push(ValidationError::DimensionMismatch {
                what: format!("rates at {label}"),
                expected: n,
                found: rates.len(),
            });
            return;
        }
        let mut sum = 0.0;
        let mut usable = true;
        for (i, &v) in rates.iter().enumerate() {
            if !(v >= 0.0 && v.is_finite()) {
                errors.push(ValidationError::NegativeRate {
                    node: label.clone(),
                    file: i,
                    value: v,
                });
                usable = false;
            } else {
                sum += v;
            }
        }
        if usable && budget > 0.0 && sum > budget * (1.0 + BUDGET_RELATIVE_TOLERANCE) {
            errors.push(ValidationError::BudgetExceeded {
                node: label,
                sum,
                budget,
            });
        }
    };
    for (r, rates) in alloc.cache_rates.iter().enumerate().take(m) {
        check_row(cache_label(r), rates, topo.cache_budget(r));
    }
    for (k, rates) in alloc.user_rates.iter().enumerate().take(d) {
        check_row(user_label(k), rates, topo.user_budget(k));
    }

    errors
}

/// [`validate`] folded into a `Result` for operations that need validity.
pub(crate) fn check(
    profile: &SourceProfile,
    topo: &Topology,
    alloc: &RateAllocation,
) -> Result<(), Error> {
    let errors = validate(profile, topo, alloc);
    if errors.is_empty() {
        Ok(())
    } else {
        Err(Error::Invalid(errors))
    }
}

/// Weighted total user freshness `sum_k sum_i w_i * F_u(k, i)` of a
/// validated allocation.
///
/// Strictly increasing in every request rate and strictly decreasing in
/// every `lambda_i` (for files with positive weight and rates).
pub fn total_objective(
    profile: &SourceProfile,
    topo: &Topology,
    alloc: &RateAllocation,
) -> Result<f64, Error> {
    check(profile, topo, alloc)?;
    Ok(objective_unchecked(profile, alloc))
}

pub(crate) fn objective_unchecked(profile: &SourceProfile, alloc: &RateAllocation) -> f64 {
    let mut total = 0.0;
    for i in 0..profile.n() {
        let chain: f64 = alloc
            .cache_rates
            .iter()
            .map(|row| single_hop_freshness(row[i], profile.cache_lambda(i)))
            .product();
        if chain == 0.0 {
            continue;
        }
        let users: f64 = alloc
            .user_rates
            .iter()
            .map(|row| single_hop_freshness(row[i], profile.user_lambda(i)))
            .sum();
        total += profile.weight(i) * chain * users;
    }
    total
}

/// Closed-form freshness of every copy, plus weighted totals.
///
/// For each file the cache column is a running product down the chain, so
/// freshness never increases from the first cache towards the users.
pub fn freshness_report(
    profile: &SourceProfile,
    topo: &Topology,
    alloc: &RateAllocation,
) -> Result<FreshnessReport, Error> {
    check(profile, topo, alloc)?;
    let n = profile.n();
    let m = topo.num_caches();
    let d = topo.num_users();

    let mut cache_freshness = vec![vec![0.0; n]; m];
    let mut user_freshness = vec![vec![0.0; n]; d];
    for i in 0..n {
        let mut running = 1.0;
        for (row, rates) in cache_freshness.iter_mut().zip(&alloc.cache_rates) {
            running *= single_hop_freshness(rates[i], profile.cache_lambda(i));
            row[i] = running;
        }
        for (row, rates) in user_freshness.iter_mut().zip(&alloc.user_rates) {
            row[i] = running * single_hop_freshness(rates[i], profile.user_lambda(i));
        }
    }

    let total_per_user: Vec<f64> = user_freshness
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(i, &f)| profile.weight(i) * f)
                .sum()
        })
        .collect();
    let grand_total = total_per_user.iter().sum();

    Ok(FreshnessReport {
        cache_freshness,
        user_freshness,
        total_per_user,
        grand_total,
    })
}
