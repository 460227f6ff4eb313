//! Event-driven freshness estimation by Monte Carlo.
//!
//! The continuous-time model: the source rewrites a file at its update
//! rate, every node polls its parent at the node's request rate, and a
//! poll copies whatever version the parent holds right now. All clocks
//! are independent Poisson processes, so the merged event stream is
//! Poisson at the summed rate and each event's kind is categorical with
//! probability proportional to its rate. The simulation samples that
//! merged stream directly: one exponential for the gap, one uniform for
//! the kind, then a constant-time state update.
//!
//! A node's estimate is the fraction of `[warmup, horizon]` it holds the
//! current version, averaged per replication. Fresh intervals are
//! accumulated lazily: only the transitions touch the clock, so an event
//! costs the same whether the node is fresh or stale. Replications
//! differ only by RNG stream, never by scheduling, so results are
//! bit-identical between parallel and sequential builds.
//!
//! Confidence intervals are two-sided 99% normal intervals on the
//! across-replication mean. A single replication has no spread estimate
//! and reports an infinite half width.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::exec::map_indexed;
use crate::model::{check, RateAllocation, SourceProfile, Topology};
use crate::Error;

/// Two-sided 99% quantile of the standard normal.
const Z99: f64 = 2.575_829_303_548_900_4;

/// Horizon long enough for tight intervals on the slowest clock.
///
/// Scales inversely with the smallest rate in the system so roughly the
/// same number of rare events lands in every run.
pub fn default_horizon(min_rate: f64) -> f64 {
    debug_assert!(min_rate > 0.0 && min_rate.is_finite());
    1e5 * min_rate.recip().max(1.0)
}

/// Per-poll delivery probabilities for one file's lossy links.
///
/// `cache` applies to every cache stage's polls, `user` to every user's
/// polls. A failed poll leaves the node's copy untouched.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSuccess {
    pub cache: f64,
    pub user: f64,
}

/// Run length, replication count, and seeding for one estimation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// End of simulated time, in the update rates' time unit.
    pub horizon: f64,
    /// Independent replications averaged into the estimate.
    pub replications: u32,
    /// Base seed; every (file, replication) pair derives its own stream.
    pub seed: u64,
    /// Time discarded before measurement starts.
    pub warmup: f64,
}

impl SimConfig {
    pub fn new(horizon: f64, replications: u32, seed: u64) -> Self {
        Self {
            horizon,
            replications,
            seed,
            warmup: 0.0,
        }
    }

    pub fn with_warmup(mut self, warmup: f64) -> Self {
        self.warmup = warmup;
        self
    }

    fn check(&self) -> Result<(), Error> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!(
                "simulation horizon must be positive and finite, got {}",
                self.horizon
            )));
        }
        if self.replications == 0 {
            return Err(Error::Config("need at least one replication".into()));
        }
        if !(self.warmup >= 0.0 && self.warmup < self.horizon) {
            return Err(Error::Config(format!(
                "warmup must lie in [0, horizon), got {} with horizon {}",
                self.warmup, self.horizon
            )));
        }
        Ok(())
    }
}

/// Point estimate with its 99% half width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeEstimate {
    pub mean: f64,
    pub half_width: f64,
}

/// Freshness estimates for one file at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct FileEstimate {
    /// Cache stages in chain order.
    pub caches: Vec<NodeEstimate>,
    pub users: Vec<NodeEstimate>,
    pub replications: u32,
    pub horizon: f64,
}

/// Freshness estimates for a whole system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemEstimate {
    pub files: Vec<FileEstimate>,
    /// Weighted freshness summed over files, one entry per user.
    pub total_per_user: Vec<NodeEstimate>,
    /// Weighted freshness summed over files and users.
    pub grand_total: NodeEstimate,
    pub replications: u32,
    pub horizon: f64,
}

/// Fresh-time fractions of one replication: caches in chain order, then
/// users, plus the users' sum for correlation-aware totals.
struct RepOutcome {
    node_fresh: Vec<f64>,
    user_sum: f64,
}

fn flush(acc: &mut f64, since: f64, upto: f64, warmup: f64) {
    let lo = if since > warmup { since } else { warmup };
    if upto > lo {
        *acc += upto - lo;
    }
}

fn run_replication(
    lambda: f64,
    cache_rates: &[f64],
    user_rates: &[f64],
    losses: Option<LinkSuccess>,
    cfg: &SimConfig,
    file: u64,
    rep: u64,
) -> RepOutcome {
    let m = cache_rates.len();
    let d = user_rates.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream((file << 32) | rep);

    let mut rates = Vec::with_capacity(1 + m + d);
    rates.push(lambda);
    rates.extend_from_slice(cache_rates);
    rates.extend_from_slice(user_rates);
    let total: f64 = rates.iter().sum();

    let mut fresh = vec![false; m + d];
    let mut since = vec![0.0_f64; m + d];
    let mut acc = vec![0.0_f64; m + d];
    let horizon = cfg.horizon;
    let warmup = cfg.warmup;

    let mut t = 0.0_f64;
    loop {
        let gap: f64 = rng.sample(Exp1);
        t += gap / total;
        if t >= horizon {
            break;
        }
        let target = rng.random::<f64>() * total;
        let mut winner = 0;
        let mut cum = 0.0;
        for (idx, &rate) in rates.iter().enumerate() {
            cum += rate;
            // Zero-rate clocks have zero-width slots and can never match.
            if target < cum && rate > 0.0 {
                winner = idx;
                break;
            }
            if rate > 0.0 {
                // Rounding in `cum` can push the last slot's edge below
                // `target`; fall back to the last live clock.
                winner = idx;
            }
        }

        if winner == 0 {
            // Source update: every stored copy goes stale at once.
            for node in 0..m + d {
                if fresh[node] {
                    flush(&mut acc[node], since[node], t, warmup);
                    fresh[node] = false;
                }
            }
        } else {
            let (node, parent_fresh, success) = if winner <= m {
                let r = winner - 1;
                let ok = match losses {
                    Some(ls) => ls.cache >= 1.0 || rng.random::<f64>() < ls.cache,
                    None => true,
                };
                let parent = if r == 0 { true } else { fresh[r - 1] };
                (r, parent, ok)
            } else {
                let k = winner - 1 - m;
                let ok = match losses {
                    Some(ls) => ls.user >= 1.0 || rng.random::<f64>() < ls.user,
                    None => true,
                };
                (m + k, fresh[m - 1], ok)
            };
            if success {
                // A fresh copy can only have come from a fresh parent,
                // and parents go stale only when everyone does.
                debug_assert!(
                    parent_fresh || !fresh[node],
                    "fresh node copied from a stale parent"
                );
                if parent_fresh && !fresh[node] {
                    fresh[node] = true;
                    since[node] = t;
                }
            }
        }
    }
    for node in 0..m + d {
        if fresh[node] {
            flush(&mut acc[node], since[node], horizon, warmup);
        }
    }

    let span = horizon - warmup;
    let node_fresh: Vec<f64> = acc.iter().map(|&a| a / span).collect();
    let user_sum = node_fresh[m..].iter().sum();
    RepOutcome { node_fresh, user_sum }
}

fn summarize(samples: &[f64]) -> NodeEstimate {
    let r = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / r;
    let half_width = if samples.len() < 2 {
        f64::INFINITY
    } else {
        let var = samples.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / (r - 1.0);
        Z99 * (var / r).sqrt()
    };
    NodeEstimate { mean, half_width }
}

fn check_link(losses: &LinkSuccess) -> Result<(), Error> {
    for (name, v) in [("cache", losses.cache), ("user", losses.user)] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::Config(format!(
                "{name} link success probability must lie in (0, 1], got {v}"
            )));
        }
    }
    Ok(())
}

fn collect_file(outcomes: &[RepOutcome], m: usize, d: usize, cfg: &SimConfig) -> FileEstimate {
    let column = |node: usize| -> Vec<f64> {
        outcomes.iter().map(|o| o.node_fresh[node]).collect()
    };
    FileEstimate {
        caches: (0..m).map(|r| summarize(&column(r))).collect(),
        users: (0..d).map(|k| summarize(&column(m + k))).collect(),
        replications: cfg.replications,
        horizon: cfg.horizon,
    }
}

/// Estimate one file's freshness at every node of a chain-plus-users
/// layout with explicit rates.
///
/// `cache_rates` runs from the stage next to the source downward; all
/// `user_rates` poll the last stage. `losses` applies per-poll delivery
/// probabilities.
pub fn simulate_file(
    lambda: f64,
    cache_rates: &[f64],
    user_rates: &[f64],
    losses: Option<LinkSuccess>,
    cfg: &SimConfig,
) -> Result<FileEstimate, Error> {
    cfg.check()?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Config(format!(
            "update rate must be positive and finite, got {lambda}"
        )));
    }
    if cache_rates.is_empty() || user_rates.is_empty() {
        return Err(Error::Config(
            "need at least one cache stage and one user".into(),
        ));
    }
    for &rate in cache_rates.iter().chain(user_rates) {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::Config(format!(
                "request rates must be nonnegative and finite, got {rate}"
            )));
        }
    }
    if let Some(ls) = &losses {
        check_link(ls)?;
    }
    let reps = cfg.replications as usize;
    let outcomes = map_indexed(reps, |rep| {
        run_replication(lambda, cache_rates, user_rates, losses, cfg, 0, rep as u64)
    });
    Ok(collect_file(
        &outcomes,
        cache_rates.len(),
        user_rates.len(),
        cfg,
    ))
}

fn file_losses(profile: &SourceProfile, file: usize) -> Option<LinkSuccess> {
    let cache = profile.cache_success_at(file);
    let user = profile.user_success_at(file);
    if cache < 1.0 || user < 1.0 {
        Some(LinkSuccess { cache, user })
    } else {
        None
    }
}

/// Estimate every node-file freshness of a configured system, plus
/// weighted per-user and grand totals.
///
/// Files evolve independently and get independent RNG streams, so file
/// intervals combine in quadrature into the totals; users of one file
/// share its update process, so their sum is estimated from joint
/// samples rather than assembled from per-user intervals.
pub fn simulate_system(
    profile: &SourceProfile,
    topo: &Topology,
    alloc: &RateAllocation,
    cfg: &SimConfig,
) -> Result<SystemEstimate, Error> {
    cfg.check()?;
    check(profile, topo, alloc)?;
    let n = profile.n();
    let m = topo.num_caches();
    let d = topo.num_users();
    let reps = cfg.replications as usize;

    let outcomes: Vec<RepOutcome> = map_indexed(n * reps, |idx| {
        let file = idx / reps;
        let rep = (idx % reps) as u64;
        let cache_rates: Vec<f64> = alloc.cache_rates.iter().map(|row| row[file]).collect();
        let user_rates: Vec<f64> = alloc.user_rates.iter().map(|row| row[file]).collect();
        run_replication(
            profile.lambdas[file],
            &cache_rates,
            &user_rates,
            file_losses(profile, file),
            cfg,
            file as u64,
            rep,
        )
    });

    let mut files = Vec::with_capacity(n);
    let mut user_mean = vec![0.0_f64; d];
    let mut user_hw_sq = vec![0.0_f64; d];
    let mut grand_mean = 0.0_f64;
    let mut grand_hw_sq = 0.0_f64;
    for file in 0..n {
        let w = profile.weight(file);
        let chunk = &outcomes[file * reps..(file + 1) * reps];
        let estimate = collect_file(chunk, m, d, cfg);
        for k in 0..d {
            user_mean[k] += w * estimate.users[k].mean;
            let hw = w * estimate.users[k].half_width;
            user_hw_sq[k] += hw * hw;
        }
        let sums: Vec<f64> = chunk.iter().map(|o| o.user_sum).collect();
        let sum_estimate = summarize(&sums);
        grand_mean += w * sum_estimate.mean;
        let hw = w * sum_estimate.half_width;
        grand_hw_sq += hw * hw;
        files.push(estimate);
    }

    Ok(SystemEstimate {
        files,
        total_per_user: (0..d)
            .map(|k| NodeEstimate {
                mean: user_mean[k],
                half_width: user_hw_sq[k].sqrt(),
            })
            .collect(),
        grand_total: NodeEstimate {
            mean: grand_mean,
            half_width: grand_hw_sq.sqrt(),
        },
        replications: cfg.replications,
        horizon: cfg.horizon,
    })
}
