//! Closed-form freshness for Poisson update and request processes.
//!
//! A file is rewritten at the source at rate `lambda`. A node polling its
//! upstream at rate `c` holds a fresh copy whenever its last poll (a) found
//! the upstream fresh and (b) no source update happened since. For
//! memoryless updates and polls this gives the hop rule
//!
//! ```text
//!     F_node = c / (c + lambda) * F_upstream,      F_source = 1,
//! ```
//!
//! so freshness telescopes along a relay path: each hop contributes a
//! factor `rate / (rate + lambda)` and the product never increases from
//! source to user. All functions here work on scalars for a single file;
//! system-level evaluation lives in [`crate::model`].
//!
//! Lossy links fold in by thinning: a poll rate `c` that succeeds with
//! probability `p` behaves exactly like a loss-free rate `p * c`.

/// Freshness `c / (c + lambda)` of a copy polling a fresh upstream.
///
/// `update_rate` may be zero (a copy that never polls is never fresh).
///
/// # Panics
/// If `lambda <= 0` or `update_rate < 0`.
pub fn single_hop_freshness(update_rate: f64, lambda: f64) -> f64 {
    assert!(lambda > 0.0, "source update rate must be positive, got {lambda}");
    assert!(
        update_rate >= 0.0,
        "request rate must be nonnegative, got {update_rate}"
    );
    if update_rate == 0.0 {
        return 0.0;
    }
    update_rate / (update_rate + lambda)
}

/// Freshness at a user polling a single cache at rate `user_rate`, while
/// the cache polls the source at rate `cache_rate`.
pub fn two_hop_user_freshness(user_rate: f64, cache_rate: f64, lambda: f64) -> f64 {
    single_hop_freshness(user_rate, lambda) * single_hop_freshness(cache_rate, lambda)
}

/// [`two_hop_user_freshness`] over lossy links: cache polls succeed with
/// probability `cache_success`, user polls with `user_success`, so the
/// effective rates are `p*c` and `q*u`.
///
/// # Panics
/// If either probability lies outside (0, 1].
pub fn two_hop_user_freshness_lossy(
    user_rate: f64,
    cache_rate: f64,
    lambda: f64,
    cache_success: f64,
    user_success: f64,
) -> f64 {
    assert!(
        cache_success > 0.0 && cache_success <= 1.0,
        "cache success probability must lie in (0, 1], got {cache_success}"
    );
    assert!(
        user_success > 0.0 && user_success <= 1.0,
        "user success probability must lie in (0, 1], got {user_success}"
    );
    two_hop_user_freshness(user_success * user_rate, cache_success * cache_rate, lambda)
}

/// Freshness along a serial cache chain, stage by stage.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainFreshness {
    /// Freshness at cache stage `r`, a non-increasing running product.
    pub stages: Vec<f64>,
    /// Freshness at the user behind the last stage.
    pub user: f64,
}

/// Freshness through caches `1..m` in series followed by one user.
///
/// Stage `r` holds `prod_{l<=r} c_l / (c_l + lambda)`; a stage with rate
/// zero pins itself and everything downstream to zero.
///
/// # Panics
/// If the chain is empty, `lambda <= 0`, or any rate is negative.
pub fn chain_freshness(cache_rates: &[f64], user_rate: f64, lambda: f64) -> ChainFreshness {
    assert!(!cache_rates.is_empty(), "chain must contain at least one cache");
    let mut running = 1.0;
    let stages: Vec<f64> = cache_rates
        .iter()
        .map(|&c| {
            running *= single_hop_freshness(c, lambda);
            running
        })
        .collect();
    ChainFreshness {
        user: running * single_hop_freshness(user_rate, lambda),
        stages,
    }
}

/// Freshness at each of `d` users sharing one cache: user `k` sees
/// `u_k / (u_k + lambda) * c / (c + lambda)`.
pub fn multi_user_freshness(cache_rate: f64, user_rates: &[f64], lambda: f64) -> Vec<f64> {
    let cache = single_hop_freshness(cache_rate, lambda);
    user_rates
        .iter()
        .map(|&u| cache * single_hop_freshness(u, lambda))
        .collect()
}

/// Cache update disciplines with a fixed total refresh rate `c` spread
/// over the inter-update schedule in different ways.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdatePolicy {
    /// Deterministic refresh every `1/c`, phase-aligned.
    FixedOrder,
    /// Deterministic spacing, uniformly random phase.
    RandomOrder,
    /// Memoryless refresh at rate `c` (the Poisson baseline).
    PurelyRandom,
}

/// Single-hop freshness under the given update discipline.
///
/// With `x = c / lambda` (polls per source update):
///
/// ```text
///     fixed order:    x * (1 - exp(-1/x))
///     random order:   x * (1 - x^2 * (1 - exp(-1/x))^2)
///     purely random:  x / (x + 1)  =  c / (c + lambda)
/// ```
///
/// All three decrease in `lambda / c` and tend to 0 as `c -> 0`, which is
/// also the returned value at `c == 0` (continuity).
pub fn alt_single_hop_freshness(policy: UpdatePolicy, update_rate: f64, lambda: f64) -> f64 {
    assert!(lambda > 0.0, "source update rate must be positive, got {lambda}");
    assert!(
        update_rate >= 0.0,
        "request rate must be nonnegative, got {update_rate}"
    );
    if update_rate == 0.0 {
        return 0.0;
    }
    let x = update_rate / lambda;
    match policy {
        // exp_m1 keeps 1 - e^{-1/x} accurate when 1/x is tiny; min(1)
        // swallows the last ulp of rounding, never a real excess.
        UpdatePolicy::FixedOrder => (x * -(-1.0 / x).exp_m1()).min(1.0),
        UpdatePolicy::RandomOrder => {
            let y = 1.0 / x;
            // Factored as x * (1 - g) * (1 + g) with g = x (1 - e^{-y}).
            // Forming 1 - g directly cancels badly once y is tiny, so
            // switch to its series y/2 - y^2/6 + y^3/24 - y^4/120 there
            // (truncation < 1e-23 at the crossover).
            let one_minus_g = if y < 1e-4 {
                y * (0.5 - y * (1.0 / 6.0 - y * (1.0 / 24.0 - y / 120.0)))
            } else {
                ((-y).exp_m1() + y) / y
            };
            let g = 1.0 - one_minus_g;
            (x * one_minus_g * (1.0 + g)).min(1.0)
        }
        UpdatePolicy::PurelyRandom => single_hop_freshness(update_rate, lambda),
    }
}
