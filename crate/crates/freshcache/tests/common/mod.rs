#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use freshcache::{RateAllocation, SourceProfile, Topology};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo * (hi / lo).powf(rng.random::<f64>())
}

fn pick(rng: &mut ChaCha8Rng, weights: &[u32]) -> usize {
    let total: u32 = weights.iter().sum();
    let mut target = rng.random_range(0..total);
    for (idx, &w) in weights.iter().enumerate() {
        if target < w {
            return idx;
        }
        target -= w;
    }
    weights.len() - 1
}

/// A concrete system with explicit rates, ready to simulate: the budgets
/// are the row sums, and `min_rate` is the smallest clock anywhere.
pub struct SimInstance {
    pub profile: SourceProfile,
    pub topo: Topology,
    pub alloc: RateAllocation,
    pub min_rate: f64,
}

fn assemble(
    rng: &mut ChaCha8Rng,
    n: usize,
    m: usize,
    d: usize,
    lossy: bool,
    mut draw: impl FnMut(&mut ChaCha8Rng) -> f64,
) -> SimInstance {
    let lambdas: Vec<f64> = (0..n).map(|_| draw(rng)).collect();
    let cache_rates: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| draw(rng)).collect()).collect();
    let user_rates: Vec<Vec<f64>> = (0..d).map(|_| (0..n).map(|_| draw(rng)).collect()).collect();

    let mut profile = SourceProfile::new(lambdas);
    if lossy {
        profile.cache_success = Some((0..n).map(|_| rng.random_range(0.5..1.0)).collect());
        profile.user_success = Some((0..n).map(|_| rng.random_range(0.5..1.0)).collect());
    }

    let row_sum = |row: &Vec<f64>| row.iter().sum::<f64>();
    let topo = if m > 1 {
        Topology::SerialChain {
            n,
            cache_budgets: cache_rates.iter().map(row_sum).collect(),
            user_budget: row_sum(&user_rates[0]),
        }
    } else if d > 1 {
        Topology::MultiUser {
            n,
            cache_budget: row_sum(&cache_rates[0]),
            user_budgets: user_rates.iter().map(row_sum).collect(),
        }
    } else {
        Topology::SingleCache {
            n,
            cache_budget: row_sum(&cache_rates[0]),
            user_budget: row_sum(&user_rates[0]),
        }
    };

    let min_rate = profile
        .lambdas
        .iter()
        .chain(cache_rates.iter().flatten())
        .chain(user_rates.iter().flatten())
        .copied()
        .fold(f64::INFINITY, f64::min);

    SimInstance {
        profile,
        topo,
        alloc: RateAllocation {
            cache_rates,
            user_rates,
        },
        min_rate,
    }
}

/// The fixed 200-instance mix for the estimator-vs-closed-form check.
///
/// Three classes trade breadth against run time, which scales with the
/// ratio of an instance's total rate to its slowest clock:
/// narrow-band instances cover every topology shape and size, mid-range
/// instances spread rates over [0.5, 10], and a few instances pin one
/// clock to the bottom of the allowed range. All rates lie in [0.1, 10].
pub fn sim_instances() -> Vec<SimInstance> {
    let mut rng = rng(0xF5E5_0001);
    let mut out = Vec::with_capacity(200);

    for _ in 0..150 {
        let n = 1 + pick(&mut rng, &[35, 30, 20, 15]);
        let (m, d) = match pick(&mut rng, &[40, 30, 30]) {
            0 => (1, 1),
            1 => (2 + pick(&mut rng, &[60, 40]), 1),
            _ => (1, 2 + pick(&mut rng, &[60, 40])),
        };
        let lossy = rng.random_range(0..3) == 0;
        let lo = log_uniform(&mut rng, 0.1, 5.0);
        out.push(assemble(&mut rng, n, m, d, lossy, |r| {
            log_uniform(r, lo, 2.0 * lo)
        }));
    }
    for _ in 0..40 {
        out.push(assemble(&mut rng, 1, 1, 1, false, |r| {
            r.random_range(0.5..10.0)
        }));
    }
    for idx in 0..10 {
        let mut slot = 0;
        out.push(assemble(&mut rng, 1, 1, 1, false, move |r| {
            let value = if slot == idx % 3 {
                0.1
            } else {
                r.random_range(0.1..2.0)
            };
            slot += 1;
            value
        }));
    }
    out
}

/// One budget-constrained subproblem for the grid cross-check. Ranges
/// keep the objective's curvature low enough that the best grid point
/// sits within 1e-4 of the true optimum.
pub struct InnerInstance {
    pub sigmas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub budget: f64,
}

pub fn inner_instances() -> Vec<InnerInstance> {
    let mut rng = rng(0x172D_0002);
    (0..100)
        .map(|_| {
            let n = rng.random_range(1..=3);
            InnerInstance {
                sigmas: (0..n).map(|_| rng.random_range(0.2..2.0)).collect(),
                lambdas: (0..n).map(|_| rng.random_range(0.8..4.0)).collect(),
                budget: rng.random_range(0.5..3.0),
            }
        })
        .collect()
}

pub fn inner_objective(sigmas: &[f64], lambdas: &[f64], rates: &[f64]) -> f64 {
    rates
        .iter()
        .zip(sigmas)
        .zip(lambdas)
        .map(|((&c, &s), &l)| if c > 0.0 { s * c / (c + l) } else { 0.0 })
        .sum()
}

/// Best objective over the budget simplex sampled at step `1e-3 * budget`.
pub fn grid_best_objective(sigmas: &[f64], lambdas: &[f64], budget: f64) -> f64 {
    let steps = 1000usize;
    let h = budget / steps as f64;
    let value = |c: f64, idx: usize| sigmas[idx] * c / (c + lambdas[idx]);
    match sigmas.len() {
        1 => value(budget, 0),
        2 => {
            let mut best = f64::NEG_INFINITY;
            for i in 0..=steps {
                let c0 = i as f64 * h;
                best = best.max(value(c0, 0) + value(budget - c0, 1));
            }
            best
        }
        3 => {
            let mut best = f64::NEG_INFINITY;
            for i in 0..=steps {
                let c0 = i as f64 * h;
                let v0 = value(c0, 0);
                for j in 0..=steps - i {
                    let c1 = j as f64 * h;
                    let c2 = (budget - c0 - c1).max(0.0);
                    best = best.max(v0 + value(c1, 1) + value(c2, 2));
                }
            }
            best
        }
        other => panic!("grid oracle supports up to 3 files, got {other}"),
    }
}

/// Random solvable systems for stationarity and structure checks.
pub fn opt_instances(count: usize, seed: u64) -> Vec<(SourceProfile, Topology)> {
    let mut rng = rng(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(1..=5);
            let (m, d) = match pick(&mut rng, &[40, 30, 30]) {
                0 => (1, 1),
                1 => (2 + pick(&mut rng, &[60, 40]), 1),
                _ => (1, 2 + pick(&mut rng, &[60, 40])),
            };
            let mut profile =
                SourceProfile::new((0..n).map(|_| log_uniform(&mut rng, 0.2, 5.0)).collect());
            if rng.random_range(0..3) == 0 {
                profile.weights = Some((0..n).map(|_| rng.random_range(0.5..2.0)).collect());
            }
            if rng.random_range(0..3) == 0 {
                profile.cache_success = Some((0..n).map(|_| rng.random_range(0.5..1.0)).collect());
                profile.user_success = Some((0..n).map(|_| rng.random_range(0.5..1.0)).collect());
            }
            let budget = |rng: &mut ChaCha8Rng| log_uniform(rng, 0.3, 3.0) * n as f64;
            let topo = if m > 1 {
                Topology::SerialChain {
                    n,
                    cache_budgets: (0..m).map(|_| budget(&mut rng)).collect(),
                    user_budget: budget(&mut rng),
                }
            } else if d > 1 {
                Topology::MultiUser {
                    n,
                    cache_budget: budget(&mut rng),
                    user_budgets: (0..d).map(|_| budget(&mut rng)).collect(),
                }
            } else {
                Topology::SingleCache {
                    n,
                    cache_budget: budget(&mut rng),
                    user_budget: budget(&mut rng),
                }
            };
            (profile, topo)
        })
        .collect()
}
