//! No-swap-regret learning: the log-barrier OFTRL learner, the
//! Blum–Mansour swap construction, regret metrics and RVU diagnostics.

pub mod ftrl;
pub mod rvu;
pub mod swap;

use crate::error::{Error, Result};

pub use ftrl::{ftrl_solve, kkt_residual, BarrierSolution, LogBarFtrl};
pub use rvu::{rvu_diagnostics, RvuReport, SlotHistory};
pub use swap::{stationarity_residual, stationary_distribution, SwapMinimizer};

fn check_histories<X: AsRef<[f64]>, U: AsRef<[f64]>>(
    strategies: &[X],
    utilities: &[U],
    weights: &[f64],
) -> Result<usize> {
    if strategies.len() != utilities.len() || strategies.len() != weights.len() {
        return Err(Error::Dimension {
            expected: strategies.len(),
            got: if utilities.len() != strategies.len() {
                utilities.len()
            } else {
                weights.len()
            },
        });
    }
    let d = strategies.first().map_or(0, |x| x.as_ref().len());
    for (x, u) in strategies.iter().zip(utilities) {
        if x.as_ref().len() != d || u.as_ref().len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: x.as_ref().len().max(u.as_ref().len()),
            });
        }
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::InvalidArgument("weights must be nonnegative".into()));
    }
    Ok(d)
}

/// `max_M sum_t weight_t <u^t, M^T x^t - x^t>` over row-stochastic `M`,
/// evaluated as `sum_a max_a' sum_t weight_t x^t[a] u^t[a'] - sum_t weight_t <u^t, x^t>`.
pub fn weighted_swap_regret<X: AsRef<[f64]>, U: AsRef<[f64]>>(
    strategies: &[X],
    utilities: &[U],
    weights: &[f64],
) -> Result<f64> {
    let d = check_histories(strategies, utilities, weights)?;
    let mut table = vec![0.0; d * d];
    let mut realized = 0.0;
    for ((x, u), &w) in strategies.iter().zip(utilities).zip(weights) {
        let (x, u) = (x.as_ref(), u.as_ref());
        for a in 0..d {
            let wx = w * x[a];
            for b in 0..d {
                table[a * d + b] += wx * u[b];
            }
        }
        realized += w * dot(x, u);
    }
    let best: f64 = table.chunks(d.max(1)).map(max_of).sum();
    Ok(best - realized)
}

/// `max_a' sum_t weight_t u^t[a'] - sum_t weight_t <u^t, x^t>`.
pub fn weighted_external_regret<X: AsRef<[f64]>, U: AsRef<[f64]>>(
    strategies: &[X],
    utilities: &[U],
    weights: &[f64],
) -> Result<f64> {
    let d = check_histories(strategies, utilities, weights)?;
    let mut totals = vec![0.0; d];
    let mut realized = 0.0;
    for ((x, u), &w) in strategies.iter().zip(utilities).zip(weights) {
        let (x, u) = (x.as_ref(), u.as_ref());
        totals.iter_mut().zip(u).for_each(|(s, v)| *s += w * v);
        realized += w * dot(x, u);
    }
    Ok(max_of(&totals) - realized)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest entry; `0` for an empty slice.
#[inline]
pub(crate) fn max_of(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = k;
        }
    }
    best
}
