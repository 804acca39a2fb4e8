//! RVU diagnostics for one swap-regret minimizer: the regret bound with
//! variable step sizes and the stability quantities behind it, computed from
//! a recorded strategy/utility history.

use crate::error::{Error, Result};
use crate::regret::ftrl::ftrl_solve;
use crate::regret::swap::SwapMinimizer;
use crate::regret::{dot, max_of, weighted_external_regret, weighted_swap_regret};
use crate::schedule::WeightSchedule;

/// Strategies `x^0..x^N` of one slot and the unweighted utilities
/// `u_hat^0..u_hat^N` observed for them.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotHistory {
    pub strategies: Vec<Vec<f64>>,
    pub utilities: Vec<Vec<f64>>,
}

impl SlotHistory {
    /// Number of regret rounds `N`.
    pub fn rounds(&self) -> usize {
        self.strategies.len().saturating_sub(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RvuReport {
    pub actions: usize,
    pub eta: f64,
    pub rounds: usize,
    /// `eta < 1/(28 |A|)`.
    pub hypothesis_holds: bool,
    /// Weighted swap regret over rounds `1..=N`.
    pub lhs: f64,
    /// Bound at `T = N`.
    pub rhs: f64,
    /// `max_{2 <= T <= N} (lhs_T - rhs_T)`; `-inf` when `N < 2`.
    pub worst_margin: f64,
    /// `max eta ||u_hat_a^t - u_hat_a^{t-1}||_{*, x_a^t}`, bounded by `2 eta`.
    pub max_prediction_norm: f64,
    /// `max ||eta_t m^t + (eta_t - eta_{t-1}) sum u^tau||_{*, g^{t-1}}`, bounded by `3 eta`.
    pub max_shifted_norm: f64,
    /// `max ||x_a^t - x_a^{t-1}||_{x_a^{t-1}}`, bounded by `14 eta`.
    pub max_local_movement: f64,
    /// `max_t sum_a max_a' |1 - x_a^t[a'] / x_a^{t-1}[a']|`, bounded by `1/2`.
    pub max_multiplicative: f64,
    /// `max_t ||x^t - x^{t-1}||_1^2 / (64 |A| sum_a ||x_a^t - x_a^{t-1}||^2)`, bounded by 1.
    pub max_l1_ratio: f64,
    /// `|swap regret - sum_a external regret of R_a|`.
    pub decomposition_residual: f64,
    /// Largest deviation between replayed and recorded strategies.
    pub replay_mismatch: f64,
}

impl RvuReport {
    /// All bounds, with `tol` slack on the regret inequality and the
    /// decomposition, and `1e-12` relative slack on the stability bounds.
    pub fn holds(&self, tol: f64) -> bool {
        let slack = 1.0 + 1e-12;
        self.worst_margin <= tol
            && self.max_prediction_norm <= 2.0 * self.eta * slack
            && self.max_shifted_norm <= 3.0 * self.eta * slack
            && self.max_local_movement <= 14.0 * self.eta * slack
            && self.max_multiplicative <= 0.5
            && self.max_l1_ratio <= slack
            && self.decomposition_residual <= tol
    }
}

/// `sqrt(sum_r (x[r] v[r])^2)`, the dual local norm of the log barrier.
pub fn dual_local_norm(v: &[f64], x: &[f64]) -> f64 {
    v.iter()
        .zip(x)
        .map(|(vr, xr)| (vr * xr).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// `sqrt(sum_r ((y[r] - x[r]) / x[r])^2)`, the primal local norm at `x`.
pub fn local_movement(y: &[f64], x: &[f64]) -> f64 {
    y.iter()
        .zip(x)
        .map(|(yr, xr)| ((yr - xr) / xr).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Replays the swap-regret device on `history` and evaluates every RVU
/// quantity. A violated step-size hypothesis is reported, not rejected.
pub fn rvu_diagnostics(history: &SlotHistory, eta: f64, horizon: usize) -> Result<RvuReport> {
    let n = history.rounds();
    if history.strategies.is_empty() || history.utilities.len() != history.strategies.len() {
        return Err(Error::Dimension {
            expected: history.strategies.len(),
            got: history.utilities.len(),
        });
    }
    let d = history.strategies[0].len();
    let schedule = WeightSchedule::through(horizon, eta, n.max(1))?;

    // rows[t][a] = x_a^t
    let mut device = SwapMinimizer::new(d);
    let mut rows: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n + 1);
    let mut replay_mismatch = 0.0f64;
    for t in 0..=n {
        rows.push(device.rows().iter().map(|r| r.to_vec()).collect());
        let recorded = &history.strategies[t];
        for (p, q) in device.strategy().iter().zip(recorded) {
            replay_mismatch = replay_mismatch.max((p - q).abs());
        }
        if t < n {
            device.receive(&history.utilities[t], &schedule)?;
        }
    }

    let x = &history.strategies;
    let u = &history.utilities;
    let w = |t: usize| schedule.w(t);
    let a_count = d as f64;

    let mut swap_table = vec![0.0; d * d];
    let mut realized = 0.0;
    let mut variation = 0.0;
    let mut movement = 0.0;
    let mut worst_margin = f64::NEG_INFINITY;
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    let mut max_prediction_norm = 0.0f64;
    let mut max_shifted_norm = 0.0f64;
    let mut max_local_movement = 0.0f64;
    let mut max_multiplicative = 0.0f64;
    let mut max_l1_ratio = 0.0f64;
    // per-learner sum_{tau=1}^{t-1} w_tau u_hat_a^tau
    let mut learner_sums = vec![vec![0.0; d]; d];

    for t in 1..=n {
        let wt = w(t);
        for a in 0..d {
            for b in 0..d {
                swap_table[a * d + b] += wt * x[t][a] * u[t][b];
            }
        }
        realized += wt * dot(&x[t], &u[t]);

        let diff_inf = u[t]
            .iter()
            .zip(&u[t - 1])
            .fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
        variation += 4.0 * eta * wt * diff_inf * diff_inf;
        let l1: f64 = x[t].iter().zip(&x[t - 1]).map(|(p, q)| (p - q).abs()).sum();
        movement += l1 * l1 * w(t - 1) / (1024.0 * a_count * eta);

        lhs = swap_table.chunks(d).map(max_of).sum::<f64>() - realized;
        rhs = 2.0 * a_count * a_count * (t as f64).ln() * wt / eta + variation - movement;
        if t >= 2 {
            worst_margin = worst_margin.max(lhs - rhs);
        }

        let step = eta / wt;
        let step_prev = eta / w(t - 1);
        let mut mu_sum = 0.0;
        let mut local_sq_sum = 0.0;
        for a in 0..d {
            let cur = &rows[t][a];
            let prev = &rows[t - 1][a];
            let ua: Vec<f64> = u[t].iter().map(|v| x[t][a] * v).collect();
            let ma: Vec<f64> = u[t - 1].iter().map(|v| x[t - 1][a] * v).collect();
            let delta: Vec<f64> = ua.iter().zip(&ma).map(|(p, q)| p - q).collect();
            max_prediction_norm = max_prediction_norm.max(eta * dual_local_norm(&delta, cur));

            let g_prev = ftrl_solve(
                &learner_sums[a]
                    .iter()
                    .map(|s| step_prev * s)
                    .collect::<Vec<_>>(),
            )?
            .point;
            let shifted: Vec<f64> = ma
                .iter()
                .zip(&learner_sums[a])
                .map(|(m, s)| step * wt * m + (step - step_prev) * s)
                .collect();
            max_shifted_norm = max_shifted_norm.max(dual_local_norm(&shifted, &g_prev));

            let moved = local_movement(cur, prev);
            max_local_movement = max_local_movement.max(moved);
            local_sq_sum += moved * moved;
            mu_sum += cur
                .iter()
                .zip(prev)
                .fold(0.0f64, |m, (c, p)| m.max((1.0 - c / p).abs()));

            learner_sums[a]
                .iter_mut()
                .zip(&ua)
                .for_each(|(s, v)| *s += wt * v);
        }
        max_multiplicative = max_multiplicative.max(mu_sum);
        if local_sq_sum > 0.0 {
            max_l1_ratio = max_l1_ratio.max(l1 * l1 / (64.0 * a_count * local_sq_sum));
        }
    }

    let decomposition_residual = if n == 0 {
        0.0
    } else {
        let weights: Vec<f64> = (1..=n).map(w).collect();
        let swap = weighted_swap_regret(&x[1..], &u[1..], &weights)?;
        let mut external = 0.0;
        for a in 0..d {
            let xa: Vec<&[f64]> = (1..=n).map(|t| rows[t][a].as_slice()).collect();
            let ua: Vec<Vec<f64>> = (1..=n)
                .map(|t| u[t].iter().map(|v| x[t][a] * v).collect())
                .collect();
            external += weighted_external_regret(&xa, &ua, &weights)?;
        }
        (swap - external).abs()
    };

    Ok(RvuReport {
        actions: d,
        eta,
        rounds: n,
        hypothesis_holds: eta < 1.0 / (28.0 * a_count),
        lhs,
        rhs,
        worst_margin,
        max_prediction_norm,
        max_shifted_norm,
        max_local_movement,
        max_multiplicative,
        max_l1_ratio,
        decomposition_residual,
        replay_mismatch,
    })
}

/// Runs the swap device on a utility sequence and records its history; the
/// utility for the final strategy is `utilities[N]`.
pub fn record_history(utilities: &[Vec<f64>], eta: f64, horizon: usize) -> Result<SlotHistory> {
    if utilities.is_empty() {
        return Err(Error::InvalidArgument("empty utility sequence".into()));
    }
    let d = utilities[0].len();
    let n = utilities.len() - 1;
    let schedule = WeightSchedule::through(horizon, eta, n.max(1))?;
    let mut device = SwapMinimizer::new(d);
    let mut strategies = Vec::with_capacity(n + 1);
    for (t, u) in utilities.iter().enumerate() {
        strategies.push(device.strategy().to_vec());
        if t < n {
            device.receive(u, &schedule)?;
        }
    }
    Ok(SlotHistory {
        strategies,
        utilities: utilities.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_utilities() {
        let history = record_history(&vec![vec![0.0; 3]; 50], 0.01, 2).unwrap();
        let report = rvu_diagnostics(&history, 0.01, 2).unwrap();
        assert_eq!(report.lhs, 0.0);
        assert!(report.rhs >= 0.0);
        assert!(report.holds(1e-6));
    }

    #[test]
    fn movement_norm_example() {
        let m = local_movement(&[0.6, 0.4], &[0.5, 0.5]);
        assert!((m - (0.04f64 + 0.04).sqrt()).abs() < 1e-15);
        assert!((dual_local_norm(&[1.0, -1.0], &[0.5, 0.5]) - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn random_utilities_at_small_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for d in [2usize, 3, 4] {
            let eta = 1.0 / (32.0 * d as f64);
            let utilities: Vec<Vec<f64>> = (0..=100)
                .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
                .collect();
            let history = record_history(&utilities, eta, 2).unwrap();
            let report = rvu_diagnostics(&history, eta, 2).unwrap();
            assert!(report.hypothesis_holds);
            assert!(report.holds(1e-6), "{report:?}");
            assert!(report.replay_mismatch <= 1e-14);
        }
    }

    #[test]
    fn large_step_is_flagged() {
        let history = record_history(&vec![vec![1.0, 0.0]; 5], 0.5, 1).unwrap();
        let report = rvu_diagnostics(&history, 0.5, 1).unwrap();
        assert!(!report.hypothesis_holds);
    }
}
