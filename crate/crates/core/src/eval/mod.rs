//! Equilibrium evaluation of recorded runs.

pub mod certify;
pub mod normal_form;
pub mod rate;
pub mod regret;
pub mod sample;

pub use certify::{certified_cce_gap, certified_ce_gap, certify, certify_series, GapCertificate, PlayerGap};
pub use normal_form::{brute_force_swap_gap_normal_form, exact_swap_gap_normal_form};
pub use rate::{rate_fit, RateFit};
pub use regret::{per_state_regret, per_state_regret_series, slot_history, RegretTable, StateRegret};
pub use sample::{output_policy_value, sample_trajectory, OutputPolicySampler, Trajectory};

/// `8192 H^3.5 n A^3 (ln T)^2 / T`, the guaranteed CE-gap rate.
pub fn gap_bound(horizon: usize, players: usize, max_actions: usize, t: usize) -> f64 {
    let t = t as f64;
    8192.0 * (horizon as f64).powf(3.5) * players as f64 * (max_actions as f64).powi(3) * t.ln().powi(2) / t
}

/// `2048 n H^2.5 A^3 ln T / T`, the guaranteed per-state regret.
pub fn state_regret_bound(players: usize, horizon: usize, max_actions: usize, t: usize) -> f64 {
    let t = t as f64;
    2048.0 * players as f64 * (horizon as f64).powf(2.5) * (max_actions as f64).powi(3) * t.ln() / t
}
