//! Exact swap gaps of the output policy when the game has a single step.

use crate::artifact::RunArtifact;
use crate::error::{Error, Result};
use crate::eval::certify::check_episode;
use crate::game::MarkovGame;
use crate::schedule::WeightSchedule;

/// Largest action count for which every deterministic swap map is enumerated.
pub const BRUTE_FORCE_MAX_ACTIONS: usize = 6;

/// `u^j[a'] = <r_i(s_1, a', .), pi^j_{-i}>` and `pi^j_i` for `j = 1..=t`,
/// summed over the joint action space directly.
fn episode_payoffs(game: &MarkovGame, artifact: &RunArtifact, i: usize, t: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let s1 = game.initial_state();
    let joint = game.joint_actions();
    let d = game.actions()[i];
    let mut payoffs = Vec::with_capacity(t);
    let mut strategies = Vec::with_capacity(t);
    for j in 1..=t {
        let policy = &artifact.policies[j];
        let mut u = vec![0.0; d];
        for k in 0..joint.count() {
            let acts = joint.decode(k).expect("index in range");
            let others: f64 = acts
                .iter()
                .enumerate()
                .filter(|(l, _)| *l != i)
                .map(|(l, &a)| policy.get(l, 0, s1)[a])
                .product();
            u[acts[i]] += others * game.reward(0, s1, k, i);
        }
        payoffs.push(u);
        strategies.push(policy.get(i, 0, s1).to_vec());
    }
    (strategies, payoffs)
}

fn check_single_step(game: &MarkovGame, artifact: &RunArtifact, t: usize) -> Result<()> {
    if game.horizon() != 1 {
        return Err(Error::InvalidArgument(format!(
            "exact normal-form gap needs H = 1, game has H = {}",
            game.horizon()
        )));
    }
    artifact.check_game(game)?;
    artifact.require_full()?;
    check_episode(artifact, t)
}

/// Per-player `sum_a max_a' sum_j alpha_t^j pi^j_i(a) u^j[a'] - V^t_i(s_1)`.
pub fn exact_swap_gap_normal_form(game: &MarkovGame, artifact: &RunArtifact, t: usize) -> Result<Vec<f64>> {
    check_single_step(game, artifact, t)?;
    let weights = WeightSchedule::through(1, artifact.config.eta, t)?.mixture_weights(t);
    let values = &artifact.values[t];
    Ok((0..game.players())
        .map(|i| {
            let d = game.actions()[i];
            let (x, u) = episode_payoffs(game, artifact, i, t);
            let mut best = 0.0;
            for a in 0..d {
                let gains: Vec<f64> = (0..d)
                    .map(|b| (0..t).map(|j| weights[j] * x[j][a] * u[j][b]).sum())
                    .collect();
                best += gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            }
            best - values.get(i, 0, game.initial_state())
        })
        .collect())
}

/// Per-player best gain over every deterministic map `phi: A_i -> A_i`,
/// applied to the mixture at episode `t`.
pub fn brute_force_swap_gap_normal_form(game: &MarkovGame, artifact: &RunArtifact, t: usize) -> Result<Vec<f64>> {
    check_single_step(game, artifact, t)?;
    if let Some(&big) = game.actions().iter().find(|&&a| a > BRUTE_FORCE_MAX_ACTIONS) {
        return Err(Error::InvalidArgument(format!(
            "brute force over {big}^{big} maps is too large"
        )));
    }
    let weights = WeightSchedule::through(1, artifact.config.eta, t)?.mixture_weights(t);
    let values = &artifact.values[t];
    Ok((0..game.players())
        .map(|i| {
            let d = game.actions()[i];
            let (x, u) = episode_payoffs(game, artifact, i, t);
            let mut best = f64::NEG_INFINITY;
            let mut phi = vec![0usize; d];
            for code in 0..d.pow(d as u32) {
                let mut c = code;
                for slot in phi.iter_mut() {
                    *slot = c % d;
                    c /= d;
                }
                let value: f64 = (0..t)
                    .map(|j| weights[j] * (0..d).map(|a| x[j][a] * u[j][phi[a]]).sum::<f64>())
                    .sum();
                best = best.max(value);
            }
            best - values.get(i, 0, game.initial_state())
        })
        .collect())
}
