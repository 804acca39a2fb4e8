//! Certified CE/CCE gaps of the mixture output policy by backward dynamic
//! programming over deviation values.

use serde::Serialize;

use crate::artifact::RunArtifact;
use crate::error::{Error, Result};
use crate::game::MarkovGame;
use crate::regret::max_of;
use crate::schedule::WeightSchedule;

/// Deviation and baseline values of one player at the initial state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlayerGap {
    /// Swap-deviation value `B`.
    #[serde(rename = "B")]
    pub deviation: f64,
    /// Fixed-action deviation value.
    #[serde(rename = "Bcce")]
    pub coarse_deviation: f64,
    #[serde(rename = "V")]
    pub value: f64,
    #[serde(rename = "ceGap")]
    pub ce_gap: f64,
    #[serde(rename = "cceGap")]
    pub cce_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GapCertificate {
    pub t: usize,
    pub per_player: Vec<PlayerGap>,
    pub ce_gap: f64,
    pub cce_gap: f64,
}

/// Certificate at episode `t`.
pub fn certify(game: &MarkovGame, artifact: &RunArtifact, t: usize) -> Result<GapCertificate> {
    let mut series = certify_series(game, artifact, t)?;
    Ok(series.pop().expect("series has t entries"))
}

/// Upper bound on the CE gap at `t`.
pub fn certified_ce_gap(game: &MarkovGame, artifact: &RunArtifact, t: usize) -> Result<f64> {
    Ok(certify(game, artifact, t)?.ce_gap)
}

/// Upper bound on the CCE gap at `t`.
pub fn certified_cce_gap(game: &MarkovGame, artifact: &RunArtifact, t: usize) -> Result<f64> {
    Ok(certify(game, artifact, t)?.cce_gap)
}

pub(crate) fn check_episode(artifact: &RunArtifact, t: usize) -> Result<()> {
    if t == 0 || t > artifact.last_episode() {
        return Err(Error::EpisodeOutOfRange {
            t,
            max: artifact.last_episode(),
        });
    }
    Ok(())
}

/// Certificates for every `tau` in `1..=t` from one backward pass.
///
/// For each player the pass keeps, per step and state, running sums
/// `sum_j w_j pi^j(a) G^j(a')` and `sum_j w_j G^j(a')`, where `G^j` is the
/// payoff vector against the others' episode-`j` policy with the deviation
/// values of episode `j` as continuation. Scaling by `alpha_tau^1` turns the
/// prefix sums into the mixture weights of episode `tau`.
pub fn certify_series(game: &MarkovGame, artifact: &RunArtifact, t: usize) -> Result<Vec<GapCertificate>> {
    artifact.check_game(game)?;
    artifact.require_full()?;
    check_episode(artifact, t)?;
    let schedule = WeightSchedule::through(game.horizon(), artifact.config.eta, t)?;
    let (n, horizon, states) = (game.players(), game.horizon(), game.states());
    let s1 = game.initial_state();

    let mut deviation = vec![vec![0.0; t]; n];
    let mut coarse = vec![vec![0.0; t]; n];
    for i in 0..n {
        let d = game.actions()[i];
        // [tau][s] for the layer below; tau = 1..=t stored at tau - 1
        let mut next_ce = vec![0.0; t * states];
        let mut next_cce = vec![0.0; t * states];
        let mut swap_sums = vec![0.0; d * d];
        let mut fixed_sums = vec![0.0; d];
        let mut g_ce = vec![0.0; d];
        let mut g_cce = vec![0.0; d];
        for h in (0..horizon).rev() {
            let mut cur_ce = vec![0.0; t * states];
            let mut cur_cce = vec![0.0; t * states];
            for s in 0..states {
                swap_sums.iter_mut().for_each(|x| *x = 0.0);
                fixed_sums.iter_mut().for_each(|x| *x = 0.0);
                for tau in 1..=t {
                    let policy = &artifact.policies[tau];
                    let profile = policy.profile(h, s);
                    let row = (tau - 1) * states;
                    game.payoff_vector_into(i, h, s, &next_ce[row..row + states], &profile, &mut g_ce);
                    game.payoff_vector_into(i, h, s, &next_cce[row..row + states], &profile, &mut g_cce);
                    let w = schedule.w(tau);
                    let x = profile[i];
                    for a in 0..d {
                        let wx = w * x[a];
                        for b in 0..d {
                            swap_sums[a * d + b] += wx * g_ce[b];
                        }
                    }
                    fixed_sums.iter_mut().zip(&g_cce).for_each(|(f, g)| *f += w * g);
                    let first = schedule.first_mixture_weight(tau);
                    cur_ce[row + s] = first * swap_sums.chunks(d).map(max_of).sum::<f64>();
                    cur_cce[row + s] = first * max_of(&fixed_sums);
                }
            }
            next_ce = cur_ce;
            next_cce = cur_cce;
        }
        for tau in 1..=t {
            deviation[i][tau - 1] = next_ce[(tau - 1) * states + s1];
            coarse[i][tau - 1] = next_cce[(tau - 1) * states + s1];
        }
    }

    Ok((1..=t)
        .map(|tau| {
            let values = &artifact.values[tau];
            let per_player: Vec<PlayerGap> = (0..n)
                .map(|i| {
                    let value = values.get(i, 0, s1);
                    let b = deviation[i][tau - 1];
                    let c = coarse[i][tau - 1];
                    PlayerGap {
                        deviation: b,
                        coarse_deviation: c,
                        value,
                        ce_gap: b - value,
                        cce_gap: c - value,
                    }
                })
                .collect();
            let ce_gap = per_player.iter().map(|p| p.ce_gap).fold(f64::NEG_INFINITY, f64::max);
            let cce_gap = per_player.iter().map(|p| p.cce_gap).fold(f64::NEG_INFINITY, f64::max);
            GapCertificate {
                t: tau,
                per_player,
                ce_gap,
                cce_gap,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::{run_v_update, RunConfig};
    use crate::game::{generate_random_game, RandomGameSpec};

    #[test]
    fn zero_reward_game_has_zero_gap() {
        let game = MarkovGame::from_parts(2, 2, &[2, 2], 0, vec![0.5; 16], vec![0.0; 32]).unwrap();
        let run = run_v_update(&game, &RunConfig::new(10, 0.01)).unwrap();
        for c in certify_series(&game, &run, 10).unwrap() {
            assert_eq!(c.ce_gap, 0.0);
            assert_eq!(c.cce_gap, 0.0);
        }
    }

    #[test]
    fn cce_never_exceeds_ce() {
        let game = generate_random_game(&RandomGameSpec {
            players: 3,
            horizon: 2,
            states: 2,
            actions: vec![2, 3, 2],
            seed: 8,
            concentration: 0.5,
        })
        .unwrap();
        let run = run_v_update(&game, &RunConfig::new(40, 0.01)).unwrap();
        for c in certify_series(&game, &run, 40).unwrap() {
            assert!(c.cce_gap <= c.ce_gap + 1e-10);
            assert!(c.ce_gap >= -1e-8);
        }
    }

    #[test]
    fn episode_range_is_checked() {
        let game = MarkovGame::from_parts(1, 1, &[2], 0, vec![], vec![0.2, 0.4]).unwrap();
        let run = run_v_update(&game, &RunConfig::new(3, 0.01)).unwrap();
        assert!(matches!(certify(&game, &run, 4), Err(Error::EpisodeOutOfRange { .. })));
        assert!(matches!(certify(&game, &run, 0), Err(Error::EpisodeOutOfRange { .. })));
    }
}
