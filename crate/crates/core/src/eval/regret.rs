//! Per-state weighted swap regrets of a recorded run, and the histories that
//! feed the RVU diagnostics.

use serde::Serialize;

use crate::artifact::RunArtifact;
use crate::error::Result;
use crate::eval::certify::check_episode;
use crate::game::MarkovGame;
use crate::regret::{dot, max_of, SlotHistory};
use crate::schedule::WeightSchedule;

/// `reg^t_{i,h}(s)` for every episode `t` in `1..=T` and every slot.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTable {
    players: usize,
    horizon: usize,
    states: usize,
    episodes: usize,
    // [t - 1][(i * H + h) * S + s]
    data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateRegret {
    pub i: usize,
    pub h: usize,
    pub s: usize,
    pub reg: f64,
}

impl RegretTable {
    fn slots(&self) -> usize {
        self.players * self.horizon * self.states
    }

    pub fn episodes(&self) -> usize {
        self.episodes
    }

    #[inline]
    pub fn get(&self, t: usize, i: usize, h: usize, s: usize) -> f64 {
        self.data[(t - 1) * self.slots() + (i * self.horizon + h) * self.states + s]
    }

    /// Largest regret over all slots at episode `t`.
    pub fn max_at(&self, t: usize) -> f64 {
        let start = (t - 1) * self.slots();
        max_of(&self.data[start..start + self.slots()])
    }

    /// `reg^t_h`: largest regret over players and states at step `h`.
    pub fn max_at_step(&self, t: usize, h: usize) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for i in 0..self.players {
            for s in 0..self.states {
                best = best.max(self.get(t, i, h, s));
            }
        }
        best
    }

    /// Every slot at episode `t`, in (player, step, state) order.
    pub fn entries_at(&self, t: usize) -> Vec<StateRegret> {
        let mut out = Vec::with_capacity(self.slots());
        for i in 0..self.players {
            for h in 0..self.horizon {
                for s in 0..self.states {
                    out.push(StateRegret {
                        i,
                        h,
                        s,
                        reg: self.get(t, i, h, s),
                    });
                }
            }
        }
        out
    }

    /// `2H (1/T) sum_t max_h rbar^t_h`, with `rbar^t_h = max_{t <= t' <= T} reg^{t'}_h`
    /// the smallest non-increasing envelope above the measured regrets.
    pub fn chain_bound(&self, last: usize) -> f64 {
        let mut envelope = vec![f64::NEG_INFINITY; self.horizon];
        let mut total = 0.0;
        for t in (1..=last).rev() {
            let mut best = f64::NEG_INFINITY;
            for (h, e) in envelope.iter_mut().enumerate() {
                *e = e.max(self.max_at_step(t, h));
                best = best.max(*e);
            }
            total += best;
        }
        2.0 * self.horizon as f64 * total / last as f64
    }
}

/// Per-state regrets for every episode up to `t`.
///
/// The utilities are `Q^j_{i,h}(s, .) pi^j_{-i,h}` with
/// `Q^j = r_h + P_h V^j_{h+1}`.
pub fn per_state_regret_series(game: &MarkovGame, artifact: &RunArtifact, t: usize) -> Result<RegretTable> {
    artifact.check_game(game)?;
    artifact.require_full()?;
    check_episode(artifact, t)?;
    let schedule = WeightSchedule::through(game.horizon(), artifact.config.eta, t)?;
    let (n, horizon, states) = (game.players(), game.horizon(), game.states());
    let slots = n * horizon * states;
    let mut data = vec![0.0; t * slots];
    for i in 0..n {
        let d = game.actions()[i];
        let mut u = vec![0.0; d];
        let mut table = vec![0.0; d * d];
        for h in 0..horizon {
            for s in 0..states {
                table.iter_mut().for_each(|x| *x = 0.0);
                let mut realized = 0.0;
                let slot = (i * horizon + h) * states + s;
                for j in 1..=t {
                    let profile = artifact.policies[j].profile(h, s);
                    game.payoff_vector_into(i, h, s, artifact.values[j].row(i, h + 1), &profile, &mut u);
                    let w = schedule.w(j);
                    let x = profile[i];
                    for a in 0..d {
                        let wx = w * x[a];
                        for b in 0..d {
                            table[a * d + b] += wx * u[b];
                        }
                    }
                    realized += w * dot(x, &u);
                    let best: f64 = table.chunks(d).map(max_of).sum();
                    data[(j - 1) * slots + slot] = schedule.first_mixture_weight(j) * (best - realized);
                }
            }
        }
    }
    Ok(RegretTable {
        players: n,
        horizon,
        states,
        episodes: t,
        data,
    })
}

/// `reg^t_{i,h}(s)`.
pub fn per_state_regret(
    game: &MarkovGame,
    artifact: &RunArtifact,
    i: usize,
    h: usize,
    s: usize,
    t: usize,
) -> Result<f64> {
    Ok(per_state_regret_series(game, artifact, t)?.get(t, i, h, s))
}

/// Strategies `pi^0..pi^T` of slot `(i, h, s)` with the utilities
/// `(1/H) [(r_h + P_h V^t_{h+1}) pi^t_{-i,h}](s, .)` observed for them.
pub fn slot_history(game: &MarkovGame, artifact: &RunArtifact, i: usize, h: usize, s: usize) -> Result<SlotHistory> {
    artifact.check_game(game)?;
    artifact.require_full()?;
    let scale = 1.0 / game.horizon() as f64;
    let mut strategies = Vec::with_capacity(artifact.policies.len());
    let mut utilities = Vec::with_capacity(artifact.policies.len());
    for (policy, values) in artifact.policies.iter().zip(&artifact.values) {
        let profile = policy.profile(h, s);
        let mut u = game.expected_payoff_vector(i, h, s, values.row(i, h + 1), &profile)?;
        u.iter_mut().for_each(|x| *x *= scale);
        strategies.push(profile[i].to_vec());
        utilities.push(u);
    }
    Ok(SlotHistory { strategies, utilities })
}
