//! Executions of the mixture output policy and its value.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::artifact::RunArtifact;
use crate::error::{Error, Result};
use crate::eval::certify::check_episode;
use crate::game::MarkovGame;
use crate::schedule::WeightSchedule;

/// One episode of the output policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// States visited at steps `0..H`.
    pub states: Vec<usize>,
    /// Mixture index drawn at each step.
    pub indices: Vec<usize>,
    /// Per-player actions at each step.
    pub actions: Vec<Vec<usize>>,
    /// Per-player rewards at each step.
    pub rewards: Vec<Vec<f64>>,
}

impl Trajectory {
    /// Total reward of player `i`.
    pub fn total(&self, i: usize) -> f64 {
        self.rewards.iter().map(|r| r[i]).sum()
    }
}

fn draw(weights: &[f64], rng: &mut ChaCha8Rng) -> Result<usize> {
    let dist = WeightedIndex::new(weights).map_err(|e| Error::Invariant(e.to_string()))?;
    Ok(dist.sample(rng))
}

/// Reusable sampler for the output policy of episode `t`.
pub struct OutputPolicySampler<'a> {
    game: &'a MarkovGame,
    artifact: &'a RunArtifact,
    schedule: WeightSchedule,
    t: usize,
}

impl<'a> OutputPolicySampler<'a> {
    pub fn new(game: &'a MarkovGame, artifact: &'a RunArtifact, t: usize) -> Result<Self> {
        artifact.check_game(game)?;
        artifact.require_full()?;
        check_episode(artifact, t)?;
        Ok(Self {
            game,
            artifact,
            schedule: WeightSchedule::through(game.horizon(), artifact.config.eta, t)?,
            t,
        })
    }

    /// `(alpha_tau^1, ..., alpha_tau^tau)`.
    pub fn mixture(&self, tau: usize) -> Vec<f64> {
        self.schedule.mixture_weights(tau)
    }

    /// Draws `j ~ alpha_tau^.`, returned 1-based.
    pub fn draw_index(&self, tau: usize, rng: &mut ChaCha8Rng) -> Result<usize> {
        Ok(draw(&self.mixture(tau), rng)? + 1)
    }

    /// Samples the joint action of policy `pi^j_h` at state `s`.
    pub fn draw_actions(&self, j: usize, h: usize, s: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
        let policy = &self.artifact.policies[j];
        (0..self.game.players())
            .map(|i| draw(policy.get(i, h, s), rng))
            .collect()
    }

    /// Samples the successor state after step `h`.
    pub fn draw_next(&self, h: usize, s: usize, joint: usize, rng: &mut ChaCha8Rng) -> Result<usize> {
        draw(self.game.transition_row(h, s, joint), rng)
    }

    pub fn run(&self, rng: &mut ChaCha8Rng) -> Result<Trajectory> {
        let game = self.game;
        let mut out = Trajectory {
            states: Vec::with_capacity(game.horizon()),
            indices: Vec::with_capacity(game.horizon()),
            actions: Vec::with_capacity(game.horizon()),
            rewards: Vec::with_capacity(game.horizon()),
        };
        let mut s = game.initial_state();
        let mut tau = self.t;
        for h in 0..game.horizon() {
            let j = self.draw_index(tau, rng)?;
            let actions = self.draw_actions(j, h, s, rng)?;
            let k = game.joint_actions().encode(&actions)?;
            out.states.push(s);
            out.indices.push(j);
            out.rewards.push((0..game.players()).map(|i| game.reward(h, s, k, i)).collect());
            out.actions.push(actions);
            if h + 1 < game.horizon() {
                s = self.draw_next(h, s, k, rng)?;
            }
            tau = j;
        }
        Ok(out)
    }
}

/// One execution of the output policy of episode `t`; deterministic in `seed`.
pub fn sample_trajectory(game: &MarkovGame, artifact: &RunArtifact, t: usize, seed: u64) -> Result<Trajectory> {
    let sampler = OutputPolicySampler::new(game, artifact, t)?;
    sampler.run(&mut ChaCha8Rng::seed_from_u64(seed))
}

/// `V^t_{i}(s_1)` at the first step, the value of the output policy of episode `t`.
pub fn output_policy_value(artifact: &RunArtifact, i: usize, t: usize, initial_state: usize) -> Result<f64> {
    if t > artifact.last_episode() {
        return Err(Error::EpisodeOutOfRange {
            t,
            max: artifact.last_episode(),
        });
    }
    if i >= artifact.players() {
        return Err(Error::InvalidArgument(format!("player {i} out of range")));
    }
    Ok(artifact.values(t)?.get(i, 0, initial_state))
}
