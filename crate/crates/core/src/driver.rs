//! The learning dynamics: every (player, step, state) slot runs its own
//! swap-regret minimizer on utilities built from the previous episode, then
//! values are smoothed backward. Two value representations are offered, a
//! state-value table and a joint-action Q table; they produce the same
//! policies.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::artifact::RunArtifact;
use crate::error::{Error, Result};
use crate::game::{MarkovGame, MarkovPolicy, PolicyLayout, ValueTable};
use crate::regret::{dot, max_of, SwapMinimizer};
use crate::schedule::WeightSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    V,
    Q,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "v" | "V" => Ok(Variant::V),
            "q" | "Q" => Ok(Variant::Q),
            other => Err(Error::InvalidArgument(format!(
                "unknown variant {other:?} (expected v or q)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "T")]
    pub episodes: usize,
    pub eta: f64,
    /// Recorded for provenance; the dynamics themselves are deterministic.
    pub seed: u64,
    pub variant: Variant,
    /// Report progress every this many episodes; 0 disables reporting.
    pub checkpoint_every: usize,
    /// Keep every k-th episode in the history (plus the last one).
    pub history_stride: usize,
}

impl RunConfig {
    pub fn new(episodes: usize, eta: f64) -> Self {
        Self {
            episodes,
            eta,
            seed: 0,
            variant: Variant::V,
            checkpoint_every: 0,
            history_stride: 1,
        }
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::InvalidArgument("T must be at least 1".into()));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidArgument("eta must be positive and finite".into()));
        }
        if self.history_stride == 0 {
            return Err(Error::InvalidArgument("history stride must be at least 1".into()));
        }
        Ok(())
    }

    /// Episodes kept in the history: `0, k, 2k, ...` and `T`.
    pub fn stored_episodes(&self) -> Vec<usize> {
        let mut out: Vec<usize> = (0..=self.episodes).step_by(self.history_stride).collect();
        if out.last() != Some(&self.episodes) {
            out.push(self.episodes);
        }
        out
    }
}

/// `1 / (128 n sqrt(H) A_max)`.
pub fn default_eta(players: usize, horizon: usize, max_actions: usize) -> f64 {
    1.0 / (128.0 * players as f64 * (horizon as f64).sqrt() * max_actions as f64)
}

/// Warning text when `eta >= 1 / (28 A_max)`.
pub fn step_size_warning(eta: f64, max_actions: usize) -> Option<String> {
    (eta >= 1.0 / (28.0 * max_actions as f64))
        .then(|| "η ≥ 1/(28·A_max); RVU step-size hypothesis violated".to_string())
}

/// Limits that keep history and Q tables in memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryBudget {
    /// Largest joint action count for which Q tables are allocated.
    pub max_joint_actions: usize,
    /// Upper bound on history bytes.
    pub max_bytes: usize,
}

impl Default for MemoryBudget {
    fn default() -> Self {
        Self {
            max_joint_actions: 256,
            max_bytes: 4 << 30,
        }
    }
}

impl MemoryBudget {
    pub fn check(&self, game: &MarkovGame, config: &RunConfig) -> Result<()> {
        let joint = game.joint_actions().count();
        if config.variant == Variant::Q && joint > self.max_joint_actions {
            return Err(Error::MemoryBudget(format!(
                "Q tables need {joint} joint actions per state, limit is {}; use the V variant",
                self.max_joint_actions
            )));
        }
        let per_episode = history_doubles(game, config.variant);
        let episodes = config.stored_episodes().len();
        let bytes = per_episode
            .checked_mul(episodes)
            .and_then(|d| d.checked_mul(8))
            .unwrap_or(usize::MAX);
        if bytes > self.max_bytes {
            return Err(Error::MemoryBudget(format!(
                "history needs {bytes} bytes, limit is {}; thin the history or lower T",
                self.max_bytes
            )));
        }
        Ok(())
    }
}

/// Doubles stored per kept episode.
pub(crate) fn history_doubles(game: &MarkovGame, variant: Variant) -> usize {
    let layout = PolicyLayout::for_game(game);
    let n = game.players();
    let hs = game.horizon() * game.states();
    let q = match variant {
        Variant::V => 0,
        Variant::Q => n * hs * game.joint_actions().count(),
    };
    layout.len() + n * hs + q
}

/// `Q[i][h][s][k]` over joint actions `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    players: usize,
    horizon: usize,
    states: usize,
    joint: usize,
    data: Vec<f64>,
}

impl QTable {
    pub fn zeros(players: usize, horizon: usize, states: usize, joint: usize) -> Self {
        Self {
            players,
            horizon,
            states,
            joint,
            data: vec![0.0; players * horizon * states * joint],
        }
    }

    /// `Q^0 = r_h + P_h V^0_{h+1}` with `V^0` the optimistic table.
    pub fn initial(game: &MarkovGame) -> Self {
        let (n, horizon, states) = (game.players(), game.horizon(), game.states());
        let joint = game.joint_actions().count();
        let v0 = ValueTable::initial(n, horizon, states);
        let mut table = Self::zeros(n, horizon, states, joint);
        for i in 0..n {
            for h in 0..horizon {
                let next = v0.row(i, h + 1);
                for s in 0..states {
                    for k in 0..joint {
                        let q = game.continuation(i, h, s, k, next);
                        table.row_mut(i, h, s)[k] = q;
                    }
                }
            }
        }
        table
    }

    pub fn from_data(
        players: usize,
        horizon: usize,
        states: usize,
        joint: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        if data.len() != players * horizon * states * joint {
            return Err(Error::Dimension {
                expected: players * horizon * states * joint,
                got: data.len(),
            });
        }
        Ok(Self {
            players,
            horizon,
            states,
            joint,
            data,
        })
    }

    /// `Q[i][h][s][.]`.
    #[inline]
    pub fn row(&self, i: usize, h: usize, s: usize) -> &[f64] {
        let start = ((i * self.horizon + h) * self.states + s) * self.joint;
        &self.data[start..start + self.joint]
    }

    #[inline]
    fn row_mut(&mut self, i: usize, h: usize, s: usize) -> &mut [f64] {
        let start = ((i * self.horizon + h) * self.states + s) * self.joint;
        &mut self.data[start..start + self.joint]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Progress report at a checkpoint episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    pub episode: usize,
    /// Largest per-state regret over all slots at this episode.
    pub max_state_regret: f64,
}

/// Runs the value-update dynamics.
pub fn run_v_update(game: &MarkovGame, config: &RunConfig) -> Result<RunArtifact> {
    let config = RunConfig {
        variant: Variant::V,
        ..config.clone()
    };
    run_dynamics(game, &config, &MemoryBudget::default(), |_| {})
}

/// Runs the Q-update dynamics.
pub fn run_q_update(game: &MarkovGame, config: &RunConfig) -> Result<RunArtifact> {
    let config = RunConfig {
        variant: Variant::Q,
        ..config.clone()
    };
    run_dynamics(game, &config, &MemoryBudget::default(), |_| {})
}

/// Per-slot weighted swap-regret accumulator on the Q scale.
struct RegretTracker {
    table: Vec<f64>,
    realized: f64,
}

impl RegretTracker {
    fn new(d: usize) -> Self {
        Self {
            table: vec![0.0; d * d],
            realized: 0.0,
        }
    }

    fn add(&mut self, weight: f64, x: &[f64], u: &[f64]) {
        let d = x.len();
        for a in 0..d {
            let wx = weight * x[a];
            for b in 0..d {
                self.table[a * d + b] += wx * u[b];
            }
        }
        self.realized += weight * dot(x, u);
    }

    fn regret(&self, d: usize, first_mixture_weight: f64) -> f64 {
        first_mixture_weight * (self.table.chunks(d).map(max_of).sum::<f64>() - self.realized)
    }
}

struct Dynamics<'a> {
    game: &'a MarkovGame,
    config: &'a RunConfig,
    layout: Arc<PolicyLayout>,
    schedule: WeightSchedule,
    minimizers: Vec<SwapMinimizer>,
    trackers: Vec<RegretTracker>,
    policy: MarkovPolicy,
    values: ValueTable,
    q: Option<QTable>,
}

impl<'a> Dynamics<'a> {
    fn slot(&self, i: usize, h: usize, s: usize) -> usize {
        (i * self.game.horizon() + h) * self.game.states() + s
    }

    /// `H * u_hat` for slot `(i, h, s)` from the current (previous-episode) tables.
    fn utility(&self, i: usize, h: usize, s: usize, out: &mut [f64]) {
        let profile = self.policy.profile(h, s);
        match &self.q {
            None => self
                .game
                .payoff_vector_into(i, h, s, self.values.row(i, h + 1), &profile, out),
            Some(q) => {
                out.iter_mut().for_each(|x| *x = 0.0);
                let row = q.row(i, h, s);
                let joint = self.game.joint_actions();
                for (k, qk) in row.iter().enumerate() {
                    let acts = joint.actions_of(k);
                    let mut weight = 1.0;
                    for (j, &a) in acts.iter().enumerate() {
                        if j != i {
                            weight *= profile[j][a];
                        }
                    }
                    out[acts[i]] += weight * qk;
                }
            }
        }
    }

    /// Feeds utilities of the policy of episode `t - 1` to every slot and
    /// returns the new policy; also books the regret of episode `t - 1`.
    fn policy_phase(&mut self, t: usize) -> Result<(MarkovPolicy, f64)> {
        let game = self.game;
        let horizon = game.horizon() as f64;
        let mut next = self.policy.clone();
        let mut max_regret = f64::NEG_INFINITY;
        let mut buf = Vec::new();
        let mut scaled = Vec::new();
        for i in 0..game.players() {
            let d = game.actions()[i];
            buf.resize(d, 0.0);
            scaled.resize(d, 0.0);
            for h in 0..game.horizon() {
                for s in 0..game.states() {
                    self.utility(i, h, s, &mut buf);
                    let slot = self.slot(i, h, s);
                    if t >= 2 {
                        let prev = t - 1;
                        let tracker = &mut self.trackers[slot];
                        tracker.add(self.schedule.w(prev), self.policy.get(i, h, s), &buf);
                        let reg = tracker.regret(d, self.schedule.first_mixture_weight(prev));
                        max_regret = max_regret.max(reg);
                    }
                    if t <= self.config.episodes {
                        scaled
                            .iter_mut()
                            .zip(&buf)
                            .for_each(|(x, u)| *x = u / horizon);
                        let strategy = self.minimizers[slot]
                            .receive(&scaled, &self.schedule)
                            .map_err(|e| e.at_slot(i, h, s))?;
                        next.get_mut(i, h, s).copy_from_slice(strategy);
                    }
                }
            }
        }
        Ok((next, max_regret))
    }

    /// Backward smoothing of the value tables under the current policy.
    fn value_phase(&mut self, t: usize) {
        let game = self.game;
        let alpha = self.schedule.alpha(t);
        let mut buf = Vec::new();
        for h in (0..game.horizon()).rev() {
            if let Some(q) = self.q.as_mut() {
                // [Q_{h+1} pi_{h+1}](s') from this episode's Q and policy
                let next_values: Vec<Vec<f64>> = (0..game.players())
                    .map(|i| {
                        (0..game.states())
                            .map(|s2| {
                                if h + 1 == game.horizon() {
                                    0.0
                                } else {
                                    joint_mean(game, q.row(i, h + 1, s2), &self.policy.profile(h + 1, s2))
                                }
                            })
                            .collect()
                    })
                    .collect();
                for i in 0..game.players() {
                    for s in 0..game.states() {
                        for k in 0..game.joint_actions().count() {
                            let target = game.continuation(i, h, s, k, &next_values[i]);
                            let row = q.row_mut(i, h, s);
                            row[k] = (1.0 - alpha) * row[k] + alpha * target;
                        }
                    }
                }
                for i in 0..game.players() {
                    for s in 0..game.states() {
                        let target = joint_mean(game, q.row(i, h, s), &self.policy.profile(h, s));
                        let prev = self.values.get(i, h, s);
                        self.values.set(i, h, s, (1.0 - alpha) * prev + alpha * target);
                    }
                }
            } else {
                for i in 0..game.players() {
                    buf.resize(game.actions()[i], 0.0);
                    let next = self.values.row(i, h + 1).to_vec();
                    for s in 0..game.states() {
                        let profile = self.policy.profile(h, s);
                        game.payoff_vector_into(i, h, s, &next, &profile, &mut buf);
                        let target = dot(&buf, profile[i]);
                        let prev = self.values.get(i, h, s);
                        self.values.set(i, h, s, (1.0 - alpha) * prev + alpha * target);
                    }
                }
            }
        }
    }
}

/// `sum_k q[k] prod_j pi_j(a_j)` over all players.
fn joint_mean(game: &MarkovGame, q: &[f64], profile: &[&[f64]]) -> f64 {
    let joint = game.joint_actions();
    q.iter()
        .enumerate()
        .map(|(k, qk)| {
            let acts = joint.actions_of(k);
            let p: f64 = acts.iter().enumerate().map(|(j, &a)| profile[j][a]).product();
            p * qk
        })
        .sum()
}

/// Runs either variant, calling `observer` at every checkpoint episode.
pub fn run_dynamics(
    game: &MarkovGame,
    config: &RunConfig,
    budget: &MemoryBudget,
    mut observer: impl FnMut(&Checkpoint),
) -> Result<RunArtifact> {
    config.validate()?;
    budget.check(game, config)?;
    let layout = Arc::new(PolicyLayout::for_game(game));
    let schedule = WeightSchedule::through(game.horizon(), config.eta, config.episodes)?;
    let (n, horizon, states) = (game.players(), game.horizon(), game.states());
    let mut minimizers = Vec::with_capacity(n * horizon * states);
    let mut trackers = Vec::with_capacity(n * horizon * states);
    for &a in game.actions() {
        for _ in 0..horizon * states {
            minimizers.push(SwapMinimizer::new(a));
            trackers.push(RegretTracker::new(a));
        }
    }
    let mut dynamics = Dynamics {
        game,
        config,
        layout: layout.clone(),
        schedule,
        minimizers,
        trackers,
        policy: MarkovPolicy::uniform(layout.clone()),
        values: ValueTable::initial(n, horizon, states),
        q: (config.variant == Variant::Q).then(|| QTable::initial(game)),
    };

    let stride = config.history_stride;
    let keep = |t: usize| t % stride == 0 || t == config.episodes;
    let mut history = RunArtifact {
        game_hash: game.hash(),
        horizon,
        states,
        actions: game.actions().to_vec(),
        config: config.clone(),
        episodes: Vec::new(),
        policies: Vec::new(),
        values: Vec::new(),
        q_values: Vec::new(),
        minimizers: Vec::new(),
    };
    let record = |d: &Dynamics, t: usize, history: &mut RunArtifact| {
        history.episodes.push(t);
        history.policies.push(d.policy.clone());
        history.values.push(d.values.clone());
        if let Some(q) = &d.q {
            history.q_values.push(q.clone());
        }
    };
    record(&dynamics, 0, &mut history);

    let every = config.checkpoint_every;
    for t in 1..=config.episodes {
        let (next, max_regret) = dynamics.policy_phase(t)?;
        if t >= 2 && every > 0 && (t - 1) % every == 0 {
            observer(&Checkpoint {
                episode: t - 1,
                max_state_regret: max_regret,
            });
        }
        dynamics.policy = next;
        dynamics.value_phase(t);
        if keep(t) {
            record(&dynamics, t, &mut history);
        }
    }
    if every > 0 && config.episodes % every == 0 {
        // regret of the final episode: utilities only, no further update
        let (_, max_regret) = dynamics.policy_phase(config.episodes + 1)?;
        observer(&Checkpoint {
            episode: config.episodes,
            max_state_regret: max_regret,
        });
    }
    debug_assert!(Arc::ptr_eq(&dynamics.layout, &layout));
    history.minimizers = dynamics.minimizers;
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{generate_random_game, RandomGameSpec};

    fn small_game(seed: u64) -> MarkovGame {
        generate_random_game(&RandomGameSpec {
            players: 2,
            horizon: 2,
            states: 2,
            actions: vec![2, 2],
            seed,
            concentration: 1.0,
        })
        .unwrap()
    }

    #[test]
    fn default_eta_examples() {
        assert!((default_eta(2, 4, 3) - 1.0 / 1536.0).abs() < 1e-18);
        assert_eq!(default_eta(1, 1, 1), 1.0 / 128.0);
        for n in 1..5 {
            for h in 1..6 {
                for a in 1..6 {
                    assert!(default_eta(n, h, a) < 1.0 / (28.0 * a as f64));
                }
            }
        }
    }

    #[test]
    fn warning_threshold() {
        assert!(step_size_warning(0.5, 2).is_some());
        assert!(step_size_warning(default_eta(2, 2, 2), 2).is_none());
    }

    #[test]
    fn one_episode_backs_up_first_policy() {
        let game = small_game(3);
        let run = run_v_update(&game, &RunConfig::new(1, 0.01)).unwrap();
        let pi1 = &run.policies[1];
        let exact = game.policy_value(pi1).unwrap();
        assert_eq!(run.episodes, vec![0, 1]);
        for i in 0..2 {
            for h in 0..2 {
                for s in 0..2 {
                    assert!((run.values[1].get(i, h, s) - exact.get(i, h, s)).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn zero_reward_game_keeps_uniform_policies() {
        let zero =
            MarkovGame::from_parts(2, 2, &[2, 2], 0, vec![0.5; 2 * 4 * 2], vec![0.0; 2 * 2 * 4 * 2])
                .unwrap();
        for variant in [Variant::V, Variant::Q] {
            let run = run_dynamics(
                &zero,
                &RunConfig::new(20, 0.05).with_variant(variant),
                &MemoryBudget::default(),
                |_| {},
            )
            .unwrap();
            for policy in &run.policies {
                assert!(policy.as_slice().iter().all(|p| (p - 0.5).abs() < 1e-15));
            }
            for v in &run.values[1..] {
                assert!((0..2).all(|i| (0..2).all(|h| (0..2).all(|s| v.get(i, h, s) == 0.0))));
            }
        }
    }

    #[test]
    fn q_terminal_step_equals_reward() {
        let game = small_game(5);
        let run = run_q_update(&game, &RunConfig::new(1, 0.01)).unwrap();
        let q = &run.q_values[1];
        for i in 0..2 {
            for s in 0..2 {
                for k in 0..4 {
                    assert_eq!(q.row(i, 1, s)[k], game.reward(1, s, k, i));
                }
            }
        }
    }

    #[test]
    fn variants_agree_on_small_game() {
        let game = small_game(6);
        let cfg = RunConfig::new(50, default_eta(2, 2, 2));
        let v = run_v_update(&game, &cfg).unwrap();
        let q = run_q_update(&game, &cfg).unwrap();
        for (a, b) in v.policies.iter().zip(&q.policies) {
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                assert!((x - y).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn thinning_keeps_grid_and_last() {
        let mut cfg = RunConfig::new(10, 0.01);
        cfg.history_stride = 4;
        assert_eq!(cfg.stored_episodes(), vec![0, 4, 8, 10]);
        let run = run_v_update(&small_game(1), &cfg).unwrap();
        assert_eq!(run.episodes, vec![0, 4, 8, 10]);
    }

    #[test]
    fn memory_guard_refuses_large_joint_space() {
        let game = generate_random_game(&RandomGameSpec {
            players: 4,
            horizon: 1,
            states: 1,
            actions: vec![5; 4],
            seed: 0,
            concentration: 1.0,
        })
        .unwrap();
        let cfg = RunConfig::new(2, 0.001).with_variant(Variant::Q);
        assert!(matches!(
            run_dynamics(&game, &cfg, &MemoryBudget::default(), |_| {}),
            Err(Error::MemoryBudget(_))
        ));
    }

    #[test]
    fn checkpoints_are_reported() {
        let mut cfg = RunConfig::new(8, 0.01);
        cfg.checkpoint_every = 4;
        let mut seen = Vec::new();
        run_dynamics(&small_game(2), &cfg, &MemoryBudget::default(), |c| seen.push(*c)).unwrap();
        assert_eq!(seen.iter().map(|c| c.episode).collect::<Vec<_>>(), vec![4, 8]);
        assert!(seen.iter().all(|c| c.max_state_regret >= -1e-10));
    }

    #[test]
    fn runs_are_deterministic() {
        let game = small_game(9);
        let cfg = RunConfig::new(30, 0.01);
        assert_eq!(run_v_update(&game, &cfg).unwrap(), run_v_update(&game, &cfg).unwrap());
    }
}
