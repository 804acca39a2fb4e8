//! Tabular finite-horizon general-sum Markov games.
//!
//! Steps are indexed `0..H` in code; step `H-1` is terminal and has no
//! transition kernel. Joint actions are encoded in mixed radix with the last
//! player varying fastest.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Tolerance for stochastic rows on load.
pub const ROW_TOLERANCE: f64 = 1e-9;

pub const GAME_FORMAT_VERSION: u32 = 1;

/// Mixed-radix encoding of joint actions, player `n-1` fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointActionSpace {
    radices: Vec<usize>,
    count: usize,
    decoded: Vec<usize>,
}

impl JointActionSpace {
    pub fn new(radices: &[usize]) -> Result<Self> {
        if radices.is_empty() {
            return Err(Error::InvalidArgument("need at least one player".into()));
        }
        if radices.contains(&0) {
            return Err(Error::InvalidArgument("action counts must be positive".into()));
        }
        let count = radices
            .iter()
            .try_fold(1usize, |acc, &a| acc.checked_mul(a))
            .ok_or_else(|| Error::InvalidArgument("joint action space overflows usize".into()))?;
        let n = radices.len();
        let mut decoded = vec![0usize; count * n];
        let mut digits = vec![0usize; n];
        for k in 0..count {
            decoded[k * n..(k + 1) * n].copy_from_slice(&digits);
            for i in (0..n).rev() {
                digits[i] += 1;
                if digits[i] < radices[i] {
                    break;
                }
                digits[i] = 0;
            }
        }
        Ok(Self {
            radices: radices.to_vec(),
            count,
            decoded,
        })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn players(&self) -> usize {
        self.radices.len()
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    pub fn encode(&self, actions: &[usize]) -> Result<usize> {
        if actions.len() != self.radices.len() {
            return Err(Error::Dimension {
                expected: self.radices.len(),
                got: actions.len(),
            });
        }
        let mut index = 0;
        for (i, (&a, &radix)) in actions.iter().zip(&self.radices).enumerate() {
            if a >= radix {
                return Err(Error::InvalidArgument(format!(
                    "action {a} of player {i} out of range 0..{radix}"
                )));
            }
            index = index * radix + a;
        }
        Ok(index)
    }

    pub fn decode(&self, index: usize) -> Result<&[usize]> {
        if index >= self.count {
            return Err(Error::InvalidArgument(format!(
                "joint index {index} out of range 0..{}",
                self.count
            )));
        }
        let n = self.radices.len();
        Ok(&self.decoded[index * n..(index + 1) * n])
    }

    #[inline]
    pub(crate) fn actions_of(&self, index: usize) -> &[usize] {
        let n = self.radices.len();
        &self.decoded[index * n..(index + 1) * n]
    }
}

/// On-disk game format. Nested arrays, steps listed from the first.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GameDocument {
    version: u32,
    n: usize,
    #[serde(rename = "H")]
    horizon: usize,
    #[serde(rename = "S")]
    states: usize,
    actions: Vec<usize>,
    s1: usize,
    /// `P[h][s][joint][s']` for the first `H-1` steps.
    transitions: Vec<Vec<Vec<Vec<f64>>>>,
    /// `r[h][s][joint][i]`.
    rewards: Vec<Vec<Vec<Vec<f64>>>>,
}

/// An n-player finite-horizon general-sum Markov game. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovGame {
    horizon: usize,
    states: usize,
    initial_state: usize,
    joint: JointActionSpace,
    // [h][s][k][s'] for h < H-1
    transitions: Vec<f64>,
    // [h][s][k][i]
    rewards: Vec<f64>,
}

impl MarkovGame {
    /// Builds a game from flat tensors, validating every invariant.
    ///
    /// `transitions` is laid out `[h][s][joint][s']` for `h < H-1` and
    /// `rewards` is laid out `[h][s][joint][player]`.
    pub fn from_parts(
        horizon: usize,
        states: usize,
        actions: &[usize],
        initial_state: usize,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
    ) -> Result<Self> {
        if horizon == 0 || states == 0 {
            return Err(Error::InvalidArgument(
                "horizon and state count must be positive".into(),
            ));
        }
        if initial_state >= states {
            return Err(Error::Shape(format!(
                "initial state {initial_state} out of range 0..{states}"
            )));
        }
        let joint = JointActionSpace::new(actions)?;
        let n = joint.players();
        let j = joint.count();
        let expected_p = (horizon - 1) * states * j * states;
        if transitions.len() != expected_p {
            return Err(Error::Shape(format!(
                "transition tensor has {} entries, expected {expected_p}",
                transitions.len()
            )));
        }
        let expected_r = horizon * states * j * n;
        if rewards.len() != expected_r {
            return Err(Error::Shape(format!(
                "reward tensor has {} entries, expected {expected_r}",
                rewards.len()
            )));
        }
        let mut game = Self {
            horizon,
            states,
            initial_state,
            joint,
            transitions,
            rewards,
        };
        game.validate_and_normalize()?;
        Ok(game)
    }

    fn validate_and_normalize(&mut self) -> Result<()> {
        let s_count = self.states;
        let j = self.joint.count();
        for h in 0..self.horizon.saturating_sub(1) {
            for s in 0..s_count {
                for k in 0..j {
                    let start = ((h * s_count + s) * j + k) * s_count;
                    let row = &mut self.transitions[start..start + s_count];
                    if let Some(&value) = row.iter().find(|p| !p.is_finite() || **p < 0.0) {
                        return Err(Error::NegativeProbability {
                            step: h,
                            state: s,
                            joint: k,
                            value,
                        });
                    }
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > ROW_TOLERANCE {
                        return Err(Error::RowSum {
                            step: h,
                            state: s,
                            joint: k,
                            sum,
                        });
                    }
                    // rows already stochastic to rounding are left bit-exact so that
                    // save/load cycles are stable
                    if (sum - 1.0).abs() > 4.0 * f64::EPSILON * s_count as f64 {
                        row.iter_mut().for_each(|p| *p /= sum);
                    }
                }
            }
        }
        let n = self.players();
        for (idx, &value) in self.rewards.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                let player = idx % n;
                let k = (idx / n) % j;
                let s = (idx / (n * j)) % s_count;
                let h = idx / (n * j * s_count);
                return Err(Error::RewardOutOfRange {
                    step: h,
                    state: s,
                    joint: k,
                    player,
                    value,
                });
            }
        }
        Ok(())
    }

    /// Parses and validates the JSON game format.
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let doc: GameDocument =
            serde_json::from_slice(bytes).map_err(|e| Error::Malformed(e.to_string()))?;
        if doc.version != GAME_FORMAT_VERSION {
            return Err(Error::Malformed(format!(
                "unsupported game version {}",
                doc.version
            )));
        }
        if doc.n != doc.actions.len() {
            return Err(Error::Shape(format!(
                "n = {} but {} action counts given",
                doc.n,
                doc.actions.len()
            )));
        }
        if doc.horizon == 0 || doc.states == 0 {
            return Err(Error::Shape("H and S must be positive".into()));
        }
        let joint = JointActionSpace::new(&doc.actions)?;
        let j = joint.count();
        let mut transitions = Vec::with_capacity((doc.horizon - 1) * doc.states * j * doc.states);
        check_len("transitions", doc.transitions.len(), doc.horizon - 1)?;
        for (h, per_state) in doc.transitions.iter().enumerate() {
            check_len(&format!("transitions[{h}]"), per_state.len(), doc.states)?;
            for (s, per_joint) in per_state.iter().enumerate() {
                check_len(&format!("transitions[{h}][{s}]"), per_joint.len(), j)?;
                for (k, row) in per_joint.iter().enumerate() {
                    check_len(&format!("transitions[{h}][{s}][{k}]"), row.len(), doc.states)?;
                    transitions.extend_from_slice(row);
                }
            }
        }
        let mut rewards = Vec::with_capacity(doc.horizon * doc.states * j * doc.n);
        check_len("rewards", doc.rewards.len(), doc.horizon)?;
        for (h, per_state) in doc.rewards.iter().enumerate() {
            check_len(&format!("rewards[{h}]"), per_state.len(), doc.states)?;
            for (s, per_joint) in per_state.iter().enumerate() {
                check_len(&format!("rewards[{h}][{s}]"), per_joint.len(), j)?;
                for (k, row) in per_joint.iter().enumerate() {
                    check_len(&format!("rewards[{h}][{s}][{k}]"), row.len(), doc.n)?;
                    rewards.extend_from_slice(row);
                }
            }
        }
        Self::from_parts(
            doc.horizon,
            doc.states,
            &doc.actions,
            doc.s1,
            transitions,
            rewards,
        )
    }

    fn to_document(&self) -> GameDocument {
        let n = self.players();
        let j = self.joint.count();
        let s_count = self.states;
        let transitions = (0..self.horizon - 1)
            .map(|h| {
                (0..s_count)
                    .map(|s| (0..j).map(|k| self.transition_row(h, s, k).to_vec()).collect())
                    .collect()
            })
            .collect();
        let rewards = (0..self.horizon)
            .map(|h| {
                (0..s_count)
                    .map(|s| {
                        (0..j)
                            .map(|k| {
                                let start = ((h * s_count + s) * j + k) * n;
                                self.rewards[start..start + n].to_vec()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        GameDocument {
            version: GAME_FORMAT_VERSION,
            n,
            horizon: self.horizon,
            states: s_count,
            actions: self.joint.radices().to_vec(),
            s1: self.initial_state,
            transitions,
            rewards,
        }
    }

    /// Canonical JSON encoding. Deterministic, so it doubles as hash input.
    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec(&self.to_document()).expect("game document serializes")
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json()))
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn players(&self) -> usize {
        self.joint.players()
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn actions(&self) -> &[usize] {
        self.joint.radices()
    }

    pub fn max_actions(&self) -> usize {
        self.actions().iter().copied().max().unwrap_or(1)
    }

    pub fn joint_actions(&self) -> &JointActionSpace {
        &self.joint
    }

    /// `P_h(. | s, k)`. Panics for the terminal step.
    pub fn transition_row(&self, h: usize, s: usize, k: usize) -> &[f64] {
        assert!(h + 1 < self.horizon, "terminal step has no transitions");
        let j = self.joint.count();
        let start = ((h * self.states + s) * j + k) * self.states;
        &self.transitions[start..start + self.states]
    }

    #[inline]
    pub fn reward(&self, h: usize, s: usize, k: usize, i: usize) -> f64 {
        let n = self.players();
        let j = self.joint.count();
        self.rewards[((h * self.states + s) * j + k) * n + i]
    }

    /// `r_{i,h}(s,k) + sum_{s'} P_h(s'|s,k) next[s']`; the terminal step ignores `next`.
    #[inline]
    pub fn continuation(&self, i: usize, h: usize, s: usize, k: usize, next: &[f64]) -> f64 {
        let r = self.reward(h, s, k, i);
        if h + 1 == self.horizon {
            return r;
        }
        let row = self.transition_row(h, s, k);
        r + row.iter().zip(next).map(|(p, v)| p * v).sum::<f64>()
    }

    fn check_profile(&self, profile: &[&[f64]], skip: Option<usize>) -> Result<()> {
        if profile.len() != self.players() {
            return Err(Error::Dimension {
                expected: self.players(),
                got: profile.len(),
            });
        }
        for (j, dist) in profile.iter().enumerate() {
            if Some(j) == skip {
                continue;
            }
            if dist.len() != self.actions()[j] {
                return Err(Error::Dimension {
                    expected: self.actions()[j],
                    got: dist.len(),
                });
            }
        }
        Ok(())
    }

    fn check_step_state(&self, h: usize, s: usize) -> Result<()> {
        if h >= self.horizon || s >= self.states {
            return Err(Error::InvalidArgument(format!(
                "(h={h}, s={s}) outside H={}, S={}",
                self.horizon, self.states
            )));
        }
        Ok(())
    }

    /// Reward-plus-transition oracle: entry `a` is the expected value of
    /// `r_{i,h}(s, (a, a_{-i})) + P_h next` when the other players draw
    /// independently from `profile`. `profile[i]` is ignored.
    pub fn expected_payoff_vector(
        &self,
        i: usize,
        h: usize,
        s: usize,
        next_values: &[f64],
        profile: &[&[f64]],
    ) -> Result<Vec<f64>> {
        self.check_step_state(h, s)?;
        if i >= self.players() {
            return Err(Error::InvalidArgument(format!("player {i} out of range")));
        }
        if next_values.len() != self.states {
            return Err(Error::Dimension {
                expected: self.states,
                got: next_values.len(),
            });
        }
        self.check_profile(profile, Some(i))?;
        let mut out = vec![0.0; self.actions()[i]];
        self.payoff_vector_into(i, h, s, next_values, profile, &mut out);
        Ok(out)
    }

    /// Unchecked core of [`expected_payoff_vector`](Self::expected_payoff_vector).
    pub(crate) fn payoff_vector_into(
        &self,
        i: usize,
        h: usize,
        s: usize,
        next_values: &[f64],
        profile: &[&[f64]],
        out: &mut [f64],
    ) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for k in 0..self.joint.count() {
            let acts = self.joint.actions_of(k);
            let mut weight = 1.0;
            for (j, &a) in acts.iter().enumerate() {
                if j != i {
                    weight *= profile[j][a];
                }
            }
            if weight == 0.0 {
                continue;
            }
            out[acts[i]] += weight * self.continuation(i, h, s, k, next_values);
        }
    }

    /// `[(r_h + P_h next) pi_h](s)` for player `i` under a full product profile.
    pub fn joint_expectation(
        &self,
        i: usize,
        h: usize,
        s: usize,
        next_values: &[f64],
        profile: &[&[f64]],
    ) -> Result<f64> {
        let payoff = self.expected_payoff_vector(i, h, s, next_values, profile)?;
        self.check_profile(profile, None)?;
        Ok(payoff.iter().zip(profile[i]).map(|(u, p)| u * p).sum())
    }

    /// One smooth value update for the row `V_{i,h}(.)`:
    /// `(1 - alpha) prev + alpha [(r_h + P_h next) pi_h]`.
    pub fn value_backup(
        &self,
        policy: &MarkovPolicy,
        next_values: &[f64],
        prev_row: &[f64],
        alpha: f64,
        i: usize,
        h: usize,
    ) -> Result<Vec<f64>> {
        if prev_row.len() != self.states {
            return Err(Error::Dimension {
                expected: self.states,
                got: prev_row.len(),
            });
        }
        (0..self.states)
            .map(|s| {
                let target = self.joint_expectation(i, h, s, next_values, &policy.profile(h, s))?;
                Ok((1.0 - alpha) * prev_row[s] + alpha * target)
            })
            .collect()
    }

    /// Exact finite-horizon evaluation of a Markov product policy.
    pub fn policy_value(&self, policy: &MarkovPolicy) -> Result<ValueTable> {
        policy.layout().check_game(self)?;
        let mut table = ValueTable::zeros(self.players(), self.horizon, self.states);
        for i in 0..self.players() {
            for h in (0..self.horizon).rev() {
                let next = table.row(i, h + 1).to_vec();
                for s in 0..self.states {
                    let v = self.joint_expectation(i, h, s, &next, &policy.profile(h, s))?;
                    table.set(i, h, s, v);
                }
            }
        }
        Ok(table)
    }
}

fn check_len(what: &str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::Shape(format!(
            "{what} has length {got}, expected {expected}"
        )));
    }
    Ok(())
}

/// Parameters for [`generate_random_game`].
#[derive(Debug, Clone, PartialEq)]
pub struct RandomGameSpec {
    pub players: usize,
    pub horizon: usize,
    pub states: usize,
    pub actions: Vec<usize>,
    pub seed: u64,
    /// Symmetric Dirichlet concentration for each transition row.
    pub concentration: f64,
}

/// Draws a game with Dirichlet transitions and uniform rewards; deterministic in the seed.
pub fn generate_random_game(spec: &RandomGameSpec) -> Result<MarkovGame> {
    if spec.players == 0 || spec.horizon == 0 || spec.states == 0 {
        return Err(Error::InvalidArgument("counts must be at least 1".into()));
    }
    if spec.actions.len() != spec.players {
        return Err(Error::InvalidArgument(
            "need one action count per player".into(),
        ));
    }
    if spec.actions.contains(&0) {
        return Err(Error::InvalidArgument("action counts must be at least 1".into()));
    }
    if !(spec.concentration > 0.0 && spec.concentration.is_finite()) {
        return Err(Error::InvalidArgument("concentration must be positive".into()));
    }
    let joint = JointActionSpace::new(&spec.actions)?;
    let j = joint.count();
    let s_count = spec.states;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let gamma = Gamma::new(spec.concentration, 1.0)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;

    let rows = (spec.horizon - 1) * s_count * j;
    let mut transitions = Vec::with_capacity(rows * s_count);
    let mut row = vec![0.0; s_count];
    for _ in 0..rows {
        row.iter_mut().for_each(|p| *p = gamma.sample(&mut rng));
        let sum: f64 = row.iter().sum();
        if sum > 0.0 && sum.is_finite() {
            row.iter_mut().for_each(|p| *p /= sum);
        } else {
            row.iter_mut().for_each(|p| *p = 1.0 / s_count as f64);
        }
        transitions.extend_from_slice(&row);
    }
    let rewards = (0..spec.horizon * s_count * j * spec.players)
        .map(|_| rng.random::<f64>())
        .collect();
    MarkovGame::from_parts(spec.horizon, s_count, &spec.actions, 0, transitions, rewards)
}

/// Shape of a Markov product policy: one distribution per (player, step, state).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyLayout {
    horizon: usize,
    states: usize,
    actions: Vec<usize>,
    offsets: Vec<usize>,
    len: usize,
}

impl PolicyLayout {
    pub fn new(horizon: usize, states: usize, actions: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(actions.len());
        let mut len = 0;
        for &a in actions {
            offsets.push(len);
            len += horizon * states * a;
        }
        Self {
            horizon,
            states,
            actions: actions.to_vec(),
            offsets,
            len,
        }
    }

    pub fn for_game(game: &MarkovGame) -> Self {
        Self::new(game.horizon(), game.states(), game.actions())
    }

    /// Number of doubles in one policy; order is player, step, state, action.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn offset(&self, i: usize, h: usize, s: usize) -> usize {
        self.offsets[i] + (h * self.states + s) * self.actions[i]
    }

    pub fn players(&self) -> usize {
        self.actions.len()
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    fn check_game(&self, game: &MarkovGame) -> Result<()> {
        if self.horizon != game.horizon()
            || self.states != game.states()
            || self.actions != game.actions()
        {
            return Err(Error::Shape("policy shape does not match game".into()));
        }
        Ok(())
    }
}

/// A Markov product policy `pi_{i,h}(. | s)` for every player.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovPolicy {
    layout: Arc<PolicyLayout>,
    data: Vec<f64>,
}

impl MarkovPolicy {
    pub fn uniform(layout: Arc<PolicyLayout>) -> Self {
        let mut data = vec![0.0; layout.len()];
        for i in 0..layout.players() {
            let a = layout.actions[i];
            let start = layout.offsets[i];
            data[start..start + layout.horizon * layout.states * a]
                .iter_mut()
                .for_each(|p| *p = 1.0 / a as f64);
        }
        Self { layout, data }
    }

    /// Wraps raw data, checking that every distribution is strictly positive
    /// and sums to one within `1e-9`.
    pub fn from_data(layout: Arc<PolicyLayout>, data: Vec<f64>) -> Result<Self> {
        if data.len() != layout.len() {
            return Err(Error::Dimension {
                expected: layout.len(),
                got: data.len(),
            });
        }
        let policy = Self { layout, data };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        let l = &self.layout;
        for i in 0..l.players() {
            for h in 0..l.horizon {
                for s in 0..l.states {
                    let dist = self.get(i, h, s);
                    if dist.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
                        return Err(Error::Invariant(format!(
                            "policy ({i},{h},{s}) has a nonpositive entry"
                        )));
                    }
                    let sum: f64 = dist.iter().sum();
                    if (sum - 1.0).abs() > 1e-9 {
                        return Err(Error::Invariant(format!(
                            "policy ({i},{h},{s}) sums to {sum}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn layout(&self) -> &Arc<PolicyLayout> {
        &self.layout
    }

    #[inline]
    pub fn get(&self, i: usize, h: usize, s: usize) -> &[f64] {
        let start = self.layout.offset(i, h, s);
        &self.data[start..start + self.layout.actions[i]]
    }

    #[inline]
    pub fn get_mut(&mut self, i: usize, h: usize, s: usize) -> &mut [f64] {
        let start = self.layout.offset(i, h, s);
        let a = self.layout.actions[i];
        &mut self.data[start..start + a]
    }

    /// Per-player distributions at `(h, s)`.
    pub fn profile(&self, h: usize, s: usize) -> Vec<&[f64]> {
        (0..self.layout.players()).map(|i| self.get(i, h, s)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// `V[i][h][s]` for `h` in `0..=H`, with the terminal layer fixed at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    players: usize,
    horizon: usize,
    states: usize,
    data: Vec<f64>,
}

impl ValueTable {
    pub fn zeros(players: usize, horizon: usize, states: usize) -> Self {
        Self {
            players,
            horizon,
            states,
            data: vec![0.0; players * (horizon + 1) * states],
        }
    }

    /// Optimistic initialization `V[i][h][s] = H - h` (remaining steps).
    pub fn initial(players: usize, horizon: usize, states: usize) -> Self {
        let mut table = Self::zeros(players, horizon, states);
        for i in 0..players {
            for h in 0..horizon {
                for s in 0..states {
                    table.set(i, h, s, (horizon - h) as f64);
                }
            }
        }
        table
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn states(&self) -> usize {
        self.states
    }

    #[inline]
    pub fn get(&self, i: usize, h: usize, s: usize) -> f64 {
        self.data[(i * (self.horizon + 1) + h) * self.states + s]
    }

    #[inline]
    pub fn set(&mut self, i: usize, h: usize, s: usize, value: f64) {
        self.data[(i * (self.horizon + 1) + h) * self.states + s] = value;
    }

    /// `V[i][h][.]`; `h == H` gives the zero terminal row.
    #[inline]
    pub fn row(&self, i: usize, h: usize) -> &[f64] {
        let start = (i * (self.horizon + 1) + h) * self.states;
        &self.data[start..start + self.states]
    }

    /// Checks `0 <= V[i][h][s] <= H - h` up to `tol`.
    pub fn check_bounds(&self, tol: f64) -> Result<()> {
        for i in 0..self.players {
            for h in 0..=self.horizon {
                for s in 0..self.states {
                    let v = self.get(i, h, s);
                    let cap = (self.horizon - h) as f64;
                    if !(v >= -tol && v <= cap + tol) {
                        return Err(Error::Invariant(format!(
                            "V[{i}][{h}][{s}] = {v} outside [0, {cap}]"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_player_game(rewards: [f64; 2]) -> MarkovGame {
        MarkovGame::from_parts(1, 1, &[2], 0, vec![], rewards.to_vec()).unwrap()
    }

    #[test]
    fn joint_index_examples() {
        let space = JointActionSpace::new(&[2, 3]).unwrap();
        assert_eq!(space.encode(&[0, 0]).unwrap(), 0);
        assert_eq!(space.encode(&[1, 2]).unwrap(), 5);
        assert_eq!(space.encode(&[1, 0]).unwrap(), 3);
        assert_eq!(space.decode(3).unwrap(), &[1, 0]);
        assert!(space.encode(&[2, 0]).is_err());
        assert!(space.decode(6).is_err());
    }

    #[test]
    fn joint_index_matches_enumeration() {
        // player 1 most significant: enumerate in nested-loop order
        let space = JointActionSpace::new(&[2, 3]).unwrap();
        let mut k = 0;
        for a1 in 0..2 {
            for a2 in 0..3 {
                assert_eq!(space.encode(&[a1, a2]).unwrap(), k);
                k += 1;
            }
        }
    }

    #[test]
    fn smallest_legal_game_loads() {
        let json = br#"{"version":1,"n":1,"H":1,"S":1,"actions":[2],"s1":0,
            "transitions":[],"rewards":[[[[0.3],[0.7]]]]}"#;
        let game = MarkovGame::from_json(json).unwrap();
        assert_eq!(game.players(), 1);
        assert_eq!(game.reward(0, 0, 1, 0), 0.7);
    }

    #[test]
    fn bad_row_sum_is_rejected() {
        let json = br#"{"version":1,"n":1,"H":2,"S":2,"actions":[1],"s1":0,
            "transitions":[[[[0.5,0.6]],[[0.5,0.5]]]],
            "rewards":[[[[0.1]],[[0.1]]],[[[0.1]],[[0.1]]]]}"#;
        let err = MarkovGame::from_json(json).unwrap_err();
        assert!(err.to_string().contains("row sums to 1.1"), "{err}");
    }

    #[test]
    fn reward_out_of_range_is_rejected() {
        let json = br#"{"version":1,"n":1,"H":1,"S":1,"actions":[2],"s1":0,
            "transitions":[],"rewards":[[[[0.3],[1.2]]]]}"#;
        let err = MarkovGame::from_json(json).unwrap_err();
        assert!(err.to_string().contains("reward out of range"), "{err}");
    }

    #[test]
    fn malformed_and_shape_errors() {
        assert!(matches!(
            MarkovGame::from_json(b"{not json"),
            Err(Error::Malformed(_))
        ));
        let json = br#"{"version":1,"n":2,"H":1,"S":1,"actions":[2],"s1":0,
            "transitions":[],"rewards":[[[[0.3],[0.2]]]]}"#;
        assert!(matches!(MarkovGame::from_json(json), Err(Error::Shape(_))));
    }

    #[test]
    fn near_stochastic_rows_are_renormalized() {
        let game = MarkovGame::from_parts(
            2,
            2,
            &[1],
            0,
            vec![0.5, 0.5 + 5e-10, 0.25, 0.75],
            vec![0.0; 4],
        )
        .unwrap();
        let row = game.transition_row(0, 0, 0);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip_preserves_game() {
        let spec = RandomGameSpec {
            players: 2,
            horizon: 3,
            states: 2,
            actions: vec![2, 3],
            seed: 11,
            concentration: 1.0,
        };
        let game = generate_random_game(&spec).unwrap();
        let back = MarkovGame::from_json(&game.to_json()).unwrap();
        assert_eq!(game, back);
        assert_eq!(game.hash(), back.hash());
    }

    #[test]
    fn random_game_is_deterministic() {
        let spec = RandomGameSpec {
            players: 2,
            horizon: 2,
            states: 2,
            actions: vec![2, 2],
            seed: 7,
            concentration: 1.0,
        };
        let a = generate_random_game(&spec).unwrap();
        let b = generate_random_game(&spec).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let c = generate_random_game(&RandomGameSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(a.to_json(), c.to_json());
    }

    #[test]
    fn large_concentration_gives_near_uniform_rows() {
        let spec = RandomGameSpec {
            players: 2,
            horizon: 3,
            states: 4,
            actions: vec![2, 2],
            seed: 3,
            concentration: 1e6,
        };
        let game = generate_random_game(&spec).unwrap();
        for h in 0..2 {
            for s in 0..4 {
                for k in 0..4 {
                    for &p in game.transition_row(h, s, k) {
                        assert!((p - 0.25).abs() < 0.05);
                    }
                }
            }
        }
    }

    #[test]
    fn degenerate_random_game() {
        let spec = RandomGameSpec {
            players: 1,
            horizon: 1,
            states: 1,
            actions: vec![1],
            seed: 0,
            concentration: 1.0,
        };
        let game = generate_random_game(&spec).unwrap();
        assert_eq!(game.joint_actions().count(), 1);
    }

    #[test]
    fn random_game_rejects_bad_specs() {
        let base = RandomGameSpec {
            players: 2,
            horizon: 2,
            states: 2,
            actions: vec![2, 2],
            seed: 0,
            concentration: 1.0,
        };
        assert!(generate_random_game(&RandomGameSpec { states: 0, ..base.clone() }).is_err());
        assert!(generate_random_game(&RandomGameSpec { actions: vec![2], ..base.clone() }).is_err());
        assert!(generate_random_game(&RandomGameSpec { actions: vec![2, 0], ..base.clone() }).is_err());
        assert!(generate_random_game(&RandomGameSpec { concentration: 0.0, ..base }).is_err());
    }

    #[test]
    fn payoff_vector_examples() {
        // zero rewards
        let zero = MarkovGame::from_parts(1, 1, &[2, 2], 0, vec![], vec![0.0; 8]).unwrap();
        let u = [0.5, 0.5];
        let out = zero
            .expected_payoff_vector(0, 0, 0, &[0.0], &[&u, &u])
            .unwrap();
        assert_eq!(out, vec![0.0, 0.0]);

        // single player: r directly
        let single = one_player_game([0.3, 0.7]);
        let out = single.expected_payoff_vector(0, 0, 0, &[0.0], &[&[]]).unwrap();
        assert_eq!(out, vec![0.3, 0.7]);

        // r(s,(a1,a2)) = a2/2 against a uniform opponent; brute force over a2
        let mut rewards = vec![0.0; 8];
        let space = JointActionSpace::new(&[2, 2]).unwrap();
        for k in 0..4 {
            let acts = space.decode(k).unwrap();
            rewards[k * 2] = acts[1] as f64 / 2.0;
        }
        let game = MarkovGame::from_parts(1, 1, &[2, 2], 0, vec![], rewards).unwrap();
        let out = game
            .expected_payoff_vector(0, 0, 0, &[0.0], &[&u, &u])
            .unwrap();
        let brute: Vec<f64> = (0..2)
            .map(|_a1| (0..2).map(|a2| 0.5 * (a2 as f64 / 2.0)).sum())
            .collect();
        assert_eq!(out, brute);
        assert_eq!(out, vec![0.25, 0.25]);
    }

    #[test]
    fn payoff_vector_dimension_errors() {
        let game = one_player_game([0.3, 0.7]);
        assert!(matches!(
            game.expected_payoff_vector(0, 0, 0, &[0.0, 1.0], &[&[]]),
            Err(Error::Dimension { .. })
        ));
        let two = MarkovGame::from_parts(1, 1, &[2, 2], 0, vec![], vec![0.0; 8]).unwrap();
        assert!(two
            .expected_payoff_vector(0, 0, 0, &[0.0], &[&[0.5, 0.5], &[1.0]])
            .is_err());
    }

    #[test]
    fn value_backup_with_unit_alpha_ignores_previous() {
        let game = one_player_game([0.3, 0.7]);
        let layout = Arc::new(PolicyLayout::for_game(&game));
        let policy = MarkovPolicy::uniform(layout);
        let row = game.value_backup(&policy, &[0.0], &[123.0], 1.0, 0, 0).unwrap();
        assert!((row[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn value_backup_scalar_recursion_converges_monotonically() {
        // H=1, one state, fixed policy: V^t = (1-a_t) V^{t-1} + a_t <r, pi>
        let game = one_player_game([0.2, 0.9]);
        let layout = Arc::new(PolicyLayout::for_game(&game));
        let mut policy = MarkovPolicy::uniform(layout);
        policy.get_mut(0, 0, 0).copy_from_slice(&[0.25, 0.75]);
        let target = 0.25 * 0.2 + 0.75 * 0.9;
        let mut v = 1.0;
        let mut prev_gap = f64::INFINITY;
        for t in 2..200 {
            let alpha = crate::schedule::alpha(t, 1);
            v = game.value_backup(&policy, &[0.0], &[v], alpha, 0, 0).unwrap()[0];
            let gap = (v - target).abs();
            assert!(gap <= prev_gap);
            prev_gap = gap;
        }
        // starting from V = 1 with t >= 2 only, the target is never reached exactly
        assert!(prev_gap < 0.01);
    }

    #[test]
    fn policy_value_constant_rewards() {
        let spec = RandomGameSpec {
            players: 2,
            horizon: 3,
            states: 2,
            actions: vec![2, 2],
            seed: 1,
            concentration: 1.0,
        };
        let g = generate_random_game(&spec).unwrap();
        let j = g.joint_actions().count();
        let ones = MarkovGame::from_parts(
            3,
            2,
            &[2, 2],
            0,
            g.transitions.clone(),
            vec![1.0; 3 * 2 * j * 2],
        )
        .unwrap();
        let zeros =
            MarkovGame::from_parts(3, 2, &[2, 2], 0, g.transitions.clone(), vec![0.0; 3 * 2 * j * 2])
                .unwrap();
        let policy = MarkovPolicy::uniform(Arc::new(PolicyLayout::for_game(&g)));
        let v1 = ones.policy_value(&policy).unwrap();
        let v0 = zeros.policy_value(&policy).unwrap();
        for i in 0..2 {
            for h in 0..=3 {
                for s in 0..2 {
                    assert!((v1.get(i, h, s) - (3 - h) as f64).abs() < 1e-12);
                    assert_eq!(v0.get(i, h, s), 0.0);
                }
            }
        }
    }

    #[test]
    fn policy_value_is_linear_in_rewards() {
        let spec = RandomGameSpec {
            players: 2,
            horizon: 2,
            states: 2,
            actions: vec![2, 3],
            seed: 5,
            concentration: 1.0,
        };
        let g = generate_random_game(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let base: Vec<f64> = g.rewards.iter().map(|r| 0.25 + 0.5 * r).collect();
        let delta: Vec<f64> = base.iter().map(|_| rng.random::<f64>() * 0.1 - 0.05).collect();
        let build = |scale: f64| {
            let r: Vec<f64> = base.iter().zip(&delta).map(|(b, d)| b + scale * d).collect();
            MarkovGame::from_parts(2, 2, &[2, 3], 0, g.transitions.clone(), r).unwrap()
        };
        let mut policy = MarkovPolicy::uniform(Arc::new(PolicyLayout::for_game(&g)));
        policy.get_mut(1, 0, 1).copy_from_slice(&[0.2, 0.3, 0.5]);
        let v0 = build(0.0).policy_value(&policy).unwrap();
        let v1 = build(1.0).policy_value(&policy).unwrap();
        let v2 = build(2.0).policy_value(&policy).unwrap();
        for i in 0..2 {
            for s in 0..2 {
                let d1 = v1.get(i, 0, s) - v0.get(i, 0, s);
                let d2 = v2.get(i, 0, s) - v0.get(i, 0, s);
                assert!((d2 - 2.0 * d1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn value_table_initial_bounds() {
        let t = ValueTable::initial(2, 3, 2);
        assert_eq!(t.get(1, 0, 1), 3.0);
        assert_eq!(t.get(1, 2, 1), 1.0);
        assert_eq!(t.row(0, 3), &[0.0, 0.0]);
        t.check_bounds(0.0).unwrap();
    }
}
