//! Run artifacts: one JSON manifest line followed by a little-endian `f64`
//! payload.
//!
//! Payload layout, for each kept episode in increasing order: the policy
//! (player, step, state, action), then `V` (player, step, state; the zero
//! terminal layer is omitted), then `Q` for the Q variant (player, step,
//! state, joint action). After the last episode come the final minimizer
//! states: for each slot in (player, step, state) order and each action `a`,
//! the accumulated utilities of learner `a` followed by its prediction.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::driver::{QTable, RunConfig, Variant};
use crate::error::{Error, Result};
use crate::game::{MarkovGame, MarkovPolicy, PolicyLayout, ValueTable};
use crate::regret::{LogBarFtrl, SwapMinimizer};
use crate::schedule::WeightSchedule;

pub const ARTIFACT_FORMAT: &str = "markov-ce-run";
pub const ARTIFACT_VERSION: u32 = 1;
const VALUE_TOLERANCE: f64 = 1e-9;

/// Full record of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifact {
    pub game_hash: String,
    pub horizon: usize,
    pub states: usize,
    pub actions: Vec<usize>,
    pub config: RunConfig,
    /// Kept episodes, increasing, starting at 0 and ending at `T`.
    pub episodes: Vec<usize>,
    pub policies: Vec<MarkovPolicy>,
    pub values: Vec<ValueTable>,
    /// Empty for the V variant.
    pub q_values: Vec<QTable>,
    /// Final state of every slot, indexed `(i * H + h) * S + s`.
    pub minimizers: Vec<SwapMinimizer>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct Manifest {
    format: String,
    version: u32,
    game_hash: String,
    n: usize,
    #[serde(rename = "H")]
    horizon: usize,
    #[serde(rename = "S")]
    states: usize,
    actions: Vec<usize>,
    config: RunConfig,
    stored_episodes: usize,
    payload_bytes: u64,
    sha256: String,
}

impl RunArtifact {
    pub fn players(&self) -> usize {
        self.actions.len()
    }

    /// Last episode `T`.
    pub fn last_episode(&self) -> usize {
        self.config.episodes
    }

    pub fn is_thinned(&self) -> bool {
        self.config.history_stride > 1
    }

    /// Refuses thinned histories.
    pub fn require_full(&self) -> Result<()> {
        if self.is_thinned() {
            return Err(Error::Thinned {
                stride: self.config.history_stride,
            });
        }
        Ok(())
    }

    /// Refuses a game whose hash differs from the one the run used.
    pub fn check_game(&self, game: &MarkovGame) -> Result<()> {
        let hash = game.hash();
        if hash != self.game_hash {
            return Err(Error::GameMismatch {
                artifact: self.game_hash.clone(),
                game: hash,
            });
        }
        Ok(())
    }

    fn index_of(&self, t: usize) -> Result<usize> {
        if t > self.last_episode() {
            return Err(Error::EpisodeOutOfRange {
                t,
                max: self.last_episode(),
            });
        }
        self.episodes.binary_search(&t).map_err(|_| Error::Thinned {
            stride: self.config.history_stride,
        })
    }

    /// `pi^t`.
    pub fn policy(&self, t: usize) -> Result<&MarkovPolicy> {
        Ok(&self.policies[self.index_of(t)?])
    }

    /// `V^t`.
    pub fn values(&self, t: usize) -> Result<&ValueTable> {
        Ok(&self.values[self.index_of(t)?])
    }

    pub fn layout(&self) -> &Arc<PolicyLayout> {
        self.policies[0].layout()
    }

    fn joint_count(&self) -> usize {
        self.actions.iter().product()
    }

    /// Serializes to the on-disk format.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut payload: Vec<u8> = Vec::new();
        let mut put = |v: &[f64]| {
            for x in v {
                payload.extend_from_slice(&x.to_le_bytes());
            }
        };
        let (n, horizon, states) = (self.players(), self.horizon, self.states);
        for (k, policy) in self.policies.iter().enumerate() {
            put(policy.as_slice());
            let v = &self.values[k];
            for i in 0..n {
                for h in 0..horizon {
                    put(v.row(i, h));
                }
            }
            if let Some(q) = self.q_values.get(k) {
                put(q.as_slice());
            }
        }
        for m in &self.minimizers {
            for learner in m.learners() {
                put(learner.accumulated());
                put(learner.prediction());
            }
        }
        let manifest = Manifest {
            format: ARTIFACT_FORMAT.to_string(),
            version: ARTIFACT_VERSION,
            game_hash: self.game_hash.clone(),
            n,
            horizon,
            states,
            actions: self.actions.clone(),
            config: self.config.clone(),
            stored_episodes: self.episodes.len(),
            payload_bytes: payload.len() as u64,
            sha256: hex::encode(Sha256::digest(&payload)),
        };
        let mut out = serde_json::to_vec(&manifest).expect("manifest serializes");
        out.push(b'\n');
        out.extend_from_slice(&payload);
        out
    }

    /// Parses and validates the on-disk format.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let newline = bytes
            .iter()
            .position(|b| *b == b'\n')
            .ok_or(Error::Checksum)?;
        let head: serde_json::Value = serde_json::from_slice(&bytes[..newline])
            .map_err(|e| Error::Malformed(format!("artifact manifest: {e}")))?;
        if head.get("format").and_then(|f| f.as_str()) != Some(ARTIFACT_FORMAT) {
            return Err(Error::Malformed("not a run artifact".into()));
        }
        let version = head
            .get("version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::Malformed("artifact manifest lacks a version".into()))?;
        if version != u64::from(ARTIFACT_VERSION) {
            return Err(Error::Version {
                found: u32::try_from(version).unwrap_or(u32::MAX),
                expected: ARTIFACT_VERSION,
            });
        }
        let manifest: Manifest = serde_json::from_value(head)
            .map_err(|e| Error::Malformed(format!("artifact manifest: {e}")))?;
        let payload = &bytes[newline + 1..];
        if payload.len() as u64 != manifest.payload_bytes
            || hex::encode(Sha256::digest(payload)) != manifest.sha256
        {
            return Err(Error::Checksum);
        }
        decode(manifest, payload)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, count: usize) -> Result<Vec<f64>> {
        let end = self.pos + count * 8;
        if end > self.data.len() {
            return Err(Error::Shape("artifact payload shorter than its manifest implies".into()));
        }
        let out = self.data[self.pos..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        self.pos = end;
        Ok(out)
    }
}

fn decode(manifest: Manifest, payload: &[u8]) -> Result<RunArtifact> {
    let config = manifest.config;
    config.validate()?;
    if manifest.n != manifest.actions.len() || manifest.horizon == 0 || manifest.states == 0 {
        return Err(Error::Shape("artifact dimensions are inconsistent".into()));
    }
    let episodes = config.stored_episodes();
    if episodes.len() != manifest.stored_episodes {
        return Err(Error::Shape(format!(
            "manifest lists {} stored episodes, configuration implies {}",
            manifest.stored_episodes,
            episodes.len()
        )));
    }
    let (n, horizon, states) = (manifest.n, manifest.horizon, manifest.states);
    let layout = Arc::new(PolicyLayout::new(horizon, states, &manifest.actions));
    let joint: usize = manifest.actions.iter().product();
    let initial = ValueTable::initial(n, horizon, states);
    let mut reader = Reader { data: payload, pos: 0 };
    let mut policies = Vec::with_capacity(episodes.len());
    let mut values = Vec::with_capacity(episodes.len());
    let mut q_values = Vec::new();

    for &t in &episodes {
        let policy = MarkovPolicy::from_data(layout.clone(), reader.take(layout.len())?)
            .map_err(|e| Error::Invariant(format!("episode {t}: {e}")))?;
        let mut v = ValueTable::zeros(n, horizon, states);
        let raw = reader.take(n * horizon * states)?;
        for i in 0..n {
            for h in 0..horizon {
                for s in 0..states {
                    v.set(i, h, s, raw[(i * horizon + h) * states + s]);
                }
            }
        }
        v.check_bounds(VALUE_TOLERANCE)
            .map_err(|e| Error::Invariant(format!("episode {t}: {e}")))?;
        if t == 0 && v != initial {
            return Err(Error::Invariant("V^0 is not the optimistic initialization".into()));
        }
        if config.variant == Variant::Q {
            let q = QTable::from_data(n, horizon, states, joint, reader.take(n * horizon * states * joint)?)?;
            for i in 0..n {
                for h in 0..horizon {
                    let cap = (horizon - h) as f64 + VALUE_TOLERANCE;
                    for s in 0..states {
                        if q.row(i, h, s).iter().any(|x| !(*x >= -VALUE_TOLERANCE && *x <= cap)) {
                            return Err(Error::Invariant(format!(
                                "episode {t}: Q[{i}][{h}][{s}] out of range"
                            )));
                        }
                    }
                }
            }
            q_values.push(q);
        }
        policies.push(policy);
        values.push(v);
    }

    let last = config.episodes;
    let schedule = WeightSchedule::through(horizon, config.eta, last)?;
    let final_policy = policies.last().expect("at least one episode");
    let mut minimizers = Vec::with_capacity(n * horizon * states);
    for i in 0..n {
        let d = manifest.actions[i];
        for h in 0..horizon {
            for s in 0..states {
                let mut learners = Vec::with_capacity(d);
                for _ in 0..d {
                    let accum = reader.take(d)?;
                    let prediction = reader.take(d)?;
                    learners.push(LogBarFtrl::from_parts(
                        accum,
                        prediction,
                        last,
                        config.eta,
                        schedule.w(last),
                    )?);
                }
                let m = SwapMinimizer::from_learners(learners)?;
                let drift = m
                    .strategy()
                    .iter()
                    .zip(final_policy.get(i, h, s))
                    .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
                if drift > 1e-9 {
                    return Err(Error::Invariant(format!(
                        "minimizer state at ({i},{h},{s}) does not reproduce the final policy"
                    )));
                }
                minimizers.push(m);
            }
        }
    }
    if reader.pos != payload.len() {
        return Err(Error::Shape("artifact payload has trailing bytes".into()));
    }
    let artifact = RunArtifact {
        game_hash: manifest.game_hash,
        horizon,
        states,
        actions: manifest.actions,
        config,
        episodes,
        policies,
        values,
        q_values,
        minimizers,
    };
    debug_assert_eq!(artifact.joint_count(), joint);
    Ok(artifact)
}
