use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed document: {0}")]
    Malformed(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("transition row at step {step}, state {state}, joint action {joint}: row sums to {sum}")]
    RowSum {
        step: usize,
        state: usize,
        joint: usize,
        sum: f64,
    },

    #[error("transition row at step {step}, state {state}, joint action {joint}: negative entry {value}")]
    NegativeProbability {
        step: usize,
        state: usize,
        joint: usize,
        value: f64,
    },

    #[error("reward out of range: r[{step}][{state}][{joint}][{player}] = {value}")]
    RewardOutOfRange {
        step: usize,
        state: usize,
        joint: usize,
        player: usize,
        value: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite input")]
    NonFinite,

    #[error("utility sup-norm {norm} exceeds 1")]
    UtilityNorm { norm: f64 },

    #[error("stochastic matrix has a nonpositive entry at ({row}, {col})")]
    NonPositiveEntry { row: usize, col: usize },

    #[error("weight w_{t} overflowed the double-precision guard; T*H is too large")]
    WeightOverflow { t: usize },

    #[error("solver failure at player {player}, step {step}, state {state}: {source}")]
    Slot {
        player: usize,
        step: usize,
        state: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("memory budget exceeded: {0}")]
    MemoryBudget(String),

    #[error("unsupported artifact version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("artifact checksum mismatch (file truncated or corrupted)")]
    Checksum,

    #[error("artifact was produced for game {artifact}, but the supplied game hashes to {game}")]
    GameMismatch { artifact: String, game: String },

    #[error("artifact history is thinned (stride {stride}); certification needs every episode")]
    Thinned { stride: usize },

    #[error("episode {t} out of range 1..={max}")]
    EpisodeOutOfRange { t: usize, max: usize },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn at_slot(self, player: usize, step: usize, state: usize) -> Self {
        Error::Slot {
            player,
            step,
            state,
            source: Box::new(self),
        }
    }
}
