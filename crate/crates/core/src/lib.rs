//! Uncoupled no-swap-regret policy optimization for n-player general-sum
//! finite-horizon Markov games, with certified correlated-equilibrium gaps.

pub mod error;
pub mod eval;
pub mod artifact;
pub mod driver;
pub mod game;
pub mod regret;
pub mod schedule;

pub use artifact::RunArtifact;
pub use driver::{default_eta, run_q_update, run_v_update, RunConfig, Variant};
pub use error::{Error, Result};
pub use game::{
    generate_random_game, JointActionSpace, MarkovGame, MarkovPolicy, PolicyLayout,
    RandomGameSpec, ValueTable,
};
pub use schedule::{alpha, mixture_weights, WeightSchedule};
