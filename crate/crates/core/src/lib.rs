//! Planning core: MDP contracts, an exact value-iteration oracle and an
//! anytime UCT engine with hooks for heuristic bootstrapping.
//!
//! The engine supports four ways of feeding a heuristic into the search,
//! each optional and freely combinable:
//!
//! * prior initialization of new arms (`SearchConfig::prior`, "UCT-I"),
//! * heuristic rollouts beyond the tree frontier (`SearchConfig::rollout_policy`, "UCT-S"),
//! * auxiliary arms that hand the rest of an episode to a heuristic policy
//!   (`SearchConfig::aux_policy`, "UCT-Aux").
//!
//! With every hook absent the engine is plain UCT.

pub mod mdp;
pub mod policy;
pub mod rng;
pub mod solver;
pub mod tabular;
pub mod uct;

pub use mdp::{discounted_return, run_policy, DomainError, GenerativeModel};
pub use policy::{Policy, Prior, PriorValue, UniformRandom, ZeroPrior};
pub use rng::{derive_seed, SearchStreams, StreamRng};
pub use solver::{value_iteration, SolveError, SolveResult, TabularPolicy};
pub use tabular::{TabularMdp, TabularMdpBuilder};
pub use uct::{
    plan_episode, rollout, search, ArmKind, EpisodeRecord, Recommendation, SearchConfig, SearchError, SearchOutcome, SearchTree,
};
