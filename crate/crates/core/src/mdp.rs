//! Sampling-only MDP contract and discounted-return accounting.

use std::fmt::Debug;
use std::hash::Hash;

use thiserror::Error;

use crate::policy::Policy;
use crate::rng::StreamRng;

/// Errors raised by a domain when it is driven outside its contract.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("action {action} is not valid in state {state}")]
    InvalidAction { state: String, action: String },
    #[error("no valid actions at non-terminal state {0}")]
    NoValidActions(String),
    #[error("policy returned no action at state {0}")]
    EmptyPolicy(String),
}

impl DomainError {
    pub fn invalid_action(state: &impl Debug, action: &impl Debug) -> Self {
        Self::InvalidAction {
            state: format!("{state:?}"),
            action: format!("{action:?}"),
        }
    }
}

/// A discounted MDP that can only be sampled.
///
/// `step` must be a pure function of its arguments and the position of
/// `rng`: identical streams reproduce identical trajectories.
pub trait GenerativeModel {
    type State: Clone + Eq + Hash + Debug;
    type Action: Copy + Eq + Hash + Debug;

    /// Discount factor in `[0, 1)`.
    fn discount(&self) -> f64;

    fn is_terminal(&self, state: &Self::State) -> bool;

    /// Clears `out` and fills it with the valid actions at `state`, in a fixed
    /// order. Must be non-empty for non-terminal states.
    fn actions(&self, state: &Self::State, out: &mut Vec<Self::Action>);

    /// Samples a successor and the immediate reward.
    fn step(&self, state: &Self::State, action: Self::Action, rng: &mut StreamRng) -> Result<(Self::State, f64), DomainError>;

    /// Bounds on the immediate reward, if the domain knows them.
    fn reward_bounds(&self) -> Option<(f64, f64)> {
        None
    }
}

/// `Σ_t discount^t · rewards[t]`.
pub fn discounted_return(rewards: &[f64], discount: f64) -> f64 {
    // Horner form, evaluated back to front.
    rewards.iter().rev().fold(0.0, |acc, &r| r + discount * acc)
}

/// Simulates `policy` from `start` for at most `horizon` steps or until a
/// terminal state. Returns the discounted return and the number of steps.
///
/// Policy and model draws share `rng`.
pub fn run_policy<M, P>(model: &M, policy: &P, start: &M::State, horizon: usize, rng: &mut StreamRng) -> Result<(f64, usize), DomainError>
where
    M: GenerativeModel,
    P: Policy<M> + ?Sized,
{
    let gamma = model.discount();
    let mut state = start.clone();
    let mut valid = Vec::new();
    let mut total = 0.0;
    let mut weight = 1.0;
    let mut steps = 0;
    while steps < horizon && !model.is_terminal(&state) {
        model.actions(&state, &mut valid);
        if valid.is_empty() {
            return Err(DomainError::NoValidActions(format!("{state:?}")));
        }
        let action = policy
            .sample(model, &state, &valid, rng)
            .ok_or_else(|| DomainError::EmptyPolicy(format!("{state:?}")))?;
        if !valid.contains(&action) {
            return Err(DomainError::invalid_action(&state, &action));
        }
        let (next, reward) = model.step(&state, action, rng)?;
        total += weight * reward;
        weight *= gamma;
        state = next;
        steps += 1;
    }
    Ok((total, steps))
}
