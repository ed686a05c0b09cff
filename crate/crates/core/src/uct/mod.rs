//! Anytime UCT with optional prior initialization, heuristic rollouts and
//! auxiliary arms.

mod search;
mod tree;

use std::sync::Arc;

use thiserror::Error;

use crate::mdp::{DomainError, GenerativeModel};
use crate::policy::{Policy, PriorValue};

pub use search::{plan_episode, rollout, search, ArmSummary, EpisodeRecord, SearchDiagnostics, SearchOutcome, SearchTree, TraceEvent};
pub use tree::{select_arm, ucb_score, ArmId, ArmKind, ArmNode, NodeId, StateNode};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error("search root is terminal")]
    TerminalRoot,
    #[error("node {0} is not an unexpanded non-terminal leaf")]
    NotALeaf(NodeId),
}

/// Which root statistic picks the recommended arm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Recommendation {
    #[default]
    HighestValue,
    HighestVisits,
}

/// Parameters of one search. Absent hooks reduce the engine to vanilla UCT.
pub struct SearchConfig<M: GenerativeModel> {
    /// `C_p`.
    pub exploration: f64,
    /// Depth cut-off measured from the search root.
    pub horizon: usize,
    /// Number of simulations.
    pub budget: usize,
    /// Initial `(n, Q)` of ordinary arms (UCT-I).
    pub prior: Option<Arc<dyn PriorValue<M>>>,
    /// Policy beyond the tree frontier (UCT-S). Uniform random when absent.
    pub rollout_policy: Option<Arc<dyn Policy<M>>>,
    /// Policy behind the auxiliary arms (UCT-Aux).
    pub aux_policy: Option<Arc<dyn Policy<M>>>,
    pub recommendation: Recommendation,
}

impl<M: GenerativeModel> Clone for SearchConfig<M> {
    fn clone(&self) -> Self {
        Self {
            exploration: self.exploration,
            horizon: self.horizon,
            budget: self.budget,
            prior: self.prior.clone(),
            rollout_policy: self.rollout_policy.clone(),
            aux_policy: self.aux_policy.clone(),
            recommendation: self.recommendation,
        }
    }
}

impl<M: GenerativeModel> SearchConfig<M> {
    /// Vanilla UCT.
    pub fn new(exploration: f64, horizon: usize, budget: usize) -> Self {
        Self {
            exploration,
            horizon,
            budget,
            prior: None,
            rollout_policy: None,
            aux_policy: None,
            recommendation: Recommendation::HighestValue,
        }
    }

    pub fn with_prior(mut self, prior: Arc<dyn PriorValue<M>>) -> Self {
        self.prior = Some(prior);
        self
    }

    pub fn with_rollout_policy(mut self, policy: Arc<dyn Policy<M>>) -> Self {
        self.rollout_policy = Some(policy);
        self
    }

    pub fn with_aux_policy(mut self, policy: Arc<dyn Policy<M>>) -> Self {
        self.aux_policy = Some(policy);
        self
    }

    pub fn with_recommendation(mut self, rule: Recommendation) -> Self {
        self.recommendation = rule;
        self
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        if !(self.exploration > 0.0) || !self.exploration.is_finite() {
            return Err(SearchError::Config(format!(
                "exploration constant must be positive, got {}",
                self.exploration
            )));
        }
        if self.horizon == 0 {
            return Err(SearchError::Config("horizon must be at least 1".into()));
        }
        if self.budget == 0 {
            return Err(SearchError::Config("budget must be at least 1".into()));
        }
        Ok(())
    }
}
