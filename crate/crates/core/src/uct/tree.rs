//! Search-tree storage: state nodes and their arms, kept in flat arenas.

use std::ops::Range;

use rand::Rng;

use crate::rng::StreamRng;

/// Index of a [`StateNode`] in its tree.
pub type NodeId = u32;
/// Index of an [`ArmNode`] in its tree.
pub type ArmId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArmKind {
    Ordinary,
    /// Hands the rest of the episode to the auxiliary policy. Never expands.
    Auxiliary,
}

/// A state-action edge treated as one arm of the parent's bandit.
#[derive(Clone, Debug)]
pub struct ArmNode<S, A> {
    action: A,
    kind: ArmKind,
    visits: u64,
    prior_visits: u32,
    value: f64,
    prior_value: Option<f64>,
    pub(crate) children: Vec<(S, NodeId)>,
}

impl<S, A: Copy> ArmNode<S, A> {
    pub fn new(action: A, kind: ArmKind) -> Self {
        Self::with_stats(action, kind, 0, 0.0)
    }

    /// An arm with pre-set `(n, Q)`, counted as prior mass.
    pub fn with_stats(action: A, kind: ArmKind, visits: u32, value: f64) -> Self {
        Self {
            action,
            kind,
            visits: visits as u64,
            prior_visits: visits,
            value,
            prior_value: None,
            children: Vec::new(),
        }
    }

    pub(crate) fn with_prior(action: A, visits: u32, value: f64) -> Self {
        Self {
            prior_value: Some(value),
            ..Self::with_stats(action, ArmKind::Ordinary, visits, value)
        }
    }

    pub fn action(&self) -> A {
        self.action
    }

    pub fn kind(&self) -> ArmKind {
        self.kind
    }

    pub fn is_auxiliary(&self) -> bool {
        self.kind == ArmKind::Auxiliary
    }

    /// `n(s, a)`, prior visits included.
    pub fn visits(&self) -> u64 {
        self.visits
    }

    pub fn prior_visits(&self) -> u32 {
        self.prior_visits
    }

    /// `Q_UCT(s, a)`.
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn prior_value(&self) -> Option<f64> {
        self.prior_value
    }

    pub fn children(&self) -> &[(S, NodeId)] {
        &self.children
    }

    /// Incremental mean: `n += 1; Q += (R − Q) / n`.
    pub fn update(&mut self, ret: f64) {
        self.visits += 1;
        self.value += (ret - self.value) / self.visits as f64;
    }
}

/// A state in the tree. Leaf until its arms are generated.
#[derive(Clone, Debug)]
pub struct StateNode<S> {
    state: S,
    pub(crate) visits: u64,
    pub(crate) prior_mass: u64,
    pub(crate) unattributed: u64,
    pub(crate) arms: Range<ArmId>,
    pub(crate) expanded: bool,
    terminal: bool,
}

impl<S> StateNode<S> {
    pub(crate) fn leaf(state: S, terminal: bool) -> Self {
        Self {
            state,
            visits: 0,
            prior_mass: 0,
            unattributed: 0,
            arms: 0..0,
            expanded: false,
            terminal,
        }
    }

    pub fn state(&self) -> &S {
        &self.state
    }

    /// Prior-free visit count.
    pub fn visits(&self) -> u64 {
        self.visits
    }

    /// `Σ n_prior(s, a)` over the arms created at expansion.
    pub fn prior_mass(&self) -> u64 {
        self.prior_mass
    }

    /// `n(s)` as used by the UCB bonus: visits plus prior mass.
    pub fn total_visits(&self) -> u64 {
        self.visits + self.prior_mass
    }

    /// Visits that credited no arm: terminal nodes and horizon cut-offs.
    pub fn unattributed(&self) -> u64 {
        self.unattributed
    }

    pub fn is_internal(&self) -> bool {
        self.expanded
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal
    }

    pub fn arm_ids(&self) -> Range<ArmId> {
        self.arms.clone()
    }
}

/// UCB1 score `Q + 2·C_p·sqrt(ln n(s) / n(s,a))` for a visited arm.
#[inline]
pub fn ucb_score(value: f64, arm_visits: u64, ln_parent: f64, exploration: f64) -> f64 {
    value + 2.0 * exploration * (ln_parent / arm_visits as f64).sqrt()
}

/// Picks the arm to descend.
///
/// Unvisited arms come first, uniformly among themselves; otherwise the UCB1
/// argmax, ties uniform. Draws from `rng` only when there is a choice.
pub fn select_arm<S, A: Copy>(arms: &[ArmNode<S, A>], parent_visits: f64, exploration: f64, rng: &mut StreamRng) -> usize {
    debug_assert!(!arms.is_empty());
    let unvisited = arms.iter().filter(|a| a.visits == 0).count();
    if unvisited > 0 {
        let k = if unvisited == 1 { 0 } else { rng.gen_range(0..unvisited) };
        return arms
            .iter()
            .enumerate()
            .filter(|(_, a)| a.visits == 0)
            .nth(k)
            .map(|(i, _)| i)
            .expect("k < unvisited");
    }
    let ln_n = if parent_visits > 1.0 { parent_visits.ln() } else { 0.0 };
    argmax_uniform(arms.iter().map(|a| ucb_score(a.value, a.visits, ln_n, exploration)), rng)
}

/// Index of the maximum, ties broken uniformly. Draws only on ties.
pub(crate) fn argmax_uniform(scores: impl Iterator<Item = f64> + Clone, rng: &mut StreamRng) -> usize {
    let mut best = f64::NEG_INFINITY;
    let mut ties = 0usize;
    let mut first = 0usize;
    for (i, s) in scores.clone().enumerate() {
        if s > best {
            best = s;
            ties = 1;
            first = i;
        } else if s == best {
            ties += 1;
        }
    }
    if ties <= 1 {
        return first;
    }
    let k = rng.gen_range(0..ties);
    scores
        .enumerate()
        .filter(|(_, s)| *s == best)
        .nth(k)
        .map(|(i, _)| i)
        .expect("k < ties")
}
