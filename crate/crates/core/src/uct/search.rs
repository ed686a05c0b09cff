use std::time::Instant;

use crate::mdp::{DomainError, GenerativeModel};
use crate::policy::{Policy, Prior, UniformRandom};
use crate::rng::{SearchStreams, StreamRng};

use super::tree::{argmax_uniform, select_arm, ArmId, ArmKind, ArmNode, NodeId, StateNode};
use super::{Recommendation, SearchConfig, SearchError};

/// One decision recorded while tracing a search.
#[derive(Clone, Debug, PartialEq)]
pub enum TraceEvent<S> {
    /// `select_arm` chose `arm` at `node`.
    Select { node: NodeId, arm: ArmId },
    /// The model returned `next` for the selected ordinary arm.
    Sample(S),
    /// A leaf was expanded; its rollout began with `arm` and returned `ret`.
    Leaf { node: NodeId, arm: Option<ArmId>, ret: u64 },
}

/// Statistics of one root arm.
#[derive(Clone, Debug, PartialEq)]
pub struct ArmSummary<A> {
    pub action: A,
    pub kind: ArmKind,
    pub visits: u64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchDiagnostics<A> {
    /// State nodes plus arm nodes.
    pub tree_nodes: usize,
    pub rollouts: usize,
    pub root_arms: Vec<ArmSummary<A>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome<A> {
    /// Action to play. For an auxiliary recommendation this is the arm's
    /// label, i.e. the auxiliary policy's action.
    pub action: A,
    pub kind: ArmKind,
    pub diagnostics: SearchDiagnostics<A>,
}

/// A UCT tree rooted at one state. Single writer; discard after the search.
pub struct SearchTree<M: GenerativeModel> {
    nodes: Vec<StateNode<M::State>>,
    arms: Vec<ArmNode<M::State, M::Action>>,
    trace: Option<Vec<TraceEvent<M::State>>>,
    valid: Vec<M::Action>,
    dist: Vec<(M::Action, f64)>,
    path: Vec<(NodeId, ArmId, f64)>,
}

impl<M: GenerativeModel> SearchTree<M> {
    pub fn new(model: &M, root: M::State) -> Self {
        let terminal = model.is_terminal(&root);
        Self {
            nodes: vec![StateNode::leaf(root, terminal)],
            arms: Vec::new(),
            trace: None,
            valid: Vec::new(),
            dist: Vec::new(),
            path: Vec::new(),
        }
    }

    pub const ROOT: NodeId = 0;

    pub fn node(&self, id: NodeId) -> &StateNode<M::State> {
        &self.nodes[id as usize]
    }

    pub fn arm(&self, id: ArmId) -> &ArmNode<M::State, M::Action> {
        &self.arms[id as usize]
    }

    pub fn arms_of(&self, id: NodeId) -> &[ArmNode<M::State, M::Action>] {
        let r = &self.nodes[id as usize].arms;
        &self.arms[r.start as usize..r.end as usize]
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &StateNode<M::State>)> {
        self.nodes.iter().enumerate().map(|(i, n)| (i as NodeId, n))
    }

    pub fn state_node_count(&self) -> usize {
        self.nodes.len()
    }

    /// State nodes plus arm nodes.
    pub fn node_count(&self) -> usize {
        self.nodes.len() + self.arms.len()
    }

    /// Starts recording [`TraceEvent`]s.
    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn take_trace(&mut self) -> Vec<TraceEvent<M::State>> {
        self.trace.take().unwrap_or_default()
    }

    fn record(&mut self, ev: impl FnOnce() -> TraceEvent<M::State>) {
        if let Some(t) = self.trace.as_mut() {
            t.push(ev());
        }
    }

    /// Generates the arms of a leaf: one ordinary arm per valid action with
    /// `(n_prior, Q_prior)` or `(0, 0)`, plus one auxiliary arm per action in
    /// the auxiliary policy's support, at `(0, 0)`.
    pub fn expand_leaf(&mut self, id: NodeId, model: &M, config: &SearchConfig<M>) -> Result<(), SearchError> {
        let node = &self.nodes[id as usize];
        if node.expanded || node.is_terminal() {
            return Err(SearchError::NotALeaf(id));
        }
        let state = node.state().clone();
        model.actions(&state, &mut self.valid);
        if self.valid.is_empty() {
            return Err(DomainError::NoValidActions(format!("{state:?}")).into());
        }
        let first = self.arms.len() as ArmId;
        let mut prior_mass = 0u64;
        for &a in &self.valid {
            let arm = match &config.prior {
                Some(p) => {
                    let Prior { visits, value } = p.prior(model, &state, a);
                    prior_mass += visits as u64;
                    ArmNode::with_prior(a, visits, value)
                }
                None => ArmNode::new(a, ArmKind::Ordinary),
            };
            self.arms.push(arm);
        }
        if let Some(aux) = &config.aux_policy {
            aux.distribution(model, &state, &self.valid, &mut self.dist);
            for &(a, p) in &self.dist {
                if p > 0.0 {
                    self.arms.push(ArmNode::new(a, ArmKind::Auxiliary));
                }
            }
        }
        let node = &mut self.nodes[id as usize];
        node.arms = first..self.arms.len() as ArmId;
        node.prior_mass = prior_mass;
        node.expanded = true;
        Ok(())
    }

    /// One simulation from the root: descend by UCB1, expand the first leaf
    /// reached and roll out from it, or hand over to the auxiliary policy if
    /// an auxiliary arm is selected; then back the discounted return up the
    /// traversed arms. Returns the root's return.
    pub fn simulate(&mut self, model: &M, config: &SearchConfig<M>, streams: &mut SearchStreams) -> Result<f64, SearchError> {
        let gamma = model.discount();
        let mut path = std::mem::take(&mut self.path);
        path.clear();
        let result = self.descend(model, config, streams, &mut path);
        let tail = match result {
            Ok(t) => t,
            Err(e) => {
                self.path = path;
                return Err(e);
            }
        };
        let mut ret = tail;
        for &(node, arm, reward) in path.iter().rev() {
            ret = reward + gamma * ret;
            self.arms[arm as usize].update(ret);
            self.nodes[node as usize].visits += 1;
        }
        self.path = path;
        Ok(ret)
    }

    /// Walks down from the root, pushing `(node, arm, reward)` for every
    /// ordinary arm traversed. Returns the value observed at the node where
    /// the descent stopped, already credited to that node.
    fn descend(
        &mut self,
        model: &M,
        config: &SearchConfig<M>,
        streams: &mut SearchStreams,
        path: &mut Vec<(NodeId, ArmId, f64)>,
    ) -> Result<f64, SearchError> {
        let gamma = model.discount();
        let mut id: NodeId = Self::ROOT;
        let mut depth = 0usize;
        loop {
            let node = &self.nodes[id as usize];
            if node.is_terminal() || depth >= config.horizon {
                let node = &mut self.nodes[id as usize];
                node.visits += 1;
                node.unattributed += 1;
                return Ok(0.0);
            }
            if !node.expanded {
                self.expand_leaf(id, model, config)?;
                let state = self.nodes[id as usize].state().clone();
                let policy: &dyn Policy<M> = match &config.rollout_policy {
                    Some(p) => p.as_ref(),
                    None => &UniformRandom,
                };
                let (ret, first) = rollout_from(model, &state, config.horizon - depth, policy, streams, &mut self.valid)?;
                let range = self.nodes[id as usize].arms.clone();
                let credited = first.and_then(|a| {
                    range.clone().find(|&i| {
                        let arm = &self.arms[i as usize];
                        arm.kind() == ArmKind::Ordinary && arm.action() == a
                    })
                });
                match credited {
                    Some(arm) => self.arms[arm as usize].update(ret),
                    None => self.nodes[id as usize].unattributed += 1,
                }
                self.nodes[id as usize].visits += 1;
                self.record(|| TraceEvent::Leaf {
                    node: id,
                    arm: credited,
                    ret: ret.to_bits(),
                });
                return Ok(ret);
            }

            let node = &self.nodes[id as usize];
            let range = node.arms.clone();
            let parent_n = node.total_visits() as f64;
            let k = select_arm(
                &self.arms[range.start as usize..range.end as usize],
                parent_n,
                config.exploration,
                &mut streams.tie,
            );
            let arm_id = range.start + k as ArmId;
            self.record(|| TraceEvent::Select { node: id, arm: arm_id });
            let action = self.arms[arm_id as usize].action();
            let state = self.nodes[id as usize].state().clone();
            let (next, reward) = model.step(&state, action, &mut streams.model)?;

            if self.arms[arm_id as usize].is_auxiliary() {
                let aux = config
                    .aux_policy
                    .as_deref()
                    .expect("auxiliary arms exist only with an auxiliary policy");
                let (cont, _) = rollout_from(model, &next, config.horizon - depth - 1, aux, streams, &mut self.valid)?;
                let ret = reward + gamma * cont;
                self.arms[arm_id as usize].update(ret);
                self.nodes[id as usize].visits += 1;
                return Ok(ret);
            }

            self.record(|| TraceEvent::Sample(next.clone()));
            let child = match self.arms[arm_id as usize].children.iter().find(|(s, _)| *s == next) {
                Some(&(_, c)) => c,
                None => {
                    let c = self.nodes.len() as NodeId;
                    let terminal = model.is_terminal(&next);
                    self.nodes.push(StateNode::leaf(next.clone(), terminal));
                    self.arms[arm_id as usize].children.push((next, c));
                    c
                }
            };
            path.push((id, arm_id, reward));
            id = child;
            depth += 1;
        }
    }

    /// Runs `budget` simulations.
    pub fn grow(&mut self, model: &M, config: &SearchConfig<M>, streams: &mut SearchStreams, budget: usize) -> Result<(), SearchError> {
        for _ in 0..budget {
            self.simulate(model, config, streams)?;
        }
        Ok(())
    }

    /// Root arm maximizing the recommendation statistic, auxiliary arms
    /// included; ties uniform.
    pub fn recommend(&self, rule: Recommendation, rng: &mut StreamRng) -> Option<ArmId> {
        let root = &self.nodes[Self::ROOT as usize];
        if !root.expanded {
            return None;
        }
        let arms = self.arms_of(Self::ROOT);
        let k = match rule {
            Recommendation::HighestValue => argmax_uniform(arms.iter().map(|a| a.value()), rng),
            Recommendation::HighestVisits => argmax_uniform(arms.iter().map(|a| a.visits() as f64), rng),
        };
        Some(root.arms.start + k as ArmId)
    }

    pub fn diagnostics(&self, rollouts: usize) -> SearchDiagnostics<M::Action> {
        SearchDiagnostics {
            tree_nodes: self.node_count(),
            rollouts,
            root_arms: self
                .arms_of(Self::ROOT)
                .iter()
                .map(|a| ArmSummary {
                    action: a.action(),
                    kind: a.kind(),
                    visits: a.visits(),
                    value: a.value(),
                })
                .collect(),
        }
    }

    /// Checks the structural invariants of the tree:
    ///
    /// * `n(s) = Σ_a (n(s,a) − n_prior(s,a)) + unattributed(s)` at every node;
    /// * ordinary arms match the valid actions, auxiliary arms number at most
    ///   `|A(s)|` (so at most `2|A(s)|` arms in all) and have no children;
    /// * `Q_UCT` lies in the reward hull `[min(0,R_min), max(0,R_max)] / (1−γ)`,
    ///   widened to include the arm's prior value.
    pub fn check_invariants(&self, model: &M, config: &SearchConfig<M>) -> Result<(), String> {
        let gamma = model.discount();
        let hull = model
            .reward_bounds()
            .map(|(lo, hi)| (lo.min(0.0) / (1.0 - gamma), hi.max(0.0) / (1.0 - gamma)));
        let mut valid = Vec::new();
        for (id, node) in self.nodes() {
            let arms = self.arms_of(id);
            let credited: u64 = arms.iter().map(|a| a.visits() - a.prior_visits() as u64).sum();
            if credited + node.unattributed() != node.visits() {
                return Err(format!(
                    "node {id}: n(s) = {} but arms carry {credited} and {} visits are unattributed",
                    node.visits(),
                    node.unattributed()
                ));
            }
            let prior: u64 = arms.iter().map(|a| a.prior_visits() as u64).sum();
            if prior != node.prior_mass() {
                return Err(format!("node {id}: prior mass {} != Σ n_prior {prior}", node.prior_mass()));
            }
            if !node.is_internal() {
                if !arms.is_empty() {
                    return Err(format!("leaf {id} has arms"));
                }
                continue;
            }
            model.actions(node.state(), &mut valid);
            let ordinary: Vec<_> = arms.iter().filter(|a| !a.is_auxiliary()).map(|a| a.action()).collect();
            if ordinary != valid {
                return Err(format!("node {id}: ordinary arms {ordinary:?} != valid actions {valid:?}"));
            }
            let aux = arms.len() - ordinary.len();
            if aux > 0 && config.aux_policy.is_none() {
                return Err(format!("node {id}: auxiliary arms without an auxiliary policy"));
            }
            if aux > valid.len() || arms.len() > 2 * valid.len() {
                return Err(format!("node {id}: {} arms for {} actions", arms.len(), valid.len()));
            }
            for arm in arms {
                if arm.is_auxiliary() && !arm.children().is_empty() {
                    return Err(format!("node {id}: auxiliary arm {:?} has children", arm.action()));
                }
                for &(_, c) in arm.children() {
                    if c as usize >= self.nodes.len() || c == id {
                        return Err(format!("node {id}: bad child index {c}"));
                    }
                }
                if let Some((lo, hi)) = hull {
                    let (lo, hi) = match arm.prior_value() {
                        Some(p) => (lo.min(p), hi.max(p)),
                        None => (lo, hi),
                    };
                    let eps = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
                    if arm.value() < lo - eps || arm.value() > hi + eps {
                        return Err(format!("node {id}: Q = {} outside [{lo}, {hi}]", arm.value()));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Simulates `policy` from `state` for at most `depth` steps or until a
/// terminal state; returns the discounted return and the first action taken.
fn rollout_from<M: GenerativeModel>(
    model: &M,
    state: &M::State,
    depth: usize,
    policy: &dyn Policy<M>,
    streams: &mut SearchStreams,
    valid: &mut Vec<M::Action>,
) -> Result<(f64, Option<M::Action>), SearchError> {
    let gamma = model.discount();
    let mut s = state.clone();
    let mut total = 0.0;
    let mut weight = 1.0;
    let mut first = None;
    for _ in 0..depth {
        if model.is_terminal(&s) {
            break;
        }
        model.actions(&s, valid);
        if valid.is_empty() {
            return Err(DomainError::NoValidActions(format!("{s:?}")).into());
        }
        let a = policy
            .sample(model, &s, valid, &mut streams.rollout)
            .ok_or_else(|| DomainError::EmptyPolicy(format!("{s:?}")))?;
        if !valid.contains(&a) {
            return Err(DomainError::invalid_action(&s, &a).into());
        }
        first.get_or_insert(a);
        let (next, r) = model.step(&s, a, &mut streams.model)?;
        total += weight * r;
        weight *= gamma;
        s = next;
    }
    Ok((total, first))
}

/// Discounted return of `policy` from `state` over at most `depth` steps;
/// the first reward has weight one. Policy draws use `streams.rollout`,
/// transitions `streams.model`.
pub fn rollout<M: GenerativeModel>(
    model: &M,
    state: &M::State,
    depth: usize,
    policy: &dyn Policy<M>,
    streams: &mut SearchStreams,
) -> Result<f64, SearchError> {
    let mut valid = Vec::new();
    rollout_from(model, state, depth, policy, streams, &mut valid).map(|(r, _)| r)
}

/// Runs `config.budget` simulations from `start` on a fresh tree and
/// recommends a root arm.
pub fn search<M: GenerativeModel>(
    model: &M,
    start: &M::State,
    config: &SearchConfig<M>,
    streams: &mut SearchStreams,
) -> Result<SearchOutcome<M::Action>, SearchError> {
    config.validate()?;
    if model.is_terminal(start) {
        return Err(SearchError::TerminalRoot);
    }
    let mut tree = SearchTree::new(model, start.clone());
    tree.grow(model, config, streams, config.budget)?;
    let arm = tree
        .recommend(config.recommendation, &mut streams.tie)
        .expect("root expanded by the first simulation");
    let arm = tree.arm(arm);
    Ok(SearchOutcome {
        action: arm.action(),
        kind: arm.kind(),
        diagnostics: tree.diagnostics(config.budget),
    })
}

/// Result of one replanning episode.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub discounted_return: f64,
    pub steps: usize,
    pub total_tree_nodes: u64,
    /// Mean tree size per search; zero when no search ran.
    pub mean_tree_nodes: f64,
    /// Number of searches whose recommendation was an auxiliary arm.
    pub auxiliary_moves: usize,
    pub wall_ms: f64,
}

/// Plays an episode, searching a fresh tree before every move and executing
/// the recommendation with transitions drawn from `env`.
pub fn plan_episode<M: GenerativeModel>(
    model: &M,
    start: &M::State,
    config: &SearchConfig<M>,
    max_steps: usize,
    env: &mut StreamRng,
    streams: &mut SearchStreams,
) -> Result<EpisodeRecord, SearchError> {
    config.validate()?;
    let clock = Instant::now();
    let gamma = model.discount();
    let mut state = start.clone();
    let mut total = 0.0;
    let mut weight = 1.0;
    let mut steps = 0;
    let mut nodes = 0u64;
    let mut aux_moves = 0;
    while steps < max_steps && !model.is_terminal(&state) {
        let outcome = search(model, &state, config, streams)?;
        nodes += outcome.diagnostics.tree_nodes as u64;
        if outcome.kind == ArmKind::Auxiliary {
            aux_moves += 1;
        }
        let (next, reward) = model.step(&state, outcome.action, env)?;
        total += weight * reward;
        weight *= gamma;
        state = next;
        steps += 1;
    }
    Ok(EpisodeRecord {
        discounted_return: total,
        steps,
        total_tree_nodes: nodes,
        mean_tree_nodes: if steps == 0 { 0.0 } else { nodes as f64 / steps as f64 },
        auxiliary_moves: aux_moves,
        wall_ms: clock.elapsed().as_secs_f64() * 1e3,
    })
}
