//! Value iteration over a [`TabularMdp`]: the ground-truth oracle.
//!
//! Besides `V*` and `Q*` this module builds the policies derived from them
//! (the greedy optimal policy and the `StochasticOptimal.p` mixture), can
//! evaluate a fixed tabular policy exactly, and reads and writes the
//! `state_index,v_star,greedy_action` cache format.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::mdp::GenerativeModel;
use crate::policy::{pick, Policy, Prior, PriorValue};
use crate::rng::StreamRng;
use crate::tabular::TabularMdp;

pub const DEFAULT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("value iteration did not converge: residual {residual} > {tolerance} after {iterations} sweeps")]
    NotConverged { iterations: usize, residual: f64, tolerance: f64 },
    #[error("tolerance must be positive, got {0}")]
    Tolerance(f64),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
}

/// `V*`, `Q*` and convergence diagnostics.
#[derive(Clone, Debug)]
pub struct SolveResult {
    pub v: Vec<f64>,
    /// Row-major `n_states × n_actions`; `-inf` where the action is invalid
    /// or the state terminal.
    pub q: Vec<f64>,
    pub n_actions: usize,
    pub iterations: usize,
    /// Final max-norm Bellman update.
    pub residual: f64,
    /// Max-norm update of every sweep, in order.
    pub residuals: Vec<f64>,
}

impl SolveResult {
    pub fn q_row(&self, s: usize) -> &[f64] {
        &self.q[s * self.n_actions..(s + 1) * self.n_actions]
    }

    /// Lowest-index argmax of `Q*(s, ·)`, `None` at terminal states.
    pub fn greedy_action(&self, s: usize) -> Option<u32> {
        let mut best: Option<(usize, f64)> = None;
        for (a, &q) in self.q_row(s).iter().enumerate() {
            if q == f64::NEG_INFINITY {
                continue;
            }
            if best.is_none_or(|(_, b)| q > b) {
                best = Some((a, q));
            }
        }
        best.map(|(a, _)| a as u32)
    }

    /// `max_s |max_a Q*(s,a) − V*(s)|` over non-terminal states.
    pub fn consistency_gap(&self) -> f64 {
        (0..self.v.len())
            .filter_map(|s| {
                let m = self.q_row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (m != f64::NEG_INFINITY).then(|| (m - self.v[s]).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Sweep cap from the γ-contraction bound with a ×10 safety factor:
/// `⌈10 · log(tol·(1−γ)/R_max) / log γ⌉`.
pub fn default_max_iterations(tolerance: f64, discount: f64, max_abs_reward: f64) -> usize {
    if discount <= 0.0 || max_abs_reward <= 0.0 {
        return 10;
    }
    let ratio = tolerance * (1.0 - discount) / max_abs_reward;
    if ratio >= 1.0 {
        return 10;
    }
    (10.0 * ratio.ln() / discount.ln()).ceil().max(10.0) as usize
}

/// One Bellman backup of `(s, a)` against `v`.
#[inline]
fn backup(mdp: &TabularMdp, v: &[f64], s: usize, a: usize, gamma: f64) -> f64 {
    mdp.outcomes(s, a)
        .iter()
        .map(|o| o.prob * (o.reward + gamma * v[o.next as usize]))
        .sum()
}

/// Synchronous (Jacobi) value iteration from `V_0 ≡ 0`, double buffered.
///
/// Stops when a sweep changes no state by more than `tolerance`. Terminal
/// states keep `V* = 0`.
pub fn value_iteration(mdp: &TabularMdp, tolerance: f64, max_iterations: usize) -> Result<SolveResult, SolveError> {
    if !(tolerance > 0.0) {
        return Err(SolveError::Tolerance(tolerance));
    }
    let n = mdp.n_states();
    let m = mdp.n_actions();
    let gamma = mdp.discount();
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut residuals = Vec::new();

    for sweep in 1..=max_iterations {
        let mut residual: f64 = 0.0;
        for s in 0..n {
            if mdp.is_terminal_index(s) {
                next[s] = 0.0;
                continue;
            }
            let mut best = f64::NEG_INFINITY;
            for a in 0..m {
                if mdp.is_valid(s, a) {
                    best = best.max(backup(mdp, &v, s, a, gamma));
                }
            }
            next[s] = best;
            residual = residual.max((best - v[s]).abs());
        }
        std::mem::swap(&mut v, &mut next);
        residuals.push(residual);
        if residual <= tolerance {
            let q = q_table(mdp, &v);
            return Ok(SolveResult {
                v,
                q,
                n_actions: m,
                iterations: sweep,
                residual,
                residuals,
            });
        }
    }
    Err(SolveError::NotConverged {
        iterations: max_iterations,
        residual: residuals.last().copied().unwrap_or(f64::INFINITY),
        tolerance,
    })
}

/// `Q(s,a) = Σ T (R + γ V(s'))`, `-inf` where undefined.
pub fn q_table(mdp: &TabularMdp, v: &[f64]) -> Vec<f64> {
    let (n, m, gamma) = (mdp.n_states(), mdp.n_actions(), mdp.discount());
    let mut q = vec![f64::NEG_INFINITY; n * m];
    for s in 0..n {
        if mdp.is_terminal_index(s) {
            continue;
        }
        for a in 0..m {
            if mdp.is_valid(s, a) {
                q[s * m + a] = backup(mdp, v, s, a, gamma);
            }
        }
    }
    q
}

/// A tabular policy that plays its greedy action with probability
/// `greedy_weight` and a uniformly random valid action otherwise.
///
/// `greedy_weight = 1` is the deterministic greedy policy; `0` is uniform.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularPolicy {
    greedy: Vec<Option<u32>>,
    greedy_weight: f64,
}

impl TabularPolicy {
    pub fn new(greedy: Vec<Option<u32>>, greedy_weight: f64) -> Self {
        assert!((0.0..=1.0).contains(&greedy_weight), "greedy weight {greedy_weight} outside [0, 1]");
        Self { greedy, greedy_weight }
    }

    pub fn greedy(&self) -> &[Option<u32>] {
        &self.greedy
    }

    pub fn greedy_weight(&self) -> f64 {
        self.greedy_weight
    }

    /// Same greedy table, different mixture weight.
    pub fn with_greedy_weight(&self, p: f64) -> Self {
        Self::new(self.greedy.clone(), p)
    }

    /// Probability of the `i`-th of `k` valid actions whose index is `a`.
    #[inline]
    fn prob(&self, s: usize, a: u32, k: usize) -> f64 {
        let g = self.greedy[s];
        match g {
            // No greedy action recorded: uniform.
            None => 1.0 / k as f64,
            Some(g) => {
                let base = (1.0 - self.greedy_weight) / k as f64;
                if a == g {
                    base + self.greedy_weight
                } else {
                    base
                }
            }
        }
    }

    /// Distribution at state index `s` over `valid`, keyed by `index_of`.
    pub fn distribution_at<A: Copy>(&self, s: usize, valid: &[A], index_of: impl Fn(A) -> u32, out: &mut Vec<(A, f64)>) {
        out.clear();
        let k = valid.len();
        out.extend(valid.iter().map(|&a| (a, self.prob(s, index_of(a), k))));
    }

    pub fn sample_at<A: Copy>(&self, s: usize, valid: &[A], index_of: impl Fn(A) -> u32, rng: &mut StreamRng) -> Option<A> {
        let k = valid.len();
        if self.greedy_weight == 1.0 {
            if let Some(g) = self.greedy[s] {
                return valid.iter().copied().find(|&a| index_of(a) == g);
            }
        }
        pick(valid.iter().map(|&a| (a, self.prob(s, index_of(a), k))), rng.gen::<f64>())
    }
}

/// The deterministic greedy policy of `result`, ties to the lowest action index.
pub fn extract_greedy(result: &SolveResult) -> TabularPolicy {
    TabularPolicy::new((0..result.v.len()).map(|s| result.greedy_action(s)).collect(), 1.0)
}

/// `StochasticOptimal.p`: greedy with probability `p`, uniform otherwise.
pub fn stochastic_optimal(result: &SolveResult, p: f64) -> TabularPolicy {
    extract_greedy(result).with_greedy_weight(p)
}

impl Policy<TabularMdp> for TabularPolicy {
    fn distribution(&self, _: &TabularMdp, state: &u32, valid: &[u32], out: &mut Vec<(u32, f64)>) {
        self.distribution_at(*state as usize, valid, |a| a, out);
    }

    fn sample(&self, _: &TabularMdp, state: &u32, valid: &[u32], rng: &mut StreamRng) -> Option<u32> {
        self.sample_at(*state as usize, valid, |a| a, rng)
    }
}

/// Maps a domain's states and actions onto the indices of its tabular form.
pub trait StateIndexer<M: GenerativeModel>: Send + Sync {
    fn state_index(&self, state: &M::State) -> usize;
    fn action_index(&self, action: M::Action) -> u32;
}

/// A [`TabularPolicy`] lifted to a domain model through a [`StateIndexer`].
pub struct IndexedPolicy<I> {
    pub indexer: I,
    pub policy: Arc<TabularPolicy>,
}

impl<M: GenerativeModel, I: StateIndexer<M>> Policy<M> for IndexedPolicy<I> {
    fn distribution(&self, _: &M, state: &M::State, valid: &[M::Action], out: &mut Vec<(M::Action, f64)>) {
        let s = self.indexer.state_index(state);
        self.policy.distribution_at(s, valid, |a| self.indexer.action_index(a), out);
    }

    fn sample(&self, _: &M, state: &M::State, valid: &[M::Action], rng: &mut StreamRng) -> Option<M::Action> {
        let s = self.indexer.state_index(state);
        self.policy.sample_at(s, valid, |a| self.indexer.action_index(a), rng)
    }
}

/// Exact `V^π` and `Q^π` of a fixed tabular policy.
#[derive(Clone, Debug)]
pub struct PolicyValue {
    pub v: Vec<f64>,
    pub q: Vec<f64>,
    pub n_actions: usize,
    pub iterations: usize,
}

/// Iterative policy evaluation (Jacobi sweeps from zero).
pub fn evaluate_policy(mdp: &TabularMdp, policy: &TabularPolicy, tolerance: f64, max_iterations: usize) -> Result<PolicyValue, SolveError> {
    if !(tolerance > 0.0) {
        return Err(SolveError::Tolerance(tolerance));
    }
    let n = mdp.n_states();
    let gamma = mdp.discount();
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut valid: Vec<u32> = Vec::new();
    let mut dist = Vec::new();
    let mut residual = f64::INFINITY;
    for sweep in 1..=max_iterations {
        residual = 0.0;
        for s in 0..n {
            if mdp.is_terminal_index(s) {
                next[s] = 0.0;
                continue;
            }
            valid.clear();
            valid.extend(mdp.valid_actions(s).map(|a| a as u32));
            policy.distribution_at(s, &valid, |a| a, &mut dist);
            let value: f64 = dist
                .iter()
                .filter(|(_, p)| *p > 0.0)
                .map(|&(a, p)| p * backup(mdp, &v, s, a as usize, gamma))
                .sum();
            next[s] = value;
            residual = residual.max((value - v[s]).abs());
        }
        std::mem::swap(&mut v, &mut next);
        if residual <= tolerance {
            let q = q_table(mdp, &v);
            return Ok(PolicyValue {
                v,
                q,
                n_actions: mdp.n_actions(),
                iterations: sweep,
            });
        }
    }
    Err(SolveError::NotConverged {
        iterations: max_iterations,
        residual,
        tolerance,
    })
}

/// A prior read from a Q table: `(visits, Q(s, a))` for every arm.
pub struct QTablePrior<I> {
    pub indexer: I,
    pub q: Arc<Vec<f64>>,
    pub n_actions: usize,
    pub visits: u32,
}

impl<M: GenerativeModel, I: StateIndexer<M>> PriorValue<M> for QTablePrior<I> {
    fn prior(&self, _: &M, state: &M::State, action: M::Action) -> Prior {
        let s = self.indexer.state_index(state);
        let a = self.indexer.action_index(action) as usize;
        let value = self.q[s * self.n_actions + a];
        Prior {
            visits: self.visits,
            value: if value.is_finite() { value } else { 0.0 },
        }
    }
}

/// The cacheable part of a solve: `V*` and the greedy action per state.
#[derive(Clone, Debug, PartialEq)]
pub struct CachedSolution {
    pub v: Vec<f64>,
    pub greedy: Vec<Option<u32>>,
}

impl From<&SolveResult> for CachedSolution {
    fn from(r: &SolveResult) -> Self {
        Self {
            v: r.v.clone(),
            greedy: (0..r.v.len()).map(|s| r.greedy_action(s)).collect(),
        }
    }
}

impl CachedSolution {
    pub fn greedy_policy(&self) -> TabularPolicy {
        TabularPolicy::new(self.greedy.clone(), 1.0)
    }
}

/// Writes `state_index,v_star,greedy_action`; terminal states leave the
/// action empty.
pub fn write_solution(path: &Path, solution: &CachedSolution) -> Result<(), SolveError> {
    let io = |source| SolveError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(std::fs::File::create(path).map_err(io)?);
    let mut line = String::new();
    writeln!(w, "state_index,v_star,greedy_action").map_err(io)?;
    for (s, (v, g)) in solution.v.iter().zip(&solution.greedy).enumerate() {
        line.clear();
        match g {
            Some(a) => write!(line, "{s},{v},{a}"),
            None => write!(line, "{s},{v},"),
        }
        .expect("formatting into a String");
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_solution(path: &Path) -> Result<CachedSolution, SolveError> {
    let io = |source| SolveError::Io {
        path: path.to_path_buf(),
        source,
    };
    let parse = |line: usize, message: String| SolveError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let r = BufReader::new(std::fs::File::open(path).map_err(io)?);
    let mut v = Vec::new();
    let mut greedy = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(io)?;
        if i == 0 {
            if line.trim() != "state_index,v_star,greedy_action" {
                return Err(parse(1, format!("unexpected header {line:?}")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(parse(i + 1, format!("expected 3 fields, got {}", fields.len())));
        }
        let s: usize = fields[0].parse().map_err(|e| parse(i + 1, format!("state index: {e}")))?;
        if s != v.len() {
            return Err(parse(i + 1, format!("state index {s} out of order")));
        }
        v.push(fields[1].parse::<f64>().map_err(|e| parse(i + 1, format!("v_star: {e}")))?);
        greedy.push(match fields[2] {
            "" => None,
            a => Some(a.parse::<u32>().map_err(|e| parse(i + 1, format!("greedy_action: {e}")))?),
        });
    }
    Ok(CachedSolution { v, greedy })
}
