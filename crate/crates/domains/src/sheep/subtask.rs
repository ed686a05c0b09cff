//! Subtask decomposition and the GoalAveraging heuristic.
//!
//! Each subtask keeps both players and a single NPC: the sheep alone (it
//! only flees the players, there being no ghosts to avoid) or one ghost
//! with its health (it only flees, there being no sheep to chase). Both
//! ghosts share one subtask since the projection is symmetric.

use std::path::Path;
use std::sync::Arc;

use uctaux_core::solver::{q_table, read_solution, value_iteration, write_solution, CachedSolution, SolveError};
use uctaux_core::{GenerativeModel, Policy, Prior, PriorValue, StreamRng, TabularMdp, TabularMdpBuilder};

use super::model::{CompoundAction, Drive, SheepSavior, SheepState, ShepherdAction, Status, GHOST_HP, KILL_REWARD, PEN_REWARD};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SubtaskKind {
    Sheep,
    Ghost,
}

impl SubtaskKind {
    pub fn n_states(self, free: usize) -> usize {
        match self {
            SubtaskKind::Sheep => free * free * free,
            SubtaskKind::Ghost => free * free * free * (GHOST_HP as usize + 1),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SubtaskKind::Sheep => "sheep",
            SubtaskKind::Ghost => "ghost",
        }
    }
}

/// Index of `(shepherd, dog, npc[, hp])` in a subtask's state space.
fn index(kind: SubtaskKind, free: usize, shepherd: u8, dog: u8, npc: u8, hp: u8) -> usize {
    let base = (shepherd as usize * free + dog as usize) * free + npc as usize;
    match kind {
        SubtaskKind::Sheep => base,
        SubtaskKind::Ghost => base * (GHOST_HP as usize + 1) + hp as usize,
    }
}

fn unindex(kind: SubtaskKind, free: usize, i: usize) -> (u8, u8, u8, u8) {
    let (base, hp) = match kind {
        SubtaskKind::Sheep => (i, 0),
        SubtaskKind::Ghost => (i / (GHOST_HP as usize + 1), (i % (GHOST_HP as usize + 1)) as u8),
    };
    ((base / free / free) as u8, (base / free % free) as u8, (base % free) as u8, hp)
}

/// The projected MDP of one subtask, over the same 30 compound actions.
pub fn subtask_mdp(model: &SheepSavior, kind: SubtaskKind) -> TabularMdp {
    let maze = model.maze();
    let free = maze.free_count();
    let n = kind.n_states(free);
    let params = model.params();
    let mut b = TabularMdpBuilder::new(n, CompoundAction::COUNT, model.discount());
    b.reserve(n * CompoundAction::COUNT * 2);
    let mut opts = Vec::with_capacity(5);
    for i in 0..n {
        let (shepherd, dog, npc, hp) = unindex(kind, free, i);
        let terminal = match kind {
            SubtaskKind::Sheep => npc == maze.pen(),
            SubtaskKind::Ghost => hp == 0,
        };
        if terminal {
            b.set_terminal(i as u32);
            continue;
        }
        for a in CompoundAction::all() {
            let (s2, d2) = model.move_players(shepherd, dog, a);
            let to = |npc: u8, hp: u8| index(kind, free, s2, d2, npc, hp) as u32;
            match kind {
                SubtaskKind::Sheep => {
                    model.npc_options(npc, [s2, d2], Drive::Avoid(&[]), &mut opts);
                    let p = 1.0 / opts.len() as f64;
                    for &c in &opts {
                        let r = if c == maze.pen() { PEN_REWARD } else { 0.0 };
                        b.add(i as u32, a.index() as u32, to(c, 0), p, r);
                    }
                }
                SubtaskKind::Ghost => {
                    let hit = a.shepherd() == ShepherdAction::Shoot && maze.dist(shepherd, npc) <= params.shoot_range;
                    let hp2 = if hit { hp - 1 } else { hp };
                    if hp2 == 0 {
                        b.add(i as u32, a.index() as u32, to(npc, 0), 1.0, KILL_REWARD);
                        continue;
                    }
                    model.npc_options(npc, [s2, d2], Drive::Idle, &mut opts);
                    let p = 1.0 / opts.len() as f64;
                    for &c in &opts {
                        b.add(i as u32, a.index() as u32, to(c, hp2), p, 0.0);
                    }
                }
            }
        }
    }
    b.build().expect("subtask transitions are well formed")
}

/// Exact `Q_i` of the sheep subtask and the (shared) ghost subtask.
#[derive(Clone, Debug)]
pub struct Subtasks {
    free: usize,
    sheep_q: Arc<Vec<f64>>,
    ghost_q: Arc<Vec<f64>>,
}

/// Value-iteration statistics of one subtask solve.
#[derive(Clone, Copy, Debug)]
pub struct SolveStats {
    pub kind: SubtaskKind,
    pub states: usize,
    pub iterations: usize,
    pub residual: f64,
}

impl Subtasks {
    /// Builds and solves both subtask MDPs.
    pub fn solve(model: &SheepSavior, tolerance: f64) -> Result<(Self, Vec<SolveStats>), SolveError> {
        Self::solve_with_cache(model, tolerance, None)
    }

    /// As [`Subtasks::solve`], reading `V*` from `<dir>/sheep.csv` and
    /// `<dir>/ghost.csv` when present and writing them otherwise.
    pub fn solve_with_cache(model: &SheepSavior, tolerance: f64, dir: Option<&Path>) -> Result<(Self, Vec<SolveStats>), SolveError> {
        let mut qs = Vec::new();
        let mut stats = Vec::new();
        for kind in [SubtaskKind::Sheep, SubtaskKind::Ghost] {
            let mdp = subtask_mdp(model, kind);
            let path = dir.map(|d| d.join(format!("{}.csv", kind.name())));
            let cached = match &path {
                Some(p) if p.exists() => Some(read_solution(p)?).filter(|c| c.v.len() == mdp.n_states()),
                _ => None,
            };
            let v = match cached {
                Some(c) => {
                    stats.push(SolveStats {
                        kind,
                        states: mdp.n_states(),
                        iterations: 0,
                        residual: 0.0,
                    });
                    c.v
                }
                None => {
                    let r = value_iteration(
                        &mdp,
                        tolerance,
                        uctaux_core::solver::default_max_iterations(tolerance, mdp.discount(), mdp.max_abs_reward()),
                    )?;
                    if let Some(p) = &path {
                        write_solution(p, &CachedSolution::from(&r))?;
                    }
                    stats.push(SolveStats {
                        kind,
                        states: mdp.n_states(),
                        iterations: r.iterations,
                        residual: r.residual,
                    });
                    r.v
                }
            };
            qs.push(Arc::new(q_table(&mdp, &v)));
        }
        let ghost_q = qs.pop().expect("two subtasks");
        let sheep_q = qs.pop().expect("two subtasks");
        Ok((
            Self {
                free: model.maze().free_count(),
                sheep_q,
                ghost_q,
            },
            stats,
        ))
    }

    fn q(table: &[f64], i: usize, a: CompoundAction) -> f64 {
        let q = table[i * CompoundAction::COUNT + a.index()];
        if q.is_finite() {
            q
        } else {
            0.0
        }
    }

    /// `Q_i(s_i, a)` for the sheep subtask (`i = 0`) and the two ghosts
    /// (`i = 1, 2`); a dead ghost's subtask is over and contributes 0.
    pub fn subtask_values(&self, s: &SheepState, a: CompoundAction) -> [f64; 3] {
        let mut out = [0.0; 3];
        out[0] = Self::q(
            &self.sheep_q,
            index(SubtaskKind::Sheep, self.free, s.shepherd, s.dog, s.sheep, 0),
            a,
        );
        for g in 0..2 {
            if s.ghost_alive(g) {
                let i = index(SubtaskKind::Ghost, self.free, s.shepherd, s.dog, s.ghosts[g], s.hp[g]);
                out[g + 1] = Self::q(&self.ghost_q, i, a);
            }
        }
        out
    }

    /// `Q_GA(s, a) = (1/3) Σ_i Q_i(s_i, a)`; zero at terminal states.
    pub fn goal_averaging(&self, s: &SheepState, a: CompoundAction) -> f64 {
        if s.status != Status::Playing {
            return 0.0;
        }
        self.subtask_values(s, a).iter().sum::<f64>() / 3.0
    }

    /// `π_GA(s) = argmax_a Q_GA(s, a)`, ties to the lowest action index.
    pub fn goal_averaging_action(&self, s: &SheepState) -> CompoundAction {
        let mut best = (CompoundAction::from_index(0), f64::NEG_INFINITY);
        for a in CompoundAction::all() {
            let q = self.goal_averaging(s, a);
            if q > best.1 {
                best = (a, q);
            }
        }
        best.0
    }
}

/// The GoalAveraging policy and its prior `(1, Q_GA)`.
#[derive(Clone, Debug)]
pub struct GoalAveraging(pub Arc<Subtasks>);

impl Policy<SheepSavior> for GoalAveraging {
    fn distribution(&self, _: &SheepSavior, s: &SheepState, _: &[CompoundAction], out: &mut Vec<(CompoundAction, f64)>) {
        out.clear();
        out.push((self.0.goal_averaging_action(s), 1.0));
    }

    fn sample(&self, _: &SheepSavior, s: &SheepState, _: &[CompoundAction], _: &mut StreamRng) -> Option<CompoundAction> {
        Some(self.0.goal_averaging_action(s))
    }

    fn support_size(&self, _: &SheepSavior, _: &SheepState, _: &[CompoundAction]) -> usize {
        1
    }
}

impl PriorValue<SheepSavior> for GoalAveraging {
    fn prior(&self, _: &SheepSavior, s: &SheepState, a: CompoundAction) -> Prior {
        Prior {
            visits: 1,
            value: self.0.goal_averaging(s, a),
        }
    }
}

/// Projects a full state onto a subtask index; `ghost` selects which ghost.
pub fn project(model: &SheepSavior, kind: SubtaskKind, s: &SheepState, ghost: usize) -> usize {
    let free = model.maze().free_count();
    match kind {
        SubtaskKind::Sheep => index(kind, free, s.shepherd, s.dog, s.sheep, 0),
        SubtaskKind::Ghost => index(kind, free, s.shepherd, s.dog, s.ghosts[ghost], s.hp[ghost]),
    }
}

/// Re-embeds a subtask state into `template`, replacing the players and the NPC.
pub fn embed(model: &SheepSavior, kind: SubtaskKind, i: usize, template: &SheepState, ghost: usize) -> SheepState {
    let (shepherd, dog, npc, hp) = unindex(kind, model.maze().free_count(), i);
    let mut s = SheepState {
        shepherd,
        dog,
        ..*template
    };
    match kind {
        SubtaskKind::Sheep => s.sheep = npc,
        SubtaskKind::Ghost => {
            s.ghosts[ghost] = npc;
            s.hp[ghost] = hp;
        }
    }
    s
}
