use std::fmt;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::Rng;
use uctaux_core::{DomainError, GenerativeModel, StreamRng};

use super::maze::{Maze, Move, Pos};

pub const PEN_REWARD: f64 = 10.0;
pub const KILL_REWARD: f64 = 5.0;
pub const SHEEP_KILLED_REWARD: f64 = -10.0;
pub const GHOST_HP: u8 = 2;

/// What the shepherd does this step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ShepherdAction {
    Move(Move),
    Shoot,
}

/// One of the 30 joint actions: `shepherd_part * 5 + dog_part`, with the
/// shepherd part in `no_move, N, S, E, W, shoot` order.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CompoundAction(u8);

impl CompoundAction {
    pub const COUNT: usize = 30;
    /// Both players stay.
    pub const NOOP: Self = Self(0);

    pub fn from_index(i: usize) -> Self {
        assert!(i < Self::COUNT, "compound action index {i} out of range");
        Self(i as u8)
    }

    pub fn new(shepherd: ShepherdAction, dog: Move) -> Self {
        let s = match shepherd {
            ShepherdAction::Move(m) => m as u8,
            ShepherdAction::Shoot => 5,
        };
        Self(s * 5 + dog as u8)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn shepherd(self) -> ShepherdAction {
        match self.0 / 5 {
            5 => ShepherdAction::Shoot,
            s => ShepherdAction::Move(Move::ALL[s as usize]),
        }
    }

    pub fn dog(self) -> Move {
        Move::ALL[(self.0 % 5) as usize]
    }

    pub fn all() -> impl Iterator<Item = CompoundAction> {
        (0..Self::COUNT as u8).map(CompoundAction)
    }
}

impl fmt::Debug for CompoundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?}, {:?})", self.shepherd(), self.dog())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Status {
    Playing,
    Penned,
    Killed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SheepState {
    pub shepherd: Pos,
    pub dog: Pos,
    pub sheep: Pos,
    pub ghosts: [Pos; 2],
    /// Zero means the ghost is out of play; its position is then frozen.
    pub hp: [u8; 2],
    pub status: Status,
}

impl SheepState {
    pub fn ghost_alive(&self, i: usize) -> bool {
        self.hp[i] > 0
    }
}

/// Reward-bearing events of one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Events {
    pub ghost_deaths: u8,
    pub penned: bool,
    pub killed: bool,
}

impl Events {
    pub fn reward(self) -> f64 {
        let mut r = KILL_REWARD * self.ghost_deaths as f64;
        if self.penned {
            r += PEN_REWARD;
        }
        if self.killed {
            r += SHEEP_KILLED_REWARD;
        }
        r
    }
}

/// Behaviour constants of the non-player characters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SheepParams {
    pub discount: f64,
    /// NPCs flee when a player is within this many maze steps.
    pub flee_radius: u8,
    /// The shepherd hits ghosts within this many maze steps.
    pub shoot_range: u8,
}

impl Default for SheepParams {
    fn default() -> Self {
        Self {
            discount: 0.99,
            flee_radius: 2,
            shoot_range: 1,
        }
    }
}

/// What an NPC is drawn to when no player is close.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Drive<'a> {
    /// Stay put.
    Idle,
    /// Ghost: approach this cell.
    Chase(Pos),
    /// Sheep: keep away from these cells (live ghosts); idle when empty.
    Avoid(&'a [Pos]),
}

/// Sheep Savior: a shepherd and a dog herd a sheep into its pen while two
/// ghosts hunt it. NPC moves are deterministic up to uniform tie-breaking.
#[derive(Clone, Debug)]
pub struct SheepSavior {
    maze: Arc<Maze>,
    params: SheepParams,
}

impl SheepSavior {
    pub fn new(maze: Arc<Maze>, params: SheepParams) -> Self {
        assert!((0.0..1.0).contains(&params.discount), "discount {} outside [0, 1)", params.discount);
        Self { maze, params }
    }

    pub fn maze(&self) -> &Arc<Maze> {
        &self.maze
    }

    pub fn params(&self) -> SheepParams {
        self.params
    }

    /// Where the players end up; the shepherd stays in place when shooting.
    pub(crate) fn move_players(&self, shepherd: Pos, dog: Pos, a: CompoundAction) -> (Pos, Pos) {
        let s = match a.shepherd() {
            ShepherdAction::Move(m) => self.maze.step(shepherd, m),
            ShepherdAction::Shoot => shepherd,
        };
        (s, self.maze.step(dog, a.dog()))
    }

    /// The cells an NPC at `pos` may move to, all equally likely: away from
    /// the nearest player when one is within the flee radius, otherwise as
    /// `drive` dictates.
    pub(crate) fn npc_options(&self, pos: Pos, players: [Pos; 2], drive: Drive<'_>, out: &mut Vec<Pos>) {
        let maze = &*self.maze;
        let near = |p: Pos, targets: &[Pos]| targets.iter().map(|&t| maze.dist(p, t)).min().unwrap_or(u8::MAX);
        out.clear();
        let fleeing = near(pos, &players) <= self.params.flee_radius;
        let drive = match drive {
            _ if fleeing => Drive::Avoid(&players),
            Drive::Avoid([]) | Drive::Idle => {
                out.push(pos);
                return;
            }
            d => d,
        };
        let score = |c: Pos| match drive {
            Drive::Avoid(targets) => near(c, targets) as i32,
            Drive::Chase(target) => -(maze.dist(c, target) as i32),
            Drive::Idle => 0,
        };
        let mut best = i32::MIN;
        for m in Move::ALL {
            let c = maze.step(pos, m);
            if out.contains(&c) {
                continue;
            }
            let v = score(c);
            if v > best {
                best = v;
                out.clear();
                out.push(c);
            } else if v == best {
                out.push(c);
            }
        }
    }

    fn pick(options: &[Pos], rng: &mut StreamRng) -> Pos {
        match options.len() {
            1 => options[0],
            n => options[rng.gen_range(0..n)],
        }
    }

    /// `sheep_step`, also reporting the reward events.
    pub fn step_events(&self, s: &SheepState, a: CompoundAction, rng: &mut StreamRng) -> Result<(SheepState, Events), DomainError> {
        if s.status != Status::Playing {
            return Err(DomainError::invalid_action(s, &a));
        }
        let maze = &*self.maze;
        let mut next = *s;
        let mut events = Events::default();
        let (shepherd, dog) = self.move_players(s.shepherd, s.dog, a);
        next.shepherd = shepherd;
        next.dog = dog;

        if a.shepherd() == ShepherdAction::Shoot {
            let target = (0..2)
                .filter(|&i| s.ghost_alive(i) && maze.dist(s.shepherd, s.ghosts[i]) <= self.params.shoot_range)
                .min_by_key(|&i| (maze.dist(s.shepherd, s.ghosts[i]), i));
            if let Some(i) = target {
                next.hp[i] -= 1;
                if next.hp[i] == 0 {
                    events.ghost_deaths += 1;
                }
            }
        }

        let players = [shepherd, dog];
        let mut opts = Vec::with_capacity(5);
        let mut live = [0; 2];
        let mut n_live = 0;
        for i in 0..2 {
            if next.ghost_alive(i) {
                live[n_live] = next.ghosts[i];
                n_live += 1;
            }
        }
        self.npc_options(s.sheep, players, Drive::Avoid(&live[..n_live]), &mut opts);
        next.sheep = Self::pick(&opts, rng);
        for i in 0..2 {
            if next.ghost_alive(i) {
                self.npc_options(next.ghosts[i], players, Drive::Chase(next.sheep), &mut opts);
                next.ghosts[i] = Self::pick(&opts, rng);
            }
        }

        if (0..2).any(|i| next.ghost_alive(i) && next.ghosts[i] == next.sheep) {
            events.killed = true;
            next.status = Status::Killed;
        } else if next.sheep == maze.pen() {
            events.penned = true;
            next.status = Status::Penned;
        }
        Ok((next, events))
    }

    /// Five distinct free non-pen cells for the characters, ghosts at full health.
    pub fn random_start(&self, rng: &mut StreamRng) -> SheepState {
        let n = self.maze.free_count();
        let pen = self.maze.pen() as usize;
        let cells: Vec<Pos> = sample(rng, n - 1, 5)
            .into_iter()
            .map(|i| if i >= pen { i + 1 } else { i } as Pos)
            .collect();
        SheepState {
            shepherd: cells[0],
            dog: cells[1],
            sheep: cells[2],
            ghosts: [cells[3], cells[4]],
            hp: [GHOST_HP; 2],
            status: Status::Playing,
        }
    }

    /// The start recorded in the maze file, if any.
    pub fn file_start(&self) -> Option<SheepState> {
        self.maze.starts().map(|s| SheepState {
            shepherd: s.shepherd,
            dog: s.dog,
            sheep: s.sheep,
            ghosts: s.ghosts,
            hp: [GHOST_HP; 2],
            status: Status::Playing,
        })
    }
}

impl GenerativeModel for SheepSavior {
    type State = SheepState;
    type Action = CompoundAction;

    fn discount(&self) -> f64 {
        self.params.discount
    }

    fn is_terminal(&self, s: &SheepState) -> bool {
        s.status != Status::Playing
    }

    fn actions(&self, s: &SheepState, out: &mut Vec<CompoundAction>) {
        out.clear();
        if s.status == Status::Playing {
            out.extend(CompoundAction::all());
        }
    }

    fn step(&self, s: &SheepState, a: CompoundAction, rng: &mut StreamRng) -> Result<(SheepState, f64), DomainError> {
        self.step_events(s, a, rng).map(|(next, e)| (next, e.reward()))
    }

    fn reward_bounds(&self) -> Option<(f64, f64)> {
        // One shot per step, so at most one ghost dies.
        Some((SHEEP_KILLED_REWARD, KILL_REWARD + PEN_REWARD))
    }
}
