use std::sync::Arc;

use rand::Rng;
use uctaux_core::{DomainError, GenerativeModel, StreamRng};

use super::{Cell, Direction, SailingMap};

/// Cheapest move: straight downwind, no tack change.
pub const C_MIN: f64 = 1.0;
/// Dearest move: 135° off the wind plus a tack change.
pub const C_MAX: f64 = 7.0;
pub const TACK_DELAY: f64 = 3.0;

/// `⟨x, y, b, w_prev, w_curr⟩`. Wind directions name where the wind blows
/// to, so sailing along `wind` is downwind and against it is impossible.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SailingState {
    pub cell: Cell,
    /// Direction of the previous move.
    pub boat: Direction,
    /// Wind under which `boat` was chosen.
    pub wind_prev: Direction,
    pub wind: Direction,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tack {
    Port,
    Starboard,
}

/// Port when `heading` is 45°–135° clockwise of `wind`, starboard when
/// counterclockwise; dead downwind (or upwind) has no tack.
pub fn tack(heading: Direction, wind: Direction) -> Option<Tack> {
    match wind.steps_to(heading) {
        1..=3 => Some(Tack::Port),
        5..=7 => Some(Tack::Starboard),
        _ => None,
    }
}

/// Minutes for one move: 1–4 by angle off the wind, plus the tack delay
/// when the move flips the tack of the previous one.
pub fn move_cost(state: &SailingState, action: Direction) -> f64 {
    let base = 1.0 + state.wind.angle_to(action) as f64;
    let flip = match (tack(state.boat, state.wind_prev), tack(action, state.wind)) {
        (Some(before), Some(after)) => before != after,
        _ => false,
    };
    if flip {
        base + TACK_DELAY
    } else {
        base
    }
}

/// The sailing MDP over one map. Rewards are negated move costs.
///
/// A non-goal state without any valid action is terminal; entering one
/// costs `C_MAX / (1 − γ)` on top of the move.
#[derive(Clone, Debug)]
pub struct Sailing {
    map: Arc<SailingMap>,
    discount: f64,
    masks: Vec<u8>,
}

impl Sailing {
    pub fn new(map: Arc<SailingMap>, discount: f64) -> Self {
        assert!((0.0..1.0).contains(&discount), "discount {discount} outside [0, 1)");
        let masks = (0..map.width() as usize * map.height() as usize)
            .map(|i| {
                let c = map.cell(i);
                if map.is_blocked(c) {
                    0
                } else {
                    map.move_mask(c)
                }
            })
            .collect();
        Self { map, discount, masks }
    }

    pub fn map(&self) -> &Arc<SailingMap> {
        &self.map
    }

    /// Bit `d` set iff `d` is a valid action.
    pub fn valid_mask(&self, state: &SailingState) -> u8 {
        self.masks[self.map.index(state.cell)] & !(1 << state.wind.opposite() as u8)
    }

    pub fn is_trapped(&self, state: &SailingState) -> bool {
        state.cell != self.map.goal() && self.valid_mask(state) == 0
    }

    pub fn trap_penalty(&self) -> f64 {
        -C_MAX / (1.0 - self.discount)
    }

    /// Reward of moving to `next`, given the move cost.
    pub(crate) fn reward(&self, cost: f64, next: &SailingState) -> f64 {
        if self.is_trapped(next) {
            -cost + self.trap_penalty()
        } else {
            -cost
        }
    }

    /// Start cell with random boat heading and wind (`w_prev = w_curr`),
    /// redrawn while the start would be trapped.
    pub fn initial_state(&self, rng: &mut StreamRng) -> SailingState {
        loop {
            let wind = Direction::from_index(rng.gen_range(0..8));
            let state = SailingState {
                cell: self.map.start(),
                boat: Direction::from_index(rng.gen_range(0..8)),
                wind_prev: wind,
                wind,
            };
            if !self.is_trapped(&state) {
                return state;
            }
        }
    }

    /// The successor for a given next wind; the position update is deterministic.
    pub(crate) fn successor(&self, state: &SailingState, action: Direction, wind: Direction) -> SailingState {
        let cell = self.map.neighbor(state.cell, action).expect("valid action stays on free cells");
        SailingState {
            cell,
            boat: action,
            wind_prev: state.wind,
            wind,
        }
    }
}

/// The next wind: unchanged, one step counterclockwise or one step
/// clockwise, each with probability 1/3.
pub(crate) fn wind_outcomes(wind: Direction) -> [Direction; 3] {
    [wind, wind.ccw(), wind.cw()]
}

impl GenerativeModel for Sailing {
    type State = SailingState;
    type Action = Direction;

    fn discount(&self) -> f64 {
        self.discount
    }

    fn is_terminal(&self, state: &SailingState) -> bool {
        state.cell == self.map.goal() || self.valid_mask(state) == 0
    }

    fn actions(&self, state: &SailingState, out: &mut Vec<Direction>) {
        out.clear();
        if state.cell == self.map.goal() {
            return;
        }
        let mask = self.valid_mask(state);
        out.extend(Direction::ALL.into_iter().filter(|&d| mask & (1 << d as u8) != 0));
    }

    fn step(&self, state: &SailingState, action: Direction, rng: &mut StreamRng) -> Result<(SailingState, f64), DomainError> {
        if self.is_terminal(state) || self.valid_mask(state) & (1 << action as u8) == 0 {
            return Err(DomainError::invalid_action(state, &action));
        }
        let wind = wind_outcomes(state.wind)[rng.gen_range(0..3)];
        let next = self.successor(state, action, wind);
        Ok((next, self.reward(move_cost(state, action), &next)))
    }

    fn reward_bounds(&self) -> Option<(f64, f64)> {
        Some((-C_MAX + self.trap_penalty(), -C_MIN))
    }
}
