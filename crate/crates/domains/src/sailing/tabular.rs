//! Exact enumeration of the sailing MDP for the value-iteration oracle.

use std::sync::Arc;

use uctaux_core::solver::StateIndexer;
use uctaux_core::{GenerativeModel, TabularMdp, TabularMdpBuilder};

use super::model::{move_cost, wind_outcomes};
use super::{Direction, Sailing, SailingState};

/// Boat heading × previous wind × current wind.
pub const STATES_PER_CELL: usize = 512;

/// Maps sailing states onto tabular indices:
/// `free_cell_rank · 512 + b · 64 + w_prev · 8 + w_curr`.
#[derive(Clone, Debug)]
pub struct SailingIndexer {
    width: usize,
    rank: Arc<Vec<u32>>,
    cells: Arc<Vec<u32>>,
}

impl SailingIndexer {
    pub fn new(model: &Sailing) -> Self {
        let map = model.map();
        let mut rank = vec![u32::MAX; map.width() as usize * map.height() as usize];
        let mut cells = Vec::new();
        for c in map.free_cells() {
            rank[map.index(c)] = cells.len() as u32;
            cells.push(map.index(c) as u32);
        }
        Self {
            width: map.width() as usize,
            rank: Arc::new(rank),
            cells: Arc::new(cells),
        }
    }

    pub fn n_states(&self) -> usize {
        self.cells.len() * STATES_PER_CELL
    }

    pub fn index(&self, s: &SailingState) -> usize {
        let cell = s.cell.y as usize * self.width + s.cell.x as usize;
        let rank = self.rank[cell];
        debug_assert_ne!(rank, u32::MAX, "state on an obstacle");
        rank as usize * STATES_PER_CELL + s.boat as usize * 64 + s.wind_prev as usize * 8 + s.wind as usize
    }

    pub fn state(&self, index: usize) -> SailingState {
        let cell = self.cells[index / STATES_PER_CELL] as usize;
        let r = index % STATES_PER_CELL;
        SailingState {
            cell: super::Cell::new((cell % self.width) as u16, (cell / self.width) as u16),
            boat: Direction::from_index((r / 64) as u8),
            wind_prev: Direction::from_index((r / 8 % 8) as u8),
            wind: Direction::from_index((r % 8) as u8),
        }
    }
}

impl StateIndexer<Sailing> for SailingIndexer {
    fn state_index(&self, state: &SailingState) -> usize {
        self.index(state)
    }

    fn action_index(&self, action: Direction) -> u32 {
        action as u32
    }
}

pub struct SailingTabular {
    pub mdp: TabularMdp,
    pub indexer: SailingIndexer,
}

/// Every state on a free cell, with the exact wind-thirds transitions and
/// the same rewards as [`Sailing::step`]. Goal and trapped states are terminal.
pub fn to_tabular(model: &Sailing) -> SailingTabular {
    let indexer = SailingIndexer::new(model);
    let n = indexer.n_states();
    let mut b = TabularMdpBuilder::new(n, 8, model.discount());
    b.reserve(n * 7 * 3);
    let mut valid = Vec::with_capacity(8);
    for i in 0..n {
        let s = indexer.state(i);
        if model.is_terminal(&s) {
            b.set_terminal(i as u32);
            continue;
        }
        model.actions(&s, &mut valid);
        for &a in &valid {
            let cost = move_cost(&s, a);
            for w in wind_outcomes(s.wind) {
                let next = model.successor(&s, a, w);
                b.add(
                    i as u32,
                    a as u32,
                    indexer.index(&next) as u32,
                    1.0 / 3.0,
                    model.reward(cost, &next),
                );
            }
        }
    }
    let mdp = b.build().expect("sailing transitions are well formed");
    SailingTabular { mdp, indexer }
}
