//! Obstructed sailing: steer a boat across a grid of obstacles to a goal
//! cell under a randomly veering wind, minimizing travel time.

mod heuristic;
mod map;
mod model;
mod tabular;

use std::fmt;
use std::str::FromStr;

pub use heuristic::{sail_towards_goal, SailTowardsGoal, StgPrior};
pub use map::{generate_map, Cell, GeneratedMap, MapError, SailingMap};
pub use model::{move_cost, tack, Sailing, SailingState, Tack, C_MAX, C_MIN, TACK_DELAY};
pub use tabular::{to_tabular, SailingIndexer, SailingTabular, STATES_PER_CELL};

/// Compass directions, clockwise from north.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Direction {
    N = 0,
    NE,
    E,
    SE,
    S,
    SW,
    W,
    NW,
}

impl Direction {
    pub const ALL: [Direction; 8] = [
        Direction::N,
        Direction::NE,
        Direction::E,
        Direction::SE,
        Direction::S,
        Direction::SW,
        Direction::W,
        Direction::NW,
    ];

    pub fn from_index(i: u8) -> Direction {
        Self::ALL[(i & 7) as usize]
    }

    pub fn index(self) -> u8 {
        self as u8
    }

    /// Grid step; north is `-y`.
    pub fn offset(self) -> (i32, i32) {
        const OFFSETS: [(i32, i32); 8] = [(0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)];
        OFFSETS[self as usize]
    }

    /// One step clockwise.
    pub fn cw(self) -> Direction {
        Self::from_index(self as u8 + 1)
    }

    /// One step counterclockwise.
    pub fn ccw(self) -> Direction {
        Self::from_index(self as u8 + 7)
    }

    pub fn opposite(self) -> Direction {
        Self::from_index(self as u8 + 4)
    }

    /// Clockwise steps from `self` to `other`, in `0..8`.
    pub fn steps_to(self, other: Direction) -> u8 {
        (other as u8 + 8 - self as u8) & 7
    }

    /// Angular difference in 45° steps, in `0..=4`.
    pub fn angle_to(self, other: Direction) -> u8 {
        let d = self.steps_to(other);
        d.min(8 - d)
    }

    /// Bearing in degrees clockwise from north.
    pub fn degrees(self) -> f64 {
        self as u8 as f64 * 45.0
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const NAMES: [&str; 8] = ["N", "NE", "E", "SE", "S", "SW", "W", "NW"];
        f.write_str(NAMES[*self as usize])
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Direction::ALL
            .into_iter()
            .find(|d| d.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown direction {s:?}"))
    }
}
