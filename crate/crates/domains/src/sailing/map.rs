//! Grid maps for the sailing domain: obstacles, start and goal, the text
//! file format and random generation.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use super::Direction;

/// A grid cell. `y` grows southwards: row `y` of a map file is row `y` here.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub x: u16,
    pub y: u16,
}

impl Cell {
    pub const fn new(x: u16, y: u16) -> Self {
        Self { x, y }
    }

    /// King-move distance, the number of moves on an open grid.
    pub fn chebyshev(self, other: Cell) -> u32 {
        let dx = (self.x as i32 - other.x as i32).unsigned_abs();
        let dy = (self.y as i32 - other.y as i32).unsigned_abs();
        dx.max(dy)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Error)]
pub enum MapError {
    #[error("map is empty")]
    Empty,
    #[error("cell {0} lies outside the {1}x{2} grid")]
    OutOfBounds(Cell, u16, u16),
    #[error("start and goal coincide at {0}")]
    StartIsGoal(Cell),
    #[error("{what} cell {cell} is an obstacle")]
    Blocked { what: &'static str, cell: Cell },
    #[error("goal {goal} is unreachable from start {start}")]
    Unreachable { start: Cell, goal: Cell },
    #[error("blockage probability {0} outside [0, 1)")]
    Probability(f64),
    #[error("no connected map after {0} attempts")]
    TooManyRejections(usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Obstacle grid with a start and a goal cell.
///
/// Constructors guarantee that start and goal are distinct free cells and
/// that the goal is reachable from the start through free 8-connected cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SailingMap {
    width: u16,
    height: u16,
    blocked: Vec<bool>,
    start: Cell,
    goal: Cell,
}

impl SailingMap {
    pub fn new(width: u16, height: u16, blocked: Vec<bool>, start: Cell, goal: Cell) -> Result<Self, MapError> {
        if width == 0 || height == 0 {
            return Err(MapError::Empty);
        }
        assert_eq!(blocked.len(), width as usize * height as usize, "obstacle mask size");
        let map = Self {
            width,
            height,
            blocked,
            start,
            goal,
        };
        for c in [start, goal] {
            if !map.in_bounds(c.x as i32, c.y as i32) {
                return Err(MapError::OutOfBounds(c, width, height));
            }
        }
        if start == goal {
            return Err(MapError::StartIsGoal(start));
        }
        if map.is_blocked(start) {
            return Err(MapError::Blocked {
                what: "start",
                cell: start,
            });
        }
        if map.is_blocked(goal) {
            return Err(MapError::Blocked { what: "goal", cell: goal });
        }
        if !map.connected() {
            return Err(MapError::Unreachable { start, goal });
        }
        Ok(map)
    }

    /// Obstacle-free map.
    pub fn open(width: u16, height: u16, start: Cell, goal: Cell) -> Result<Self, MapError> {
        Self::new(width, height, vec![false; width as usize * height as usize], start, goal)
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    pub fn start(&self) -> Cell {
        self.start
    }

    pub fn goal(&self) -> Cell {
        self.goal
    }

    pub fn index(&self, c: Cell) -> usize {
        c.y as usize * self.width as usize + c.x as usize
    }

    pub fn cell(&self, index: usize) -> Cell {
        Cell::new((index % self.width as usize) as u16, (index / self.width as usize) as u16)
    }

    pub fn in_bounds(&self, x: i32, y: i32) -> bool {
        x >= 0 && y >= 0 && x < self.width as i32 && y < self.height as i32
    }

    pub fn is_blocked(&self, c: Cell) -> bool {
        self.blocked[self.index(c)]
    }

    pub fn blocked_count(&self) -> usize {
        self.blocked.iter().filter(|&&b| b).count()
    }

    /// The cell one move along `d`, if it is on the map and free.
    pub fn neighbor(&self, c: Cell, d: Direction) -> Option<Cell> {
        let (dx, dy) = d.offset();
        let (x, y) = (c.x as i32 + dx, c.y as i32 + dy);
        if !self.in_bounds(x, y) {
            return None;
        }
        let n = Cell::new(x as u16, y as u16);
        (!self.is_blocked(n)).then_some(n)
    }

    /// Bit `d` set iff moving along `d` from `c` stays on a free cell.
    pub fn move_mask(&self, c: Cell) -> u8 {
        Direction::ALL
            .iter()
            .filter(|&&d| self.neighbor(c, d).is_some())
            .fold(0, |m, &d| m | 1 << d as u8)
    }

    /// Free cells in row-major order.
    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.blocked.len()).filter(|&i| !self.blocked[i]).map(|i| self.cell(i))
    }

    fn connected(&self) -> bool {
        let mut seen = vec![false; self.blocked.len()];
        let mut queue = VecDeque::from([self.start]);
        seen[self.index(self.start)] = true;
        while let Some(c) = queue.pop_front() {
            if c == self.goal {
                return true;
            }
            for d in Direction::ALL {
                if let Some(n) = self.neighbor(c, d) {
                    let i = self.index(n);
                    if !seen[i] {
                        seen[i] = true;
                        queue.push_back(n);
                    }
                }
            }
        }
        false
    }

    pub fn load(path: &Path) -> Result<Self, MapError> {
        let text = std::fs::read_to_string(path).map_err(|source| MapError::Io {
            path: path.display().to_string(),
            source,
        })?;
        text.parse()
    }

    pub fn save(&self, path: &Path) -> Result<(), MapError> {
        std::fs::write(path, self.to_string()).map_err(|source| MapError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// `width height`, then one row per line: `.` free, `#` obstacle, `S`
/// start, `G` goal.
impl fmt::Display for SailingMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {}", self.width, self.height)?;
        let mut row = String::with_capacity(self.width as usize);
        for y in 0..self.height {
            row.clear();
            for x in 0..self.width {
                let c = Cell::new(x, y);
                row.push(match () {
                    _ if c == self.start => 'S',
                    _ if c == self.goal => 'G',
                    _ if self.is_blocked(c) => '#',
                    _ => '.',
                });
            }
            writeln!(f, "{row}")?;
        }
        Ok(())
    }
}

impl FromStr for SailingMap {
    type Err = MapError;

    fn from_str(s: &str) -> Result<Self, MapError> {
        let err = |line: usize, message: String| MapError::Parse { line, message };
        let mut lines = s.lines();
        let header = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
        let dims: Vec<&str> = header.split_whitespace().collect();
        let [w, h] = dims[..] else {
            return Err(err(1, format!("expected `width height`, got {header:?}")));
        };
        let width: u16 = w.parse().map_err(|e| err(1, format!("width: {e}")))?;
        let height: u16 = h.parse().map_err(|e| err(1, format!("height: {e}")))?;
        let mut blocked = Vec::with_capacity(width as usize * height as usize);
        let (mut start, mut goal) = (None, None);
        for y in 0..height {
            let line_no = y as usize + 2;
            let row = lines.next().ok_or_else(|| err(line_no, "missing row".into()))?;
            if row.chars().count() != width as usize {
                return Err(err(line_no, format!("expected {width} cells, got {}", row.chars().count())));
            }
            for (x, ch) in row.chars().enumerate() {
                let c = Cell::new(x as u16, y);
                match ch {
                    '.' => blocked.push(false),
                    '#' => blocked.push(true),
                    'S' if start.is_none() => {
                        start = Some(c);
                        blocked.push(false);
                    }
                    'G' if goal.is_none() => {
                        goal = Some(c);
                        blocked.push(false);
                    }
                    'S' | 'G' => return Err(err(line_no, format!("second {ch:?} at {c}"))),
                    _ => return Err(err(line_no, format!("unexpected character {ch:?}"))),
                }
            }
        }
        if let Some((i, extra)) = lines.enumerate().find(|(_, l)| !l.trim().is_empty()) {
            return Err(err(height as usize + 2 + i, format!("trailing content {extra:?}")));
        }
        let start = start.ok_or_else(|| err(0, "no start cell".into()))?;
        let goal = goal.ok_or_else(|| err(0, "no goal cell".into()))?;
        Self::new(width, height, blocked, start, goal)
    }
}

/// Outcome of [`generate_map`].
#[derive(Clone, Debug)]
pub struct GeneratedMap {
    pub map: SailingMap,
    /// Disconnected samples discarded before this one.
    pub rejections: usize,
}

/// Blocks every cell other than start and goal independently with
/// probability `p`, resampling until the goal is reachable from the start.
pub fn generate_map<R: Rng + ?Sized>(
    width: u16,
    height: u16,
    p: f64,
    start: Cell,
    goal: Cell,
    rng: &mut R,
    max_rejections: usize,
) -> Result<GeneratedMap, MapError> {
    if !(0.0..1.0).contains(&p) {
        return Err(MapError::Probability(p));
    }
    // Validates the geometry once on the empty grid.
    SailingMap::open(width, height, start, goal)?;
    let n = width as usize * height as usize;
    for rejections in 0..=max_rejections {
        let mut blocked: Vec<bool> = (0..n).map(|_| rng.gen_bool(p)).collect();
        blocked[start.y as usize * width as usize + start.x as usize] = false;
        blocked[goal.y as usize * width as usize + goal.x as usize] = false;
        match SailingMap::new(width, height, blocked, start, goal) {
            Ok(map) => return Ok(GeneratedMap { map, rejections }),
            Err(MapError::Unreachable { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(MapError::TooManyRejections(max_rejections + 1))
}
