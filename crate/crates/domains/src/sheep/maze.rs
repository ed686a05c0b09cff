//! Mazes for Sheep Savior: walls, the pen, default start cells and
//! precomputed shortest-path distances between free cells.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

/// Index of a free cell in row-major order.
pub type Pos = u8;

/// Player and NPC movement. `Stay` is the `no_move` action.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Move {
    Stay = 0,
    N,
    S,
    E,
    W,
}

impl Move {
    pub const ALL: [Move; 5] = [Move::Stay, Move::N, Move::S, Move::E, Move::W];

    fn offset(self) -> (i32, i32) {
        match self {
            Move::Stay => (0, 0),
            Move::N => (0, -1),
            Move::S => (0, 1),
            Move::E => (1, 0),
            Move::W => (-1, 0),
        }
    }
}

/// Starting cells recorded in a maze file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Starts {
    pub shepherd: Pos,
    pub dog: Pos,
    pub sheep: Pos,
    pub ghosts: [Pos; 2],
}

#[derive(Debug, Error)]
pub enum MazeError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("maze has no pen cell")]
    NoPen,
    #[error("maze has {0} free cells; at most 255 are supported")]
    TooLarge(usize),
    #[error("free cells are not all connected")]
    Disconnected,
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Maze {
    width: u16,
    height: u16,
    wall: Vec<bool>,
    /// Free-cell rank → (x, y).
    cells: Vec<(u16, u16)>,
    pen: Pos,
    starts: Option<Starts>,
    /// `step[p * 5 + m]`: where move `m` leads from `p`; blocked moves stay.
    step: Vec<Pos>,
    /// Row-major `n × n` shortest-path distances.
    dist: Vec<u8>,
}

impl Maze {
    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    pub fn free_count(&self) -> usize {
        self.cells.len()
    }

    pub fn pen(&self) -> Pos {
        self.pen
    }

    pub fn starts(&self) -> Option<Starts> {
        self.starts
    }

    pub fn coords(&self, p: Pos) -> (u16, u16) {
        self.cells[p as usize]
    }

    pub fn pos_at(&self, x: u16, y: u16) -> Option<Pos> {
        self.cells.iter().position(|&c| c == (x, y)).map(|i| i as Pos)
    }

    #[inline]
    pub fn step(&self, p: Pos, m: Move) -> Pos {
        self.step[p as usize * 5 + m as usize]
    }

    #[inline]
    pub fn dist(&self, a: Pos, b: Pos) -> u8 {
        self.dist[a as usize * self.cells.len() + b as usize]
    }

    /// Distinct cells reachable in one move, in `Stay, N, S, E, W` order.
    pub fn options(&self, p: Pos, out: &mut Vec<Pos>) {
        out.clear();
        for m in Move::ALL {
            let q = self.step(p, m);
            if !out.contains(&q) {
                out.push(q);
            }
        }
    }

    fn from_grid(width: u16, height: u16, wall: Vec<bool>, pen: (u16, u16), starts: Option<[(u16, u16); 5]>) -> Result<Self, MazeError> {
        let cells: Vec<(u16, u16)> = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .filter(|&(x, y)| !wall[y as usize * width as usize + x as usize])
            .collect();
        if cells.len() > 255 {
            return Err(MazeError::TooLarge(cells.len()));
        }
        let rank = |x: i32, y: i32| -> Option<Pos> {
            if x < 0 || y < 0 || x >= width as i32 || y >= height as i32 || wall[y as usize * width as usize + x as usize] {
                return None;
            }
            cells.iter().position(|&c| c == (x as u16, y as u16)).map(|i| i as Pos)
        };
        let mut step = Vec::with_capacity(cells.len() * 5);
        for (i, &(x, y)) in cells.iter().enumerate() {
            for m in Move::ALL {
                let (dx, dy) = m.offset();
                step.push(rank(x as i32 + dx, y as i32 + dy).unwrap_or(i as Pos));
            }
        }
        let n = cells.len();
        let mut dist = vec![u8::MAX; n * n];
        let mut queue = VecDeque::new();
        for src in 0..n {
            let row = &mut dist[src * n..(src + 1) * n];
            row[src] = 0;
            queue.push_back(src);
            while let Some(p) = queue.pop_front() {
                for m in &Move::ALL[1..] {
                    let q = step[p * 5 + *m as usize] as usize;
                    if row[q] == u8::MAX {
                        row[q] = row[p] + 1;
                        queue.push_back(q);
                    }
                }
            }
        }
        if dist.contains(&u8::MAX) {
            return Err(MazeError::Disconnected);
        }
        let at = |c: (u16, u16)| rank(c.0 as i32, c.1 as i32).expect("marker on a free cell");
        Ok(Self {
            width,
            height,
            pen: at(pen),
            starts: starts.map(|s| Starts {
                shepherd: at(s[0]),
                dog: at(s[1]),
                sheep: at(s[2]),
                ghosts: [at(s[3]), at(s[4])],
            }),
            wall,
            cells,
            step,
            dist,
        })
    }

    pub fn load(path: &Path) -> Result<Self, MazeError> {
        let io = |source| MazeError::Io {
            path: path.display().to_string(),
            source,
        };
        std::fs::read_to_string(path).map_err(io)?.parse()
    }

    pub fn save(&self, path: &Path) -> Result<(), MazeError> {
        std::fs::write(path, self.to_string()).map_err(|source| MazeError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// The 9×9 desk-scale maze with 37 free cells.
    pub fn reference() -> Self {
        REFERENCE.parse().expect("reference maze is valid")
    }

    /// A maze whose pen lies past a narrow corridor shared with the ghosts.
    pub fn choke_point() -> Self {
        CHOKE_POINT.parse().expect("choke-point maze is valid")
    }
}

pub const REFERENCE: &str = "\
#########
#1..#..P#
#.#.#.#.#
#.2.....#
###.#.###
#g..s..g#
#.#.#.#.#
#.......#
#########
";

pub const CHOKE_POINT: &str = "\
#########
#1.....2#
#.#####.#
#...s...#
####.####
#g..g...#
#.#####.#
#......P#
#########
";

/// One row per line: `.` free, `#` wall, `P` pen, `1` shepherd, `2` dog,
/// `s` sheep, `g` ghost (twice). Start markers are optional as a group.
impl fmt::Display for Maze {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut marks = vec![None; self.cells.len()];
        marks[self.pen as usize] = Some('P');
        if let Some(s) = self.starts {
            marks[s.shepherd as usize] = Some('1');
            marks[s.dog as usize] = Some('2');
            marks[s.sheep as usize] = Some('s');
            marks[s.ghosts[0] as usize] = Some('g');
            marks[s.ghosts[1] as usize] = Some('g');
        }
        let mut row = String::with_capacity(self.width as usize);
        for y in 0..self.height {
            row.clear();
            for x in 0..self.width {
                let i = y as usize * self.width as usize + x as usize;
                row.push(match self.wall[i] {
                    true => '#',
                    false => {
                        let p = self.cells.iter().position(|&c| c == (x, y)).expect("free cell");
                        marks[p].unwrap_or('.')
                    }
                });
            }
            writeln!(f, "{row}")?;
        }
        Ok(())
    }
}

impl FromStr for Maze {
    type Err = MazeError;

    fn from_str(s: &str) -> Result<Self, MazeError> {
        let err = |line: usize, message: String| MazeError::Parse { line, message };
        let rows: Vec<&str> = s.lines().take_while(|l| !l.is_empty()).collect();
        if rows.is_empty() {
            return Err(err(1, "empty maze".into()));
        }
        let width = rows[0].chars().count();
        let height = rows.len();
        if width > u16::MAX as usize || height > u16::MAX as usize {
            return Err(err(1, "maze too large".into()));
        }
        let mut wall = Vec::with_capacity(width * height);
        let mut pen = None;
        let (mut shepherd, mut dog, mut sheep, mut ghosts) = (None, None, None, Vec::new());
        for (y, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(err(y + 1, format!("expected {width} cells, got {}", row.chars().count())));
            }
            for (x, ch) in row.chars().enumerate() {
                let c = (x as u16, y as u16);
                let once = |slot: &mut Option<(u16, u16)>| -> Result<(), MazeError> {
                    match slot.replace(c) {
                        None => Ok(()),
                        Some(_) => Err(err(y + 1, format!("second {ch:?}"))),
                    }
                };
                match ch {
                    '#' => {}
                    '.' => {}
                    'P' => once(&mut pen)?,
                    '1' => once(&mut shepherd)?,
                    '2' => once(&mut dog)?,
                    's' => once(&mut sheep)?,
                    'g' if ghosts.len() < 2 => ghosts.push(c),
                    'g' => return Err(err(y + 1, "more than two ghosts".into())),
                    _ => return Err(err(y + 1, format!("unexpected character {ch:?}"))),
                }
                wall.push(ch == '#');
            }
        }
        if let Some(extra) = s.lines().skip(height).find(|l| !l.trim().is_empty()) {
            return Err(err(height + 1, format!("trailing content {extra:?}")));
        }
        let pen = pen.ok_or(MazeError::NoPen)?;
        let starts = match (shepherd, dog, sheep, ghosts.len()) {
            (Some(a), Some(b), Some(c), 2) => Some([a, b, c, ghosts[0], ghosts[1]]),
            (None, None, None, 0) => None,
            _ => return Err(err(0, "start markers must include 1, 2, s and two g, or none".into())),
        };
        Self::from_grid(width as u16, height as u16, wall, pen, starts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_maze_shape() {
        let m = Maze::reference();
        assert_eq!((m.width(), m.height()), (9, 9));
        assert_eq!(m.free_count(), 37);
        assert_eq!(m.coords(m.pen()), (7, 1));
        assert_eq!(m.to_string(), REFERENCE);
        assert_eq!(Maze::choke_point().to_string(), CHOKE_POINT);
    }

    #[test]
    fn distances_and_moves() {
        let m = Maze::reference();
        let shepherd = m.starts().unwrap().shepherd;
        assert_eq!(m.coords(shepherd), (1, 1));
        // Wall to the north: blocked moves stay put.
        assert_eq!(m.step(shepherd, Move::N), shepherd);
        assert_eq!(m.coords(m.step(shepherd, Move::E)), (2, 1));
        let mut opts = Vec::new();
        m.options(shepherd, &mut opts);
        assert_eq!(opts.len(), 3);
        // (1,1) → (7,1): around the wall at (4,1) via row 3.
        assert_eq!(m.dist(shepherd, m.pen()), 10);
        for a in 0..m.free_count() as Pos {
            assert_eq!(m.dist(a, a), 0);
            for b in 0..m.free_count() as Pos {
                assert_eq!(m.dist(a, b), m.dist(b, a));
            }
        }
    }

    #[test]
    fn rejects_malformed_mazes() {
        for bad in ["", "#.#\n#..\n", "...\n", "P.x\n", "P1g\n", "PP.\n", "P.#\n###\n.#.\n"] {
            assert!(bad.parse::<Maze>().is_err(), "{bad:?}");
        }
        let no_starts: Maze = "P..\n...\n".parse().unwrap();
        assert!(no_starts.starts().is_none());
    }
}
