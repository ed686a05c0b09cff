//! Sheep Savior: two players herd a sheep into its pen while two ghosts
//! try to catch it.

mod maze;
mod model;
mod subtask;

pub use maze::{Maze, MazeError, Move, Pos, Starts, CHOKE_POINT, REFERENCE};
pub use model::{
    CompoundAction, Events, SheepParams, SheepSavior, SheepState, ShepherdAction, Status, GHOST_HP, KILL_REWARD, PEN_REWARD,
    SHEEP_KILLED_REWARD,
};
pub use subtask::{embed, project, subtask_mdp, GoalAveraging, SolveStats, SubtaskKind, Subtasks};
