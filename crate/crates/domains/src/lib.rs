//! Benchmark domains for the planner: obstructed sailing and Sheep Savior.

pub mod sailing;
pub mod sheep;
