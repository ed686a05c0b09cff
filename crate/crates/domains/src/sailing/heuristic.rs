//! SailTowardsGoal: head for the goal ignoring the wind, and the prior
//! value it induces.

use uctaux_core::{Policy, Prior, PriorValue, StreamRng};

use super::model::move_cost;
use super::{Cell, Direction, Sailing, SailingState, C_MIN};

/// Bearing from `from` to `to` in degrees clockwise from north.
fn bearing(from: Cell, to: Cell) -> f64 {
    let east = to.x as f64 - from.x as f64;
    let north = from.y as f64 - to.y as f64;
    east.atan2(north).to_degrees()
}

/// Signed angle from `bearing` to `d` in `(-180, 180]`; positive is clockwise.
fn offset(d: Direction, bearing: f64) -> f64 {
    let mut a = (d.degrees() - bearing) % 360.0;
    if a <= -180.0 {
        a += 360.0;
    } else if a > 180.0 {
        a -= 360.0;
    }
    a
}

/// The valid action closest in angle to the exact bearing of the goal.
/// Between two equally close actions the clockwise one wins.
pub fn sail_towards_goal(cell: Cell, goal: Cell, valid: &[Direction]) -> Option<Direction> {
    let b = bearing(cell, goal);
    let mut best: Option<(Direction, f64)> = None;
    for &d in valid {
        let o = offset(d, b);
        best = match best {
            None => Some((d, o)),
            Some((_, bo)) if o.abs() < bo.abs() - 1e-9 => Some((d, o)),
            Some((_, bo)) if (o.abs() - bo.abs()).abs() <= 1e-9 && o > bo => Some((d, o)),
            keep => keep,
        };
    }
    best.map(|(d, _)| d)
}

/// Deterministic policy wrapping [`sail_towards_goal`].
#[derive(Clone, Copy, Debug, Default)]
pub struct SailTowardsGoal;

impl Policy<Sailing> for SailTowardsGoal {
    fn distribution(&self, model: &Sailing, state: &SailingState, valid: &[Direction], out: &mut Vec<(Direction, f64)>) {
        out.clear();
        out.extend(sail_towards_goal(state.cell, model.map().goal(), valid).map(|d| (d, 1.0)));
    }

    fn sample(&self, model: &Sailing, state: &SailingState, valid: &[Direction], _: &mut StreamRng) -> Option<Direction> {
        sail_towards_goal(state.cell, model.map().goal(), valid)
    }

    fn support_size(&self, _: &Sailing, _: &SailingState, valid: &[Direction]) -> usize {
        usize::from(!valid.is_empty())
    }
}

/// `n = 1`, `Q = −[C(s,a) + C_min (1 − γ^{d(s′,g)+1}) / (1 − γ)]`: the move's
/// own cost followed by the cheapest conceivable trip from `s′`, with `d`
/// the Chebyshev distance to the goal.
#[derive(Clone, Copy, Debug, Default)]
pub struct StgPrior;

impl StgPrior {
    pub fn value(model: &Sailing, state: &SailingState, action: Direction) -> f64 {
        let gamma = uctaux_core::GenerativeModel::discount(model);
        let map = model.map();
        let next = map.neighbor(state.cell, action).unwrap_or(state.cell);
        let d = next.chebyshev(map.goal());
        let rest = C_MIN * (1.0 - gamma.powi(d as i32 + 1)) / (1.0 - gamma);
        -(move_cost(state, action) + rest)
    }
}

impl PriorValue<Sailing> for StgPrior {
    fn prior(&self, model: &Sailing, state: &SailingState, action: Direction) -> Prior {
        Prior {
            visits: 1,
            value: Self::value(model, state, action),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Direction::*;

    #[test]
    fn heads_along_exact_bearing() {
        let goal = Cell::new(5, 5);
        // Directly SW of the goal.
        assert_eq!(sail_towards_goal(Cell::new(2, 8), goal, &Direction::ALL), Some(NE));
        // Due W.
        assert_eq!(sail_towards_goal(Cell::new(1, 5), goal, &[N, E, S]), Some(E));
        // NE blocked: N and E tie at 45°, clockwise wins.
        assert_eq!(sail_towards_goal(Cell::new(2, 8), goal, &[N, E, S, W]), Some(E));
        // Off-diagonal bearing: (1, 2) east-north; atan2(1, 2) ≈ 26.6°, NE is 18.4° away.
        assert_eq!(sail_towards_goal(Cell::new(4, 7), goal, &Direction::ALL), Some(NE));
        assert_eq!(sail_towards_goal(Cell::new(4, 7), goal, &[N, E]), Some(N));
        assert_eq!(sail_towards_goal(Cell::new(4, 7), goal, &[]), None);
    }

    #[test]
    fn signed_offsets_wrap() {
        assert!((offset(N, 350.0) - 10.0).abs() < 1e-12);
        assert!((offset(NW, 10.0) + 55.0).abs() < 1e-12);
        assert!((offset(S, 0.0) - 180.0).abs() < 1e-12);
    }
}
