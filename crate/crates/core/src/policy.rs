//! Possibly stochastic policies and prior value functions.

use rand::Rng;

use crate::mdp::GenerativeModel;
use crate::rng::StreamRng;

/// A state → action-distribution map.
///
/// Implementations receive the valid actions at the state (in model order)
/// so they never need to recompute them.
pub trait Policy<M: GenerativeModel>: Send + Sync {
    /// Clears `out` and fills it with `(action, probability)` pairs summing to one.
    fn distribution(&self, model: &M, state: &M::State, valid: &[M::Action], out: &mut Vec<(M::Action, f64)>);

    /// Draws one action. Consumes exactly one `f64` from `rng` unless
    /// overridden by a deterministic policy.
    fn sample(&self, model: &M, state: &M::State, valid: &[M::Action], rng: &mut StreamRng) -> Option<M::Action> {
        let mut dist = Vec::with_capacity(valid.len());
        self.distribution(model, state, valid, &mut dist);
        pick(dist.iter().copied(), rng.gen::<f64>())
    }

    /// Number of actions with positive probability (κ).
    fn support_size(&self, model: &M, state: &M::State, valid: &[M::Action]) -> usize {
        let mut dist = Vec::with_capacity(valid.len());
        self.distribution(model, state, valid, &mut dist);
        dist.iter().filter(|(_, p)| *p > 0.0).count()
    }
}

/// Inverse-CDF draw: the first action whose cumulative probability exceeds
/// `u`. Falls back to the last positive-probability action when rounding
/// leaves the total just below `u`.
pub fn pick<A: Copy>(dist: impl IntoIterator<Item = (A, f64)>, u: f64) -> Option<A> {
    let mut acc = 0.0;
    let mut last = None;
    for (a, p) in dist {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = Some(a);
        if u < acc {
            return Some(a);
        }
    }
    last
}

/// Uniform over the valid actions. The default rollout policy.
#[derive(Clone, Copy, Debug, Default)]
pub struct UniformRandom;

impl<M: GenerativeModel> Policy<M> for UniformRandom {
    fn distribution(&self, _: &M, _: &M::State, valid: &[M::Action], out: &mut Vec<(M::Action, f64)>) {
        out.clear();
        let p = 1.0 / valid.len() as f64;
        out.extend(valid.iter().map(|&a| (a, p)));
    }

    fn sample(&self, _: &M, _: &M::State, valid: &[M::Action], rng: &mut StreamRng) -> Option<M::Action> {
        // Same arithmetic as the default path, without the allocation.
        let p = 1.0 / valid.len() as f64;
        pick(valid.iter().map(|&a| (a, p)), rng.gen::<f64>())
    }

    fn support_size(&self, _: &M, _: &M::State, valid: &[M::Action]) -> usize {
        valid.len()
    }
}

/// Prior statistics for a freshly created arm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prior {
    /// `n_prior(s, a)`.
    pub visits: u32,
    /// `Q_prior(s, a)`.
    pub value: f64,
}

impl Prior {
    pub const ZERO: Prior = Prior { visits: 0, value: 0.0 };
}

/// Initial `(n, Q)` for new ordinary arms.
pub trait PriorValue<M: GenerativeModel>: Send + Sync {
    fn prior(&self, model: &M, state: &M::State, action: M::Action) -> Prior;
}

/// `(0, 0)` everywhere; indistinguishable from having no prior at all.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroPrior;

impl<M: GenerativeModel> PriorValue<M> for ZeroPrior {
    fn prior(&self, _: &M, _: &M::State, _: M::Action) -> Prior {
        Prior::ZERO
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pick_walks_the_cdf() {
        let d = [(0u8, 0.25), (1, 0.5), (2, 0.25)];
        assert_eq!(pick(d, 0.0), Some(0));
        assert_eq!(pick(d, 0.2499), Some(0));
        assert_eq!(pick(d, 0.25), Some(1));
        assert_eq!(pick(d, 0.9), Some(2));
        assert_eq!(pick(d, 1.0), Some(2));
    }

    #[test]
    fn pick_skips_zero_mass() {
        let d = [(0u8, 0.0), (1, 1.0), (2, 0.0)];
        assert_eq!(pick(d, 0.0), Some(1));
        assert_eq!(pick(d, 0.999), Some(1));
        assert_eq!(pick(Vec::<(u8, f64)>::new(), 0.5), None);
    }
}
