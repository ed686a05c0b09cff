//! Fully enumerated finite MDPs.

use rand::Rng;
use thiserror::Error;

use crate::mdp::{DomainError, GenerativeModel};
use crate::rng::StreamRng;

/// One entry of `T_a(s, ·)` with its reward `R_a(s, s')`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outcome {
    pub next: u32,
    pub prob: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MdpError {
    #[error("discount {0} outside [0, 1)")]
    Discount(f64),
    #[error("state {state} or action {action} out of range")]
    OutOfRange { state: u32, action: u32 },
    #[error("probability {prob} outside [0, 1] at state {state}, action {action}")]
    Probability { state: u32, action: u32, prob: f64 },
    #[error("probabilities at state {state}, action {action} sum to {sum}")]
    NotNormalized { state: u32, action: u32, sum: f64 },
    #[error("terminal state {0} has outgoing transitions")]
    TerminalTransitions(u32),
    #[error("non-terminal state {0} has no valid action")]
    NoValidActions(u32),
    #[error("more than u32::MAX transitions")]
    TooLarge,
}

/// `(S, A, T, R, γ)` with a terminal mask, stored as a CSR table keyed by
/// `state * n_actions + action`. An action is valid at a state iff it has at
/// least one outcome there.
#[derive(Clone, Debug)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    discount: f64,
    terminal: Vec<bool>,
    offsets: Vec<u32>,
    outcomes: Vec<Outcome>,
}

impl TabularMdp {
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn is_terminal_index(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn outcomes(&self, s: usize, a: usize) -> &[Outcome] {
        let k = s * self.n_actions + a;
        &self.outcomes[self.offsets[k] as usize..self.offsets[k + 1] as usize]
    }

    pub fn is_valid(&self, s: usize, a: usize) -> bool {
        let k = s * self.n_actions + a;
        self.offsets[k] != self.offsets[k + 1]
    }

    pub fn valid_actions(&self, s: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_actions).filter(move |&a| self.is_valid(s, a))
    }

    pub fn transition_count(&self) -> usize {
        self.outcomes.len()
    }

    /// `max |R_a(s, s')|` over all entries.
    pub fn max_abs_reward(&self) -> f64 {
        self.outcomes.iter().map(|o| o.reward.abs()).fold(0.0, f64::max)
    }
}

impl GenerativeModel for TabularMdp {
    type State = u32;
    type Action = u32;

    fn discount(&self) -> f64 {
        self.discount
    }

    fn is_terminal(&self, state: &u32) -> bool {
        self.terminal[*state as usize]
    }

    fn actions(&self, state: &u32, out: &mut Vec<u32>) {
        out.clear();
        out.extend(self.valid_actions(*state as usize).map(|a| a as u32));
    }

    fn step(&self, state: &u32, action: u32, rng: &mut StreamRng) -> Result<(u32, f64), DomainError> {
        let (s, a) = (*state as usize, action as usize);
        if a >= self.n_actions || !self.is_valid(s, a) {
            return Err(DomainError::invalid_action(state, &action));
        }
        let outs = self.outcomes(s, a);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for o in outs {
            if o.prob <= 0.0 {
                continue;
            }
            acc += o.prob;
            if u < acc {
                return Ok((o.next, o.reward));
            }
        }
        let last = outs.iter().rev().find(|o| o.prob > 0.0).unwrap_or(&outs[outs.len() - 1]);
        Ok((last.next, last.reward))
    }

    fn reward_bounds(&self) -> Option<(f64, f64)> {
        let lo = self.outcomes.iter().map(|o| o.reward).fold(f64::INFINITY, f64::min);
        let hi = self.outcomes.iter().map(|o| o.reward).fold(f64::NEG_INFINITY, f64::max);
        (lo <= hi).then_some((lo, hi))
    }
}

/// Incremental constructor for [`TabularMdp`].
#[derive(Clone, Debug)]
pub struct TabularMdpBuilder {
    n_states: usize,
    n_actions: usize,
    discount: f64,
    terminal: Vec<bool>,
    entries: Vec<(u64, Outcome)>,
    out_of_range: Option<(u32, u32)>,
}

impl TabularMdpBuilder {
    pub fn new(n_states: usize, n_actions: usize, discount: f64) -> Self {
        Self {
            n_states,
            n_actions,
            discount,
            terminal: vec![false; n_states],
            entries: Vec::new(),
            out_of_range: None,
        }
    }

    pub fn reserve(&mut self, additional: usize) {
        self.entries.reserve(additional);
    }

    pub fn set_terminal(&mut self, state: u32) -> &mut Self {
        match self.terminal.get_mut(state as usize) {
            Some(t) => *t = true,
            None => {
                self.out_of_range.get_or_insert((state, 0));
            }
        }
        self
    }

    /// Adds `T_a(s, next) = prob` with reward `reward`. Repeated `next`
    /// values are kept as separate entries.
    pub fn add(&mut self, state: u32, action: u32, next: u32, prob: f64, reward: f64) -> &mut Self {
        let in_range = (state as usize) < self.n_states && (action as usize) < self.n_actions && (next as usize) < self.n_states;
        if !in_range {
            // Reported by `build`.
            self.out_of_range.get_or_insert((state, action));
            return self;
        }
        let key = state as u64 * self.n_actions as u64 + action as u64;
        self.entries.push((key, Outcome { next, prob, reward }));
        self
    }

    pub fn build(mut self) -> Result<TabularMdp, MdpError> {
        if !(0.0..1.0).contains(&self.discount) {
            return Err(MdpError::Discount(self.discount));
        }
        if self.entries.len() > u32::MAX as usize {
            return Err(MdpError::TooLarge);
        }
        if let Some((state, action)) = self.out_of_range {
            return Err(MdpError::OutOfRange { state, action });
        }
        // Stable, and linear on already-ordered input.
        self.entries.sort_by_key(|(k, _)| *k);

        let n_keys = self.n_states * self.n_actions;
        let mut offsets = vec![0u32; n_keys + 1];
        for (k, _) in &self.entries {
            offsets[*k as usize + 1] += 1;
        }
        for k in 0..n_keys {
            offsets[k + 1] += offsets[k];
        }
        let outcomes: Vec<Outcome> = self.entries.into_iter().map(|(_, o)| o).collect();
        let mdp = TabularMdp {
            n_states: self.n_states,
            n_actions: self.n_actions,
            discount: self.discount,
            terminal: self.terminal,
            offsets,
            outcomes,
        };
        mdp.validate()?;
        Ok(mdp)
    }
}

impl TabularMdp {
    fn validate(&self) -> Result<(), MdpError> {
        for s in 0..self.n_states {
            let mut any = false;
            for a in 0..self.n_actions {
                let outs = self.outcomes(s, a);
                if outs.is_empty() {
                    continue;
                }
                any = true;
                if self.terminal[s] {
                    return Err(MdpError::TerminalTransitions(s as u32));
                }
                let mut sum = 0.0;
                for o in outs {
                    if !(0.0..=1.0).contains(&o.prob) {
                        return Err(MdpError::Probability {
                            state: s as u32,
                            action: a as u32,
                            prob: o.prob,
                        });
                    }
                    sum += o.prob;
                }
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(MdpError::NotNormalized {
                        state: s as u32,
                        action: a as u32,
                        sum,
                    });
                }
            }
            if !any && !self.terminal[s] {
                return Err(MdpError::NoValidActions(s as u32));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn rejects_unnormalized_rows() {
        let mut b = TabularMdpBuilder::new(2, 1, 0.9);
        b.set_terminal(1);
        b.add(0, 0, 1, 0.5, 0.0);
        assert!(matches!(b.build(), Err(MdpError::NotNormalized { .. })));
    }

    #[test]
    fn rejects_transitions_out_of_terminal() {
        let mut b = TabularMdpBuilder::new(2, 1, 0.9);
        b.set_terminal(1);
        b.add(0, 0, 1, 1.0, 0.0).add(1, 0, 0, 1.0, 0.0);
        assert_eq!(b.build().unwrap_err(), MdpError::TerminalTransitions(1));
    }

    #[test]
    fn rejects_dead_end_states() {
        let b = TabularMdpBuilder::new(1, 1, 0.9);
        assert_eq!(b.build().unwrap_err(), MdpError::NoValidActions(0));
    }

    #[test]
    fn rejects_bad_probability_and_discount() {
        let mut b = TabularMdpBuilder::new(2, 1, 0.9);
        b.set_terminal(1);
        b.add(0, 0, 1, 1.5, 0.0).add(0, 0, 1, -0.5, 0.0);
        assert!(matches!(b.build(), Err(MdpError::Probability { .. })));
        assert!(matches!(TabularMdpBuilder::new(1, 1, 1.0).build(), Err(MdpError::Discount(_))));
    }

    #[test]
    fn sampling_follows_the_table() {
        let mut b = TabularMdpBuilder::new(3, 2, 0.9);
        b.set_terminal(1).set_terminal(2);
        b.add(0, 0, 1, 0.25, 1.0).add(0, 0, 2, 0.75, 2.0).add(0, 1, 1, 1.0, 0.0);
        let mdp = b.build().unwrap();
        let mut acts = Vec::new();
        mdp.actions(&0, &mut acts);
        assert_eq!(acts, vec![0, 1]);
        let mut rng = stream(7, Stream::Model);
        let n = 40_000;
        let hits = (0..n).filter(|_| mdp.step(&0, 0, &mut rng).unwrap().0 == 1).count();
        let freq = hits as f64 / n as f64;
        // 3σ binomial band.
        let sigma = (0.25 * 0.75 / n as f64).sqrt();
        assert!((freq - 0.25).abs() < 3.0 * sigma, "freq {freq}");
        assert!(mdp.step(&1, 0, &mut rng).is_err());
        assert_eq!(mdp.reward_bounds(), Some((0.0, 2.0)));
    }
}
