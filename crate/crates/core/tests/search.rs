use std::sync::Arc;

use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use uctaux_core::rng::{stream, Stream};
use uctaux_core::solver::{extract_greedy, stochastic_optimal, DEFAULT_TOLERANCE};
use uctaux_core::uct::TraceEvent;
use uctaux_core::{
    plan_episode, rollout, search, value_iteration, ArmKind, GenerativeModel, Prior, PriorValue, Recommendation, SearchConfig,
    SearchStreams, SearchTree, StreamRng, TabularMdp, TabularMdpBuilder, UniformRandom, ZeroPrior,
};

/// `0 → 1 → … → len` with one action and reward 1 per step; `len` is terminal.
fn chain(len: u32, gamma: f64) -> TabularMdp {
    let mut b = TabularMdpBuilder::new(len as usize + 1, 1, gamma);
    b.set_terminal(len);
    for s in 0..len {
        b.add(s, 0, s + 1, 1.0, 1.0);
    }
    b.build().unwrap()
}

/// Root with two actions into a terminal state: `a0` pays 1, `a1` pays 0.
fn two_armed(gamma: f64) -> TabularMdp {
    let mut b = TabularMdpBuilder::new(2, 2, gamma);
    b.set_terminal(1);
    b.add(0, 0, 1, 1.0, 1.0).add(0, 1, 1, 1.0, 0.0);
    b.build().unwrap()
}

/// Random MDP: every non-terminal state has 1..=4 valid actions with 1..=3
/// outcomes each; roughly one state in six is terminal.
fn random_mdp(seed: u64, n_states: usize, gamma: f64) -> TabularMdp {
    let mut rng = StreamRng::seed_from_u64(seed);
    let n_actions = 4;
    let mut b = TabularMdpBuilder::new(n_states, n_actions, gamma);
    let terminal: Vec<bool> = (0..n_states).map(|s| s > 0 && rng.gen_bool(1.0 / 6.0)).collect();
    for s in 0..n_states {
        if terminal[s] {
            b.set_terminal(s as u32);
            continue;
        }
        let k = rng.gen_range(1..=n_actions);
        for a in 0..k {
            let m = rng.gen_range(1..=3);
            let mut w: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..1.0)).collect();
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= total);
            let fix: f64 = 1.0 - w[..m - 1].iter().sum::<f64>();
            w[m - 1] = fix;
            for p in w {
                let next = rng.gen_range(0..n_states) as u32;
                b.add(s as u32, a as u32, next, p, rng.gen_range(-1.0..1.0));
            }
        }
    }
    b.build().unwrap()
}

fn run_traced(mdp: &TabularMdp, config: &SearchConfig<TabularMdp>, seed: u64) -> Vec<TraceEvent<u32>> {
    let mut tree = SearchTree::new(mdp, 0);
    tree.enable_trace();
    let mut streams = SearchStreams::new(seed);
    tree.grow(mdp, config, &mut streams, config.budget).unwrap();
    tree.check_invariants(mdp, config).unwrap();
    tree.take_trace()
}

#[test]
fn fresh_root_after_one_simulation() {
    let mdp = random_mdp(11, 20, 0.9);
    let config = SearchConfig::new(1.0, 20, 1);
    let mut tree = SearchTree::new(&mdp, 0);
    tree.grow(&mdp, &config, &mut SearchStreams::new(1), 1).unwrap();
    let root = tree.node(SearchTree::<TabularMdp>::ROOT);
    assert!(root.is_internal());
    assert_eq!(root.visits(), 1);
    let arms = tree.arms_of(SearchTree::<TabularMdp>::ROOT);
    assert_eq!(arms.iter().filter(|a| a.visits() == 1).count(), 1);
    assert_eq!(arms.iter().map(|a| a.visits()).sum::<u64>(), 1);
    tree.check_invariants(&mdp, &config).unwrap();
}

#[test]
fn fresh_root_with_prior_mass() {
    struct One;
    impl PriorValue<TabularMdp> for One {
        fn prior(&self, _: &TabularMdp, _: &u32, _: u32) -> Prior {
            Prior { visits: 1, value: -2.0 }
        }
    }
    let mdp = two_armed(0.99);
    let config = SearchConfig::new(1.0, 10, 1).with_prior(Arc::new(One));
    let mut tree = SearchTree::new(&mdp, 0);
    tree.grow(&mdp, &config, &mut SearchStreams::new(5), 1).unwrap();
    let root = tree.node(SearchTree::<TabularMdp>::ROOT);
    assert_eq!(root.visits(), 1);
    assert_eq!(root.prior_mass(), 2);
    assert_eq!(root.total_visits(), 3);
    let arms = tree.arms_of(SearchTree::<TabularMdp>::ROOT);
    assert_eq!(arms.iter().filter(|a| a.visits() == 2).count(), 1);
    tree.check_invariants(&mdp, &config).unwrap();
}

#[test]
fn chain_value_converges_to_hand_sum() {
    let mdp = chain(3, 0.5);
    let config = SearchConfig::new(1.0, 10, 50);
    let mut tree = SearchTree::new(&mdp, 0);
    tree.grow(&mdp, &config, &mut SearchStreams::new(0), 50).unwrap();
    let arm = &tree.arms_of(SearchTree::<TabularMdp>::ROOT)[0];
    assert_relative_eq!(arm.value(), 1.75, epsilon = 1e-12);
    assert_eq!(arm.visits(), 50);
    tree.check_invariants(&mdp, &config).unwrap();
}

#[test]
fn horizon_truncates_without_bootstrap() {
    let mdp = chain(10, 0.5);
    let config = SearchConfig::new(1.0, 2, 40);
    let mut tree = SearchTree::new(&mdp, 0);
    tree.grow(&mdp, &config, &mut SearchStreams::new(0), 40).unwrap();
    assert_relative_eq!(tree.arms_of(SearchTree::<TabularMdp>::ROOT)[0].value(), 1.5, epsilon = 1e-12);
    tree.check_invariants(&mdp, &config).unwrap();
}

#[test]
fn two_armed_recommends_paying_arm() {
    let mdp = two_armed(0.99);
    for seed in 0..20 {
        let config = SearchConfig::new(1.0, 10, 500);
        let out = search(&mdp, &0, &config, &mut SearchStreams::new(seed)).unwrap();
        assert_eq!(out.action, 0);
        assert_eq!(out.kind, ArmKind::Ordinary);
        assert_eq!(out.diagnostics.root_arms.len(), 2);
        assert_eq!(out.diagnostics.root_arms.iter().map(|a| a.visits).sum::<u64>(), 500);
        // Root, two arms, and the terminal state reached through each arm.
        assert_eq!(out.diagnostics.tree_nodes, 5);
    }
}

#[test]
fn budget_one_recommendations() {
    let mdp = two_armed(0.99);
    let mut seen = [false; 2];
    for seed in 0..40 {
        let config = SearchConfig::new(1.0, 10, 1).with_recommendation(Recommendation::HighestVisits);
        let out = search(&mdp, &0, &config, &mut SearchStreams::new(seed)).unwrap();
        let visited = out.diagnostics.root_arms.iter().position(|a| a.visits == 1).unwrap();
        assert_eq!(out.action as usize, visited);
        seen[visited] = true;
    }
    assert_eq!(seen, [true, true], "first play should be uniform over unvisited arms");

    // Highest value: a visited a1 has Q = 0, tying with unvisited a0.
    let mut picks = [0usize; 2];
    for seed in 0..400 {
        let config = SearchConfig::new(1.0, 10, 1);
        let mut streams = SearchStreams::new(seed);
        let out = search(&mdp, &0, &config, &mut streams).unwrap();
        if out.diagnostics.root_arms[1].visits == 1 {
            picks[out.action as usize] += 1;
        } else {
            assert_eq!(out.action, 0);
        }
    }
    assert!(picks[0] > 50 && picks[1] > 50, "{picks:?}");
}

#[test]
fn rollout_examples() {
    let mut streams = SearchStreams::new(3);
    let mdp = chain(3, 0.5);
    assert_eq!(rollout(&mdp, &3, 5, &UniformRandom, &mut streams).unwrap(), 0.0);
    assert_eq!(rollout(&mdp, &0, 0, &UniformRandom, &mut streams).unwrap(), 0.0);
    assert_eq!(rollout(&mdp, &0, 5, &UniformRandom, &mut streams).unwrap(), 1.75);

    let mut b = TabularMdpBuilder::new(2, 1, 0.99);
    b.set_terminal(1).add(0, 0, 1, 1.0, 3.0);
    let one_step = b.build().unwrap();
    assert_eq!(rollout(&one_step, &0, 5, &UniformRandom, &mut streams).unwrap(), 3.0);
}

#[test]
fn expansion_adds_one_auxiliary_arm_for_deterministic_policy() {
    let mut b = TabularMdpBuilder::new(2, 4, 0.9);
    b.set_terminal(1);
    for a in 0..4 {
        b.add(0, a, 1, 1.0, a as f64);
    }
    let mdp = b.build().unwrap();
    let solved = value_iteration(&mdp, DEFAULT_TOLERANCE, 1000).unwrap();
    let greedy = Arc::new(extract_greedy(&solved));

    let plain = SearchConfig::new(1.0, 5, 1);
    let mut tree = SearchTree::new(&mdp, 0);
    tree.expand_leaf(0, &mdp, &plain).unwrap();
    assert_eq!(tree.arms_of(0).len(), 4);
    assert!(tree.arms_of(0).iter().all(|a| a.visits() == 0 && a.value() == 0.0));
    assert!(tree.expand_leaf(0, &mdp, &plain).is_err());

    let aux = SearchConfig::new(1.0, 5, 1).with_aux_policy(greedy);
    let mut tree = SearchTree::new(&mdp, 0);
    tree.expand_leaf(0, &mdp, &aux).unwrap();
    let arms = tree.arms_of(0);
    assert_eq!(arms.len(), 5);
    let aux_arms: Vec<_> = arms.iter().filter(|a| a.is_auxiliary()).collect();
    assert_eq!(aux_arms.len(), 1);
    assert_eq!(aux_arms[0].action(), 3);

    // A stochastic policy with full support adds one auxiliary arm per action.
    let so = Arc::new(stochastic_optimal(&solved, 0.5));
    let mut tree = SearchTree::new(&mdp, 0);
    tree.expand_leaf(0, &mdp, &SearchConfig::new(1.0, 5, 1).with_aux_policy(so))
        .unwrap();
    assert_eq!(tree.arms_of(0).len(), 8);
}

#[test]
fn auxiliary_arm_estimates_policy_value() {
    // Chain where the only action pays 1 each step; the auxiliary arm follows
    // the same action, so both root arms converge to the same value.
    let mdp = chain(4, 0.5);
    let solved = value_iteration(&mdp, DEFAULT_TOLERANCE, 1000).unwrap();
    let config = SearchConfig::new(1.0, 10, 200).with_aux_policy(Arc::new(extract_greedy(&solved)));
    let mut tree = SearchTree::new(&mdp, 0);
    let mut streams = SearchStreams::new(4);
    for _ in 0..200 {
        tree.simulate(&mdp, &config, &mut streams).unwrap();
        tree.check_invariants(&mdp, &config).unwrap();
    }
    let arms = tree.arms_of(SearchTree::<TabularMdp>::ROOT);
    assert_eq!(arms.len(), 2);
    for arm in arms {
        assert_relative_eq!(arm.value(), 1.875, epsilon = 1e-12);
        assert!(arm.visits() > 0);
    }
    assert!(arms[1].children().is_empty());
}

#[test]
fn variants_degenerate_to_vanilla_bit_for_bit() {
    for mdp_seed in 0..3 {
        let mdp = random_mdp(100 + mdp_seed, 60, 0.95);
        let solved = value_iteration(&mdp, DEFAULT_TOLERANCE, 100_000).unwrap();
        let uniform_tabular = Arc::new(stochastic_optimal(&solved, 0.0));
        for seed in 0..20 {
            let vanilla = SearchConfig::new(2.0, 30, 300);
            let reference = run_traced(&mdp, &vanilla, seed);
            assert!(reference.len() > 300);

            let zero_prior = vanilla.clone().with_prior(Arc::new(ZeroPrior));
            assert_eq!(run_traced(&mdp, &zero_prior, seed), reference);
            let uniform_rollout = vanilla.clone().with_rollout_policy(Arc::new(UniformRandom));
            assert_eq!(run_traced(&mdp, &uniform_rollout, seed), reference);
            let mixture_rollout = vanilla.clone().with_rollout_policy(uniform_tabular.clone());
            assert_eq!(run_traced(&mdp, &mixture_rollout, seed), reference);
        }
    }
}

#[test]
fn plan_episode_terminal_start_and_determinism() {
    let mdp = random_mdp(7, 40, 0.9);
    let config = SearchConfig::new(1.0, 20, 100);
    let mut env = stream(1, Stream::Environment);
    let terminal = (0..40u32).find(|s| mdp.is_terminal(s)).unwrap();
    let rec = plan_episode(&mdp, &terminal, &config, 50, &mut env, &mut SearchStreams::new(1)).unwrap();
    assert_eq!(rec.steps, 0);
    assert_eq!(rec.discounted_return, 0.0);
    assert_eq!(rec.total_tree_nodes, 0);

    let run = || {
        let mut env = stream(9, Stream::Environment);
        let mut rec = plan_episode(&mdp, &0, &config, 30, &mut env, &mut SearchStreams::new(9)).unwrap();
        rec.wall_ms = 0.0;
        rec
    };
    let a = run();
    assert_eq!(a, run());
    assert!(a.steps > 0);
    assert!(a.mean_tree_nodes > 0.0);
}

#[test]
fn search_rejects_bad_inputs() {
    let mdp = chain(2, 0.5);
    assert!(search(&mdp, &2, &SearchConfig::new(1.0, 5, 10), &mut SearchStreams::new(0)).is_err());
    assert!(search(&mdp, &0, &SearchConfig::new(0.0, 5, 10), &mut SearchStreams::new(0)).is_err());
    assert!(search(&mdp, &0, &SearchConfig::new(1.0, 0, 10), &mut SearchStreams::new(0)).is_err());
    assert!(search(&mdp, &0, &SearchConfig::new(1.0, 5, 0), &mut SearchStreams::new(0)).is_err());
}

#[test]
fn converges_to_optimal_root_action_on_random_mdps() {
    // Near-ties in Q* need far larger budgets to separate, so count only
    // clear mistakes and bound the regret of the rest.
    let mut suboptimal = 0;
    for seed in 0..20 {
        let mdp = random_mdp(200 + seed, 30, 0.8);
        let solved = value_iteration(&mdp, 1e-10, 100_000).unwrap();
        let q = solved.q_row(0);
        let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let config = SearchConfig::new(2.0, 30, 20_000);
        let out = search(&mdp, &0, &config, &mut SearchStreams::new(seed)).unwrap();
        let gap = best - q[out.action as usize];
        assert!(gap < 0.15, "seed {seed}: regret {gap}");
        if gap > 1e-6 {
            suboptimal += 1;
        }
    }
    assert!(suboptimal <= 3, "{suboptimal} of 20 searches chose a suboptimal root action");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn invariants_hold_after_every_simulation(
        mdp_seed in 0u64..1000,
        seed in 0u64..1000,
        use_prior in any::<bool>(),
        aux_weight in prop::option::of(0.0f64..=1.0),
        greedy_rollout in any::<bool>(),
        horizon in 1usize..25,
    ) {
        let mdp = random_mdp(mdp_seed, 25, 0.9);
        let solved = value_iteration(&mdp, DEFAULT_TOLERANCE, 100_000).unwrap();
        let mut config = SearchConfig::new(1.5, horizon, 150);
        if use_prior {
            struct FromQ(Vec<f64>, usize);
            impl PriorValue<TabularMdp> for FromQ {
                fn prior(&self, _: &TabularMdp, s: &u32, a: u32) -> Prior {
                    Prior { visits: 3, value: self.0[*s as usize * self.1 + a as usize] }
                }
            }
            config = config.with_prior(Arc::new(FromQ(solved.q.clone(), solved.n_actions)));
        }
        if let Some(p) = aux_weight {
            config = config.with_aux_policy(Arc::new(stochastic_optimal(&solved, p)));
        }
        if greedy_rollout {
            config = config.with_rollout_policy(Arc::new(extract_greedy(&solved)));
        }
        let mut tree = SearchTree::new(&mdp, 0);
        let mut streams = SearchStreams::new(seed);
        let mut last: Vec<u64> = Vec::new();
        for _ in 0..config.budget {
            tree.simulate(&mdp, &config, &mut streams).unwrap();
            if let Err(e) = tree.check_invariants(&mdp, &config) {
                return Err(TestCaseError::fail(e));
            }
            let visits: Vec<u64> = tree.nodes().map(|(_, n)| n.visits()).collect();
            prop_assert!(visits.iter().zip(&last).all(|(a, b)| a >= b));
            last = visits;
        }
        prop_assert_eq!(tree.node(0).visits(), config.budget as u64);
    }
}
