use std::collections::HashMap;
use std::sync::Arc;

use approx::assert_relative_eq;
use rand::SeedableRng;
use uctaux_core::rng::{stream, Stream};
use uctaux_core::solver::{extract_greedy, IndexedPolicy, DEFAULT_TOLERANCE};
use uctaux_core::{
    plan_episode, run_policy, search, value_iteration, GenerativeModel, Policy, PriorValue, SearchConfig, SearchStreams, StreamRng,
};
use uctaux_domains::sailing::{
    generate_map, sail_towards_goal, to_tabular, Cell, Direction, MapError, SailTowardsGoal, Sailing, SailingMap, SailingState, StgPrior,
    C_MAX,
};
use Direction::*;

fn model(text: &str) -> Sailing {
    Sailing::new(Arc::new(text.parse().unwrap()), 0.99)
}

fn open_model(size: u16, start: Cell, goal: Cell) -> Sailing {
    Sailing::new(Arc::new(SailingMap::open(size, size, start, goal).unwrap()), 0.99)
}

fn at(x: u16, y: u16, boat: Direction, wind_prev: Direction, wind: Direction) -> SailingState {
    SailingState {
        cell: Cell::new(x, y),
        boat,
        wind_prev,
        wind,
    }
}

fn actions(m: &Sailing, s: &SailingState) -> Vec<Direction> {
    let mut v = Vec::new();
    m.actions(s, &mut v);
    v
}

#[test]
fn valid_actions_examples() {
    let m = open_model(5, Cell::new(4, 4), Cell::new(2, 0));
    assert_eq!(actions(&m, &at(2, 2, N, N, N)), vec![N, NE, E, SE, SW, W, NW]);
    assert_eq!(actions(&m, &at(0, 0, N, N, N)), vec![E, SE]);

    // The only exit points upwind.
    let pocket = model("3 3\n#G#\n#S#\n###\n");
    let trapped = at(1, 1, N, S, S);
    assert!(actions(&pocket, &trapped).is_empty());
    assert!(pocket.is_terminal(&trapped));
    assert!(pocket.is_trapped(&trapped));
    assert_eq!(actions(&pocket, &at(1, 1, N, N, N)), vec![N]);
    // Initial states are never trapped.
    let mut rng = stream(0, Stream::Environment);
    for _ in 0..200 {
        assert!(!pocket.is_terminal(&pocket.initial_state(&mut rng)));
    }
}

#[test]
fn step_rewards_and_absorption() {
    let m = open_model(5, Cell::new(0, 4), Cell::new(2, 1));
    let mut rng = stream(1, Stream::Model);
    let (next, r) = m.step(&at(2, 3, N, N, N), N, &mut rng).unwrap();
    assert_eq!(r, -1.0);
    assert_eq!(next.cell, Cell::new(2, 2));
    assert_eq!((next.boat, next.wind_prev), (N, N));
    assert!([N, NE, NW].contains(&next.wind));

    // Port tack under N, then 135° off the wind on starboard.
    let (_, r) = m.step(&at(2, 2, NE, N, N), SW, &mut rng).unwrap();
    assert_eq!(r, -C_MAX);

    let (next, _) = m.step(&at(2, 2, N, N, N), N, &mut rng).unwrap();
    assert!(m.is_terminal(&next));
    assert!(actions(&m, &next).is_empty());
    assert!(m.step(&at(2, 2, N, N, N), S, &mut rng).is_err());
    assert!(m.step(&next, N, &mut rng).is_err());
}

#[test]
fn trap_entry_is_penalized() {
    // (1, 2) is a dead end whose only exit is N. Sailing S into it and
    // keeping the S wind leaves no valid move.
    let m = model("3 3\nS.G\n#.#\n#.#\n");
    let s = at(1, 1, S, S, S);
    let mut rng = stream(2, Stream::Model);
    let mut seen = HashMap::new();
    for _ in 0..300 {
        let (next, r) = m.step(&s, S, &mut rng).unwrap();
        seen.insert(next.wind, (r, m.is_terminal(&next)));
    }
    assert_relative_eq!(m.trap_penalty(), -700.0, epsilon = 1e-9);
    assert_eq!(seen.len(), 3);
    assert_eq!(seen[&S], (-1.0 + m.trap_penalty(), true));
    assert_eq!(seen[&SE], (-1.0, false));
    assert_eq!(seen[&SW], (-1.0, false));
}

#[test]
fn rewards_stay_in_cost_range_without_traps() {
    let mut env = stream(3, Stream::Environment);
    let generated = generate_map(20, 20, 0.3, Cell::new(2, 2), Cell::new(17, 17), &mut env, 1000).unwrap();
    let m = Sailing::new(Arc::new(generated.map), 0.99);
    let mut rng = stream(3, Stream::Model);
    let mut valid = Vec::new();
    let mut s = m.initial_state(&mut env);
    for _ in 0..100_000 {
        if m.is_terminal(&s) {
            s = m.initial_state(&mut env);
        }
        m.actions(&s, &mut valid);
        let a = valid[rand::Rng::gen_range(&mut rng, 0..valid.len())];
        let (next, r) = m.step(&s, a, &mut rng).unwrap();
        if m.is_trapped(&next) {
            assert!(r < -C_MAX);
        } else {
            assert!((-C_MAX..=-1.0).contains(&r), "reward {r}");
        }
        s = next;
    }
}

#[test]
fn wind_is_uniform_in_the_long_run() {
    let m = open_model(30, Cell::new(2, 2), Cell::new(27, 27));
    let mut env = stream(4, Stream::Environment);
    let mut rng = stream(4, Stream::Model);
    let mut s = m.initial_state(&mut env);
    let mut counts = [0u64; 8];
    let mut valid = Vec::new();
    // Thinned to every 50th step so samples are close to independent.
    for t in 0..1_000_000u32 {
        if m.is_terminal(&s) {
            s = SailingState {
                cell: m.map().start(),
                ..s
            };
        }
        m.actions(&s, &mut valid);
        let a = valid[rand::Rng::gen_range(&mut rng, 0..valid.len())];
        s = m.step(&s, a, &mut rng).unwrap().0;
        if t % 50 == 0 {
            counts[s.wind as usize] += 1;
        }
    }
    let n: u64 = counts.iter().sum();
    let e = n as f64 / 8.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    // 99th percentile of χ² with 7 degrees of freedom.
    let critical = 18.475;
    assert!(chi2 < critical, "chi2 {chi2} >= {critical}: {counts:?}");
}

#[test]
fn sail_towards_goal_examples() {
    let goal = Cell::new(5, 5);
    let m = open_model(10, Cell::new(2, 8), goal);
    let s = at(2, 8, N, N, N);
    assert_eq!(
        SailTowardsGoal.sample(&m, &s, &actions(&m, &s), &mut stream(0, Stream::Rollout)),
        Some(NE)
    );
    let s = at(2, 8, N, SW, SW);
    assert_eq!(sail_towards_goal(s.cell, goal, &actions(&m, &s)), Some(E));
    let s = at(1, 5, N, N, N);
    assert_eq!(sail_towards_goal(s.cell, goal, &actions(&m, &s)), Some(E));
}

#[test]
fn stg_prior_examples() {
    let m = open_model(30, Cell::new(2, 2), Cell::new(27, 27));
    // One downwind move onto the goal.
    let s = at(26, 26, SE, SE, SE);
    let p = StgPrior.prior(&m, &s, SE);
    assert_eq!(p.visits, 1);
    assert_relative_eq!(p.value, -2.0, epsilon = 1e-12);

    // From the start, a downwind move to (3, 3): d = 24.
    let s = at(2, 2, SE, SE, SE);
    let expected = -(1.0 + (1.0 - 0.99f64.powi(25)) / 0.01);
    assert_relative_eq!(StgPrior::value(&m, &s, SE), expected, epsilon = 1e-9);
    // Worst-case start term with d = 25: (1 − 0.99^26) / 0.01.
    let s = at(3, 2, S, S, S);
    let term = StgPrior::value(&m, &s, W) + 1.0 + 2.0;
    assert_relative_eq!(-term, (1.0 - 0.99f64.powi(26)) / 0.01, epsilon = 1e-9);

    // Equal move cost, one step closer: strictly better.
    let s = at(10, 10, N, N, N);
    assert!(StgPrior::value(&m, &s, E) > StgPrior::value(&m, &s, W));
}

#[test]
fn generated_maps() {
    let (start, goal) = (Cell::new(2, 2), Cell::new(27, 27));
    let empty = generate_map(30, 30, 0.0, start, goal, &mut stream(5, Stream::Environment), 10).unwrap();
    assert_eq!(empty.map.blocked_count(), 0);
    assert_eq!(empty.rejections, 0);

    let a = generate_map(30, 30, 0.4, start, goal, &mut stream(6, Stream::Environment), 10_000).unwrap();
    let b = generate_map(30, 30, 0.4, start, goal, &mut stream(6, Stream::Environment), 10_000).unwrap();
    assert_eq!(a.map, b.map);
    assert_eq!(a.rejections, b.rejections);

    assert!(matches!(
        generate_map(30, 30, 1.0, start, goal, &mut stream(5, Stream::Environment), 10),
        Err(MapError::Probability(_))
    ));
    assert!(matches!(
        generate_map(30, 30, 0.95, start, goal, &mut stream(5, Stream::Environment), 3),
        Err(MapError::TooManyRejections(4))
    ));

    // Blocked fraction over interior cells of accepted maps. Conditioning on
    // connectivity biases it slightly low.
    let mut rng = stream(7, Stream::Environment);
    let (mut blocked, mut cells, mut rejections) = (0usize, 0usize, 0usize);
    for _ in 0..1000 {
        let g = generate_map(30, 30, 0.4, start, goal, &mut rng, 100_000).unwrap();
        rejections += g.rejections;
        for y in 1..29 {
            for x in 1..29 {
                let c = Cell::new(x, y);
                if c != start && c != goal {
                    cells += 1;
                    blocked += g.map.is_blocked(c) as usize;
                }
            }
        }
    }
    let frac = blocked as f64 / cells as f64;
    assert!((frac - 0.4).abs() <= 0.02, "blocked fraction {frac}, {rejections} rejections");
}

#[test]
fn map_text_round_trip() {
    let text = "6 4\nS..#..\n.##...\n...#.G\n......\n";
    let map: SailingMap = text.parse().unwrap();
    assert_eq!(map.start(), Cell::new(0, 0));
    assert_eq!(map.goal(), Cell::new(5, 2));
    assert!(map.is_blocked(Cell::new(3, 0)));
    assert_eq!(map.to_string(), text);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.map");
    let g = generate_map(
        30,
        30,
        0.4,
        Cell::new(2, 2),
        Cell::new(27, 27),
        &mut stream(8, Stream::Environment),
        10_000,
    )
    .unwrap();
    g.map.save(&path).unwrap();
    assert_eq!(SailingMap::load(&path).unwrap(), g.map);
    assert_eq!(std::fs::read_to_string(&path).unwrap(), g.map.to_string());

    for bad in [
        "",
        "3\n",
        "3 1\nS.G\nxyz\n",
        "3 1\nS.\n",
        "3 1\nS.x\n",
        "3 1\nS.S\n",
        "3 1\nS..\n",
        "3 1\nS#G\n",
        "1 1\nS\n",
    ] {
        assert!(bad.parse::<SailingMap>().is_err(), "{bad:?}");
    }
}

#[test]
fn tabular_form_matches_generative_model() {
    let mut env = stream(9, Stream::Environment);
    let g = generate_map(8, 8, 0.3, Cell::new(1, 1), Cell::new(6, 6), &mut env, 1000).unwrap();
    let m = Sailing::new(Arc::new(g.map), 0.99);
    let t = to_tabular(&m);
    let free = m.map().free_cells().count();
    assert_eq!(t.mdp.n_states(), free * 512);
    assert!(t.mdp.n_states() <= 8 * 8 * 512);

    for i in 0..t.mdp.n_states() {
        let s = t.indexer.state(i);
        assert_eq!(t.indexer.index(&s), i);
        assert_eq!(t.mdp.is_terminal_index(i), m.is_terminal(&s));
        if s.cell == m.map().goal() {
            assert!(t.mdp.valid_actions(i).next().is_none());
        }
    }

    // Empirical transition frequencies against the table, 3σ bands.
    let mut rng = stream(9, Stream::Model);
    let mut checked = 0;
    for i in (0..t.mdp.n_states()).step_by(997) {
        let s = t.indexer.state(i);
        if m.is_terminal(&s) {
            continue;
        }
        let a = actions(&m, &s)[0];
        let n = 100_000;
        let mut counts: HashMap<usize, usize> = HashMap::new();
        for _ in 0..n {
            let (next, r) = m.step(&s, a, &mut rng).unwrap();
            let j = t.indexer.index(&next);
            let o = t
                .mdp
                .outcomes(i, a as usize)
                .iter()
                .find(|o| o.next as usize == j)
                .expect("sampled outcome in table");
            assert_eq!(o.reward, r);
            *counts.entry(j).or_default() += 1;
        }
        for o in t.mdp.outcomes(i, a as usize) {
            let freq = *counts.get(&(o.next as usize)).unwrap_or(&0) as f64 / n as f64;
            let sigma = (o.prob * (1.0 - o.prob) / n as f64).sqrt();
            // 3σ for the first state; the sweep widens the band to keep the
            // family-wise false-alarm rate near that of a single check.
            let z = if checked == 0 { 3.0 } else { 4.5 };
            assert!((freq - o.prob).abs() <= z * sigma, "state {i}: {freq} vs {}", o.prob);
        }
        checked += 1;
    }
    assert!(checked >= 5);
}

/// A goal pocket behind a wall facing the start.
const POCKET: &str = "9 7\n.........\n....G....\n.#######.\n.........\n....S....\n.........\n.........\n";

#[test]
fn sail_towards_goal_oscillates_behind_a_wall() {
    let m = model(POCKET);
    let mut failures = 0;
    for seed in 0..100 {
        let mut env = stream(seed, Stream::Environment);
        let start = m.initial_state(&mut env);
        let (_, steps) = run_policy(&m, &SailTowardsGoal, &start, 300, &mut env).unwrap();
        if steps == 300 {
            failures += 1;
        }
    }
    assert!(failures > 50, "only {failures} of 100 runs got stuck");
}

#[test]
fn sail_towards_goal_is_near_optimal_without_obstacles() {
    let m = open_model(12, Cell::new(1, 1), Cell::new(10, 10));
    let t = to_tabular(&m);
    let solved = value_iteration(&t.mdp, DEFAULT_TOLERANCE, 100_000).unwrap();
    let mut env = stream(10, Stream::Environment);
    let (mut stg, mut opt) = (0.0, 0.0);
    let n = 2000;
    for _ in 0..n {
        let s = m.initial_state(&mut env);
        opt += solved.v[t.indexer.index(&s)];
        stg += run_policy(&m, &SailTowardsGoal, &s, 300, &mut env).unwrap().0;
    }
    let (stg, opt) = (-stg / n as f64, -opt / n as f64);
    assert!(stg >= opt * 0.97, "heuristic cost {stg} below optimal {opt}");
    assert!(stg <= opt * 1.2, "heuristic cost {stg} vs optimal {opt}");
}

#[test]
fn search_on_small_open_map_is_near_optimal() {
    let m = open_model(5, Cell::new(0, 4), Cell::new(4, 0));
    let t = to_tabular(&m);
    let solved = value_iteration(&t.mdp, 1e-9, 100_000).unwrap();
    let mut env = stream(11, Stream::Environment);
    for seed in 0..5 {
        let s = m.initial_state(&mut env);
        let i = t.indexer.index(&s);
        let config = SearchConfig::new(700.0, 300, 20_000);
        let out = search(&m, &s, &config, &mut SearchStreams::new(seed)).unwrap();
        let gap = solved.v[i] - solved.q_row(i)[out.action as usize];
        assert!(gap <= 0.05 * solved.v[i].abs(), "seed {seed}: gap {gap}, V* {}", solved.v[i]);
    }
}

#[test]
fn replanning_approaches_optimal_on_open_map() {
    let m = open_model(10, Cell::new(1, 1), Cell::new(8, 8));
    let t = to_tabular(&m);
    let solved = value_iteration(&t.mdp, DEFAULT_TOLERANCE, 100_000).unwrap();
    let optimal = IndexedPolicy {
        indexer: t.indexer.clone(),
        policy: Arc::new(extract_greedy(&solved)),
    };
    let trials = 30;
    let (mut uct, mut opt) = (0.0, 0.0);
    for trial in 0..trials {
        let start = m.initial_state(&mut stream(trial, Stream::Environment));
        let mut env = StreamRng::seed_from_u64(1000 + trial);
        opt += run_policy(&m, &optimal, &start, 300, &mut env).unwrap().0;
        let mut env = StreamRng::seed_from_u64(1000 + trial);
        let config = SearchConfig::new(700.0, 300, 16_000);
        uct += plan_episode(&m, &start, &config, 300, &mut env, &mut SearchStreams::new(trial))
            .unwrap()
            .discounted_return;
    }
    let (uct, opt) = (uct / trials as f64, opt / trials as f64);
    assert!((uct - opt).abs() <= 0.1 * opt.abs(), "UCT {uct} vs optimal {opt}");
}
