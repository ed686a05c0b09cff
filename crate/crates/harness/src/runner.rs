//! Seeded trial batches.
//!
//! Seeds: the map of instance `i` comes from `derive_seed(root, [i])`; the
//! start state and the environment's transitions of cell `(i, t)` from
//! `derive_seed(root, [i, t])`, shared by every agent and budget; the
//! search and policy streams from `derive_seed(root, [i, t, fnv1a(label),
//! budget])`.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use uctaux_core::rng::{stream, Stream};
use uctaux_core::{derive_seed, plan_episode, GenerativeModel, SearchStreams, StreamRng};
use uctaux_domains::sailing::Sailing;

use crate::records::{sort_records, ErrorRecord, TrialRecord};
use crate::setup::{fnv1a, sailing_agents, sailing_map, sheep_agents, sheep_model, Agent};
use crate::spec::{Domain, ExperimentSpec, ResolvedAgent};
use crate::HarnessError;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOutput {
    pub records: Vec<TrialRecord>,
    pub errors: Vec<ErrorRecord>,
}

/// Seed of the start state and environment stream of cell `(instance, trial)`.
pub fn cell_seed(root: u64, instance: u32, trial: u32) -> u64 {
    derive_seed(root, &[instance as u64, trial as u64])
}

/// Seed of the search and policy streams of one agent at one budget.
pub fn agent_seed(root: u64, instance: u32, trial: u32, label: &str, budget: usize) -> u64 {
    derive_seed(root, &[instance as u64, trial as u64, fnv1a(label.as_bytes()), budget as u64])
}

/// Runs every `(instance, trial, agent, budget)` cell of `spec`. Failures
/// become error rows; only an invalid spec aborts.
pub fn run_experiment(spec: &ExperimentSpec, cache: Option<&Path>) -> Result<RunOutput, HarnessError> {
    run_with_progress(spec, cache, |_| {})
}

/// As [`run_experiment`], calling `progress` after each instance.
pub fn run_with_progress(spec: &ExperimentSpec, cache: Option<&Path>, mut progress: impl FnMut(u32)) -> Result<RunOutput, HarnessError> {
    let agents = spec.resolve_agents()?;
    let mut out = RunOutput::default();
    let sheep = match spec.domain {
        Domain::Sheep => Some(sheep_model(spec)?),
        Domain::Sailing => None,
    };
    // Sheep instances share one maze, so the agents are built once.
    let sheep_built = match &sheep {
        Some(m) => Some(sheep_agents(spec, &agents, m, cache)),
        None => None,
    };
    for instance in 0..spec.instances {
        match (&sheep, &sheep_built) {
            (Some(m), Some(Ok(built))) => run_instance(spec, &agents, m, built, instance, |rng| m.random_start(rng), &mut out),
            (Some(_), Some(Err(e))) => fail_instance(spec, &agents, instance, &e.to_string(), &mut out),
            _ => {
                let setup = sailing_map(spec, instance).and_then(|map| {
                    let model = Sailing::new(Arc::new(map), spec.discount);
                    let built = sailing_agents(spec, &agents, &model, cache)?;
                    Ok((model, built))
                });
                match setup {
                    Ok((m, built)) => run_instance(spec, &agents, &m, &built, instance, |rng| m.initial_state(rng), &mut out),
                    Err(e) => fail_instance(spec, &agents, instance, &e.to_string(), &mut out),
                }
            }
        }
        progress(instance);
    }
    sort_records(&mut out.records);
    out.errors
        .sort_by(|a, b| (&a.agent, a.instance, a.trial, a.budget).cmp(&(&b.agent, b.instance, b.trial, b.budget)));
    Ok(out)
}

fn fail_instance(spec: &ExperimentSpec, agents: &[ResolvedAgent], instance: u32, error: &str, out: &mut RunOutput) {
    for trial in 0..spec.trials {
        for a in agents {
            for &budget in &spec.budgets {
                out.errors.push(ErrorRecord {
                    agent: a.label.clone(),
                    instance,
                    trial,
                    budget,
                    error: error.to_string(),
                });
            }
        }
    }
}

fn run_instance<M: GenerativeModel>(
    spec: &ExperimentSpec,
    agents: &[ResolvedAgent],
    model: &M,
    built: &[Agent<M>],
    instance: u32,
    start: impl Fn(&mut StreamRng) -> M::State,
    out: &mut RunOutput,
) {
    for trial in 0..spec.trials {
        let mut env = stream(cell_seed(spec.seed, instance, trial), Stream::Environment);
        let s0 = start(&mut env);
        for (a, agent) in agents.iter().zip(built) {
            for &budget in &spec.budgets {
                let mut streams = SearchStreams::new(agent_seed(spec.seed, instance, trial, &a.label, budget));
                let result = run_episode(model, agent, &s0, budget, spec.max_steps(), env.clone(), &mut streams);
                match result {
                    Ok((ret, steps, tree_nodes, wall_ms)) => out.records.push(TrialRecord {
                        agent: a.label.clone(),
                        instance,
                        trial,
                        budget,
                        ret,
                        steps,
                        tree_nodes,
                        wall_ms,
                    }),
                    Err(error) => out.errors.push(ErrorRecord {
                        agent: a.label.clone(),
                        instance,
                        trial,
                        budget,
                        error,
                    }),
                }
            }
        }
    }
}

/// `(return, steps, mean tree nodes, wall ms)` of one episode.
fn run_episode<M: GenerativeModel>(
    model: &M,
    agent: &Agent<M>,
    start: &M::State,
    budget: usize,
    max_steps: usize,
    mut env: StreamRng,
    streams: &mut SearchStreams,
) -> Result<(f64, usize, f64, f64), String> {
    match agent {
        Agent::Search(config) => {
            let config = config.clone().with_budget(budget);
            let r = plan_episode(model, start, &config, max_steps, &mut env, streams).map_err(|e| e.to_string())?;
            Ok((r.discounted_return, r.steps, r.mean_tree_nodes, r.wall_ms))
        }
        Agent::Policy(policy) => {
            let clock = Instant::now();
            let gamma = model.discount();
            let (mut s, mut total, mut weight, mut steps) = (start.clone(), 0.0, 1.0, 0);
            let mut valid = Vec::new();
            while steps < max_steps && !model.is_terminal(&s) {
                model.actions(&s, &mut valid);
                let a = policy
                    .sample(model, &s, &valid, &mut streams.rollout)
                    .ok_or_else(|| format!("policy has no action at {s:?}"))?;
                let (next, r) = model.step(&s, a, &mut env).map_err(|e| e.to_string())?;
                total += weight * r;
                weight *= gamma;
                s = next;
                steps += 1;
            }
            Ok((total, steps, 0.0, clock.elapsed().as_secs_f64() * 1e3))
        }
    }
}
