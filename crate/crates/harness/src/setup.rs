//! Domain instances and the agents built on them.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use uctaux_core::rng::{stream, Stream};
use uctaux_core::solver::{
    default_max_iterations, evaluate_policy, read_solution, write_solution, CachedSolution, IndexedPolicy, QTablePrior, TabularPolicy,
};
use uctaux_core::{derive_seed, value_iteration, GenerativeModel, Policy, PriorValue, SearchConfig};
use uctaux_domains::sailing::{generate_map, to_tabular, Cell, SailTowardsGoal, Sailing, SailingMap, SailingTabular, StgPrior};
use uctaux_domains::sheep::{GoalAveraging, Maze, SheepParams, SheepSavior, Subtasks};

use crate::spec::{AgentKind, ExperimentSpec, Heuristic, ResolvedAgent};
use crate::HarnessError;

/// 64-bit FNV-1a, used to key cache files and to fold agent labels into seeds.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// What an agent runs: a fixed policy or a search.
pub enum Agent<M: GenerativeModel> {
    Policy(Arc<dyn Policy<M>>),
    Search(SearchConfig<M>),
}

/// The cache directory from `UCTAUX_CACHE_DIR`, if set and non-empty.
pub fn cache_dir_from_env() -> Option<PathBuf> {
    std::env::var_os("UCTAUX_CACHE_DIR").filter(|v| !v.is_empty()).map(PathBuf::from)
}

fn search_config<M: GenerativeModel>(spec: &ExperimentSpec) -> SearchConfig<M> {
    SearchConfig::new(spec.exploration(), spec.horizon, spec.budgets[0]).with_recommendation(spec.recommendation.into())
}

/// Generated or loaded map of `instance`.
pub fn sailing_map(spec: &ExperimentSpec, instance: u32) -> Result<SailingMap, HarnessError> {
    let s = &spec.sailing;
    if let Some(dir) = &s.map_dir {
        let files = map_files(dir)?;
        let path = files.get(instance as usize).ok_or_else(|| {
            HarnessError::Spec(format!(
                "{} holds {} maps, instance {instance} requested",
                dir.display(),
                files.len()
            ))
        })?;
        return Ok(SailingMap::load(path)?);
    }
    let mut rng = stream(derive_seed(spec.seed, &[instance as u64]), Stream::Environment);
    let g = generate_map(
        s.width,
        s.height,
        s.p,
        Cell::new(s.start[0], s.start[1]),
        Cell::new(s.goal[0], s.goal[1]),
        &mut rng,
        s.max_rejections,
    )?;
    Ok(g.map)
}

/// `*.map` files of `dir` in name order.
pub fn map_files(dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| HarnessError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "map"))
        .collect();
    files.sort();
    Ok(files)
}

/// `V*`, the greedy policy and the tabular form of one sailing map.
pub struct SailingSolution {
    pub tabular: SailingTabular,
    pub greedy: TabularPolicy,
    pub v: Vec<f64>,
    /// Sweeps run; 0 when read from the cache.
    pub iterations: usize,
}

/// Solves `model` exactly, reading and writing `<cache>/sailing-<key>.csv`.
pub fn solve_sailing(model: &Sailing, tolerance: f64, cache: Option<&Path>) -> Result<SailingSolution, HarnessError> {
    let tabular = to_tabular(model);
    let key = fnv1a(format!("{}{:?}{tolerance:?}", model.map(), model.discount()).as_bytes());
    let path = cache.map(|d| d.join(format!("sailing-{key:016x}.csv")));
    if let Some(p) = path.as_ref().filter(|p| p.exists()) {
        let c = read_solution(p)?;
        if c.v.len() == tabular.mdp.n_states() {
            return Ok(SailingSolution {
                greedy: c.greedy_policy(),
                v: c.v,
                tabular,
                iterations: 0,
            });
        }
    }
    let mdp = &tabular.mdp;
    let r = value_iteration(
        mdp,
        tolerance,
        default_max_iterations(tolerance, mdp.discount(), mdp.max_abs_reward()),
    )?;
    let c = CachedSolution::from(&r);
    if let Some(p) = &path {
        std::fs::create_dir_all(p.parent().expect("cache file has a parent")).map_err(|e| HarnessError::io(p, e))?;
        write_solution(p, &c)?;
    }
    Ok(SailingSolution {
        greedy: c.greedy_policy(),
        v: c.v,
        tabular,
        iterations: r.iterations,
    })
}

/// Agents for one sailing map; the map is solved only when some agent needs it.
pub fn sailing_agents(
    spec: &ExperimentSpec,
    agents: &[ResolvedAgent],
    model: &Sailing,
    cache: Option<&Path>,
) -> Result<Vec<Agent<Sailing>>, HarnessError> {
    let needs_solution = agents.iter().any(|a| {
        a.kind == AgentKind::Optimal
            || [a.prior, a.rollout, a.aux, a.policy]
                .iter()
                .any(|h| matches!(h, Some(Heuristic::StochasticOptimal(_))))
    });
    let solution = match needs_solution {
        true => Some(solve_sailing(model, spec.tolerance, cache)?),
        false => None,
    };
    let sol = || solution.as_ref().expect("solved above");
    let policy = |h: Heuristic| -> Arc<dyn Policy<Sailing>> {
        match h {
            Heuristic::SailTowardsGoal => Arc::new(SailTowardsGoal),
            Heuristic::StochasticOptimal(p) => Arc::new(IndexedPolicy {
                indexer: sol().tabular.indexer.clone(),
                policy: Arc::new(sol().greedy.with_greedy_weight(p)),
            }),
            Heuristic::GoalAveraging => unreachable!("rejected when resolving agents"),
        }
    };
    // Q^π of StochasticOptimal.p, one evaluation per distinct p.
    let mut so_q: Vec<(f64, Arc<Vec<f64>>)> = Vec::new();
    let mut prior = |h: Heuristic| -> Result<Arc<dyn PriorValue<Sailing>>, HarnessError> {
        Ok(match h {
            Heuristic::SailTowardsGoal => Arc::new(StgPrior),
            Heuristic::StochasticOptimal(p) => {
                let q = match so_q.iter().find(|(x, _)| *x == p) {
                    Some((_, q)) => q.clone(),
                    None => {
                        let mdp = &sol().tabular.mdp;
                        let max = default_max_iterations(spec.tolerance, mdp.discount(), mdp.max_abs_reward());
                        let q = Arc::new(evaluate_policy(mdp, &sol().greedy.with_greedy_weight(p), spec.tolerance, max)?.q);
                        so_q.push((p, q.clone()));
                        q
                    }
                };
                Arc::new(QTablePrior {
                    indexer: sol().tabular.indexer.clone(),
                    q,
                    n_actions: 8,
                    visits: 1,
                })
            }
            Heuristic::GoalAveraging => unreachable!("rejected when resolving agents"),
        })
    };
    let mut out = Vec::with_capacity(agents.len());
    for a in agents {
        out.push(match a.kind {
            AgentKind::Random => Agent::Policy(Arc::new(uctaux_core::UniformRandom)),
            AgentKind::Optimal => Agent::Policy(policy(Heuristic::StochasticOptimal(1.0))),
            AgentKind::Heuristic => Agent::Policy(policy(a.policy.expect("resolved"))),
            AgentKind::Uct { .. } => {
                let mut c = search_config(spec);
                if let Some(h) = a.prior {
                    c = c.with_prior(prior(h)?);
                }
                if let Some(h) = a.rollout {
                    c = c.with_rollout_policy(policy(h));
                }
                if let Some(h) = a.aux {
                    c = c.with_aux_policy(policy(h));
                }
                Agent::Search(c)
            }
        });
    }
    Ok(out)
}

pub fn sheep_model(spec: &ExperimentSpec) -> Result<SheepSavior, HarnessError> {
    let maze = match &spec.sheep.maze {
        Some(p) => Maze::load(p)?,
        None => Maze::reference(),
    };
    let params = SheepParams {
        discount: spec.discount,
        flee_radius: spec.sheep.flee_radius,
        shoot_range: spec.sheep.shoot_range,
    };
    Ok(SheepSavior::new(Arc::new(maze), params))
}

/// Solves the sheep and ghost subtasks, cached under `<cache>/sheep-<key>/`.
pub fn solve_sheep(model: &SheepSavior, tolerance: f64, cache: Option<&Path>) -> Result<Subtasks, HarnessError> {
    let p = model.params();
    let key = fnv1a(format!("{}{:?}{}{}{tolerance:?}", model.maze(), p.discount, p.flee_radius, p.shoot_range).as_bytes());
    let dir = cache.map(|d| d.join(format!("sheep-{key:016x}")));
    if let Some(d) = &dir {
        std::fs::create_dir_all(d).map_err(|e| HarnessError::io(d, e))?;
    }
    Ok(Subtasks::solve_with_cache(model, tolerance, dir.as_deref())?.0)
}

pub fn sheep_agents(
    spec: &ExperimentSpec,
    agents: &[ResolvedAgent],
    model: &SheepSavior,
    cache: Option<&Path>,
) -> Result<Vec<Agent<SheepSavior>>, HarnessError> {
    let needs_ga = agents
        .iter()
        .any(|a| [a.prior, a.rollout, a.aux, a.policy].iter().any(|h| h.is_some()));
    let ga = match needs_ga {
        true => Some(GoalAveraging(Arc::new(solve_sheep(model, spec.tolerance, cache)?))),
        false => None,
    };
    let ga = || ga.clone().expect("solved above");
    let mut out = Vec::with_capacity(agents.len());
    for a in agents {
        out.push(match a.kind {
            AgentKind::Random => Agent::Policy(Arc::new(uctaux_core::UniformRandom)),
            AgentKind::Heuristic => Agent::Policy(Arc::new(ga())),
            AgentKind::Optimal => unreachable!("rejected when resolving agents"),
            AgentKind::Uct { .. } => {
                let mut c = search_config(spec);
                if a.prior.is_some() {
                    c = c.with_prior(Arc::new(ga()));
                }
                if a.rollout.is_some() {
                    c = c.with_rollout_policy(Arc::new(ga()));
                }
                if a.aux.is_some() {
                    c = c.with_aux_policy(Arc::new(ga()));
                }
                Agent::Search(c)
            }
        });
    }
    Ok(out)
}
