use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use uctaux_core::derive_seed;
use uctaux_core::rng::{stream, Stream};
use uctaux_domains::sailing::{generate_map, Cell, Sailing, SailingMap};
use uctaux_domains::sheep::{Maze, SheepParams, SheepSavior};
use uctaux_harness::records::{self, read_csv, write_aggregates, write_csv, write_errors, write_records, HISTOGRAM_HEADER};
use uctaux_harness::setup::{solve_sailing, solve_sheep};
use uctaux_harness::spec::{RecommendationRule, SailingSpec};
use uctaux_harness::{runner, ExperimentSpec, TrialRecord};

#[derive(Parser)]
#[command(
    name = "uctaux",
    version,
    about = "UCT with auxiliary arms: experiments on sailing and Sheep Savior"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a batch of random obstructed sailing maps.
    GenMaps(GenMaps),
    /// Solve a sailing map or a sheep maze exactly and cache the result.
    Solve(Solve),
    /// Run an experiment spec and write records, errors and aggregates.
    Run(Run),
    /// Aggregate a records file per agent and budget.
    Aggregate(AggregateCmd),
    /// Histogram of one agent's returns normalized between Random and Optimal.
    Histogram(HistogramCmd),
}

#[derive(Args)]
struct GenMaps {
    #[arg(long)]
    count: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    width: Option<u16>,
    #[arg(long)]
    height: Option<u16>,
    /// Blocking probability per cell.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, value_parser = parse_cell)]
    start: Option<[u16; 2]>,
    #[arg(long, value_parser = parse_cell)]
    goal: Option<[u16; 2]>,
    /// 30×30 maps with the goal at (27,27).
    #[arg(long)]
    large: bool,
}

#[derive(Args)]
struct Solve {
    /// Sailing map file.
    #[arg(long, conflicts_with = "maze")]
    map: Option<PathBuf>,
    /// Sheep maze file, or `reference`.
    #[arg(long)]
    maze: Option<String>,
    #[arg(long, default_value_t = 0.99)]
    discount: f64,
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    #[arg(long, env = "UCTAUX_CACHE_DIR")]
    cache_dir: PathBuf,
}

#[derive(Args)]
struct Run {
    /// Experiment spec (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Output directory for records.csv, errors.csv and aggregate.csv.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, env = "UCTAUX_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    budgets: Option<Vec<usize>>,
    #[arg(long)]
    instances: Option<u32>,
    #[arg(long)]
    trials: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    exploration: Option<f64>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    discount: Option<f64>,
    #[arg(long, value_parser = parse_rule)]
    recommendation: Option<RecommendationRule>,
    /// Sailing map directory replacing generated maps.
    #[arg(long)]
    map_dir: Option<PathBuf>,
    /// Sheep maze file.
    #[arg(long)]
    maze: Option<PathBuf>,
    /// 30×30 sailing maps with the goal at (27,27).
    #[arg(long)]
    large: bool,
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Args)]
struct AggregateCmd {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct HistogramCmd {
    #[arg(long)]
    records: PathBuf,
    /// Label of the agent to score.
    #[arg(long)]
    agent: String,
    #[arg(long, default_value = "Random")]
    random: String,
    #[arg(long, default_value = "Optimal")]
    optimal: String,
    #[arg(long, default_value_t = 10)]
    bins: usize,
    #[arg(long)]
    out: PathBuf,
}

fn parse_cell(s: &str) -> Result<[u16; 2], String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    Ok([
        x.trim().parse().map_err(|e| format!("{e}"))?,
        y.trim().parse().map_err(|e| format!("{e}"))?,
    ])
}

fn parse_rule(s: &str) -> Result<RecommendationRule, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("expected highest-value or highest-visits, got {s:?}"))
}

fn main() -> ExitCode {
    match Cli::parse().command.run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

impl Command {
    fn run(self) -> Result<ExitCode> {
        match self {
            Command::GenMaps(c) => c.run().map(|_| ExitCode::SUCCESS),
            Command::Solve(c) => c.run().map(|_| ExitCode::SUCCESS),
            Command::Run(c) => c.run(),
            Command::Aggregate(c) => {
                let rs: Vec<TrialRecord> = read_csv(&c.records)?;
                write_aggregates(&c.out, &records::aggregate(&rs))?;
                Ok(ExitCode::SUCCESS)
            }
            Command::Histogram(c) => {
                if c.bins == 0 {
                    bail!("--bins must be positive");
                }
                let rs: Vec<TrialRecord> = read_csv(&c.records)?;
                let h = records::histogram(&rs, &c.agent, &c.random, &c.optimal, c.bins);
                if h.total() == 0 {
                    bail!("no cells shared by {}, {} and {}", c.agent, c.random, c.optimal);
                }
                write_csv(&c.out, &h.rows(), &HISTOGRAM_HEADER)?;
                eprintln!(
                    "{} cells binned, {} skipped (Optimal not above Random), {} clipped",
                    h.total(),
                    h.skipped,
                    h.clipped
                );
                Ok(ExitCode::SUCCESS)
            }
        }
    }
}

impl GenMaps {
    fn run(self) -> Result<()> {
        let base = if self.large { SailingSpec::large() } else { SailingSpec::default() };
        let (w, h) = (self.width.unwrap_or(base.width), self.height.unwrap_or(base.height));
        let (start, goal) = (self.start.unwrap_or(base.start), self.goal.unwrap_or(base.goal));
        let p = self.p.unwrap_or(base.p);
        std::fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        let digits = self.count.saturating_sub(1).to_string().len();
        for i in 0..self.count {
            // Same stream as the runner's generated instance `i`.
            let mut rng = stream(derive_seed(self.seed, &[i as u64]), Stream::Environment);
            let g = generate_map(
                w,
                h,
                p,
                Cell::new(start[0], start[1]),
                Cell::new(goal[0], goal[1]),
                &mut rng,
                base.max_rejections,
            )?;
            g.map.save(&self.out.join(format!("{i:0digits$}.map")))?;
        }
        eprintln!("wrote {} maps to {}", self.count, self.out.display());
        Ok(())
    }
}

impl Solve {
    fn run(self) -> Result<()> {
        let clock = Instant::now();
        match (&self.map, &self.maze) {
            (Some(path), None) => {
                let model = Sailing::new(Arc::new(SailingMap::load(path)?), self.discount);
                let s = solve_sailing(&model, self.tolerance, Some(&self.cache_dir))?;
                println!("{} states, {} sweeps, {:.1?}", s.v.len(), s.iterations, clock.elapsed());
            }
            (None, Some(maze)) => {
                let maze = match maze.as_str() {
                    "reference" => Maze::reference(),
                    path => Maze::load(path.as_ref())?,
                };
                let model = SheepSavior::new(
                    Arc::new(maze),
                    SheepParams {
                        discount: self.discount,
                        ..SheepParams::default()
                    },
                );
                solve_sheep(&model, self.tolerance, Some(&self.cache_dir))?;
                println!("subtasks solved in {:.1?}", clock.elapsed());
            }
            _ => bail!("give exactly one of --map or --maze"),
        }
        Ok(())
    }
}

impl Run {
    fn run(self) -> Result<ExitCode> {
        let mut spec = ExperimentSpec::load(&self.spec)?;
        if self.large {
            spec.sailing = SailingSpec {
                map_dir: spec.sailing.map_dir.take(),
                ..SailingSpec::large()
            };
        }
        spec.budgets = self.budgets.unwrap_or(spec.budgets);
        spec.instances = self.instances.unwrap_or(spec.instances);
        spec.trials = self.trials.unwrap_or(spec.trials);
        spec.seed = self.seed.unwrap_or(spec.seed);
        spec.exploration = self.exploration.or(spec.exploration);
        spec.horizon = self.horizon.unwrap_or(spec.horizon);
        spec.max_steps = self.max_steps.or(spec.max_steps);
        spec.discount = self.discount.unwrap_or(spec.discount);
        spec.recommendation = self.recommendation.unwrap_or(spec.recommendation);
        spec.sailing.map_dir = self.map_dir.or(spec.sailing.map_dir);
        spec.sheep.maze = self.maze.or(spec.sheep.maze);

        std::fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        let clock = Instant::now();
        let quiet = self.quiet;
        let total = spec.instances;
        let out = runner::run_with_progress(&spec, self.cache_dir.as_deref(), |i| {
            if !quiet {
                eprintln!("instance {}/{total} done ({:.0?})", i + 1, clock.elapsed());
            }
        })?;
        write_records(&self.out.join("records.csv"), &out.records)?;
        write_errors(&self.out.join("errors.csv"), &out.errors)?;
        let aggregates = records::aggregate(&out.records);
        write_aggregates(&self.out.join("aggregate.csv"), &aggregates)?;
        std::fs::write(self.out.join("spec.json"), serde_json::to_string_pretty(&spec)?)?;
        if !quiet {
            for a in &aggregates {
                let sem = a.sem.map_or("-".to_string(), |s| format!("{s:.3}"));
                println!(
                    "{:<48} {:>6} {:>10.3} ± {:<8} nodes {:>9.1} n={}",
                    a.agent, a.budget, a.mean_return, sem, a.mean_nodes, a.n
                );
            }
        }
        if out.errors.is_empty() {
            return Ok(ExitCode::SUCCESS);
        }
        eprintln!("{} error rows, see {}", out.errors.len(), self.out.join("errors.csv").display());
        Ok(ExitCode::from(out.errors.len().min(255) as u8))
    }
}
