//! Experiment specifications and agent names.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use uctaux_core::Recommendation;

use crate::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Sailing,
    Sheep,
}

/// A heuristic usable as prior, rollout policy, auxiliary policy or baseline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Heuristic {
    SailTowardsGoal,
    /// Greedy-optimal with probability `p`, uniform otherwise.
    StochasticOptimal(f64),
    GoalAveraging,
}

impl Heuristic {
    pub fn default_for(domain: Domain) -> Self {
        match domain {
            Domain::Sailing => Heuristic::SailTowardsGoal,
            Domain::Sheep => Heuristic::GoalAveraging,
        }
    }

    fn supports(self, domain: Domain) -> bool {
        matches!(
            (self, domain),
            (Heuristic::SailTowardsGoal | Heuristic::StochasticOptimal(_), Domain::Sailing) | (Heuristic::GoalAveraging, Domain::Sheep)
        )
    }
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Heuristic::SailTowardsGoal => f.write_str("SailTowardsGoal"),
            Heuristic::StochasticOptimal(p) => write!(f, "StochasticOptimal.{p:?}"),
            Heuristic::GoalAveraging => f.write_str("GoalAveraging"),
        }
    }
}

impl FromStr for Heuristic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "SailTowardsGoal" | "STG" => Ok(Heuristic::SailTowardsGoal),
            "GoalAveraging" | "GA" => Ok(Heuristic::GoalAveraging),
            _ => {
                let digits = s
                    .strip_prefix("StochasticOptimal.")
                    .or_else(|| s.strip_prefix("SO."))
                    .ok_or_else(|| format!("unknown heuristic {s:?}"))?;
                // "StochasticOptimal.0.2" and "StochasticOptimal.2" both mean p = 0.2.
                let text = if digits.contains('.') {
                    digits.to_string()
                } else {
                    format!("0.{digits}")
                };
                let p: f64 = text.parse().map_err(|_| format!("bad probability in {s:?}"))?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(format!("probability in {s:?} outside [0, 1]"));
                }
                Ok(Heuristic::StochasticOptimal(p))
            }
        }
    }
}

impl TryFrom<String> for Heuristic {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<Heuristic> for String {
    fn from(h: Heuristic) -> String {
        h.to_string()
    }
}

/// The agent families: three baselines and the eight search variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AgentKind {
    Random,
    Optimal,
    Heuristic,
    Uct { prior: bool, rollout: bool, aux: bool },
}

impl AgentKind {
    pub const SEARCH_NAMES: [&'static str; 8] = ["UCT", "UCT-I", "UCT-S", "UCT-IS", "UCT-Aux", "UCT-Aux-I", "UCT-Aux-S", "UCT-Aux-IS"];

    pub fn is_search(self) -> bool {
        matches!(self, AgentKind::Uct { .. })
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            AgentKind::Random => f.write_str("Random"),
            AgentKind::Optimal => f.write_str("Optimal"),
            AgentKind::Heuristic => f.write_str("Heuristic"),
            AgentKind::Uct { prior, rollout, aux } => {
                f.write_str("UCT")?;
                if aux {
                    f.write_str("-Aux")?;
                }
                if prior || rollout {
                    f.write_str("-")?;
                }
                if prior {
                    f.write_str("I")?;
                }
                if rollout {
                    f.write_str("S")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "Random" => return Ok(AgentKind::Random),
            "Optimal" => return Ok(AgentKind::Optimal),
            "Heuristic" => return Ok(AgentKind::Heuristic),
            _ => {}
        }
        let rest = s.strip_prefix("UCT").ok_or_else(|| format!("unknown agent {s:?}"))?;
        let (aux, rest) = match rest.strip_prefix("-Aux") {
            Some(r) => (true, r),
            None => (false, rest),
        };
        let (prior, rollout) = match rest {
            "" => (false, false),
            "-I" => (true, false),
            "-S" => (false, true),
            "-IS" => (true, true),
            _ => return Err(format!("unknown agent {s:?}")),
        };
        Ok(AgentKind::Uct { prior, rollout, aux })
    }
}

/// One agent of an experiment: a bare name, or an object naming the
/// heuristic for each role.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AgentSpec {
    Name(String),
    Detailed(AgentDetail),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentDetail {
    pub agent: String,
    /// Fallback for every role not set explicitly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heuristic: Option<Heuristic>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<Heuristic>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rollout: Option<Heuristic>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aux: Option<Heuristic>,
    /// Record label; derived from the roles when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl From<&str> for AgentSpec {
    fn from(s: &str) -> Self {
        AgentSpec::Name(s.to_string())
    }
}

/// An agent with every role resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedAgent {
    pub label: String,
    pub kind: AgentKind,
    pub prior: Option<Heuristic>,
    pub rollout: Option<Heuristic>,
    pub aux: Option<Heuristic>,
    /// The policy a `Heuristic` baseline plays.
    pub policy: Option<Heuristic>,
}

impl AgentSpec {
    pub fn detail(&self) -> AgentDetail {
        match self {
            AgentSpec::Name(n) => AgentDetail {
                agent: n.clone(),
                ..Default::default()
            },
            AgentSpec::Detailed(d) => d.clone(),
        }
    }

    pub fn resolve(&self, domain: Domain) -> Result<ResolvedAgent, String> {
        let d = self.detail();
        let kind: AgentKind = d.agent.parse()?;
        let fallback = d.heuristic.unwrap_or_else(|| Heuristic::default_for(domain));
        let role = |used: bool, explicit: Option<Heuristic>, name: &str| -> Result<Option<Heuristic>, String> {
            match (used, explicit) {
                (true, h) => Ok(Some(h.unwrap_or(fallback))),
                (false, None) => Ok(None),
                (false, Some(_)) => Err(format!("{} has no {name} role", d.agent)),
            }
        };
        let (p, r, a) = match kind {
            AgentKind::Uct { prior, rollout, aux } => (prior, rollout, aux),
            _ => (false, false, false),
        };
        let resolved = ResolvedAgent {
            label: String::new(),
            kind,
            prior: role(p, d.prior, "prior")?,
            rollout: role(r, d.rollout, "rollout")?,
            aux: role(a, d.aux, "aux")?,
            policy: (kind == AgentKind::Heuristic).then_some(fallback),
        };
        for h in [resolved.prior, resolved.rollout, resolved.aux, resolved.policy]
            .into_iter()
            .flatten()
        {
            if !h.supports(domain) {
                return Err(format!("{h} is not available in the {domain:?} domain"));
            }
        }
        if kind == AgentKind::Optimal && domain == Domain::Sheep {
            return Err("no optimal policy is computed for the sheep domain".into());
        }
        let label = d.label.unwrap_or_else(|| resolved.default_label());
        if label.is_empty() || label.contains([',', '"', '\n']) {
            return Err(format!(
                "agent label {label:?} must be non-empty without commas, quotes or newlines"
            ));
        }
        Ok(ResolvedAgent { label, ..resolved })
    }
}

impl ResolvedAgent {
    /// `UCT-Aux(SailTowardsGoal)` when every role shares one heuristic,
    /// `UCT-Aux-S(rollout=StochasticOptimal.0.2;aux=SailTowardsGoal)` otherwise.
    fn default_label(&self) -> String {
        if let Some(h) = self.policy {
            return h.to_string();
        }
        let roles: Vec<(&str, Heuristic)> = [("prior", self.prior), ("rollout", self.rollout), ("aux", self.aux)]
            .into_iter()
            .filter_map(|(n, h)| h.map(|h| (n, h)))
            .collect();
        match roles.as_slice() {
            [] => self.kind.to_string(),
            [(_, h), rest @ ..] if rest.iter().all(|(_, o)| o == h) => format!("{}({h})", self.kind),
            _ => {
                let parts: Vec<String> = roles.iter().map(|(n, h)| format!("{n}={h}")).collect();
                format!("{}({})", self.kind, parts.join(";"))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SailingSpec {
    pub width: u16,
    pub height: u16,
    /// Probability that a cell is blocked.
    pub p: f64,
    pub start: [u16; 2],
    pub goal: [u16; 2],
    pub max_rejections: usize,
    /// Directory of map files to use instead of generated maps, one per
    /// instance in file-name order.
    pub map_dir: Option<PathBuf>,
}

impl Default for SailingSpec {
    fn default() -> Self {
        Self {
            width: 20,
            height: 20,
            p: 0.4,
            start: [2, 2],
            goal: [17, 17],
            max_rejections: 10_000,
            map_dir: None,
        }
    }
}

impl SailingSpec {
    /// The 30×30 map of the full protocol.
    pub fn large() -> Self {
        Self {
            width: 30,
            height: 30,
            goal: [27, 27],
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SheepSpec {
    /// Maze file; the built-in reference maze when absent.
    pub maze: Option<PathBuf>,
    pub flee_radius: u8,
    pub shoot_range: u8,
}

impl Default for SheepSpec {
    fn default() -> Self {
        Self {
            maze: None,
            flee_radius: 2,
            shoot_range: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecommendationRule {
    #[default]
    HighestValue,
    HighestVisits,
}

impl From<RecommendationRule> for Recommendation {
    fn from(r: RecommendationRule) -> Self {
        match r {
            RecommendationRule::HighestValue => Recommendation::HighestValue,
            RecommendationRule::HighestVisits => Recommendation::HighestVisits,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub domain: Domain,
    pub agents: Vec<AgentSpec>,
    /// Simulations per search, strictly increasing.
    pub budgets: Vec<usize>,
    pub instances: u32,
    pub trials: u32,
    pub seed: u64,
    /// `C_p`; 700 for sailing and 20 for sheep when absent.
    #[serde(default)]
    pub exploration: Option<f64>,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// Episode length cap; the horizon when absent.
    #[serde(default)]
    pub max_steps: Option<usize>,
    #[serde(default = "default_discount")]
    pub discount: f64,
    #[serde(default)]
    pub recommendation: RecommendationRule,
    /// Value-iteration tolerance for Optimal, StochasticOptimal and subtasks.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub sailing: SailingSpec,
    #[serde(default)]
    pub sheep: SheepSpec,
}

fn default_horizon() -> usize {
    300
}

fn default_discount() -> f64 {
    0.99
}

fn default_tolerance() -> f64 {
    1e-6
}

pub const SAILING_BUDGETS: [usize; 7] = [250, 500, 1000, 2000, 4000, 8000, 16000];
pub const SHEEP_BUDGETS: [usize; 6] = [200, 500, 1000, 2000, 5000, 10000];

impl ExperimentSpec {
    /// A spec with the domain's defaults and the given agents.
    pub fn new(domain: Domain, agents: &[&str]) -> Self {
        Self {
            domain,
            agents: agents.iter().map(|&a| a.into()).collect(),
            budgets: match domain {
                Domain::Sailing => SAILING_BUDGETS.to_vec(),
                Domain::Sheep => SHEEP_BUDGETS.to_vec(),
            },
            instances: 1,
            trials: 1,
            seed: 0,
            exploration: None,
            horizon: default_horizon(),
            max_steps: None,
            discount: default_discount(),
            recommendation: RecommendationRule::default(),
            tolerance: default_tolerance(),
            sailing: SailingSpec::default(),
            sheep: SheepSpec::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::io(path, source))?;
        serde_json::from_str(&text).map_err(|source| HarnessError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn exploration(&self) -> f64 {
        self.exploration.unwrap_or(match self.domain {
            Domain::Sailing => 700.0,
            Domain::Sheep => 20.0,
        })
    }

    pub fn max_steps(&self) -> usize {
        self.max_steps.unwrap_or(self.horizon)
    }

    /// Checks the spec and resolves its agents.
    pub fn resolve_agents(&self) -> Result<Vec<ResolvedAgent>, HarnessError> {
        let bad = |m: String| Err(HarnessError::Spec(m));
        if self.agents.is_empty() {
            return bad("no agents".into());
        }
        if self.budgets.is_empty() || self.budgets[0] == 0 || self.budgets.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("budgets must be positive and strictly increasing, got {:?}", self.budgets));
        }
        if self.instances == 0 || self.trials == 0 {
            return bad("instances and trials must be positive".into());
        }
        if !(0.0..1.0).contains(&self.discount) {
            return bad(format!("discount {} outside [0, 1)", self.discount));
        }
        if !(self.exploration() > 0.0) {
            return bad(format!("exploration constant must be positive, got {}", self.exploration()));
        }
        if self.horizon == 0 || self.max_steps() == 0 {
            return bad("horizon and max_steps must be positive".into());
        }
        if !(self.tolerance > 0.0) {
            return bad(format!("tolerance must be positive, got {}", self.tolerance));
        }
        let agents = self
            .agents
            .iter()
            .map(|a| a.resolve(self.domain).map_err(HarnessError::Spec))
            .collect::<Result<Vec<_>, _>>()?;
        for (i, a) in agents.iter().enumerate() {
            if agents[..i].iter().any(|b| b.label == a.label) {
                return bad(format!("duplicate agent label {}", a.label));
            }
        }
        Ok(agents)
    }
}
