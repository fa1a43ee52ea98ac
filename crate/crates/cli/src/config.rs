use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use revwel::anticonc::RandomVariableModel;
use revwel::mech::MechanismId;
use revwel::{Distribution, FeasibilityEnvironment};
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_SAMPLES: u64 = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Classify,
    Ratio,
    Audit,
    Asymptotics,
    Counterexample,
    Anticoncentration,
    Chebyshev,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Classify => "classify",
            Self::Ratio => "ratio",
            Self::Audit => "audit",
            Self::Asymptotics => "asymptotics",
            Self::Counterexample => "counterexample",
            Self::Anticoncentration => "anticoncentration",
            Self::Chebyshev => "chebyshev",
        }
    }
}

/// A mechanism id, or `all` for every mechanism the environment supports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MechanismChoice {
    One(MechanismId),
    All,
}

impl TryFrom<String> for MechanismChoice {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<MechanismChoice> for String {
    fn from(m: MechanismChoice) -> Self {
        match m {
            MechanismChoice::One(id) => id.as_str().to_string(),
            MechanismChoice::All => "all".to_string(),
        }
    }
}

impl std::str::FromStr for MechanismChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "all" {
            return Ok(Self::All);
        }
        s.parse().map(Self::One).map_err(|e: revwel::Error| e.to_string())
    }
}

/// One experiment run. Every field can come from a JSON file or a flag.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env: Option<FeasibilityEnvironment>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dists: Vec<Distribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n_list: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mechanism: Option<MechanismChoice>,
    /// Grid size for `classify`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    /// Random instances drawn by `anticoncentration` and `chebyshev`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Extra models for the `anticoncentration` sum checks.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub models: Vec<RandomVariableModel>,
}

#[derive(Args, Clone, Debug, Default)]
pub struct Flags {
    /// JSON experiment config; flags given alongside it take precedence
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Feasibility environment as JSON, e.g. '{"kind":"single_item","n":3}'
    #[arg(long, value_name = "JSON")]
    pub env: Option<String>,
    /// Value distribution as JSON; give once for i.i.d. agents or once per agent
    #[arg(long = "dist", value_name = "JSON")]
    pub dists: Vec<String>,
    #[arg(long)]
    pub c: Option<f64>,
    /// Comma-separated agent counts
    #[arg(long = "n", value_name = "LIST", value_delimiter = ',')]
    pub n_list: Vec<usize>,
    #[arg(long)]
    pub samples: Option<u64>,
    /// Base seed [default: 42]
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV destination [default: stdout]
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// efficient, optimal, vcg_l or all
    #[arg(long)]
    pub mechanism: Option<MechanismChoice>,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
}

impl Flags {
    /// Reads the config file, if any, and lays the flags over it.
    pub fn resolve(&self, experiment: Option<Experiment>) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str::<ExperimentConfig>(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => ExperimentConfig::default(),
        };
        match (experiment, cfg.experiment) {
            (Some(a), Some(b)) if a != b => {
                bail!("config is for `{}` but `{}` was requested", b.as_str(), a.as_str())
            }
            (Some(a), _) => cfg.experiment = Some(a),
            (None, None) => bail!("config names no experiment"),
            (None, Some(_)) => {}
        }
        if let Some(env) = &self.env {
            cfg.env = Some(FeasibilityEnvironment::from_json(env).with_context(|| format!("--env {env}"))?);
        }
        if !self.dists.is_empty() {
            cfg.dists = self
                .dists
                .iter()
                .map(|d| Distribution::from_json(d).with_context(|| format!("--dist {d}")))
                .collect::<Result<_>>()?;
        }
        if !self.n_list.is_empty() {
            cfg.n_list = self.n_list.clone();
        }
        cfg.c = self.c.or(cfg.c);
        cfg.samples = self.samples.or(cfg.samples);
        cfg.seed = Some(self.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED));
        cfg.out = self.out.clone().or(cfg.out);
        cfg.mechanism = self.mechanism.or(cfg.mechanism);
        cfg.grid = self.grid.or(cfg.grid);
        cfg.trials = self.trials.or(cfg.trials);
        Ok(cfg)
    }
}

impl ExperimentConfig {
    pub fn experiment(&self) -> Experiment {
        self.experiment.expect("resolved configs name an experiment")
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn samples(&self) -> u64 {
        self.samples.unwrap_or(DEFAULT_SAMPLES)
    }

    pub fn require_c(&self) -> Result<f64> {
        match self.c {
            Some(c) if c > 0.0 && c.is_finite() => Ok(c),
            Some(c) => bail!("c must be positive, got {c}"),
            None => bail!("`{}` needs --c", self.experiment().as_str()),
        }
    }

    pub fn require_env(&self) -> Result<&FeasibilityEnvironment> {
        self.env
            .as_ref()
            .with_context(|| format!("`{}` needs --env", self.experiment().as_str()))
    }

    /// One distribution per agent, repeating a single one for i.i.d. agents.
    pub fn agent_dists(&self, n: usize) -> Result<Vec<Distribution>> {
        match self.dists.len() {
            0 => bail!("`{}` needs --dist", self.experiment().as_str()),
            1 => Ok(vec![self.dists[0].clone(); n]),
            k if k == n => Ok(self.dists.clone()),
            k => bail!("{k} distributions given for {n} agents"),
        }
    }
}
