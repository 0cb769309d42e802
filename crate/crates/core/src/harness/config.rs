use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::algorithm::{BetaChoice, StopRule};
use crate::error::{Error, Result};
use crate::inner::InnerStrategy;
use crate::network::{self, MixingTopology, TopologyJson, WeightScheme};
use crate::problem::{self, InstanceJson, ProblemInstance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub graph: GraphSpec,
    #[serde(default)]
    pub algorithm: AlgorithmSpec,
    #[serde(default)]
    pub stop: StopSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// `f₁ = x₁²`, `f₂ = 2x₂²`, `x₁ + x₂ = 3`.
    Toy,
    File { path: PathBuf },
    RankDeficient {
        n: usize,
        d_i: usize,
        p: usize,
        rank: usize,
        variance: f64,
        eig_lo: f64,
        eig_hi: f64,
        seed: u64,
    },
    FullRank {
        n: usize,
        d_i: usize,
        p: usize,
        variance: f64,
        eig_lo: f64,
        eig_hi: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub topology: GraphKind,
    #[serde(default)]
    pub weights: Option<WeightScheme>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphKind {
    Complete { n: usize },
    Path { n: usize },
    Exponential { n: usize, e: u32 },
    ErdosRenyi { n: usize, p: f64, seed: u64 },
    /// A serialized topology; `weights` must be absent.
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerKind {
    Exact,
    Gd,
    Agd,
}

impl std::str::FromStr for InnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(InnerKind::Exact),
            "gd" => Ok(InnerKind::Gd),
            "agd" => Ok(InnerKind::Agd),
            other => Err(Error::Config(format!("inner must be exact, gd or agd, got '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    pub inner: InnerKind,
    /// Decay of the inner accuracy target; `0` means exact solves.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default = "default_delta0")]
    pub delta0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_steps: Option<usize>,
    #[serde(default = "default_beta")]
    pub beta: BetaChoice,
}

fn default_delta0() -> f64 {
    1.0
}

fn default_beta() -> BetaChoice {
    BetaChoice::Auto
}

impl Default for AlgorithmSpec {
    fn default() -> Self {
        AlgorithmSpec { inner: InnerKind::Exact, gamma: None, delta0: 1.0, inner_steps: None, beta: BetaChoice::Auto }
    }
}

impl AlgorithmSpec {
    pub fn strategy(&self) -> Result<InnerStrategy> {
        match (self.inner, self.gamma, self.inner_steps) {
            (InnerKind::Exact, None, None) => Ok(InnerStrategy::exact()),
            (InnerKind::Exact, _, _) => Err(Error::Config("inner = exact takes neither gamma nor inner_steps".into())),
            (InnerKind::Gd, None, Some(s)) => InnerStrategy::gd_fixed(s),
            (InnerKind::Gd, _, _) => Err(Error::Config("inner = gd needs inner_steps and no gamma".into())),
            (InnerKind::Agd, Some(g), None) if g == 0.0 => Ok(InnerStrategy::exact()),
            (InnerKind::Agd, Some(g), None) => InnerStrategy::agd_tolerance(self.delta0, g),
            (InnerKind::Agd, None, Some(s)) => InnerStrategy::agd_fixed(s),
            (InnerKind::Agd, _, _) => Err(Error::Config("inner = agd needs exactly one of gamma and inner_steps".into())),
        }
    }

    /// `γ` for the rate `θ`; fixed-step strategies carry no guarantee and
    /// report `θ` without a `γ` term.
    pub fn gamma_for_rate(&self) -> f64 {
        self.gamma.unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopSpec {
    #[serde(default = "default_max_outer")]
    pub max_outer: usize,
    #[serde(default = "default_gap_tol")]
    pub gap_tol: f64,
}

fn default_max_outer() -> usize {
    1000
}

fn default_gap_tol() -> f64 {
    1e-8
}

impl Default for StopSpec {
    fn default() -> Self {
        StopSpec { max_outer: default_max_outer(), gap_tol: default_gap_tol() }
    }
}

impl From<StopSpec> for StopRule {
    fn from(s: StopSpec) -> Self {
        StopRule { max_outer: s.max_outer, gap_tol: s.gap_tol }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub beta: Option<BetaChoice>,
    pub gamma: Option<f64>,
    pub delta0: Option<f64>,
    pub inner: Option<InnerKind>,
    pub inner_steps: Option<usize>,
    pub max_outer: Option<usize>,
    pub gap_tol: Option<f64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config; relative `file` paths inside it resolve against the
    /// config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_json_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let ProblemSpec::File { path } = &mut cfg.problem {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        if let GraphKind::File { path } = &mut cfg.graph.topology {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.algorithm.strategy()?;
        if !(self.stop.gap_tol >= 0.0) {
            return Err(Error::Config(format!("gap_tol must be nonnegative, got {}", self.stop.gap_tol)));
        }
        if matches!(self.graph.topology, GraphKind::File { .. }) && self.graph.weights.is_some() {
            return Err(Error::Config("a topology file already carries its weights".into()));
        }
        Ok(())
    }

    /// `--inner` replaces the strategy fields of the file, so `--inner gd`
    /// never inherits a `gamma` meant for `agd`.
    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(seed) = o.seed {
            match &mut self.problem {
                ProblemSpec::RankDeficient { seed: s, .. } | ProblemSpec::FullRank { seed: s, .. } => *s = seed,
                ProblemSpec::Toy | ProblemSpec::File { .. } => {}
            }
            if let GraphKind::ErdosRenyi { seed: s, .. } = &mut self.graph.topology {
                *s = seed;
            }
        }
        let alg = &mut self.algorithm;
        if let Some(inner) = o.inner {
            alg.inner = inner;
            alg.gamma = None;
            alg.inner_steps = None;
        }
        if o.gamma.is_some() {
            alg.gamma = o.gamma;
        }
        if o.inner_steps.is_some() {
            alg.inner_steps = o.inner_steps;
        }
        if let Some(d) = o.delta0 {
            alg.delta0 = d;
        }
        if let Some(b) = o.beta {
            alg.beta = b;
        }
        if let Some(m) = o.max_outer {
            self.stop.max_outer = m;
        }
        if let Some(g) = o.gap_tol {
            self.stop.gap_tol = g;
        }
        if o.out.is_some() {
            self.output.dir = o.out.clone();
        }
        self.validate()
    }
}

impl ProblemSpec {
    pub fn build(&self) -> Result<ProblemInstance> {
        match self {
            ProblemSpec::Toy => Ok(ProblemInstance::toy()),
            ProblemSpec::File { path } => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read instance {}: {e}", path.display())))?;
                let json: InstanceJson =
                    serde_json::from_str(&text).map_err(|e| Error::Config(format!("malformed instance: {e}")))?;
                ProblemInstance::from_json(&json)
            }
            &ProblemSpec::RankDeficient { n, d_i, p, rank, variance, eig_lo, eig_hi, seed } => {
                let quads = problem::generate_quadratic_agents(n, d_i, eig_lo, eig_hi, seed)?;
                let (blocks, b) = problem::generate_constraint_rank_deficient(n, d_i, p, rank, variance, seed)?;
                ProblemInstance::assemble(quads, blocks, b)
            }
            &ProblemSpec::FullRank { n, d_i, p, variance, eig_lo, eig_hi, seed } => {
                let quads = problem::generate_quadratic_agents(n, d_i, eig_lo, eig_hi, seed)?;
                let (blocks, b) = problem::generate_constraint_full_rank(n, d_i, p, variance, seed)?;
                ProblemInstance::assemble(quads, blocks, b)
            }
        }
    }
}

impl GraphSpec {
    pub fn build(&self) -> Result<MixingTopology> {
        let graph = match &self.topology {
            GraphKind::File { path } => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read topology {}: {e}", path.display())))?;
                let json: TopologyJson =
                    serde_json::from_str(&text).map_err(|e| Error::Config(format!("malformed topology: {e}")))?;
                return MixingTopology::from_json(&json);
            }
            &GraphKind::Complete { n } => network::build_complete(n)?,
            &GraphKind::Path { n } => network::build_path(n)?,
            &GraphKind::Exponential { n, e } => network::build_directed_exponential(n, e)?,
            &GraphKind::ErdosRenyi { n, p, seed } => network::build_erdos_renyi(n, p, seed)?,
        };
        network::mixing_matrix(&graph, self.scheme())
    }

    /// Uniform weights on regular graphs, Metropolis otherwise.
    pub fn scheme(&self) -> WeightScheme {
        self.weights.unwrap_or(match self.topology {
            GraphKind::Complete { .. } | GraphKind::Exponential { .. } => WeightScheme::UniformRegular,
            _ => WeightScheme::Metropolis,
        })
    }
}
