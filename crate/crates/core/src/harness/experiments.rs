//! The two experiment recipes and their variant sweeps.
//!
//! Experiment 1: 20 agents on the directed exponential graph (`e = 4`,
//! uniform weights), `P_i` 2×2 with eigenvalues in `[1, 10]`, stacked `A`
//! 100×40 of rank 20 built from linear combinations of 20 `N(0, 10)` rows.
//! Experiment 2: the same quadratics, an undirected Erdős–Rényi graph
//! (`p = 0.3`, Metropolis weights) and a full-row-rank 20×40 `A`.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{AlgorithmSpec, GraphKind, GraphSpec, InnerKind, ProblemSpec, StopSpec};
use super::csv;
use crate::algorithm::{self, BetaChoice, StepSizeReport, StopReason};
use crate::error::{Error, Result};
use crate::network::{MixingTopology, WeightScheme};
use crate::problem::{self, ProblemInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    One,
    Two,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::One => "experiment1",
            Experiment::Two => "experiment2",
        }
    }

    pub fn problem(self, seed: u64) -> ProblemSpec {
        match self {
            Experiment::One => ProblemSpec::RankDeficient {
                n: 20,
                d_i: 2,
                p: 100,
                rank: 20,
                variance: 10.0,
                eig_lo: 1.0,
                eig_hi: 10.0,
                seed,
            },
            Experiment::Two => {
                ProblemSpec::FullRank { n: 20, d_i: 2, p: 20, variance: 10.0, eig_lo: 1.0, eig_hi: 10.0, seed }
            }
        }
    }

    pub fn graph(self, seed: u64) -> GraphSpec {
        match self {
            Experiment::One => {
                GraphSpec { topology: GraphKind::Exponential { n: 20, e: 4 }, weights: Some(WeightScheme::UniformRegular) }
            }
            Experiment::Two => GraphSpec {
                topology: GraphKind::ErdosRenyi { n: 20, p: 0.3, seed },
                weights: Some(WeightScheme::Metropolis),
            },
        }
    }

    pub fn build(self, seed: u64) -> Result<(ProblemInstance, MixingTopology)> {
        Ok((self.problem(seed).build()?, self.graph(seed).build()?))
    }
}

/// One inner strategy of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub label: String,
    pub algorithm: AlgorithmSpec,
}

/// `γ ∈ {0, 0.9, 0.95}` with AGD (`γ = 0` is exact) and AGD with `s ∈ {1, 5}`
/// fixed steps.
pub fn default_variants(delta0: f64, beta: BetaChoice) -> Vec<VariantSpec> {
    let tol = |g: f64| AlgorithmSpec { inner: InnerKind::Agd, gamma: Some(g), delta0, inner_steps: None, beta };
    let fixed = |s: usize| AlgorithmSpec { inner: InnerKind::Agd, gamma: None, delta0, inner_steps: Some(s), beta };
    vec![
        VariantSpec { label: "gamma0".into(), algorithm: tol(0.0) },
        VariantSpec { label: "gamma0.9".into(), algorithm: tol(0.9) },
        VariantSpec { label: "gamma0.95".into(), algorithm: tol(0.95) },
        VariantSpec { label: "s1".into(), algorithm: fixed(1) },
        VariantSpec { label: "s5".into(), algorithm: fixed(5) },
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOptions {
    pub seed: u64,
    /// Base step size; each variant runs at every multiple in `multipliers`.
    pub beta: BetaChoice,
    pub delta0: f64,
    pub multipliers: Vec<f64>,
    pub stop: StopSpec,
    pub out: PathBuf,
}

impl ExperimentOptions {
    pub fn new(seed: u64, out: impl Into<PathBuf>) -> Self {
        ExperimentOptions {
            seed,
            beta: BetaChoice::Auto,
            delta0: 1.0,
            multipliers: vec![1.0, 2.0, 5.0],
            stop: StopSpec { max_outer: 2000, gap_tol: 1e-8 },
            out: out.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRecord {
    pub label: String,
    pub file: String,
    pub algorithm: AlgorithmSpec,
    pub beta_multiplier: f64,
    pub beta: f64,
    pub theta: f64,
    pub x_hat: f64,
    pub rho_m: f64,
    pub guaranteed: bool,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub iterations: usize,
    pub final_gap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop: Option<StopReason>,
    pub lmi_violations: usize,
    pub max_tracking_error: f64,
    /// `‖x_final − x*‖`.
    pub x_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: Experiment,
    pub seed: u64,
    pub instance_hash: String,
    pub graph_hash: String,
    pub problem: ProblemSpec,
    pub graph: GraphSpec,
    pub n: usize,
    pub p: usize,
    pub d: usize,
    pub rank_a: usize,
    pub sigma: f64,
    pub step_size: StepSizeReport,
    pub beta_base: BetaChoice,
    pub stop: StopSpec,
    pub csv_header: String,
    pub note: String,
    pub variants: Vec<VariantRecord>,
}

pub const COMPARISON_NOTE: &str = "No baseline algorithms are run; the comparison is across iDDGT variants (inner strategy and step size).";

fn file_name(label: &str, mult: f64) -> String {
    format!("{label}_betax{mult}.csv")
}

/// Runs every variant at every step-size multiple, writes one CSV per run
/// into `opts.out`, then `manifest.json`. A failing run is recorded in the
/// manifest and its error returned after the manifest is written.
pub fn run_experiment(which: Experiment, opts: &ExperimentOptions) -> Result<Manifest> {
    let variants = default_variants(opts.delta0, opts.beta);
    run_variants(which, opts, &variants)
}

pub fn run_variants(which: Experiment, opts: &ExperimentOptions, variants: &[VariantSpec]) -> Result<Manifest> {
    let (inst, topo) = which.build(opts.seed)?;
    let oracle = problem::kkt_solve(&inst)?;
    let base = StepSizeReport::evaluate(&inst, &topo, opts.beta, 0.0);
    let base_beta = base.beta_used;
    fs::create_dir_all(&opts.out)?;

    let jobs: Vec<(&VariantSpec, f64)> =
        variants.iter().flat_map(|v| opts.multipliers.iter().map(move |&m| (v, m))).collect();
    let results: Vec<(VariantRecord, Option<Error>)> = jobs
        .par_iter()
        .map(|&(v, mult)| {
            let beta = base_beta * mult;
            let rep = StepSizeReport::evaluate(&inst, &topo, BetaChoice::Value(beta), v.algorithm.gamma_for_rate());
            let file = file_name(&v.label, mult);
            let mut rec = VariantRecord {
                label: v.label.clone(),
                file: file.clone(),
                algorithm: AlgorithmSpec { beta: BetaChoice::Value(beta), ..v.algorithm.clone() },
                beta_multiplier: mult,
                beta,
                theta: rep.theta,
                x_hat: rep.x_hat,
                rho_m: rep.rho_m,
                guaranteed: rep.guaranteed && v.algorithm.inner_steps.is_none(),
                status: "ok".into(),
                error: None,
                iterations: 0,
                final_gap: f64::NAN,
                stop: None,
                lmi_violations: 0,
                max_tracking_error: 0.0,
                x_error: f64::NAN,
            };
            let outcome = v
                .algorithm
                .strategy()
                .and_then(|s| algorithm::run(&inst, &topo, &s, beta, opts.stop.into(), &oracle))
                .and_then(|trace| {
                    write_csv(&opts.out.join(&file), &trace.rows)?;
                    Ok(trace)
                });
            match outcome {
                Ok(trace) => {
                    rec.iterations = trace.final_state.k;
                    rec.final_gap = trace.final_gap();
                    rec.stop = Some(trace.stop);
                    rec.lmi_violations = trace.lmi.violations;
                    rec.max_tracking_error = trace.max_tracking_error();
                    rec.x_error = (trace.final_state.stacked_x() - &oracle.x_star).norm();
                    (rec, None)
                }
                Err(e) => {
                    rec.status = "error".into();
                    rec.error = Some(e.to_string());
                    (rec, Some(e))
                }
            }
        })
        .collect();

    let mut first_error = None;
    let mut records = Vec::with_capacity(results.len());
    for (rec, err) in results {
        if first_error.is_none() {
            first_error = err;
        }
        records.push(rec);
    }
    let manifest = Manifest {
        experiment: which,
        seed: opts.seed,
        instance_hash: inst.content_hash(),
        graph_hash: super::topology_hash(&topo),
        problem: which.problem(opts.seed),
        graph: which.graph(opts.seed),
        n: inst.n(),
        p: inst.p(),
        d: inst.d(),
        rank_a: inst.rank_a(),
        sigma: topo.sigma(),
        step_size: base,
        beta_base: opts.beta,
        stop: opts.stop,
        csv_header: csv::HEADER.into(),
        note: COMPARISON_NOTE.into(),
        variants: records,
    };
    super::write_json(&opts.out.join("manifest.json"), &manifest)?;
    match first_error {
        Some(e) => Err(e),
        None => Ok(manifest),
    }
}

fn write_csv(path: &Path, rows: &[algorithm::TraceRow]) -> Result<()> {
    let f = fs::File::create(path)?;
    csv::write_trace(std::io::BufWriter::new(f), rows)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recipes_have_the_stated_shape() {
        let (inst, topo) = Experiment::One.build(3).unwrap();
        assert_eq!((inst.n(), inst.p(), inst.d(), inst.rank_a()), (20, 100, 40, 20));
        assert!(topo.graph().is_directed());
        assert!(inst.mu() >= 1.0 - 1e-9 && inst.l() <= 10.0 + 1e-9);
        let (inst2, topo2) = Experiment::Two.build(3).unwrap();
        assert_eq!((inst2.n(), inst2.p(), inst2.rank_a()), (20, 20, 20));
        assert!(!topo2.graph().is_directed());
        // Same quadratics in both recipes.
        assert_eq!(inst.agent(4).p(), inst2.agent(4).p());
    }

    #[test]
    fn five_variants() {
        let v = default_variants(1.0, BetaChoice::Auto);
        assert_eq!(v.len(), 5);
        assert!(v.iter().all(|s| s.algorithm.strategy().is_ok()));
    }
}
