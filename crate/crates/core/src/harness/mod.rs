//! Configuration, CLI and experiment plumbing around the library.

pub mod cli;
pub mod config;
pub mod csv;
pub mod experiments;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::algorithm::{self, StepSizeReport, StopReason, Trace};
use crate::diagnostics::{self, DiagnosticReport};
use crate::error::Result;
use crate::network::MixingTopology;
use crate::problem::{self, ProblemInstance};
use config::RunConfig;

/// SHA-256 of the topology's JSON encoding.
pub fn topology_hash(topo: &MixingTopology) -> String {
    let bytes = serde_json::to_vec(&topo.to_json()).expect("topology json encodes");
    hex::encode(Sha256::digest(&bytes))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Instance, topology and step-size report resolved from a config.
pub struct Prepared {
    pub instance: ProblemInstance,
    pub topology: MixingTopology,
    pub step: StepSizeReport,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let instance = cfg.problem.build()?;
    let topology = cfg.graph.build()?;
    if topology.n() != instance.n() {
        return Err(crate::Error::Config(format!(
            "graph has {} nodes but the problem has {} agents",
            topology.n(),
            instance.n()
        )));
    }
    let step = StepSizeReport::evaluate(&instance, &topology, cfg.algorithm.beta, cfg.algorithm.gamma_for_rate());
    Ok(Prepared { instance, topology, step })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub instance_hash: String,
    pub graph_hash: String,
    pub config: RunConfig,
    pub step_size: StepSizeReport,
    pub diagnostics: DiagnosticReport,
    pub iterations: usize,
    pub final_gap: f64,
    pub stop: StopReason,
    pub max_tracking_error: f64,
}

pub struct RunOutcome {
    pub trace: Trace,
    pub summary: RunSummary,
}

pub fn run_config(cfg: &RunConfig) -> Result<RunOutcome> {
    let prep = prepare(cfg)?;
    let strategy = cfg.algorithm.strategy()?;
    let oracle = problem::kkt_solve(&prep.instance)?;
    let trace = algorithm::run(
        &prep.instance,
        &prep.topology,
        &strategy,
        prep.step.beta_used,
        cfg.stop.into(),
        &oracle,
    )?;
    let diagnostics = DiagnosticReport::new(&trace.rate, cfg.algorithm.gamma_for_rate(), Some(trace.lmi.clone()));
    let summary = RunSummary {
        instance_hash: prep.instance.content_hash(),
        graph_hash: topology_hash(&prep.topology),
        config: cfg.clone(),
        step_size: prep.step,
        diagnostics,
        iterations: trace.final_state.k,
        final_gap: trace.final_gap(),
        stop: trace.stop,
        max_tracking_error: trace.max_tracking_error(),
    };
    Ok(RunOutcome { trace, summary })
}

/// Writes `trace.csv` and `diagnostics.json` into `dir`.
pub fn write_run(dir: &Path, out: &RunOutcome) -> Result<()> {
    fs::create_dir_all(dir)?;
    let f = fs::File::create(dir.join("trace.csv"))?;
    csv::write_trace(std::io::BufWriter::new(f), &out.trace.rows)?;
    write_json(&dir.join("diagnostics.json"), &out.summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseReport {
    pub instance_hash: String,
    pub graph_hash: String,
    pub rank_a: usize,
    pub step_size: StepSizeReport,
    pub rate: DiagnosticReport,
    pub m_irreducible: bool,
}

pub fn diagnose(cfg: &RunConfig) -> Result<DiagnoseReport> {
    let prep = prepare(cfg)?;
    let rate = diagnostics::build_rate_matrices(&prep.instance, &prep.topology, prep.step.beta_used);
    Ok(DiagnoseReport {
        instance_hash: prep.instance.content_hash(),
        graph_hash: topology_hash(&prep.topology),
        rank_a: prep.instance.rank_a(),
        step_size: prep.step,
        rate: DiagnosticReport::new(&rate, cfg.algorithm.gamma_for_rate(), None),
        m_irreducible: rate.is_irreducible(),
    })
}

/// Writes `instance.json` and `topology.json` into `dir`.
pub fn generate(cfg: &RunConfig, dir: &Path) -> Result<(ProblemInstance, MixingTopology)> {
    let instance = cfg.problem.build()?;
    let topology = cfg.graph.build()?;
    write_json(&dir.join("instance.json"), &instance.to_json())?;
    write_json(&dir.join("topology.json"), &topology.to_json())?;
    Ok((instance, topology))
}
