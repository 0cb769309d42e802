//! The outer iteration and the centralized dual-ascent baseline.
//!
//! With `W` the mixing matrix, agent `i` keeps a primal block `x_i`, a
//! tracker `z_i` of the dual gradient and a multiplier `λ_i`:
//!
//! ```text
//! x_i⁺ ≈ argmin f_i(x) + λ_iᵀ A_i x
//! z⁺   = W z + A_i(x_i⁺ − x_i)
//! λ⁺   = W (λ + β z⁺)
//! ```
//!
//! `z` and `λ` are stored as `n × p` matrices whose row `i` belongs to agent
//! `i`, so one communication round is a left multiplication by `W`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, Constants, LmiReport, RateMatrices, ZetaVector};
use crate::error::{Error, Result};
use crate::inner::InnerStrategy;
use crate::linalg;
use crate::network::MixingTopology;
use crate::problem::{KktSolution, ProblemInstance};

/// Gap above which a run is declared divergent.
pub const DIVERGENCE_GAP: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct OuterState {
    pub x: Vec<DVector<f64>>,
    /// Row `i` is `z_iᵀ`.
    pub z: DMatrix<f64>,
    /// Row `i` is `λ_iᵀ`.
    pub lambda: DMatrix<f64>,
    pub lambda_prev: DMatrix<f64>,
    pub k: usize,
    pub grad_steps: usize,
    pub exact_solves: usize,
    pub comm_rounds: usize,
}

impl OuterState {
    /// `x⁰ = 0`, `λ⁰ = 0`, `z_i⁰ = −b/n`, and `λ^{−1} = λ⁰`.
    pub fn initial(inst: &ProblemInstance) -> Self {
        let (n, p) = (inst.n(), inst.p());
        let zrow = inst.b() / -(n as f64);
        OuterState {
            x: inst.agents().iter().map(|a| DVector::zeros(a.dim())).collect(),
            z: DMatrix::from_fn(n, p, |_, j| zrow[j]),
            lambda: DMatrix::zeros(n, p),
            lambda_prev: DMatrix::zeros(n, p),
            k: 0,
            grad_steps: 0,
            exact_solves: 0,
            comm_rounds: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn stacked_x(&self) -> DVector<f64> {
        linalg::vstack(&self.x)
    }

    pub fn lambda_i(&self, i: usize) -> DVector<f64> {
        self.lambda.row(i).transpose()
    }

    pub fn z_bar(&self) -> DVector<f64> {
        linalg::row_mean(&self.z)
    }

    pub fn lambda_bar(&self) -> DVector<f64> {
        linalg::row_mean(&self.lambda)
    }

    /// `‖z̄ − (Ax − b)/n‖`.
    pub fn tracking_error(&self, inst: &ProblemInstance) -> f64 {
        (self.z_bar() - inst.residual(&self.x) / self.n() as f64).norm()
    }

    /// Stacked `‖x − x*(λ)‖` where agent `i` uses its own `λ_i`.
    pub fn distance_to_shifted_minimizer(&self, inst: &ProblemInstance) -> f64 {
        (0..self.n())
            .map(|i| (&self.x[i] - inst.agent(i).shifted_minimizer(&self.lambda_i(i))).norm_squared())
            .sum::<f64>()
            .sqrt()
    }
}

/// What one outer step certified about its inner solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    /// Bound on the stacked `‖x^{k+1} − x*(λ^k)‖` from the achieved gradient
    /// norms: `√Σ_i (‖∇F_i‖/μ_i)²`.
    pub certified_delta: f64,
    /// Accuracy target `δ^{k+1}` of the strategy, if it has one.
    pub target_delta: Option<f64>,
    /// `‖λ̄^{k+1} − (λ̄^k + β z̄^{k+1})‖`.
    pub lambda_bar_error: f64,
    pub tracking_error: f64,
}

pub fn iddgt_step(
    state: &OuterState,
    inst: &ProblemInstance,
    topo: &MixingTopology,
    strategy: &InnerStrategy,
    beta: f64,
) -> Result<OuterState> {
    iddgt_step_with_info(state, inst, topo, strategy, beta).map(|(s, _)| s)
}

pub fn iddgt_step_with_info(
    state: &OuterState,
    inst: &ProblemInstance,
    topo: &MixingTopology,
    strategy: &InnerStrategy,
    beta: f64,
) -> Result<(OuterState, StepInfo)> {
    let n = inst.n();
    if topo.n() != n || state.n() != n {
        return Err(Error::Shape(format!("instance has {n} agents, topology {}, state {}", topo.n(), state.n())));
    }
    let w = topo.w();
    let mu = inst.mu();
    let mut x_new = Vec::with_capacity(n);
    let mut innovation = DMatrix::zeros(n, inst.p());
    let mut grad_steps = 0;
    let mut exact_solves = 0;
    let mut cert_sq = 0.0;
    for i in 0..n {
        let agent = inst.agent(i);
        let lam = state.lambda_i(i);
        let res = strategy.solve(agent, &lam, &state.x[i], state.k, n, mu).map_err(|e| match e {
            Error::ToleranceUnreachable { target, achieved, iterations, .. } => {
                Error::ToleranceUnreachable { agent: i, target, achieved, iterations }
            }
            other => other,
        })?;
        grad_steps += res.grad_steps;
        exact_solves += res.exact_solves;
        cert_sq += (res.achieved_grad_norm / agent.mu()).powi(2);
        let delta_a = agent.a() * (&res.x_new - &state.x[i]);
        innovation.set_row(i, &delta_a.transpose());
        x_new.push(res.x_new);
    }
    let z = w * &state.z + innovation;
    let lambda = w * (&state.lambda + &z * beta);
    let next = OuterState {
        x: x_new,
        z,
        lambda,
        lambda_prev: state.lambda.clone(),
        k: state.k + 1,
        grad_steps: state.grad_steps + grad_steps,
        exact_solves: state.exact_solves + exact_solves,
        comm_rounds: state.comm_rounds + 2,
    };
    let lambda_bar_error = (next.lambda_bar() - (state.lambda_bar() + next.z_bar() * beta)).norm();
    let info = StepInfo {
        certified_delta: cert_sq.sqrt(),
        target_delta: strategy.delta(state.k + 1),
        lambda_bar_error,
        tracking_error: next.tracking_error(inst),
    };
    Ok((next, info))
}

/// How `β` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaChoice {
    /// `0.9 ×` the theoretical bound (the min of the two step bounds).
    Auto,
    /// `0.9 × μ/σ̄²(𝐀)`, the larger bound as printed in the step-size
    /// condition when it is read with a max.
    Smooth,
    Value(f64),
}

impl BetaChoice {
    pub fn resolve(&self, report: &StepSizeReport) -> f64 {
        match *self {
            BetaChoice::Auto => 0.9 * report.beta_theoretical,
            BetaChoice::Smooth => 0.9 * report.bound_smooth,
            BetaChoice::Value(v) => v,
        }
    }
}

impl fmt::Display for BetaChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BetaChoice::Auto => f.write_str("auto"),
            BetaChoice::Smooth => f.write_str("smooth"),
            BetaChoice::Value(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for BetaChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(BetaChoice::Auto),
            "smooth" => Ok(BetaChoice::Smooth),
            other => {
                let v: f64 = other
                    .parse()
                    .map_err(|_| Error::Config(format!("beta must be 'auto', 'smooth' or a number, got '{other}'")))?;
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("beta must be positive, got {v}")));
                }
                Ok(BetaChoice::Value(v))
            }
        }
    }
}

impl Serialize for BetaChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BetaChoice::Value(v) => s.serialize_f64(*v),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for BetaChoice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => BetaChoice::from_str(&v.to_string()),
            Raw::Text(s) => BetaChoice::from_str(&s),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// `(μ/σ̄²(𝐀), (1−σ)²σ̲²(A)μ²/(16σ̄⁴(𝐀)nl))`.
pub fn step_bounds(c: &Constants) -> (f64, f64) {
    let smooth = c.mu / c.os_blk.powi(2);
    let rate = (1.0 - c.sigma).powi(2) * c.us_a.powi(2) * c.mu.powi(2)
        / (16.0 * c.os_blk.powi(4) * c.n as f64 * c.l);
    (smooth, rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSizeReport {
    pub bound_smooth: f64,
    pub bound_rate: f64,
    /// `min(bound_smooth, bound_rate)`.
    pub beta_theoretical: f64,
    /// `max(bound_smooth, bound_rate)`.
    pub beta_printed: f64,
    /// `2nμ/σ̄²(A)`, the limit under which `ζ^{k+1} ≤ Mζ^k + Hξ^k` holds.
    pub recursion_limit: f64,
    pub beta_used: f64,
    pub gamma: f64,
    pub theta: f64,
    pub x_hat: f64,
    pub rho_m: f64,
    /// `β_used ≤ beta_theoretical` and `θ < 1`.
    pub guaranteed: bool,
}

impl StepSizeReport {
    pub fn evaluate(inst: &ProblemInstance, topo: &MixingTopology, beta: BetaChoice, gamma: f64) -> Self {
        let c0 = Constants::new(inst, topo, 0.0);
        let (bound_smooth, bound_rate) = step_bounds(&c0);
        let mut report = StepSizeReport {
            bound_smooth,
            bound_rate,
            beta_theoretical: bound_smooth.min(bound_rate),
            beta_printed: bound_smooth.max(bound_rate),
            recursion_limit: c0.recursion_beta_limit(),
            beta_used: 0.0,
            gamma,
            theta: 0.0,
            x_hat: 0.0,
            rho_m: 0.0,
            guaranteed: false,
        };
        let beta_used = beta.resolve(&report);
        let rate = diagnostics::rate_matrices_from(Constants { beta: beta_used, ..c0 });
        let (first, second) = rate.constants.rate_terms();
        report.beta_used = beta_used;
        report.x_hat = first.max(second);
        report.theta = diagnostics::theta_from(&rate.constants, gamma);
        report.rho_m = rate.rho_m;
        report.guaranteed = beta_used <= report.beta_theoretical && report.theta < 1.0;
        report
    }
}

/// Step-size report at the default `β = 0.9 × beta_theoretical`, without a
/// `γ` term.
pub fn max_stepsize(inst: &ProblemInstance, topo: &MixingTopology) -> StepSizeReport {
    StepSizeReport::evaluate(inst, topo, BetaChoice::Auto, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub max_outer: usize,
    pub gap_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxOuter,
    GapTol,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub grad_steps: usize,
    pub exact_solves: usize,
    pub comm_rounds: usize,
    pub gap: f64,
    /// Target `δ^k` of a tolerance schedule, 0 for exact solves, and the
    /// certified bound for fixed-step solvers.
    pub delta_k: f64,
    pub zeta: [f64; 4],
    /// Slack-adjusted excess of `ζ^k` over `Mζ^{k−1} + Hξ^{k−1}` (0 at k = 0).
    pub lmi_violation: f64,
    pub tracking_error: f64,
    pub lambda_bar_error: f64,
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
    /// `ζ^k` with `ξ^k` for every recorded `k`.
    pub zeta: Vec<ZetaVector>,
    pub final_state: OuterState,
    pub stop: StopReason,
    pub beta: f64,
    pub rate: RateMatrices,
    pub lmi: LmiReport,
}

impl Trace {
    pub fn final_gap(&self) -> f64 {
        self.rows.last().map(|r| r.gap).unwrap_or(f64::NAN)
    }

    pub fn max_tracking_error(&self) -> f64 {
        self.rows.iter().map(|r| r.tracking_error.max(r.lambda_bar_error)).fold(0.0, f64::max)
    }
}

fn delta_record(strategy: &InnerStrategy, k: usize, certified: f64) -> f64 {
    strategy.delta(k).unwrap_or(certified)
}

/// Runs the outer iteration from [`OuterState::initial`] until `max_outer`
/// iterations or `gap ≤ gap_tol`, recording `ζ^k` against the oracle and
/// checking `ζ^{k+1} ≤ Mζ^k + Hξ^k` on the fly.
///
/// `ξ^k` uses the larger of the recorded `δ` and the certified distance, and
/// `δ⁰` is the actual `‖x⁰ − x*(λ⁰)‖`.
pub fn run(
    inst: &ProblemInstance,
    topo: &MixingTopology,
    strategy: &InnerStrategy,
    beta: f64,
    stop: StopRule,
    oracle: &KktSolution,
) -> Result<Trace> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::StepSize { value: beta, upper: f64::INFINITY });
    }
    let rate = diagnostics::build_rate_matrices(inst, topo, beta);
    let x_star = &oracle.x_star;
    let mut state = OuterState::initial(inst);
    let denom = {
        let d0 = (state.stacked_x() - x_star).norm();
        if d0 > 0.0 {
            d0
        } else {
            1.0
        }
    };
    let mut rows = Vec::new();
    let mut samples: Vec<ZetaVector> = Vec::new();
    let d0_actual = state.distance_to_shifted_minimizer(inst);
    let mut delta_prev_eff = delta_record(strategy, 0, d0_actual).max(d0_actual);
    let mut current = diagnostics::consensus_errors(&state, oracle, [0.0, delta_prev_eff]);
    let mut row = TraceRow {
        k: 0,
        grad_steps: 0,
        exact_solves: 0,
        comm_rounds: 0,
        gap: (state.stacked_x() - x_star).norm() / denom,
        delta_k: delta_record(strategy, 0, d0_actual),
        zeta: current.components,
        lmi_violation: 0.0,
        tracking_error: state.tracking_error(inst),
        lambda_bar_error: 0.0,
    };
    let stop_reason = loop {
        if !row.gap.is_finite() || row.gap > DIVERGENCE_GAP {
            return Err(Error::Divergence { k: row.k, gap: row.gap });
        }
        let gap = row.gap;
        rows.push(row);
        if gap <= stop.gap_tol {
            samples.push(current);
            break StopReason::GapTol;
        }
        if state.k >= stop.max_outer {
            samples.push(current);
            break StopReason::MaxOuter;
        }
        let (next, info) = iddgt_step_with_info(&state, inst, topo, strategy, beta)?;
        let recorded = info.target_delta.unwrap_or(info.certified_delta);
        let delta_next_eff = recorded.max(info.certified_delta);
        current.xi = [delta_next_eff, delta_prev_eff];
        let upcoming = diagnostics::consensus_errors(&next, oracle, [0.0, delta_next_eff]);
        let excess = diagnostics::recursion_excess(&rate, &current, &upcoming);
        let violation = (excess - diagnostics::LMI_SLACK * (1.0 + current.norm())).max(0.0);
        samples.push(current);
        row = TraceRow {
            k: next.k,
            grad_steps: next.grad_steps,
            exact_solves: next.exact_solves,
            comm_rounds: next.comm_rounds,
            gap: (next.stacked_x() - x_star).norm() / denom,
            delta_k: recorded,
            zeta: upcoming.components,
            lmi_violation: violation,
            tracking_error: info.tracking_error,
            lambda_bar_error: info.lambda_bar_error,
        };
        current = upcoming;
        delta_prev_eff = delta_next_eff;
        state = next;
    };
    let lmi = diagnostics::check_lmi(&samples, &rate);
    Ok(Trace { rows, zeta: samples, final_state: state, stop: stop_reason, beta, rate, lmi })
}

/// Centralized dual ascent `λ^{k+1} = λ^k + α(A x*(λ^k) − b)` with exact
/// subproblem solves.
#[derive(Debug, Clone, PartialEq)]
pub struct DualAscentTrace {
    /// `max{|1 − ασ̄²(A)/μ|, |1 − ασ̲²(A)/l|}`.
    pub eta: f64,
    /// `‖λ^k − λ*_c‖` for `k = 0..=max_iter`.
    pub distances: Vec<f64>,
    /// `‖λ^{k+1} − λ*_c‖ / ‖λ^k − λ*_c‖` where the denominator is positive.
    pub ratios: Vec<f64>,
    pub lambdas: Vec<DVector<f64>>,
    /// Primal iterates `x^{k+1} = x*(λ^k)`, stacked.
    pub x: Vec<DVector<f64>>,
    pub grad_steps: usize,
}

pub fn dual_ascent_eta(inst: &ProblemInstance, alpha: f64) -> f64 {
    let a = (1.0 - alpha * inst.os_a().powi(2) / inst.mu()).abs();
    let b = (1.0 - alpha * inst.us_a().powi(2) / inst.l()).abs();
    a.max(b)
}

pub fn dual_ascent_run(inst: &ProblemInstance, alpha: f64, max_iter: usize, oracle: &KktSolution) -> Result<DualAscentTrace> {
    dual_ascent_from(inst, alpha, DVector::zeros(inst.p()), max_iter, oracle)
}

pub fn dual_ascent_from(
    inst: &ProblemInstance,
    alpha: f64,
    lambda0: DVector<f64>,
    max_iter: usize,
    oracle: &KktSolution,
) -> Result<DualAscentTrace> {
    let upper = 2.0 * inst.mu() / inst.os_a().powi(2);
    if !(alpha > 0.0 && alpha < upper) {
        return Err(Error::StepSize { value: alpha, upper });
    }
    if lambda0.len() != inst.p() {
        return Err(Error::Shape(format!("lambda0 has length {}, expected {}", lambda0.len(), inst.p())));
    }
    let target = &oracle.lambda_star_c;
    let mut lambda = lambda0;
    let mut distances = vec![(&lambda - target).norm()];
    let mut ratios = Vec::new();
    let mut lambdas = vec![lambda.clone()];
    let mut xs = Vec::with_capacity(max_iter);
    for _ in 0..max_iter {
        let x = inst.shifted_minimizer(&lambda);
        lambda += inst.residual(&x) * alpha;
        let dist = (&lambda - target).norm();
        let prev = *distances.last().expect("nonempty");
        if prev > 0.0 {
            ratios.push(dist / prev);
        }
        distances.push(dist);
        lambdas.push(lambda.clone());
        xs.push(linalg::vstack(&x));
    }
    Ok(DualAscentTrace { eta: dual_ascent_eta(inst, alpha), distances, ratios, lambdas, x: xs, grad_steps: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_complete, mixing_matrix, Graph, WeightScheme};
    use crate::problem::kkt_solve;
    use approx::assert_relative_eq;

    fn complete2() -> MixingTopology {
        mixing_matrix(&build_complete(2).unwrap(), WeightScheme::UniformRegular).unwrap()
    }

    fn single() -> MixingTopology {
        MixingTopology::new(Graph::new(vec![vec![]], false).unwrap(), DMatrix::from_element(1, 1, 1.0)).unwrap()
    }

    fn one_agent() -> ProblemInstance {
        use crate::problem::AgentProblem;
        let p = DMatrix::from_row_slice(2, 2, &[3.0, 0.5, 0.5, 2.0]);
        let a = DMatrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let ag = AgentProblem::new(p, DVector::from_column_slice(&[0.3, -0.2]), a).unwrap();
        ProblemInstance::new(vec![ag], DVector::from_element(1, 0.7)).unwrap()
    }

    #[test]
    fn initial_state() {
        let inst = ProblemInstance::toy();
        let s = OuterState::initial(&inst);
        assert_eq!(s.z[(0, 0)], -1.5);
        assert_eq!(s.z[(1, 0)], -1.5);
        assert_eq!(s.lambda, DMatrix::zeros(2, 1));
        assert!(s.tracking_error(&inst) < 1e-15);
    }

    #[test]
    fn single_agent_matches_dual_ascent() {
        let inst = one_agent();
        let topo = single();
        let oracle = kkt_solve(&inst).unwrap();
        let beta = 0.3;
        let da = dual_ascent_run(&inst, beta, 100, &oracle).unwrap();
        let mut s = OuterState::initial(&inst);
        for k in 0..100 {
            s = iddgt_step(&s, &inst, &topo, &InnerStrategy::exact(), beta).unwrap();
            assert!((s.lambda_i(0) - &da.lambdas[k + 1]).amax() <= 1e-12);
        }
    }

    #[test]
    fn toy_converges_to_kkt() {
        let inst = ProblemInstance::toy();
        let oracle = kkt_solve(&inst).unwrap();
        let stop = StopRule { max_outer: 2000, gap_tol: 1e-12 };
        let tr = run(&inst, &complete2(), &InnerStrategy::exact(), 0.5, stop, &oracle).unwrap();
        assert_eq!(tr.stop, StopReason::GapTol);
        assert_relative_eq!(tr.final_state.x[0][0], 2.0, epsilon = 1e-9);
        assert_relative_eq!(tr.final_state.x[1][0], 1.0, epsilon = 1e-9);
        assert_eq!(tr.rows[0].gap, 1.0);
        for r in &tr.rows {
            assert_eq!(r.comm_rounds, 2 * r.k);
            assert!(r.tracking_error <= 1e-10 && r.lambda_bar_error <= 1e-10);
        }
    }

    #[test]
    fn schedule_column_is_exact() {
        let inst = ProblemInstance::toy();
        let oracle = kkt_solve(&inst).unwrap();
        let strat = InnerStrategy::agd_tolerance(1.0, 0.9).unwrap();
        let stop = StopRule { max_outer: 300, gap_tol: 1e-6 };
        let tr = run(&inst, &complete2(), &strat, 0.5, stop, &oracle).unwrap();
        assert_eq!(tr.stop, StopReason::GapTol);
        for r in &tr.rows {
            assert_eq!(r.delta_k, 0.9f64.powi(r.k as i32));
        }
        assert!(tr.lmi.passed(), "{:?}", tr.lmi.max_excess);
    }

    #[test]
    fn divergence_is_reported() {
        let inst = ProblemInstance::toy();
        let oracle = kkt_solve(&inst).unwrap();
        let stop = StopRule { max_outer: 10_000, gap_tol: 0.0 };
        let err = run(&inst, &complete2(), &InnerStrategy::exact(), 50.0, stop, &oracle).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
    }

    #[test]
    fn dual_ascent_eta_on_toy() {
        let inst = ProblemInstance::toy();
        assert_relative_eq!(dual_ascent_eta(&inst, 0.5), 0.75, epsilon = 1e-12);
        let oracle = kkt_solve(&inst).unwrap();
        let fixed = dual_ascent_from(&inst, 0.5, oracle.lambda_star_c.clone(), 5, &oracle).unwrap();
        assert!(fixed.distances.iter().all(|&d| d < 1e-12));
        assert!(matches!(dual_ascent_run(&inst, 2.0, 5, &oracle), Err(Error::StepSize { .. })));
    }

    #[test]
    fn beta_choice_parsing() {
        assert_eq!("auto".parse::<BetaChoice>().unwrap(), BetaChoice::Auto);
        assert_eq!("smooth".parse::<BetaChoice>().unwrap(), BetaChoice::Smooth);
        assert_eq!("0.25".parse::<BetaChoice>().unwrap(), BetaChoice::Value(0.25));
        assert!("-1".parse::<BetaChoice>().is_err());
        assert!("fast".parse::<BetaChoice>().is_err());
        let v: BetaChoice = serde_json::from_str("0.5").unwrap();
        assert_eq!(v, BetaChoice::Value(0.5));
        let v: BetaChoice = serde_json::from_str("\"auto\"").unwrap();
        assert_eq!(v, BetaChoice::Auto);
    }

    #[test]
    fn toy_step_report() {
        let inst = ProblemInstance::toy();
        let rep = max_stepsize(&inst, &complete2());
        assert_relative_eq!(rep.bound_smooth, 2.0);
        assert_relative_eq!(rep.bound_rate, 1.0 / 16.0);
        assert_relative_eq!(rep.beta_used, 0.9 / 16.0);
        assert!(rep.theta > 0.0 && rep.theta < 1.0 && rep.guaranteed);
        let tiny = StepSizeReport::evaluate(&inst, &complete2(), BetaChoice::Value(1e-12), 0.0);
        assert!(tiny.theta > 1.0 - 1e-9);
    }
}
