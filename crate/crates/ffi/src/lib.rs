//! C ABI over the `iddgt` library.
//!
//! Objects are opaque handles created by `*_new`/`*_from_*` functions and
//! released with the matching `*_free`. Every fallible call returns an
//! [`IddgtStatus`]; on failure `iddgt_last_error` describes the most recent
//! error on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use iddgt::algorithm::{self, BetaChoice, StepSizeReport, StopRule, Trace};
use iddgt::harness::experiments::Experiment;
use iddgt::inner::InnerStrategy;
use iddgt::network::{self, MixingTopology, WeightScheme};
use iddgt::problem::{self, InstanceJson, ProblemInstance};
use iddgt::Error;
use nalgebra::DVector;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IddgtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    Infeasible = 4,
    Numerical = 5,
    ToleranceUnreachable = 6,
    Divergence = 7,
    StepSize = 8,
    Construction = 9,
    Io = 10,
    Panic = 11,
}

/// Inner solver selector for [`IddgtRunOptions`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IddgtInner {
    Exact = 0,
    GdFixed = 1,
    AgdFixed = 2,
    AgdTolerance = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct IddgtRunOptions {
    pub inner: IddgtInner,
    /// Used by `AgdTolerance`.
    pub gamma: f64,
    /// Used by `AgdTolerance`.
    pub delta0: f64,
    /// Used by `GdFixed` and `AgdFixed`.
    pub inner_steps: usize,
    /// Step size; zero or negative selects 0.9 × the theoretical bound.
    pub beta: f64,
    pub max_outer: usize,
    pub gap_tol: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct IddgtTraceRow {
    pub k: usize,
    pub grad_steps: usize,
    pub exact_solves: usize,
    pub comm_rounds: usize,
    pub gap: f64,
    pub delta_k: f64,
    pub zeta: [f64; 4],
    pub lmi_violation: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct IddgtStepBounds {
    pub bound_smooth: f64,
    pub bound_rate: f64,
    pub beta_theoretical: f64,
    pub theta: f64,
    pub rho_m: f64,
}

pub struct IddgtInstance(ProblemInstance);
pub struct IddgtTopology(MixingTopology);
pub struct IddgtTrace {
    trace: Trace,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> IddgtStatus {
    match err {
        Error::InvalidSize(_)
        | Error::InvalidArgument(_)
        | Error::InvalidRank { .. }
        | Error::Config(_)
        | Error::Json(_)
        | Error::Scheme(_) => IddgtStatus::InvalidArgument,
        Error::GenerationFailure { .. } | Error::Construction(_) => IddgtStatus::Construction,
        Error::Shape(_) => IddgtStatus::Shape,
        Error::Infeasible { .. } => IddgtStatus::Infeasible,
        Error::Numerical(_) => IddgtStatus::Numerical,
        Error::ToleranceUnreachable { .. } => IddgtStatus::ToleranceUnreachable,
        Error::StepSize { .. } => IddgtStatus::StepSize,
        Error::Divergence { .. } => IddgtStatus::Divergence,
        Error::Io(_) => IddgtStatus::Io,
    }
}

enum Fail {
    Null(&'static str),
    Arg(String),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> IddgtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IddgtStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer passed for {what}"));
            IddgtStatus::NullPointer
        }
        Ok(Err(Fail::Arg(msg))) => {
            set_error(msg);
            IddgtStatus::InvalidArgument
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            IddgtStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, need: usize, what: &'static str) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    if len < need {
        return Err(Fail::Arg(format!("{what} holds {len} values, {need} needed")));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

unsafe fn put<T>(out: *mut *mut T, value: T, what: &'static str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null(what));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn iddgt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses an instance from its JSON encoding (NUL-terminated UTF-8).
///
/// # Safety
/// `json` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn iddgt_instance_from_json(json: *const c_char, out: *mut *mut IddgtInstance) -> IddgtStatus {
    guard(|| {
        if json.is_null() {
            return Err(Fail::Null("json"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|_| Fail::Arg("json is not valid UTF-8".into()))?;
        let parsed: InstanceJson = serde_json::from_str(text).map_err(|e| Fail::Lib(Error::Json(e)))?;
        put(out, IddgtInstance(ProblemInstance::from_json(&parsed)?), "out")
    })
}

/// The two-agent instance `x₁² + 2x₂²` subject to `x₁ + x₂ = 3`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn iddgt_instance_toy(out: *mut *mut IddgtInstance) -> IddgtStatus {
    guard(|| put(out, IddgtInstance(ProblemInstance::toy()), "out"))
}

/// Instance of experiment recipe `which` (1 or 2) for `seed`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn iddgt_instance_experiment(which: u32, seed: u64, out: *mut *mut IddgtInstance) -> IddgtStatus {
    guard(|| {
        let exp = match which {
            1 => Experiment::One,
            2 => Experiment::Two,
            other => return Err(Fail::Arg(format!("experiment must be 1 or 2, got {other}"))),
        };
        put(out, IddgtInstance(exp.problem(seed).build()?), "out")
    })
}

/// # Safety
/// `inst` must come from an `iddgt_instance_*` constructor, or be NULL.
#[no_mangle]
pub unsafe extern "C" fn iddgt_instance_free(inst: *mut IddgtInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// Agent count, constraint count and total primal dimension.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn iddgt_instance_dims(
    inst: *const IddgtInstance,
    n: *mut usize,
    p: *mut usize,
    d: *mut usize,
) -> IddgtStatus {
    guard(|| {
        let inst = &deref(inst, "inst")?.0;
        if n.is_null() || p.is_null() || d.is_null() {
            return Err(Fail::Null("dims output"));
        }
        *n = inst.n();
        *p = inst.p();
        *d = inst.d();
        Ok(())
    })
}

/// Writes `x*` (length `d`) and the minimum-norm multiplier (length `p`).
///
/// # Safety
/// Buffers must hold at least `x_len` and `lambda_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn iddgt_kkt_solve(
    inst: *const IddgtInstance,
    x_out: *mut f64,
    x_len: usize,
    lambda_out: *mut f64,
    lambda_len: usize,
) -> IddgtStatus {
    guard(|| {
        let inst = &deref(inst, "inst")?.0;
        let xs = out_slice(x_out, x_len, inst.d(), "x_out")?;
        let ls = out_slice(lambda_out, lambda_len, inst.p(), "lambda_out")?;
        let sol = problem::kkt_solve(inst)?;
        xs.copy_from_slice(sol.x_star.as_slice());
        ls.copy_from_slice(sol.lambda_star_c.as_slice());
        Ok(())
    })
}

/// `∇φ(λ) = A x*(λ) − b`.
///
/// # Safety
/// `lambda` must hold `p` doubles and `out` at least `out_len`.
#[no_mangle]
pub unsafe extern "C" fn iddgt_dual_gradient(
    inst: *const IddgtInstance,
    lambda: *const f64,
    p: usize,
    out: *mut f64,
    out_len: usize,
) -> IddgtStatus {
    guard(|| {
        let inst = &deref(inst, "inst")?.0;
        if lambda.is_null() {
            return Err(Fail::Null("lambda"));
        }
        if p != inst.p() {
            return Err(Fail::Lib(Error::Shape(format!("lambda has length {p}, expected {}", inst.p()))));
        }
        let os = out_slice(out, out_len, inst.p(), "out")?;
        let lam = DVector::from_column_slice(std::slice::from_raw_parts(lambda, p));
        os.copy_from_slice(inst.dual_gradient(&lam).as_slice());
        Ok(())
    })
}

/// Directed exponential graph with offsets `2^j`, `j = 0..=e`, and uniform
/// weights.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn iddgt_topology_exponential(n: usize, e: u32, out: *mut *mut IddgtTopology) -> IddgtStatus {
    guard(|| {
        let g = network::build_directed_exponential(n, e)?;
        put(out, IddgtTopology(network::mixing_matrix(&g, WeightScheme::UniformRegular)?), "out")
    })
}

/// Undirected Erdős–Rényi graph with Metropolis weights.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn iddgt_topology_erdos_renyi(
    n: usize,
    p: f64,
    seed: u64,
    out: *mut *mut IddgtTopology,
) -> IddgtStatus {
    guard(|| {
        let g = network::build_erdos_renyi(n, p, seed)?;
        put(out, IddgtTopology(network::mixing_matrix(&g, WeightScheme::Metropolis)?), "out")
    })
}

/// Complete graph with uniform weights `1/n`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn iddgt_topology_complete(n: usize, out: *mut *mut IddgtTopology) -> IddgtStatus {
    guard(|| {
        let g = network::build_complete(n)?;
        put(out, IddgtTopology(network::mixing_matrix(&g, WeightScheme::UniformRegular)?), "out")
    })
}

/// `σ = ‖W − (1/n)𝟙𝟙ᵀ‖`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn iddgt_topology_sigma(topo: *const IddgtTopology, out: *mut f64) -> IddgtStatus {
    guard(|| {
        let topo = &deref(topo, "topo")?.0;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        *out = topo.sigma();
        Ok(())
    })
}

/// # Safety
/// `topo` must come from an `iddgt_topology_*` constructor, or be NULL.
#[no_mangle]
pub unsafe extern "C" fn iddgt_topology_free(topo: *mut IddgtTopology) {
    if !topo.is_null() {
        drop(Box::from_raw(topo));
    }
}

fn check_pair(inst: &ProblemInstance, topo: &MixingTopology) -> Result<(), Fail> {
    if inst.n() != topo.n() {
        return Err(Fail::Lib(Error::Shape(format!("instance has {} agents, topology {} nodes", inst.n(), topo.n()))));
    }
    Ok(())
}

/// Step-size bounds, `θ` and `ρ(M)` at `beta` (non-positive selects the
/// default) with decay `gamma`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn iddgt_step_bounds(
    inst: *const IddgtInstance,
    topo: *const IddgtTopology,
    beta: f64,
    gamma: f64,
    out: *mut IddgtStepBounds,
) -> IddgtStatus {
    guard(|| {
        let inst = &deref(inst, "inst")?.0;
        let topo = &deref(topo, "topo")?.0;
        check_pair(inst, topo)?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let choice = if beta > 0.0 { BetaChoice::Value(beta) } else { BetaChoice::Auto };
        let r = StepSizeReport::evaluate(inst, topo, choice, gamma);
        *out = IddgtStepBounds {
            bound_smooth: r.bound_smooth,
            bound_rate: r.bound_rate,
            beta_theoretical: r.beta_theoretical,
            theta: r.theta,
            rho_m: r.rho_m,
        };
        Ok(())
    })
}

fn strategy_of(o: &IddgtRunOptions) -> Result<InnerStrategy, Error> {
    match o.inner {
        IddgtInner::Exact => Ok(InnerStrategy::exact()),
        IddgtInner::GdFixed => InnerStrategy::gd_fixed(o.inner_steps),
        IddgtInner::AgdFixed => InnerStrategy::agd_fixed(o.inner_steps),
        IddgtInner::AgdTolerance => InnerStrategy::agd_tolerance(o.delta0, o.gamma),
    }
}

/// Runs the outer iteration against the instance's KKT solution.
///
/// # Safety
/// Pointers must be valid; `opts` is read once.
#[no_mangle]
pub unsafe extern "C" fn iddgt_run(
    inst: *const IddgtInstance,
    topo: *const IddgtTopology,
    opts: *const IddgtRunOptions,
    out: *mut *mut IddgtTrace,
) -> IddgtStatus {
    guard(|| {
        let inst = &deref(inst, "inst")?.0;
        let topo = &deref(topo, "topo")?.0;
        let opts = *deref(opts, "opts")?;
        check_pair(inst, topo)?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let strategy = strategy_of(&opts)?;
        let beta = if opts.beta > 0.0 {
            opts.beta
        } else {
            StepSizeReport::evaluate(inst, topo, BetaChoice::Auto, 0.0).beta_used
        };
        let oracle = problem::kkt_solve(inst)?;
        let stop = StopRule { max_outer: opts.max_outer, gap_tol: opts.gap_tol };
        let trace = algorithm::run(inst, topo, &strategy, beta, stop, &oracle)?;
        put(out, IddgtTrace { trace }, "out")
    })
}

/// Number of recorded rows (iterations including `k = 0`); 0 for NULL.
///
/// # Safety
/// `trace` must be a handle from `iddgt_run`, or NULL.
#[no_mangle]
pub unsafe extern "C" fn iddgt_trace_len(trace: *const IddgtTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.trace.rows.len())
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn iddgt_trace_row(trace: *const IddgtTrace, index: usize, out: *mut IddgtTraceRow) -> IddgtStatus {
    guard(|| {
        let t = &deref(trace, "trace")?.trace;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let r = t
            .rows
            .get(index)
            .ok_or_else(|| Fail::Arg(format!("row {index} out of range (len {})", t.rows.len())))?;
        *out = IddgtTraceRow {
            k: r.k,
            grad_steps: r.grad_steps,
            exact_solves: r.exact_solves,
            comm_rounds: r.comm_rounds,
            gap: r.gap,
            delta_k: r.delta_k,
            zeta: r.zeta,
            lmi_violation: r.lmi_violation,
        };
        Ok(())
    })
}

/// Final stacked primal iterate (length `d`).
///
/// # Safety
/// `out` must hold at least `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn iddgt_trace_final_x(trace: *const IddgtTrace, out: *mut f64, len: usize) -> IddgtStatus {
    guard(|| {
        let t = &deref(trace, "trace")?.trace;
        let x = t.final_state.stacked_x();
        out_slice(out, len, x.len(), "out")?.copy_from_slice(x.as_slice());
        Ok(())
    })
}

/// # Safety
/// `trace` must be a handle from `iddgt_run`, or NULL.
#[no_mangle]
pub unsafe extern "C" fn iddgt_trace_free(trace: *mut IddgtTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}
