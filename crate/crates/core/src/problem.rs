//! Constraint-coupled quadratic instances.
//!
//! Agent `i` owns `f_i(x) = ½ xᵀP_i x + q_iᵀx` and a block `A_i` of the
//! coupling constraint `Σ_i A_i x_i = b`. The instance caches the constants
//! that the step-size rules and the diagnostics depend on.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{self, SingularSummary};
use crate::rng;

const SYMMETRY_TOL: f64 = 1e-12;
const FULL_RANK_ATTEMPTS: usize = 100;

#[derive(Debug, Clone)]
pub struct AgentProblem {
    p: DMatrix<f64>,
    q: DVector<f64>,
    a: DMatrix<f64>,
    mu: f64,
    l: f64,
    chol: Cholesky<f64, Dyn>,
}

impl AgentProblem {
    pub fn new(p: DMatrix<f64>, q: DVector<f64>, a: DMatrix<f64>) -> Result<Self> {
        let d = p.nrows();
        if d == 0 || p.ncols() != d || q.len() != d || a.ncols() != d {
            return Err(Error::Shape(format!(
                "agent has P {}x{}, q {}, A {}x{}",
                p.nrows(),
                p.ncols(),
                q.len(),
                a.nrows(),
                a.ncols()
            )));
        }
        let asym = (&p - p.transpose()).amax();
        if asym > SYMMETRY_TOL * p.amax().max(1.0) {
            return Err(Error::InvalidArgument(format!("P is not symmetric (max asymmetry {asym:.2e})")));
        }
        let eig = p.clone().symmetric_eigenvalues();
        let mu = eig.min();
        let l = eig.max();
        if !(mu > 0.0) {
            return Err(Error::InvalidArgument(format!("P is not positive definite (min eigenvalue {mu:.3e})")));
        }
        let chol = Cholesky::new(p.clone()).ok_or_else(|| Error::Numerical("Cholesky factorization of P failed".into()))?;
        Ok(AgentProblem { p, q, a, mu, l, chol })
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn q(&self) -> &DVector<f64> {
        &self.q
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Strong convexity constant (smallest eigenvalue of `P`).
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Smoothness constant (largest eigenvalue of `P`).
    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.p * x)) + self.q.dot(x)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.p * x + &self.q
    }

    /// Solves `P x = rhs` with the cached factorization.
    pub fn solve_p(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(rhs)
    }

    /// Rough magnitude of the minimizer for a gradient offset `shift`
    /// (`‖shift‖/μ_i`), used to scale rounding thresholds.
    pub fn shifted_norm_hint(&self, shift: &DVector<f64>) -> f64 {
        shift.norm() / self.mu
    }

    /// `x*(λ) = argmin f_i(x) + λᵀA_i x`.
    pub fn shifted_minimizer(&self, lambda: &DVector<f64>) -> DVector<f64> {
        let rhs = -(&self.q + self.a.tr_mul(lambda));
        self.solve_p(&rhs)
    }
}

/// The quadratic part of an agent before its constraint block is attached.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct ProblemInstance {
    agents: Vec<AgentProblem>,
    b: DVector<f64>,
    offsets: Vec<usize>,
    d: usize,
    mu: f64,
    l: f64,
    a_summary: SingularSummary,
    os_blk: f64,
}

impl ProblemInstance {
    pub fn new(agents: Vec<AgentProblem>, b: DVector<f64>) -> Result<Self> {
        if agents.is_empty() {
            return Err(Error::InvalidSize("instance needs at least one agent".into()));
        }
        let p = b.len();
        if let Some((i, ag)) = agents.iter().enumerate().find(|(_, ag)| ag.a.nrows() != p) {
            return Err(Error::Shape(format!("A_{i} has {} rows, b has {p}", ag.a.nrows())));
        }
        let mut offsets = Vec::with_capacity(agents.len() + 1);
        let mut d = 0;
        for ag in &agents {
            offsets.push(d);
            d += ag.dim();
        }
        offsets.push(d);
        let mu = agents.iter().map(|a| a.mu).fold(f64::INFINITY, f64::min);
        let l = agents.iter().map(|a| a.l).fold(0.0, f64::max);
        let blocks: Vec<DMatrix<f64>> = agents.iter().map(|a| a.a.clone()).collect();
        let a_summary = linalg::singular_summary(&linalg::hstack(&blocks));
        // σ̄(blockdiag(A_i)) is the largest σ̄(A_i).
        let os_blk = blocks.iter().map(|blk| linalg::singular_summary(blk).largest).fold(0.0, f64::max);
        Ok(ProblemInstance { agents, b, offsets, d, mu, l, a_summary, os_blk })
    }

    pub fn assemble(quads: Vec<Quadratic>, blocks: Vec<DMatrix<f64>>, b: DVector<f64>) -> Result<Self> {
        if quads.len() != blocks.len() {
            return Err(Error::Shape(format!("{} quadratics but {} constraint blocks", quads.len(), blocks.len())));
        }
        let agents = quads
            .into_iter()
            .zip(blocks)
            .map(|(qd, a)| AgentProblem::new(qd.p, qd.q, a))
            .collect::<Result<Vec<_>>>()?;
        ProblemInstance::new(agents, b)
    }

    /// Two scalar agents: `f₁ = x₁²`, `f₂ = 2x₂²`, `x₁ + x₂ = 3`.
    /// Solution `x* = (2, 1)`, `λ*_c = −4`.
    pub fn toy() -> Self {
        let one = DMatrix::from_element(1, 1, 1.0);
        let agents = vec![
            AgentProblem::new(DMatrix::from_element(1, 1, 2.0), DVector::zeros(1), one.clone()).unwrap(),
            AgentProblem::new(DMatrix::from_element(1, 1, 4.0), DVector::zeros(1), one).unwrap(),
        ];
        ProblemInstance::new(agents, DVector::from_element(1, 3.0)).unwrap()
    }

    pub fn agents(&self) -> &[AgentProblem] {
        &self.agents
    }

    pub fn agent(&self, i: usize) -> &AgentProblem {
        &self.agents[i]
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    /// Number of agents.
    pub fn n(&self) -> usize {
        self.agents.len()
    }

    /// Number of coupling constraints.
    pub fn p(&self) -> usize {
        self.b.len()
    }

    /// Total primal dimension.
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    /// Largest singular value of `A = [A_1, ..., A_n]`.
    pub fn os_a(&self) -> f64 {
        self.a_summary.largest
    }

    /// Smallest nonzero singular value of `A`.
    pub fn us_a(&self) -> f64 {
        self.a_summary.smallest_nonzero
    }

    /// Largest singular value of `blockdiag(A_1, ..., A_n)`.
    pub fn os_blk(&self) -> f64 {
        self.os_blk
    }

    pub fn rank_a(&self) -> usize {
        self.a_summary.rank
    }

    pub fn block_range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn stacked_a(&self) -> DMatrix<f64> {
        let blocks: Vec<DMatrix<f64>> = self.agents.iter().map(|a| a.a.clone()).collect();
        linalg::hstack(&blocks)
    }

    pub fn split(&self, x: &DVector<f64>) -> Vec<DVector<f64>> {
        (0..self.n()).map(|i| x.rows_range(self.block_range(i)).into_owned()).collect()
    }

    /// `Σ_i A_i x_i` for per-agent blocks.
    pub fn apply_a(&self, blocks: &[DVector<f64>]) -> DVector<f64> {
        let mut acc = DVector::zeros(self.p());
        for (ag, x) in self.agents.iter().zip(blocks) {
            acc += &ag.a * x;
        }
        acc
    }

    /// `A x − b` for per-agent blocks.
    pub fn residual(&self, blocks: &[DVector<f64>]) -> DVector<f64> {
        self.apply_a(blocks) - &self.b
    }

    pub fn objective(&self, blocks: &[DVector<f64>]) -> f64 {
        self.agents.iter().zip(blocks).map(|(a, x)| a.value(x)).sum()
    }

    /// `x*(λ)` block by block, for a common multiplier.
    pub fn shifted_minimizer(&self, lambda: &DVector<f64>) -> Vec<DVector<f64>> {
        self.agents.iter().map(|a| a.shifted_minimizer(lambda)).collect()
    }

    /// `∇φ(λ) = A x*(λ) − b`.
    pub fn dual_gradient(&self, lambda: &DVector<f64>) -> DVector<f64> {
        self.residual(&self.shifted_minimizer(lambda))
    }

    /// `φ(λ) = min_x f(x) + λᵀ(Ax − b)`.
    pub fn dual_value(&self, lambda: &DVector<f64>) -> f64 {
        let x = self.shifted_minimizer(lambda);
        self.objective(&x) + lambda.dot(&self.residual(&x))
    }

    pub fn to_json(&self) -> InstanceJson {
        InstanceJson {
            n: self.n(),
            p: self.p(),
            agents: self
                .agents
                .iter()
                .map(|a| AgentJson {
                    d: a.dim(),
                    p_matrix: DenseJson::from_matrix(&a.p),
                    q: a.q.iter().cloned().collect(),
                    a_matrix: DenseJson::from_matrix(&a.a),
                })
                .collect(),
            b: self.b.iter().cloned().collect(),
        }
    }

    pub fn from_json(json: &InstanceJson) -> Result<Self> {
        if json.agents.len() != json.n || json.b.len() != json.p {
            return Err(Error::Shape("instance json dimensions disagree with its contents".into()));
        }
        let agents = json
            .agents
            .iter()
            .map(|a| {
                if a.q.len() != a.d {
                    return Err(Error::Shape(format!("q has length {}, expected {}", a.q.len(), a.d)));
                }
                AgentProblem::new(a.p_matrix.to_matrix()?, DVector::from_vec(a.q.clone()), a.a_matrix.to_matrix()?)
            })
            .collect::<Result<Vec<_>>>()?;
        ProblemInstance::new(agents, DVector::from_vec(json.b.clone()))
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.to_json()).expect("instance json encodes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// Dense matrix on the wire: explicit dimensions, row-major data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseJson {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let data = (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| (i, j))).map(|(i, j)| m[(i, j)]).collect();
        DenseJson { rows: m.nrows(), cols: m.ncols(), data }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::Shape(format!(
                "matrix {}x{} carries {} entries",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentJson {
    pub d: usize,
    #[serde(rename = "P")]
    pub p_matrix: DenseJson,
    pub q: Vec<f64>,
    #[serde(rename = "A")]
    pub a_matrix: DenseJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceJson {
    pub n: usize,
    pub p: usize,
    pub agents: Vec<AgentJson>,
    pub b: Vec<f64>,
}

fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, dist: &Normal<f64>) -> DMatrix<f64> {
    // Row-major draw order so the stream maps onto rows.
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = dist.sample(rng);
        }
    }
    m
}

fn standard_normal_vector<R: Rng>(rng: &mut R, len: usize) -> DVector<f64> {
    DVector::from_iterator(len, (0..len).map(|_| StandardNormal.sample(rng)))
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of `R`'s diagonal folded into `Q`.
fn random_orthogonal<R: Rng>(rng: &mut R, d: usize) -> DMatrix<f64> {
    let g = gaussian_matrix(rng, d, d, &Normal::new(0.0, 1.0).unwrap());
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Random SPD quadratics `P_i = Q diag(λ) Qᵀ` with eigenvalues uniform on
/// `[eig_lo, eig_hi]` and standard normal `q_i`. Agent `i` draws from its
/// own stream.
pub fn generate_quadratic_agents(n: usize, d_i: usize, eig_lo: f64, eig_hi: f64, seed: u64) -> Result<Vec<Quadratic>> {
    if n == 0 || d_i == 0 {
        return Err(Error::InvalidSize(format!("need n >= 1 and d_i >= 1, got n = {n}, d_i = {d_i}")));
    }
    if !(eig_lo > 0.0 && eig_lo <= eig_hi && eig_hi.is_finite()) {
        return Err(Error::InvalidArgument(format!("need 0 < eig_lo <= eig_hi, got [{eig_lo}, {eig_hi}]")));
    }
    Ok((0..n)
        .map(|i| {
            let mut rng = rng::agent_stream(seed, i);
            let p = if eig_lo == eig_hi {
                DMatrix::identity(d_i, d_i) * eig_lo
            } else {
                let q = random_orthogonal(&mut rng, d_i);
                let eigs = DVector::from_iterator(d_i, (0..d_i).map(|_| rng.random_range(eig_lo..=eig_hi)));
                let p = &q * DMatrix::from_diagonal(&eigs) * q.transpose();
                (&p + p.transpose()) * 0.5
            };
            let q = standard_normal_vector(&mut rng, d_i);
            Quadratic { p, q }
        })
        .collect())
}

fn split_columns(a: &DMatrix<f64>, n: usize, d_i: usize) -> Vec<DMatrix<f64>> {
    (0..n).map(|i| a.columns(i * d_i, d_i).into_owned()).collect()
}

/// Stacked `A` whose first `base_rank` rows are i.i.d. `N(0, variance)` and
/// whose remaining rows are standard-normal combinations of those. `b` gets
/// standard normal entries in its first `base_rank` positions and the same
/// combinations below, which keeps `b` in the range of `A`.
pub fn generate_constraint_rank_deficient(
    n: usize,
    d_i: usize,
    p: usize,
    base_rank: usize,
    variance: f64,
    seed: u64,
) -> Result<(Vec<DMatrix<f64>>, DVector<f64>)> {
    if n == 0 || d_i == 0 || p == 0 || base_rank == 0 {
        return Err(Error::InvalidSize("n, d_i, p and base_rank must be positive".into()));
    }
    if base_rank > p {
        return Err(Error::InvalidRank { base_rank, rows: p });
    }
    let dist = normal(variance)?;
    let mut rng = rng::stream(seed, rng::STREAM_CONSTRAINT);
    let top = gaussian_matrix(&mut rng, base_rank, n * d_i, &dist);
    let mix = gaussian_matrix(&mut rng, p - base_rank, base_rank, &Normal::new(0.0, 1.0).unwrap());
    let b_top = standard_normal_vector(&mut rng, base_rank);

    let mut a = DMatrix::zeros(p, n * d_i);
    a.rows_mut(0, base_rank).copy_from(&top);
    a.rows_mut(base_rank, p - base_rank).copy_from(&(&mix * &top));
    let mut b = DVector::zeros(p);
    b.rows_mut(0, base_rank).copy_from(&b_top);
    b.rows_mut(base_rank, p - base_rank).copy_from(&(&mix * &b_top));
    Ok((split_columns(&a, n, d_i), b))
}

/// Stacked `A` with i.i.d. `N(0, variance)` entries, redrawn until it has
/// full row rank; `b` standard normal.
pub fn generate_constraint_full_rank(
    n: usize,
    d_i: usize,
    p: usize,
    variance: f64,
    seed: u64,
) -> Result<(Vec<DMatrix<f64>>, DVector<f64>)> {
    if n == 0 || d_i == 0 || p == 0 {
        return Err(Error::InvalidSize("n, d_i and p must be positive".into()));
    }
    if p > n * d_i {
        return Err(Error::InvalidRank { base_rank: p, rows: n * d_i });
    }
    let dist = normal(variance)?;
    let mut rng = rng::stream(seed, rng::STREAM_CONSTRAINT);
    for _ in 0..FULL_RANK_ATTEMPTS {
        let a = gaussian_matrix(&mut rng, p, n * d_i, &dist);
        let b = standard_normal_vector(&mut rng, p);
        if linalg::numerical_rank(&a) == p {
            return Ok((split_columns(&a, n, d_i), b));
        }
    }
    Err(Error::GenerationFailure { what: "full row rank constraint matrix", attempts: FULL_RANK_ATTEMPTS })
}

fn normal(variance: f64) -> Result<Normal<f64>> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::InvalidArgument(format!("variance must be positive, got {variance}")));
    }
    Ok(Normal::new(0.0, variance.sqrt()).unwrap())
}

/// Primal solution and the minimum-norm dual solution, which is the
/// projection of any dual optimum onto `Col(A)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KktSolution {
    pub x_star: DVector<f64>,
    pub lambda_star_c: DVector<f64>,
}

impl KktSolution {
    pub fn x_blocks(&self, inst: &ProblemInstance) -> Vec<DVector<f64>> {
        inst.split(&self.x_star)
    }
}

/// Schur-complement form of the KKT system. With `P = LLᵀ` (blockwise) and
/// `B = A L⁻ᵀ = UΣVᵀ`, the multiplier equation `A P⁻¹ Aᵀ λ = r` is solved
/// as `λ = U_r Σ_r⁻² U_rᵀ r`, which is the minimum-norm solution.
struct KktFactor<'a> {
    inst: &'a ProblemInstance,
    u: DMatrix<f64>,
    inv_sq: Vec<f64>,
}

impl<'a> KktFactor<'a> {
    fn new(inst: &'a ProblemInstance) -> Result<Self> {
        let blocks: Vec<DMatrix<f64>> = inst
            .agents
            .iter()
            .map(|ag| {
                // A_i L_i⁻ᵀ, i.e. the transpose of L_i⁻¹ A_iᵀ.
                let solved = ag.chol.l().solve_lower_triangular(&ag.a.transpose()).expect("L has a positive diagonal");
                solved.transpose()
            })
            .collect();
        let bmat = linalg::hstack(&blocks);
        let svd = bmat.svd(true, false);
        let u = svd.u.ok_or_else(|| Error::Numerical("SVD did not return U".into()))?;
        let sv = svd.singular_values;
        let top = sv.iter().cloned().fold(0.0, f64::max);
        let cut = linalg::RANK_TOL * top;
        let keep: Vec<usize> = (0..sv.len()).filter(|&k| sv[k] > cut).collect();
        let u_r = DMatrix::from_fn(u.nrows(), keep.len(), |i, k| u[(i, keep[k])]);
        let inv_sq = keep.iter().map(|&k| 1.0 / (sv[k] * sv[k])).collect();
        Ok(KktFactor { inst, u: u_r, inv_sq })
    }

    fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.u * self.u.tr_mul(v)
    }

    fn s_pinv(&self, r: &DVector<f64>) -> DVector<f64> {
        let mut c = self.u.tr_mul(r);
        for (ck, w) in c.iter_mut().zip(&self.inv_sq) {
            *ck *= w;
        }
        &self.u * c
    }

    /// Solves `P dx + Aᵀdλ = g`, `A dx = h` with minimum-norm `dλ`.
    fn solve(&self, g: &[DVector<f64>], h: &DVector<f64>) -> (Vec<DVector<f64>>, DVector<f64>) {
        let inst = self.inst;
        let pinv_g: Vec<DVector<f64>> = inst.agents.iter().zip(g).map(|(ag, gi)| ag.solve_p(gi)).collect();
        let rhs = inst.apply_a(&pinv_g) - h;
        let dl = self.s_pinv(&rhs);
        let dx = inst
            .agents
            .iter()
            .zip(g)
            .map(|(ag, gi)| ag.solve_p(&(gi - ag.a.tr_mul(&dl))))
            .collect();
        (dx, dl)
    }
}

/// Ground-truth primal-dual pair.
pub fn kkt_solve(inst: &ProblemInstance) -> Result<KktSolution> {
    let fac = KktFactor::new(inst)?;
    let b = inst.b();
    let out_of_range = (b - fac.project(b)).norm() / (1.0 + b.norm());
    if out_of_range > 1e-8 {
        return Err(Error::Infeasible { residual: out_of_range });
    }
    let neg_q: Vec<DVector<f64>> = inst.agents.iter().map(|a| -a.q.clone()).collect();
    let (mut x, mut lambda) = fac.solve(&neg_q, b);
    // Two rounds of iterative refinement on the full KKT residual.
    for _ in 0..2 {
        let g: Vec<DVector<f64>> = inst
            .agents
            .iter()
            .zip(&x)
            .map(|(ag, xi)| -(ag.gradient(xi) + ag.a.tr_mul(&lambda)))
            .collect();
        let h = b - inst.apply_a(&x);
        let (dx, dl) = fac.solve(&g, &h);
        for (xi, dxi) in x.iter_mut().zip(dx) {
            *xi += dxi;
        }
        lambda += dl;
    }
    lambda = fac.project(&lambda);
    Ok(KktSolution { x_star: linalg::vstack(&x), lambda_star_c: lambda })
}

/// Primal feasibility and stationarity residuals of a candidate pair.
pub fn kkt_residuals(inst: &ProblemInstance, sol: &KktSolution) -> (f64, f64) {
    let x = inst.split(&sol.x_star);
    let feas = inst.residual(&x).norm();
    let stat: f64 = inst
        .agents
        .iter()
        .zip(&x)
        .map(|(ag, xi)| (ag.gradient(xi) + ag.a.tr_mul(&sol.lambda_star_c)).norm_squared())
        .sum::<f64>()
        .sqrt();
    (feas, stat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn random_instance(seed: u64, n: usize, d_i: usize, p: usize) -> ProblemInstance {
        let quads = generate_quadratic_agents(n, d_i, 1.0, 4.0, seed).unwrap();
        let (a, b) = generate_constraint_full_rank(n, d_i, p, 1.0, seed).unwrap();
        ProblemInstance::assemble(quads, a, b).unwrap()
    }

    #[test]
    fn quadratic_spectra_inside_interval() {
        let quads = generate_quadratic_agents(20, 2, 1.0, 10.0, 5).unwrap();
        assert_eq!(quads.len(), 20);
        for qd in &quads {
            assert_eq!(qd.p.shape(), (2, 2));
            let eig = qd.p.clone().symmetric_eigenvalues();
            assert!(eig.min() >= 1.0 - 1e-12 && eig.max() <= 10.0 + 1e-12);
        }
    }

    #[test]
    fn isotropic_when_interval_collapses() {
        let quads = generate_quadratic_agents(3, 3, 2.5, 2.5, 1).unwrap();
        for qd in quads {
            assert_eq!(qd.p, DMatrix::identity(3, 3) * 2.5);
        }
    }

    #[test]
    fn generation_rejects_bad_sizes() {
        assert!(matches!(generate_quadratic_agents(0, 2, 1.0, 2.0, 0), Err(Error::InvalidSize(_))));
        assert!(matches!(generate_quadratic_agents(2, 0, 1.0, 2.0, 0), Err(Error::InvalidSize(_))));
        assert!(matches!(
            generate_constraint_rank_deficient(4, 2, 3, 5, 1.0, 0),
            Err(Error::InvalidRank { base_rank: 5, rows: 3 })
        ));
    }

    #[test]
    fn rank_deficient_recipe() {
        let (blocks, b) = generate_constraint_rank_deficient(20, 2, 100, 20, 10.0, 3).unwrap();
        assert_eq!(blocks.len(), 20);
        assert!(blocks.iter().all(|a| a.shape() == (100, 2)));
        let a = linalg::hstack(&blocks);
        assert_eq!(linalg::numerical_rank(&a), 20);
        assert_eq!(b.len(), 100);
        // b lies in the range of A.
        let quads = generate_quadratic_agents(20, 2, 1.0, 10.0, 3).unwrap();
        let inst = ProblemInstance::assemble(quads, blocks, b).unwrap();
        assert!(kkt_solve(&inst).is_ok());
    }

    #[test]
    fn scaling_a_scales_singular_values() {
        let (blocks, _) = generate_constraint_rank_deficient(4, 2, 6, 3, 1.0, 9).unwrap();
        let a = linalg::hstack(&blocks);
        let s1 = linalg::singular_summary(&a);
        let s2 = linalg::singular_summary(&(&a * 3.0));
        assert_relative_eq!(s2.largest, 3.0 * s1.largest, max_relative = 1e-12);
        assert_relative_eq!(s2.smallest_nonzero, 3.0 * s1.smallest_nonzero, max_relative = 1e-10);
    }

    #[test]
    fn full_rank_recipe() {
        let (blocks, b) = generate_constraint_full_rank(20, 2, 20, 10.0, 4).unwrap();
        assert!(blocks.iter().all(|a| a.shape() == (20, 2)));
        assert_eq!(linalg::numerical_rank(&linalg::hstack(&blocks)), 20);
        assert_eq!(b.len(), 20);
        let (row, _) = generate_constraint_full_rank(3, 1, 1, 1.0, 4).unwrap();
        assert!(linalg::hstack(&row).norm() > 0.0);
    }

    #[test]
    fn full_rank_rejects_too_many_rows() {
        assert!(generate_constraint_full_rank(2, 1, 3, 1.0, 0).is_err());
    }

    #[test]
    fn kkt_toy_by_hand() {
        let inst = ProblemInstance::toy();
        let sol = kkt_solve(&inst).unwrap();
        assert_relative_eq!(sol.x_star[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(sol.x_star[1], 1.0, epsilon = 1e-12);
        assert_relative_eq!(sol.lambda_star_c[0], -4.0, epsilon = 1e-12);
        assert_relative_eq!(inst.os_a(), 2f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(inst.us_a(), 2f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(inst.os_blk(), 1.0, epsilon = 1e-14);
        assert_eq!((inst.mu(), inst.l()), (2.0, 4.0));
    }

    #[test]
    fn kkt_trivial_zero() {
        let one = DMatrix::from_element(2, 1, 1.0);
        let agents = vec![
            AgentProblem::new(DMatrix::identity(1, 1), DVector::zeros(1), one.clone()).unwrap(),
            AgentProblem::new(DMatrix::identity(1, 1) * 3.0, DVector::zeros(1), one).unwrap(),
        ];
        let inst = ProblemInstance::new(agents, DVector::zeros(2)).unwrap();
        let sol = kkt_solve(&inst).unwrap();
        assert_eq!(sol.x_star.norm(), 0.0);
        assert_eq!(sol.lambda_star_c.norm(), 0.0);
    }

    #[test]
    fn kkt_random_residuals() {
        for seed in 0..5 {
            let inst = random_instance(seed, 5, 3, 6);
            let sol = kkt_solve(&inst).unwrap();
            let (feas, stat) = kkt_residuals(&inst, &sol);
            assert!(feas <= 1e-9 * (1.0 + inst.b().norm()), "feas {feas}");
            assert!(stat <= 1e-9, "stat {stat}");
        }
    }

    #[test]
    fn kkt_detects_infeasible() {
        let a = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let agents = vec![AgentProblem::new(DMatrix::identity(1, 1), DVector::zeros(1), a).unwrap()];
        let inst = ProblemInstance::new(agents, DVector::from_vec(vec![1.0, -1.0])).unwrap();
        assert!(matches!(kkt_solve(&inst), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn dual_gradient_values() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let agents = vec![AgentProblem::new(DMatrix::identity(1, 1), DVector::zeros(1), one).unwrap()];
        let inst = ProblemInstance::new(agents, DVector::from_element(1, 2.5)).unwrap();
        assert_eq!(inst.dual_gradient(&DVector::zeros(1))[0], -2.5);

        let toy = ProblemInstance::toy();
        assert!(toy.dual_gradient(&DVector::from_element(1, -4.0)).norm() < 1e-14);
    }

    #[test]
    fn dual_gradient_central_differences() {
        let inst = random_instance(17, 3, 2, 2);
        let lambda = DVector::from_vec(vec![0.3, -0.7]);
        let g = inst.dual_gradient(&lambda);
        let h = 1e-4;
        for j in 0..2 {
            let mut up = lambda.clone();
            let mut dn = lambda.clone();
            up[j] += h;
            dn[j] -= h;
            let fd = (inst.dual_value(&up) - inst.dual_value(&dn)) / (2.0 * h);
            assert_relative_eq!(fd, g[j], epsilon = 1e-6);
        }
    }

    #[test]
    fn rejects_asymmetric_or_indefinite() {
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(AgentProblem::new(p, DVector::zeros(2), DMatrix::zeros(1, 2)).is_err());
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(AgentProblem::new(p, DVector::zeros(2), DMatrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn json_round_trip_preserves_hash() {
        let inst = random_instance(8, 3, 2, 4);
        let text = serde_json::to_string(&inst.to_json()).unwrap();
        let back = ProblemInstance::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.content_hash(), inst.content_hash());
        assert_eq!(back.stacked_a(), inst.stacked_a());
    }
}
