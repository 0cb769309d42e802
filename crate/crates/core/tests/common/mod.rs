#![allow(dead_code)]

use iddgt::network::{self, MixingTopology, WeightScheme};
use iddgt::problem::{self, ProblemInstance};
use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random quadratic instance with `n ≤ max_n` agents and `d_i ≤ 3`. Odd
/// seeds get a rank-deficient constraint matrix when the sizes allow it.
pub fn random_instance(seed: u64, min_n: usize, max_n: usize) -> ProblemInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let n = rng.random_range(min_n..=max_n);
    let d_i = rng.random_range(1..=3);
    let p = rng.random_range(1..=(n * d_i).min(6));
    let kappa = rng.random_range(1.5..20.0);
    let quads = problem::generate_quadratic_agents(n, d_i, 1.0, kappa, seed).unwrap();
    let (blocks, b) = if seed % 2 == 1 && p >= 2 {
        let rank = rng.random_range(1..p);
        problem::generate_constraint_rank_deficient(n, d_i, p, rank, 1.0, seed).unwrap()
    } else {
        problem::generate_constraint_full_rank(n, d_i, p, 1.0, seed).unwrap()
    };
    ProblemInstance::assemble(quads, blocks, b).unwrap()
}

/// A connected topology on `n ≥ 2` nodes, cycling through graph families.
pub fn random_topology(seed: u64, n: usize) -> MixingTopology {
    match seed % 3 {
        0 => network::mixing_matrix(&network::build_erdos_renyi(n, 0.6, seed).unwrap(), WeightScheme::Metropolis),
        1 => network::mixing_matrix(&network::build_path(n).unwrap(), WeightScheme::Metropolis),
        _ => network::mixing_matrix(
            &network::build_directed_exponential(n, 1).unwrap(),
            WeightScheme::UniformRegular,
        ),
    }
    .unwrap()
}

/// KKT solution through the pseudo-inverse of the full saddle-point matrix
/// `[[P, Aᵀ], [A, 0]]`; the minimum-norm solution carries the minimum-norm
/// multiplier because `x` is unique.
pub fn kkt_by_pinv(inst: &ProblemInstance) -> (DVector<f64>, DVector<f64>) {
    let (d, p) = (inst.d(), inst.p());
    let mut k = DMatrix::zeros(d + p, d + p);
    let mut rhs = DVector::zeros(d + p);
    for i in 0..inst.n() {
        let r = inst.block_range(i);
        let ag = inst.agent(i);
        k.view_mut((r.start, r.start), (r.len(), r.len())).copy_from(ag.p());
        k.view_mut((d, r.start), (p, r.len())).copy_from(ag.a());
        k.view_mut((r.start, d), (r.len(), p)).copy_from(&ag.a().transpose());
        rhs.rows_mut(r.start, r.len()).copy_from(&(-ag.q()));
    }
    rhs.rows_mut(d, p).copy_from(inst.b());
    let pinv = k.pseudo_inverse(1e-10).unwrap();
    let sol = pinv * rhs;
    (sol.rows(0, d).into_owned(), sol.rows(d, p).into_owned())
}

/// Characteristic polynomial coefficients `c_0..c_n` (monic, `c_0 = 1`) of a
/// square matrix by Faddeev–LeVerrier.
pub fn char_poly(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut c = vec![1.0];
    let mut mk = DMatrix::<f64>::zeros(n, n);
    let id = DMatrix::<f64>::identity(n, n);
    for k in 1..=n {
        mk = m * (&mk + &id * c[k - 1]);
        c.push(-mk.trace() / k as f64);
    }
    c
}

/// All roots of a monic polynomial by Durand–Kerner.
pub fn poly_roots(c: &[f64]) -> Vec<Complex<f64>> {
    let n = c.len() - 1;
    let eval = |z: Complex<f64>| c.iter().fold(Complex::new(0.0, 0.0), |acc, &ci| acc * z + ci);
    let seed = Complex::new(0.4, 0.9);
    let mut roots: Vec<Complex<f64>> = (0..n).map(|k| seed.powi(k as i32)).collect();
    for _ in 0..5000 {
        let mut delta = 0.0f64;
        for i in 0..n {
            let mut denom = Complex::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    denom *= roots[i] - roots[j];
                }
            }
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 {
            break;
        }
    }
    roots
}

/// Spectral radius from the characteristic polynomial's roots.
pub fn rho_by_char_poly(m: &DMatrix<f64>) -> f64 {
    poly_roots(&char_poly(m)).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Least-squares line through `(x_i, y_i)`: `(slope, intercept, R²)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}

/// Fit of `ln(gap)` against `k` over the trailing half of a trace.
pub fn tail_fit(gaps: &[f64]) -> (f64, f64) {
    let start = gaps.len() / 2;
    let xs: Vec<f64> = (start..gaps.len()).map(|k| k as f64).collect();
    let ys: Vec<f64> = gaps[start..].iter().map(|g| g.ln()).collect();
    let (slope, _, r2) = linear_fit(&xs, &ys);
    (slope, r2)
}

/// Written straight to the stdout handle so the line shows without
/// `--nocapture`.
pub fn emit(line: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
}

pub fn report(name: &str, pass: bool, detail: impl std::fmt::Display) {
    emit(&format!("[{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" }));
}

pub fn info(detail: impl std::fmt::Display) {
    emit(&format!("[INFO] {detail}"));
}
