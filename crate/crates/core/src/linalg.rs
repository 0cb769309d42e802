//! Small dense helpers shared by the network, problem and diagnostics modules.

use nalgebra::{DMatrix, DVector};

/// Relative threshold used for numerical rank decisions.
pub const RANK_TOL: f64 = 1e-8;

const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITERS: usize = 200_000;

/// Extreme singular values of a matrix plus its numerical rank.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularSummary {
    pub largest: f64,
    pub smallest_nonzero: f64,
    pub rank: usize,
}

pub fn singular_summary(m: &DMatrix<f64>) -> SingularSummary {
    if m.nrows() == 0 || m.ncols() == 0 {
        return SingularSummary { largest: 0.0, smallest_nonzero: 0.0, rank: 0 };
    }
    let sv = m.clone().svd(false, false).singular_values;
    let largest = sv.iter().cloned().fold(0.0, f64::max);
    if largest == 0.0 {
        return SingularSummary { largest: 0.0, smallest_nonzero: 0.0, rank: 0 };
    }
    let cut = RANK_TOL * largest;
    let nonzero: Vec<f64> = sv.iter().cloned().filter(|&s| s > cut).collect();
    SingularSummary {
        largest,
        smallest_nonzero: nonzero.iter().cloned().fold(f64::INFINITY, f64::min),
        rank: nonzero.len(),
    }
}

pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    singular_summary(m).rank
}

/// Deterministic start vector with no special structure (avoids the all-ones
/// direction and its permutations).
fn start_vector(n: usize) -> DVector<f64> {
    DVector::from_fn(n, |i, _| ((i as f64 + 1.0) * 0.618_033_988_749_895).fract() + 0.25 + 1e-3 * i as f64)
}

/// Largest singular value by power iteration on `mᵀm`.
pub fn spectral_norm_power(m: &DMatrix<f64>) -> f64 {
    let n = m.ncols();
    if n == 0 || m.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    let mtm = m.transpose() * m;
    let mut v = start_vector(n);
    v /= v.norm();
    let mut est = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let w = &mtm * &v;
        let next = v.dot(&w);
        let wn = w.norm();
        if wn == 0.0 {
            return 0.0;
        }
        v = w / wn;
        if (next - est).abs() <= POWER_TOL * next.max(1.0) {
            est = next;
            break;
        }
        est = next;
    }
    est.max(0.0).sqrt()
}

/// Perron root of an entrywise nonnegative square matrix.
///
/// Power iteration runs on `m + I`, whose dominant eigenvalue is `ρ(m) + 1`
/// and is strictly dominant even when `m` is periodic. Collatz-Wielandt
/// bounds give the stopping rule when the iterate stays positive.
pub fn perron_root(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "perron_root needs a square matrix");
    if n == 0 {
        return 0.0;
    }
    let shifted = m + DMatrix::<f64>::identity(n, n);
    let mut x = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut est = 0.0;
    let mut stable = 0;
    for _ in 0..POWER_MAX_ITERS {
        let y = &shifted * &x;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            let r = y[i] / x[i];
            lo = lo.min(r);
            hi = hi.max(r);
        }
        if hi - lo <= POWER_TOL {
            return 0.5 * (hi + lo) - 1.0;
        }
        let next = y.norm();
        x = y / next;
        if (next - est).abs() <= 1e-15 * next {
            stable += 1;
            if stable >= 5 {
                return next - 1.0;
            }
        } else {
            stable = 0;
        }
        est = next;
    }
    est - 1.0
}

/// Block-diagonal concatenation.
pub fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Horizontal concatenation `[b_1, ..., b_n]` of blocks with equal row count.
pub fn hstack(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        out.view_mut((0, c), (rows, b.ncols())).copy_from(b);
        c += b.ncols();
    }
    out
}

/// Stack vector blocks into one vector.
pub fn vstack(blocks: &[DVector<f64>]) -> DVector<f64> {
    let len: usize = blocks.iter().map(|b| b.len()).sum();
    let mut out = DVector::zeros(len);
    let mut r = 0;
    for b in blocks {
        out.rows_mut(r, b.len()).copy_from(b);
        r += b.len();
    }
    out
}

/// Mean of the rows of an `n × p` matrix, as a `p` vector.
pub fn row_mean(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows() as f64;
    DVector::from_fn(m.ncols(), |j, _| m.column(j).sum() / n)
}

/// Frobenius distance between the rows of `m` and their mean, i.e. the stacked
/// consensus error `‖m − 𝟙 m̄‖`.
pub fn consensus_deviation(m: &DMatrix<f64>) -> f64 {
    let mean = row_mean(m);
    let mut acc = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let d = m[(i, j)] - mean[j];
            acc += d * d;
        }
    }
    acc.sqrt()
}
