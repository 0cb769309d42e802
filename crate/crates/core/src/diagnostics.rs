//! Convergence-certificate objects and their numerical checks.
//!
//! The error vector
//! `ζ^k = [‖z − 𝟙z̄‖, ‖λ − 𝟙λ̄‖, ‖λ^k − λ^{k−1}‖, √n‖λ̄ − λ*_c‖]`
//! obeys the componentwise recursion `ζ^{k+1} ≤ M ζ^k + H ξ^k` with
//! `ξ^k = [δ^{k+1}, δ^k]`, as long as the inner solves are certified and
//! `β < 2nμ/σ̄²(A)`. This module builds `M` and `H`, the rate `θ`, and checks
//! the recursion along recorded runs.

use nalgebra::{DVector, Matrix4, Matrix4x2, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::algorithm::OuterState;
use crate::linalg;
use crate::network::MixingTopology;
use crate::problem::{KktSolution, ProblemInstance};

/// Relative slack of the recursion check.
pub const LMI_SLACK: f64 = 1e-8;

/// Instance and network constants that enter `M`, `H` and `θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub sigma: f64,
    pub beta: f64,
    pub mu: f64,
    pub l: f64,
    pub n: usize,
    /// σ̄(A)
    pub os_a: f64,
    /// σ̲(A), smallest nonzero
    pub us_a: f64,
    /// σ̄(blockdiag(A_i))
    pub os_blk: f64,
}

impl Constants {
    pub fn new(inst: &ProblemInstance, topo: &MixingTopology, beta: f64) -> Self {
        Constants {
            sigma: topo.sigma(),
            beta,
            mu: inst.mu(),
            l: inst.l(),
            n: inst.n(),
            os_a: inst.os_a(),
            us_a: inst.us_a(),
            os_blk: inst.os_blk(),
        }
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }

    /// `max{|1 − βσ̄²(A)/(nμ)|, |1 − βσ̲²(A)/(nl)|}`.
    pub fn nu(&self) -> f64 {
        let n = self.nf();
        let a = (1.0 - self.beta * self.os_a.powi(2) / (n * self.mu)).abs();
        let b = (1.0 - self.beta * self.us_a.powi(2) / (n * self.l)).abs();
        a.max(b)
    }

    /// `2nμ/σ̄²(A)`: the recursion holds for `0 < β` below this.
    pub fn recursion_beta_limit(&self) -> f64 {
        2.0 * self.nf() * self.mu / self.os_a.powi(2)
    }

    /// First two terms of `θ`; their max is the bound `x̂` on `ρ(M)`.
    pub fn rate_terms(&self) -> (f64, f64) {
        let n = self.nf();
        let first = 1.0 - self.beta * self.us_a.powi(2) / (2.0 * n * self.l);
        let inner = self.beta * self.os_blk.powi(4) * n * self.l / (self.us_a.powi(2) * self.mu.powi(2));
        (first, self.sigma + 4.0 * inner.sqrt())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrices {
    pub m: Matrix4<f64>,
    pub h: Matrix4x2<f64>,
    pub rho_m: f64,
    pub nu: f64,
    pub constants: Constants,
}

pub fn build_rate_matrices(inst: &ProblemInstance, topo: &MixingTopology, beta: f64) -> RateMatrices {
    rate_matrices_from(Constants::new(inst, topo, beta))
}

pub fn rate_matrices_from(c: Constants) -> RateMatrices {
    let Constants { sigma: s, beta: b, mu, os_a, os_blk, .. } = c;
    let sn = c.nf().sqrt();
    let n = c.nf();
    let nu = c.nu();
    let blk2 = os_blk * os_blk / mu;
    let cross = b * os_a * os_blk / (sn * mu);
    #[rustfmt::skip]
    let m = Matrix4::new(
        s,         0.0,           blk2,         0.0,
        b * s * s, s,             b * s * blk2, 0.0,
        b * s,     1.0 + s + cross, b * blk2,   b * os_a * os_a / (n * mu),
        0.0,       cross,         0.0,          nu,
    );
    #[rustfmt::skip]
    let h = Matrix4x2::new(
        os_blk,                     os_blk,
        b * s * os_blk,             b * s * os_blk,
        b * (os_blk + os_a / sn),   b * os_blk,
        b * os_a / sn,              0.0,
    );
    let rho_m = linalg::perron_root(&nalgebra::DMatrix::from_column_slice(4, 4, m.as_slice()));
    RateMatrices { m, h, rho_m, nu, constants: c }
}

impl RateMatrices {
    /// `M ζ + H ξ`.
    pub fn propagate(&self, zeta: &[f64; 4], xi: &[f64; 2]) -> [f64; 4] {
        let v = self.m * Vector4::from_column_slice(zeta) + self.h * Vector2::from_column_slice(xi);
        [v[0], v[1], v[2], v[3]]
    }

    /// Irreducibility of the sparsity pattern of `M` (reachability).
    pub fn is_irreducible(&self) -> bool {
        let adj = |i: usize, j: usize| self.m[(i, j)] > 0.0;
        (0..4).all(|start| {
            let mut seen = [false; 4];
            seen[start] = true;
            let mut stack = vec![start];
            while let Some(u) = stack.pop() {
                for v in 0..4 {
                    if adj(u, v) && !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            seen.iter().all(|&s| s)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaReport {
    pub theta: f64,
    /// `max` of the first two terms of `θ`.
    pub x_hat: f64,
    pub rho_m: f64,
    /// Whether `β` is below both step-size bounds (the regime in which
    /// `ρ(M) ≤ x̂ < 1` is claimed).
    pub admissible: bool,
    pub rho_within_x_hat: bool,
}

/// `θ = max(1 − βσ̲²(A)/(2nl), σ + 4√(βσ̄⁴(𝐀)nl/(σ̲²(A)μ²)), γ)`.
pub fn theta_from(c: &Constants, gamma: f64) -> f64 {
    let (first, second) = c.rate_terms();
    first.max(second).max(gamma)
}

pub fn theoretical_theta(inst: &ProblemInstance, topo: &MixingTopology, beta: f64, gamma: f64) -> ThetaReport {
    let rate = build_rate_matrices(inst, topo, beta);
    let c = rate.constants;
    let (first, second) = c.rate_terms();
    let x_hat = first.max(second);
    let bounds = crate::algorithm::step_bounds(&c);
    ThetaReport {
        theta: theta_from(&c, gamma),
        x_hat,
        rho_m: rate.rho_m,
        admissible: beta > 0.0 && beta < bounds.0.min(bounds.1),
        rho_within_x_hat: rate.rho_m <= x_hat + 1e-10,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZetaVector {
    pub components: [f64; 4],
    /// `[δ^{k+1}, δ^k]`.
    pub xi: [f64; 2],
}

impl ZetaVector {
    pub fn norm(&self) -> f64 {
        self.components.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// `ζ^k` from a state and the ground-truth multiplier; `xi` is supplied by
/// the caller because `δ^{k+1}` is only known after the next inner solve.
pub fn consensus_errors(state: &OuterState, oracle: &KktSolution, xi: [f64; 2]) -> ZetaVector {
    let n = state.lambda.nrows() as f64;
    let lbar = linalg::row_mean(&state.lambda);
    ZetaVector {
        components: [
            linalg::consensus_deviation(&state.z),
            linalg::consensus_deviation(&state.lambda),
            (&state.lambda - &state.lambda_prev).norm(),
            n.sqrt() * (lbar - &oracle.lambda_star_c).norm(),
        ],
        xi,
    }
}

/// Excess of `ζ^{k+1}` over `M ζ^k + H ξ^k`, componentwise max (negative when
/// the recursion holds with room to spare).
pub fn recursion_excess(rate: &RateMatrices, prev: &ZetaVector, next: &ZetaVector) -> f64 {
    let rhs = rate.propagate(&prev.components, &prev.xi);
    (0..4).map(|j| next.components[j] - rhs[j]).fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmiReport {
    pub checked: usize,
    pub violations: usize,
    /// Largest excess over `M ζ + H ξ` (not slack-adjusted).
    pub max_excess: f64,
    /// Transition `k → k+1` with the largest slack-adjusted excess.
    pub worst_index: usize,
    /// `max(0, excess − slack)` per transition.
    pub per_iteration: Vec<f64>,
}

impl LmiReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Checks `ζ^{k+1} ≤ M ζ^k + H ξ^k` on consecutive samples with slack
/// `1e−8 (1 + ‖ζ^k‖)`.
pub fn check_lmi(samples: &[ZetaVector], rate: &RateMatrices) -> LmiReport {
    let mut report =
        LmiReport { checked: 0, violations: 0, max_excess: f64::NEG_INFINITY, worst_index: 0, per_iteration: Vec::new() };
    let mut worst = f64::NEG_INFINITY;
    for (k, pair) in samples.windows(2).enumerate() {
        let excess = recursion_excess(rate, &pair[0], &pair[1]);
        let adjusted = excess - LMI_SLACK * (1.0 + pair[0].norm());
        report.checked += 1;
        report.max_excess = report.max_excess.max(excess);
        if adjusted > 0.0 {
            report.violations += 1;
        }
        if adjusted > worst {
            worst = adjusted;
            report.worst_index = k;
        }
        report.per_iteration.push(adjusted.max(0.0));
    }
    report
}

/// JSON diagnostics emitted by the harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub constants: Constants,
    pub rho_m: f64,
    pub nu: f64,
    pub theta: f64,
    pub x_hat: f64,
    pub m: [[f64; 4]; 4],
    pub h: [[f64; 2]; 4],
    pub lmi: Option<LmiReport>,
}

impl DiagnosticReport {
    pub fn new(rate: &RateMatrices, gamma: f64, lmi: Option<LmiReport>) -> Self {
        let (first, second) = rate.constants.rate_terms();
        DiagnosticReport {
            constants: rate.constants,
            rho_m: rate.rho_m,
            nu: rate.nu,
            theta: theta_from(&rate.constants, gamma),
            x_hat: first.max(second),
            m: std::array::from_fn(|i| std::array::from_fn(|j| rate.m[(i, j)])),
            h: std::array::from_fn(|i| std::array::from_fn(|j| rate.h[(i, j)])),
            lmi,
        }
    }
}

/// `‖x − x*‖`-style helper for stacked vectors.
pub fn distance(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_complete, mixing_matrix, WeightScheme};
    use approx::assert_relative_eq;

    fn toy_constants(beta: f64, sigma: f64) -> Constants {
        // n = 2, μ = 2, l = 4, σ̄(A) = σ̲(A) = √2, σ̄(𝐀) = 1.
        Constants { sigma, beta, mu: 2.0, l: 4.0, n: 2, os_a: 2f64.sqrt(), us_a: 2f64.sqrt(), os_blk: 1.0 }
    }

    #[test]
    fn toy_entries_by_hand() {
        let (b, s) = (0.1, 0.5);
        let r = rate_matrices_from(toy_constants(b, s));
        // σ̄²(𝐀)/μ = 1/2, βσ̄(A)σ̄(𝐀)/(√n μ) = 0.1·√2/(√2·2) = 0.05,
        // βσ̄²(A)/(nμ) = 0.1·2/4 = 0.05, ν = max{|1 − 0.05|, |1 − 0.1·2/8|} = 0.975.
        let expect_m = [
            [0.5, 0.0, 0.5, 0.0],
            [0.1 * 0.25, 0.5, 0.1 * 0.5 * 0.5, 0.0],
            [0.05, 1.0 + 0.5 + 0.05, 0.05, 0.05],
            [0.0, 0.05, 0.0, 0.975],
        ];
        let expect_h = [[1.0, 1.0], [0.05, 0.05], [0.1 * (1.0 + 1.0), 0.1], [0.1, 0.0]];
        for i in 0..4 {
            for j in 0..4 {
                assert_relative_eq!(r.m[(i, j)], expect_m[i][j], epsilon = 1e-15);
            }
            for j in 0..2 {
                assert_relative_eq!(r.h[(i, j)], expect_h[i][j], epsilon = 1e-15);
            }
        }
        assert_relative_eq!(r.nu, 0.975, epsilon = 1e-15);
    }

    #[test]
    fn sigma_zero_rows() {
        let r = rate_matrices_from(toy_constants(0.1, 0.0));
        assert_eq!(r.m.row(1).iter().cloned().collect::<Vec<_>>(), vec![0.0; 4]);
        assert_eq!(r.m.row(0).iter().cloned().collect::<Vec<_>>(), vec![0.0, 0.0, 0.5, 0.0]);
        assert!(!r.is_irreducible());
    }

    #[test]
    fn irreducible_with_positive_sigma() {
        assert!(rate_matrices_from(toy_constants(0.01, 0.3)).is_irreducible());
    }

    #[test]
    fn theta_is_gamma_when_dominant() {
        let c = toy_constants(0.01, 0.1);
        assert_eq!(theta_from(&c, 0.9999), 0.9999);
    }

    #[test]
    fn theta_on_toy_at_theoretical_beta() {
        let inst = ProblemInstance::toy();
        let topo = mixing_matrix(&build_complete(2).unwrap(), WeightScheme::UniformRegular).unwrap();
        let c = Constants::new(&inst, &topo, 1.0);
        let (smooth, rate) = crate::algorithm::step_bounds(&c);
        assert_relative_eq!(smooth, 2.0);
        assert_relative_eq!(rate, 1.0 / 16.0);
        let rep = theoretical_theta(&inst, &topo, 0.9 * rate, 0.5);
        assert!(rep.theta > 0.0 && rep.theta < 1.0);
        assert!(rep.admissible && rep.rho_within_x_hat);
        // The second term equals σ + (1 − σ) = 1 at the bound itself.
        let edge = theoretical_theta(&inst, &topo, rate, 0.5);
        assert_relative_eq!(edge.theta, 1.0, epsilon = 1e-12);
        assert!(!edge.admissible);
    }

    #[test]
    fn rho_below_x_hat_on_grid() {
        let c0 = toy_constants(0.0, 0.6);
        let (smooth, rate) = crate::algorithm::step_bounds(&c0);
        let top = smooth.min(rate);
        for k in 1..=20 {
            let c = Constants { beta: top * k as f64 / 21.0, ..c0 };
            let r = rate_matrices_from(c);
            let (f, s) = c.rate_terms();
            assert!(r.rho_m <= f.max(s) + 1e-9);
            assert!(r.rho_m < 1.0);
        }
    }

    #[test]
    fn lmi_check_flags_violation() {
        let r = rate_matrices_from(toy_constants(0.1, 0.5));
        let zero = ZetaVector { components: [0.0; 4], xi: [0.0; 2] };
        let bad = ZetaVector { components: [1.0, 0.0, 0.0, 0.0], xi: [0.0; 2] };
        assert!(check_lmi(&[zero, zero], &r).passed());
        let rep = check_lmi(&[zero, bad], &r);
        assert_eq!(rep.violations, 1);
        assert_eq!(rep.worst_index, 0);
    }
}
