mod common;

use common::{random_instance, random_topology};
use iddgt::algorithm::{self, BetaChoice, OuterState, StepSizeReport};
use iddgt::inner::InnerStrategy;
use iddgt::linalg;
use iddgt::network::{self, MixingTopology, WeightScheme, STOCHASTIC_TOL};
use iddgt::problem::{self, ProblemInstance};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn topology(kind: u8, n: usize, seed: u64) -> MixingTopology {
    match kind % 4 {
        0 => network::mixing_matrix(&network::build_complete(n).unwrap(), WeightScheme::UniformRegular),
        1 => network::mixing_matrix(&network::build_path(n).unwrap(), WeightScheme::Metropolis),
        2 => network::mixing_matrix(&network::build_erdos_renyi(n, 0.4, seed).unwrap(), WeightScheme::Metropolis),
        _ => network::mixing_matrix(
            &network::build_directed_exponential(n, (seed % 4) as u32).unwrap(),
            WeightScheme::UniformRegular,
        ),
    }
    .unwrap()
}

fn matrix(rows: usize, cols: usize, vals: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |i, j| vals[(i * cols + j) % vals.len()] * (1.0 + (i + 2 * j) as f64 * 0.1))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mixing_contracts_consensus_error(
        kind in 0u8..4,
        n in 2usize..9,
        p in 1usize..4,
        seed in 0u64..1000,
        vals in prop::collection::vec(-10.0f64..10.0, 1..32),
    ) {
        let topo = topology(kind, n, seed);
        let x = matrix(n, p, &vals);
        let lhs = linalg::consensus_deviation(&(topo.w() * &x));
        let rhs = topo.sigma() * linalg::consensus_deviation(&x);
        prop_assert!(lhs <= rhs + 1e-12 * (1.0 + x.norm()), "{lhs} > {rhs}");
    }

    #[test]
    fn mixing_matrices_are_doubly_stochastic(kind in 0u8..4, n in 2usize..12, seed in 0u64..1000) {
        let topo = topology(kind, n, seed);
        let (row, col) = network::stochasticity_error(topo.w());
        prop_assert!(row <= STOCHASTIC_TOL && col <= STOCHASTIC_TOL);
        prop_assert!(topo.sigma() < 1.0);
        prop_assert!(topo.w().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn centering_is_nonexpansive(
        n in 1usize..8,
        p in 1usize..5,
        vals in prop::collection::vec(-100.0f64..100.0, 1..40),
    ) {
        let b = matrix(n, p, &vals);
        prop_assert!(linalg::consensus_deviation(&b) <= b.norm() * (1.0 + 1e-14));
    }

    #[test]
    fn gradients_are_strongly_monotone(
        seed in 0u64..500,
        agent in 0usize..5,
        xs in prop::collection::vec(-5.0f64..5.0, 6),
    ) {
        let inst = random_instance(seed, 1, 5);
        let ag = inst.agent(agent % inst.n());
        let d = ag.dim();
        let x = DVector::from_iterator(d, xs[..d].iter().copied());
        let y = DVector::from_iterator(d, xs[3..3 + d].iter().copied());
        let dist = (&x - &y).norm();
        let gdiff = (ag.gradient(&x) - ag.gradient(&y)).norm();
        prop_assert!(ag.mu() * dist <= gdiff * (1.0 + 1e-12) + 1e-12);
        prop_assert!(gdiff <= ag.l() * dist * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn average_of_z_tracks_the_residual(
        seed in 0u64..500,
        frac in 0.05f64..1.0,
        steps in 1usize..4,
        iters in 1usize..30,
    ) {
        let inst = random_instance(seed, 2, 5);
        let topo = random_topology(seed, inst.n());
        let beta = frac * StepSizeReport::evaluate(&inst, &topo, BetaChoice::Auto, 0.0).bound_smooth;
        let strategy = InnerStrategy::agd_fixed(steps).unwrap();
        let mut state = OuterState::initial(&inst);
        let scale = 1.0 + inst.b().norm();
        prop_assert!(state.tracking_error(&inst) <= 1e-12 * scale);
        for _ in 0..iters {
            let next = algorithm::iddgt_step(&state, &inst, &topo, &strategy, beta).unwrap();
            let expected = state.lambda_bar() + next.z_bar() * beta;
            prop_assert!((next.lambda_bar() - &expected).norm() <= 1e-10 * (1.0 + expected.norm()));
            prop_assert!(next.tracking_error(&inst) <= 1e-10 * scale);
            prop_assert_eq!(next.comm_rounds, state.comm_rounds + 2);
            state = next;
        }
    }

    #[test]
    fn instance_json_round_trips(seed in 0u64..500) {
        let inst = random_instance(seed, 1, 5);
        let back = ProblemInstance::from_json(&inst.to_json()).unwrap();
        prop_assert_eq!(back.content_hash(), inst.content_hash());
        let s1 = problem::kkt_solve(&inst).unwrap();
        let s2 = problem::kkt_solve(&back).unwrap();
        prop_assert_eq!(s1, s2);
    }

    #[test]
    fn kkt_solution_satisfies_optimality(seed in 0u64..500) {
        let inst = random_instance(seed, 1, 5);
        let sol = problem::kkt_solve(&inst).unwrap();
        let (feasibility, stationarity) = problem::kkt_residuals(&inst, &sol);
        prop_assert!(stationarity <= 1e-8 && feasibility <= 1e-8, "{stationarity} {feasibility}");
        // The minimum-norm multiplier lies in Col(A).
        let a = inst.stacked_a();
        let proj = &a * a.clone().pseudo_inverse(1e-10).unwrap() * &sol.lambda_star_c;
        prop_assert!((proj - &sol.lambda_star_c).norm() <= 1e-8 * (1.0 + sol.lambda_star_c.norm()));
    }
}
