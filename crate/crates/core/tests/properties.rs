use ncw_core::balance::{self, ConstraintSet, Variant};
use ncw_core::cost;
use ncw_core::coupling::TransportPlan;
use ncw_core::linalg::{self, CMatrix};
use ncw_core::qstate::FaithfulState;
use ncw_core::solver;
use ncw_core::suites;
use ncw_core::systems::{self, DynamicsFamily, GenSystem};
use ncw_core::C64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn matrix(entries: &[(f64, f64)], n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |i, j| {
        let (re, im) = entries[i * n + j];
        C64::new(re, im)
    })
}

fn entries(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), n * n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kron_acts_on_row_stacked_vectors(a in entries(2), b in entries(3), x in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 6)) {
        let (a, b) = (matrix(&a, 2), matrix(&b, 3));
        let c = CMatrix::from_fn(2, 3, |i, j| C64::new(x[i * 3 + j].0, x[i * 3 + j].1));
        let lhs = linalg::kron(&a, &b) * linalg::vec(&c);
        let rhs = linalg::vec(&(&a * &c * b.transpose()));
        prop_assert!((lhs - rhs).camax() < 1e-12);
    }

    #[test]
    fn choi_coordinates_round_trip(e in entries(4)) {
        let m = matrix(&e, 4);
        let back = balance::coords_to_choi(&balance::choi_to_coords(&m), 4);
        prop_assert!(linalg::max_abs_diff(&m, &back) == 0.0);
    }

    #[test]
    fn kms_dual_is_an_involution(seed in any::<u64>(), n in 1usize..=3, m in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pair = suites::random_pair(&mut rng, n, m);
        let back = pair.kms_dual().unwrap().kms_dual().unwrap();
        prop_assert!(back.map.distance(&pair.map) < 1e-10);
    }

    #[test]
    fn product_cost_matches_moment_shortcut(seed in any::<u64>(), n in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mu, nu) = (suites::random_state(&mut rng, n), suites::random_state(&mut rng, n));
        let spec = suites::random_spec(&mut rng, n, false);
        let direct = cost::transport_cost(&TransportPlan::product(&mu, &nu), &spec).unwrap();
        let shortcut = cost::product_cost_from_moments(&cost::moments(&spec, &mu, &nu).unwrap()).unwrap();
        prop_assert!((direct - shortcut).abs() < 1e-10);
    }

    #[test]
    fn affine_cost_agrees_with_density_cost(seed in any::<u64>(), n in 2usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mu, nu) = (suites::random_state(&mut rng, n), suites::random_state(&mut rng, n));
        let spec = suites::random_spec(&mut rng, n, false);
        let a = GenSystem::new(mu.clone(), DynamicsFamily::new()).unwrap();
        let b = GenSystem::new(nu.clone(), DynamicsFamily::new()).unwrap();
        let set = ConstraintSet::assemble(&a, &b, Variant::Plain).unwrap();
        let plan = suites::random_feasible_plan(&mut rng, &set, &mu, &nu).unwrap();
        let problem = solver::SdpProblem::from_constraints(set, &spec, &mu, &nu).unwrap();
        let x = balance::choi_to_coords(plan.channel().choi());
        let affine = problem.cost_at(&x);
        let direct = cost::transport_cost(&plan, &spec).unwrap();
        let density = solver::cost_from_density(plan.to_density(), &mu, &nu, &spec);
        prop_assert!((affine - direct).abs() < 1e-9);
        prop_assert!((density - direct).abs() < 1e-9);
        prop_assert!(direct >= -1e-9);
    }

    #[test]
    fn coupling_density_has_the_right_marginals(seed in any::<u64>(), n in 1usize..=3, m in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let plan = TransportPlan::from_channel(suites::random_pair(&mut rng, n, m)).unwrap();
        prop_assert!(plan.marginal_residual() < 1e-10);
        let again = TransportPlan::from_density(plan.to_density(), plan.source(), plan.target()).unwrap();
        prop_assert!(again.channel().distance(plan.channel()) < 1e-9);
    }

    #[test]
    fn modular_flow_preserves_its_state(seed in any::<u64>(), n in 1usize..=4, t in -3.0..3.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = suites::random_state(&mut rng, n);
        let flow = s.modular_flow(t);
        prop_assert!(flow.intertwining_residual(&s, &s) < 1e-10);
        prop_assert!(flow.unitality_residual() < 1e-10);
    }

    #[test]
    fn reduced_coefficient_matches_closed_form(
        lambda in 0.0..1.5f64,
        t in 0.0..4.0f64,
        p in 0.05..0.95f64,
        u in (-2.0..2.0f64, -2.0..2.0f64),
        v in (-2.0..2.0f64, -2.0..2.0f64),
    ) {
        let model = systems::TwoQubitModel { theta: [0.3, -0.7], phi: [1.0, 2.0], u: [u.0, u.1], v: [v.0, v.1], lambda };
        let state_r = FaithfulState::qubit(p).unwrap();
        let comp = systems::two_qubit_composite(&model, &state_r, &FaithfulState::qubit(0.4).unwrap(), &[t]).unwrap();
        let reduced = systems::reduce_system(&comp, &[t]).unwrap();
        let map = &reduced.dynamics.sampled()[0].samples[0].1;
        let direct = map.apply(&linalg::matrix_unit(2, 0, 1)).unwrap()[(0, 1)];
        prop_assert!((direct - model.xi(&state_r, t).unwrap()).norm() < 1e-10);
    }
}
