use bicoherence::coherence::{factorization_residual, factorized, from_coherence, to_coherence, to_density};
use bicoherence::dynamics::{integrate, ControlLaw};
use bicoherence::generator::{analytic_generator, numeric_generator, TwoQubitModel};
use bicoherence::purity_analysis::{compute_w, CouplingCase, CouplingKind, FactorizedState};
use bicoherence::quantum::{gksl_rhs, partial_trace_a};
use bicoherence::sampling::{random_traceless, random_two_qubit};
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn model_from_seed(seed: u64, jumps: usize) -> TwoQubitModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lambda = Matrix3::from_fn(|_, _| bicoherence::sampling::uniform(&mut rng, -1.5, 1.5));
    let jumps = (0..jumps).map(|_| random_traceless(&mut rng, 0.6)).collect();
    TwoQubitModel::new(0.8, -0.3, lambda).with_jumps(jumps)
}

fn bounded() -> impl Strategy<Value = f64> {
    -2.0..2.0f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coherence_round_trip(seed in any::<u64>()) {
        let rho = random_two_qubit(&mut ChaCha8Rng::seed_from_u64(seed));
        let v = to_coherence(&rho);
        prop_assert!((from_coherence(&v) - rho.matrix()).camax() < 1e-13);
        prop_assert!(v.is_physical(1e-12));
        prop_assert!((v.c0() - 0.5).abs() == 0.0);
    }

    #[test]
    fn generator_matches_master_equation(seed in any::<u64>(), jumps in 0usize..4, u in [bounded(), bounded(), bounded()]) {
        let model = model_from_seed(seed, jumps);
        let rho = random_two_qubit(&mut ChaCha8Rng::seed_from_u64(seed ^ 1));
        let g = analytic_generator(&model, &u).unwrap();
        prop_assert!(g.max_abs_diff(&numeric_generator(&model, &u).unwrap()) < 1e-12);
        // G v equals the coordinates of L(ρ)
        let lhs = g.apply(to_coherence(&rho).coords());
        let rhs = gksl_rhs(rho.matrix(), &model.hamiltonian(&u), &model.full_jumps()).unwrap();
        let expected = bicoherence::LambdaBasis::get().coordinates(&rhs);
        prop_assert!((lhs - expected).amax() < 1e-12);
        prop_assert!(g.matrix().row(0).amax() == 0.0);
    }

    #[test]
    fn evolution_stays_physical(seed in any::<u64>(), jumps in 0usize..3) {
        let model = model_from_seed(seed, jumps);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        let v0 = to_coherence(&random_two_qubit(&mut rng));
        let law = ControlLaw::random_piecewise(&mut rng, 2.0, 0.5, 1.0);
        let traj = integrate(&model, &v0, &law, 2.0, 1e-3).unwrap();
        for s in &traj.states {
            prop_assert!(s.c0() == 0.5);
            prop_assert!(s.min_eigenvalue() > -1e-9);
        }
        if jumps == 0 {
            prop_assert!((traj.last().purity() - v0.purity()).abs() < 1e-9);
        }
    }

    #[test]
    fn product_states_factorize(a in [bounded(), bounded(), bounded()], theta in 0.0..std::f64::consts::PI, phi in 0.0..6.3f64) {
        let va = Vector3::from(a).cap_magnitude(0.5);
        let vb = 0.5 * Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
        let v = factorized(va, vb);
        prop_assert!(factorization_residual(&v) < 1e-15);
        let rho = to_density(&v).unwrap();
        let rho_b = partial_trace_a(&rho);
        prop_assert!((rho_b.purity() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn w_ignores_local_terms(seed in any::<u64>(), kind in 0usize..3, g in bounded(), wa in bounded(), wb in bounded(), u in [bounded(), bounded(), bounded()]) {
        let case = CouplingCase::new(CouplingKind::ALL[kind], g);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = FactorizedState::random(&mut rng);
        let bare = compute_w(&case.model(0.0, 0.0, vec![]), &s, &[0.0; 3]).unwrap();
        let dressed = case.model(wa, wb, vec![random_traceless(&mut rng, 1.0), random_traceless(&mut rng, 1.0)]);
        prop_assert!(bare.max_abs_diff(&compute_w(&dressed, &s, &u).unwrap()) < 1e-12);
        // w scales linearly with the coupling
        let unit = compute_w(&CouplingCase::new(case.kind, 1.0).model(0.0, 0.0, vec![]), &s, &[0.0; 3]).unwrap();
        prop_assert!((unit.as_vector() * g - bare.as_vector()).amax() < 1e-12);
    }
}
