//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use bicoherence::coherence::{factorization_residual, from_coherence, is_factorized, to_coherence, FACTORIZED_THRESHOLD, VB};
use bicoherence::dynamics::{integrate, purification_scan, ControlLaw, IntegrateOptions, Simulator};
use bicoherence::generator::{analytic_generator, numeric_generator, TwoQubitModel};
use bicoherence::purity_analysis::{
    closed_form_w, compute_w, dispersive_invariant_check, protecting_law, reduced_b_generator, resonant_obstruction_check,
    CouplingCase, CouplingKind, FactorizedState, ObstructionConfig,
};
use bicoherence::quantum::{pauli, sigma_minus, C64};
use bicoherence::sampling::{random_on_sphere, random_pure, random_qubit, random_traceless, random_two_qubit, uniform};
use bicoherence::{BlochVector, PauliIndex};
use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

fn random_model(rng: &mut ChaCha8Rng) -> TwoQubitModel {
    let lambda = Matrix3::from_fn(|_, _| uniform(rng, -2.0, 2.0));
    let (wa, wb) = (uniform(rng, -2.0, 2.0), uniform(rng, -2.0, 2.0));
    let n_jumps = (uniform(rng, 0.0, 4.0).floor() as usize).min(3);
    let jumps = (0..n_jumps).map(|_| random_traceless(rng, 1.0)).collect();
    TwoQubitModel::new(wa, wb, lambda).with_jumps(jumps)
}

fn random_u(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [0, 1, 2].map(|_| uniform(rng, -2.0, 2.0))
}

fn generator_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let model = random_model(&mut rng);
        let u = random_u(&mut rng);
        let a = analytic_generator(&model, &u).expect("valid model");
        let n = numeric_generator(&model, &u).expect("valid model");
        worst = worst.max(a.max_abs_diff(&n));
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-11 && elapsed < Duration::from_secs(5),
        format!("200 models, max entry diff {worst:.1e} (tol 1e-11), {} (limit 5s)", secs(elapsed)),
    )
}

fn parseval_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut purity_err, mut trip_err): (f64, f64) = (0.0, 0.0);
    for _ in 0..1000 {
        let rho = random_two_qubit(&mut rng);
        let v = to_coherence(&rho);
        let tr_sq = (rho.matrix() * rho.matrix()).trace().re;
        purity_err = purity_err.max((v.coords().norm_squared() - tr_sq).abs());
        trip_err = trip_err.max((from_coherence(&v) - rho.matrix()).camax());
    }
    outcome(
        purity_err <= 1e-10 && trip_err <= 1e-12,
        format!("1000 states, purity identity err {purity_err:.1e} (tol 1e-10), round trip err {trip_err:.1e} (tol 1e-12)"),
    )
}

fn factorization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut resid, mut norm_err): (f64, f64) = (0.0, 0.0);
    for _ in 0..500 {
        let rho = random_qubit(&mut rng).tensor(&random_pure::<2, _>(&mut rng));
        let v = to_coherence(&rho);
        resid = resid.max(factorization_residual(&v));
        norm_err = norm_err.max((v.vb().norm_squared() - 0.25).abs());
    }
    let (mut mixed, mut false_positive, mut min_resid) = (0, 0, f64::INFINITY);
    while mixed < 500 {
        let v = to_coherence(&random_two_qubit(&mut rng));
        if v.reduced_purity_b() > 0.99 {
            continue;
        }
        mixed += 1;
        min_resid = min_resid.min(factorization_residual(&v));
        if is_factorized(&v, FACTORIZED_THRESHOLD) {
            false_positive += 1;
        }
    }
    outcome(
        resid <= 1e-12 && norm_err <= 1e-12 && min_resid > 0.0 && false_positive == 0,
        format!(
            "pure-B residual {resid:.1e}, |vB|^2 err {norm_err:.1e} (tol 1e-12); mixed-B min residual {min_resid:.2e}, {false_positive} false factorizations"
        ),
    )
}

fn closed_form_transcription() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = [0.0f64; 2];
    // dispersive slots without a closed form: largest |w_k| seen
    let mut uncovered = [0.0f64; 9];
    for (slot, kind) in [CouplingKind::Dispersive, CouplingKind::Resonant].into_iter().enumerate() {
        let case = CouplingCase::new(kind, 1.3);
        let model = case.model(0.4, -0.9, vec![sigma_minus().scale(0.5)]);
        for _ in 0..500 {
            let s = FactorizedState::random(&mut rng);
            let w = compute_w(&model, &s, &random_u(&mut rng)).expect("valid model");
            let closed = closed_form_w(&case, &s).expect("closed form exists");
            worst[slot] = worst[slot].max(closed.residual(&w));
            if kind == CouplingKind::Dispersive {
                for k in (0..9).filter(|k| closed.components[*k].is_none()) {
                    uncovered[k] = uncovered[k].max(w.0[k].abs());
                }
            }
        }
    }
    let report: Vec<String> = uncovered
        .iter()
        .enumerate()
        .filter(|(k, _)| ![2, 6].contains(k))
        .map(|(k, x)| format!("w{}={x:.2}", k + 1))
        .collect();
    outcome(
        worst[0] <= 1e-11 && worst[1] <= 1e-11,
        format!(
            "dispersive w3/w7 err {:.1e}, resonant 9-slot err {:.1e} (tol 1e-11); other dispersive max |w_k|: {}",
            worst[0],
            worst[1],
            report.join(" ")
        ),
    )
}

fn local_cancellation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for trial in 0..300 {
        let lambda = match trial % 4 {
            0 => CouplingCase::new(CouplingKind::Dispersive, 1.0).lambda(),
            1 => CouplingCase::new(CouplingKind::Resonant, 1.0).lambda(),
            2 => CouplingCase::new(CouplingKind::Sigma3Sigma1, 1.0).lambda(),
            _ => Matrix3::from_fn(|_, _| uniform(&mut rng, -2.0, 2.0)),
        };
        let base = TwoQubitModel::new(0.0, 0.0, lambda);
        let s = FactorizedState::random(&mut rng);
        let w0 = compute_w(&base, &s, &[0.0; 3]).expect("valid model");
        let varied = random_model(&mut rng);
        let other = TwoQubitModel::new(varied.omega_a, varied.omega_b, lambda).with_jumps(varied.jumps);
        let w1 = compute_w(&other, &s, &random_u(&mut rng)).expect("valid model");
        worst = worst.max(w0.max_abs_diff(&w1));
    }
    outcome(worst <= 1e-12, format!("300 states, max change of w {worst:.1e} (tol 1e-12)"))
}

fn dispersive_invariant() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let model = CouplingCase::new(CouplingKind::Dispersive, 1.0).model(0.7, 1.3, vec![sigma_minus().scale(0.5)]);
    let initial: Vec<FactorizedState> = (0..50)
        .map(|k| {
            let va = FactorizedState::random(&mut rng).va();
            let b3 = if k % 2 == 0 { 0.5 } else { -0.5 };
            FactorizedState::new(va, Vector3::new(0.0, 0.0, b3)).expect("valid state")
        })
        .collect();
    let laws: Vec<ControlLaw> = (0..10)
        .map(|k| ControlLaw::random_piecewise(&mut rng, 20.0, 1.0, 1.0).labeled(format!("random-{k}")))
        .collect();
    let report = dispersive_invariant_check(&model, &initial, &laws, 20.0, 1e-3, 1e-8).expect("check runs");
    let elapsed = start.elapsed();
    outcome(
        report.passed && elapsed < Duration::from_secs(30),
        format!(
            "{} runs, max |z2| {:.1e}, max |vB3 -+ 1/2| {:.1e} (tol 1e-8), structural defect {:.1e}, {} (limit 30s)",
            report.runs,
            report.max_z2_norm,
            report.max_vb3_deviation,
            report.structural_defect,
            secs(elapsed)
        ),
    )
}

fn sigma31_protection() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let case = CouplingCase::new(CouplingKind::Sigma3Sigma1, 1.0);
    // pure damping, and damping plus a σ₃ component that forces nonzero controls
    let jumps = [
        sigma_minus().scale(0.5),
        sigma_minus().scale(0.5) + pauli(PauliIndex::Z) * C64::new(0.2, -0.1),
    ];
    let (mut min_purity, mut max_dev, mut max_u) = (f64::INFINITY, 0.0f64, 0.0f64);
    for jump in jumps {
        let model = case.model(0.8, 1.0, vec![jump]);
        let law = protecting_law(&model).expect("compatible");
        let k = reduced_b_generator(&case, model.omega_b, -0.5).expect("supported");
        for _ in 0..3 {
            let vb0 = random_on_sphere(&mut rng, 0.5);
            let s = FactorizedState::new(Vector3::new(0.0, 0.0, -0.5), vb0).expect("valid state");
            let traj = integrate(&model, &s.embed(), &law, 20.0, 1e-3).expect("integrates");
            for ((t, v), u) in traj.times.iter().zip(&traj.states).zip(&traj.controls) {
                min_purity = min_purity.min(v.reduced_purity_b());
                let exact = (k * *t).exp() * vb0;
                max_dev = max_dev.max((v.vb() - exact).amax());
                max_u = max_u.max(u[0].abs().max(u[1].abs()));
            }
        }
    }
    outcome(
        min_purity >= 1.0 - 1e-7 && max_dev <= 1e-6,
        format!(
            "min Tr rho_B^2 = 1 - {:.1e} (tol 1e-7), vB vs exp(tK) vB(0) dev {max_dev:.1e} (tol 1e-6), max |u| {max_u:.3}",
            1.0 - min_purity
        ),
    )
}

fn resonant_sweep() -> Outcome {
    let start = Instant::now();
    let model = CouplingCase::new(CouplingKind::Resonant, 1.0).model(0.6, 0.6, vec![sigma_minus().scale(0.5)]);
    let report = resonant_obstruction_check(&model, &ObstructionConfig::default()).expect("resonant model");
    let elapsed = start.elapsed();
    let b = &report.branches;
    outcome(
        report.passed && elapsed < Duration::from_secs(60),
        format!(
            "{} samples, {} zeros (min |vA| {:.6}), {} interior zeros, min interior |w| {:.1e}; branches cross={} equal-z={} both={} neither={}; {} (limit 60s)",
            report.samples,
            report.zeros,
            report.min_zero_va_norm.unwrap_or(f64::NAN),
            report.violations,
            report.min_interior_w.map_or(f64::NAN, |s| s.w_norm),
            b.cross_product_branch,
            b.equal_z_branch,
            b.both,
            b.neither,
            secs(elapsed)
        ),
    )
}

fn asymptotic_purification() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let model = CouplingCase::new(CouplingKind::Resonant, 1.0).model(1.0, 1.0, vec![sigma_minus().scale(0.1)]);
    let mut laws = vec![ControlLaw::zero().labeled("zero")];
    laws.extend((0..29).map(|k| ControlLaw::random_piecewise(&mut rng, 50.0, 2.0, 1.0).labeled(format!("random-{k}"))));
    laws.push(ControlLaw::constant([0.5, 0.0, 0.0]).labeled("constant"));
    let horizons = [10.0, 20.0, 40.0, 50.0];
    let report =
        purification_scan(&model, &BlochVector::maximally_mixed(), &laws, &horizons, 1e-2).expect("scan runs");
    let free = report.margins_for("zero");
    let decreasing = free.windows(2).all(|w| w[1] < w[0]);
    outcome(
        report.min_margin > 0.0 && decreasing,
        format!(
            "{} laws, min margin {:.2e} (> 0); free-evolution margins {}",
            laws.len(),
            report.min_margin,
            free.iter().map(|m| format!("{m:.3e}")).collect::<Vec<_>>().join(" > ")
        ),
    )
}

fn integrator_order() -> Outcome {
    let model = TwoQubitModel::new(0.9, 1.4, Matrix3::zeros());
    let u = [0.7, -0.4, 0.2];
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let v0 = to_coherence(&random_two_qubit(&mut rng));
    let horizon = 10.0;
    let exact = (analytic_generator(&model, &u).expect("valid model").matrix() * horizon).exp() * v0.coords();
    let sim = Simulator::new(&model).expect("valid model");
    let law = ControlLaw::constant(u);
    let errors: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&h| {
            let traj = sim.run(&v0, &law, horizon, h, &IntegrateOptions::default()).expect("integrates");
            (traj.last().coords() - exact).amax()
        })
        .collect();
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    let ok = ratios.iter().all(|r| (r - 16.0).abs() <= 0.2 * 16.0);
    // B alone rotates at 2ω_b about σ₃
    let vb_exact = (bicoherence::generator::t_matrices()[2] * (2.0 * model.omega_b * horizon)).exp() * v0.vb();
    let vb_err = (sim
        .run(&v0, &law, horizon, 0.025, &IntegrateOptions::default())
        .expect("integrates")
        .last()
        .coords()
        .fixed_rows::<3>(VB.start)
        - vb_exact)
        .amax();
    outcome(
        ok,
        format!(
            "errors {} at h=0.1/0.05/0.025, ratios {} (16 +- 20%), vB rotation err {vb_err:.1e}",
            errors.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join("/"),
            ratios.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("generator equivalence", generator_equivalence),
        ("purity identity and round trip", parseval_round_trip),
        ("factorization criterion", factorization),
        ("closed-form w", closed_form_transcription),
        ("local terms cancel in w", local_cancellation),
        ("dispersive invariant set", dispersive_invariant),
        ("sigma3-sigma1 protection", sigma31_protection),
        ("resonant obstruction sweep", resonant_sweep),
        ("asymptotic-only purification", asymptotic_purification),
        ("integrator order", integrator_order),
    ];
    let mut failures = 0;
    for (k, (name, check)) in criteria.into_iter().enumerate() {
        let Outcome { passed, detail } = check();
        if !passed {
            failures += 1;
        }
        println!("acceptance {:>2} {} {name}: {detail}", k + 1, if passed { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} of 10 passed", 10 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
