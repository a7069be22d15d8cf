//! Acceptance criteria. Each criterion prints one PASS/FAIL line; the test
//! fails at the end if any of them failed.

use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use relmotion::cases::{case_a, case_a_nonuniform, random_uniform_case};
use relmotion::cli::cli_main;
use relmotion::io::save_case;
use relmotion::linearization::general_jacobian;
use relmotion::verify::{
    check_claim_1, check_claim_2, check_lemma_1_1, check_lemma_1_2, check_lemma_2_1,
    check_lemmas_1_3_1_4,
};
use relmotion::{
    build_jacobian, damping_sweep, decoupling_experiment, eigendecompose, finite_diff_jacobian,
    integrate, solve_equilibrium, Disturbance, JacobianBundle, JacobianForm, ModalBasis,
    ModalTolerances, StateVec, SystemCase,
};

const CASES: usize = 50;
const SEED: u64 = 2024;

struct Suite {
    cases: Vec<(SystemCase, DVector<f64>)>,
}

impl Suite {
    fn new() -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED);
        let cases = (0..CASES)
            .map(|_| {
                let m = rng.gen_range(2..=10);
                random_uniform_case(&mut rng, m)
            })
            .collect();
        Self { cases }
    }

    fn bundles(&self, form: JacobianForm) -> Vec<JacobianBundle> {
        self.cases
            .iter()
            .map(|(c, ds)| build_jacobian(c, ds, form).unwrap())
            .collect()
    }

    fn bases(&self) -> Vec<ModalBasis> {
        self.bundles(JacobianForm::Physical)
            .iter()
            .map(|b| eigendecompose(b, &ModalTolerances::default()).unwrap())
            .collect()
    }
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(results: &mut Vec<(usize, bool)>, id: usize, name: &str, elapsed: Duration, o: Outcome) {
    println!(
        "criterion {id} {:<4} {name}: {} ({:.2} s)",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        elapsed.as_secs_f64()
    );
    results.push((id, o.pass));
}

fn timed<F: FnOnce() -> Outcome>(limit: Option<f64>, f: F) -> (Duration, Outcome) {
    let t0 = Instant::now();
    let mut o = f();
    let el = t0.elapsed();
    if let Some(l) = limit {
        if el.as_secs_f64() >= l {
            o.pass = false;
            o.detail.push_str(&format!("; runtime over {l} s"));
        }
    }
    (el, o)
}

fn criterion_1(s: &Suite) -> Outcome {
    let worst = s
        .cases
        .iter()
        .map(|(c, ds)| {
            let n = relmotion::build_n(c, ds).unwrap();
            check_lemma_1_1(&n, 1e-12).worst_residual
        })
        .fold(0.0, f64::max);
    Outcome {
        pass: worst <= 1e-12,
        detail: format!("max |row sum| / ||N|| = {worst:.2e} over {CASES} cases (tol 1e-12)"),
    }
}

fn criterion_2(s: &Suite) -> Outcome {
    let mut worst: f64 = 0.0;
    for form in [JacobianForm::Physical, JacobianForm::PaperEq4] {
        for b in s.bundles(form) {
            worst = worst.max(check_lemma_1_2(&b, 1e-8).worst_residual);
        }
    }
    Outcome {
        pass: worst <= 1e-8,
        detail: format!(
            "real eigenvalues vs {{0, -c}} and {{0, +c}}: worst {worst:.2e} (tol 1e-8)"
        ),
    }
}

fn criterion_3(bases: &[ModalBasis]) -> Outcome {
    let worst = bases
        .iter()
        .map(|b| {
            let (a, c) = check_lemmas_1_3_1_4(b, 1e-8);
            a.worst_residual.max(c.worst_residual)
        })
        .fold(0.0, f64::max);
    Outcome {
        pass: worst <= 1e-8,
        detail: format!("mean-mode eigenvector structure: worst {worst:.2e} (tol 1e-8)"),
    }
}

fn criterion_4(bases: &[ModalBasis]) -> Outcome {
    let worst = bases
        .iter()
        .map(|b| check_lemma_2_1(b, 1e-8).worst_residual)
        .fold(0.0, f64::max);
    Outcome {
        pass: worst <= 1e-8,
        detail: format!("left-vector half sums: worst {worst:.2e} (tol 1e-8)"),
    }
}

fn criterion_5(s: &Suite, bases: &[ModalBasis]) -> Outcome {
    let (mut w1, mut w2): (f64, f64) = (0.0, 0.0);
    for (k, ((case, _), b)) in s.cases.iter().zip(bases).enumerate() {
        let seed = SEED + k as u64;
        w1 = w1.max(
            check_claim_1(b, 100, seed, 1.0, 1e-9)
                .unwrap()
                .worst_residual,
        );
        w2 = w2.max(
            check_claim_2(case, b, 100, seed, 1.0, 1e-9)
                .unwrap()
                .worst_residual,
        );
    }
    Outcome {
        pass: w1 <= 1e-9 && w2 <= 1e-9,
        detail: format!(
            "100 samples/case at 1.0 rad: claim_1 {w1:.2e}, claim_2 {w2:.2e} (tol 1e-9)"
        ),
    }
}

fn criterion_6() -> Outcome {
    let case = case_a();
    let eq = solve_equilibrium(&case, &DVector::zeros(2), 1).unwrap();
    let d = Disturbance::angle(2, 0, 0.1);
    let uniform = decoupling_experiment(&case, &eq, &d, 10.0, 1e-3).unwrap();
    let rows = damping_sweep(&case, &eq, &[0.0, 0.25, 0.5], &d, 10.0, 1e-3).unwrap();
    let disc: Vec<f64> = rows.iter().map(|r| r.max_discrepancy).collect();
    let pass = uniform.max_pair < 1e-6 && disc[2] > 1e-4 && disc[0] < disc[1] && disc[1] < disc[2];
    Outcome {
        pass,
        detail: format!(
            "uniform {:.2e} (< 1e-6); spreads 0/0.25/0.5 -> {:.2e}/{:.2e}/{:.2e} (last > 1e-4, increasing)",
            uniform.max_pair, disc[0], disc[1], disc[2]
        ),
    }
}

fn criterion_7(s: &Suite) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 7);
    let mut fd_worst: f64 = 0.0;
    for (case, ds) in s.cases.iter().take(10) {
        let m = case.len();
        let delta = DVector::from_fn(m, |i, _| ds[i] + rng.gen_range(-0.5..0.5));
        let speed = DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0));
        let state = StateVec::new(delta.clone(), speed).unwrap();
        let fd = finite_diff_jacobian(case, &state, 1e-5).unwrap();
        fd_worst = fd_worst.max((fd - general_jacobian(case, &delta)).amax());
    }

    let case = case_a();
    let eq = solve_equilibrium(&case, &DVector::zeros(2), 1).unwrap();
    let init = Disturbance::angle(2, 0, 0.1).apply(&eq).unwrap();
    let end = |dt: f64| {
        integrate(&case, &init, 2.0, dt)
            .unwrap()
            .states
            .pop()
            .unwrap()
            .stacked()
    };
    let reference = end(0.005);
    let order = ((end(0.1) - &reference).amax() / (end(0.05) - &reference).amax()).log2();

    Outcome {
        pass: fd_worst <= 1e-6 && (3.7..=4.3).contains(&order),
        detail: format!(
            "finite differences {fd_worst:.2e} (tol 1e-6); RK4 order {order:.3} (in [3.7, 4.3])"
        ),
    }
}

fn run_verify(case: &std::path::Path, out: &std::path::Path) -> i32 {
    cli_main([
        "relmotion",
        "verify",
        case.to_str().unwrap(),
        "--seed",
        "42",
        "--out",
        out.to_str().unwrap(),
    ])
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("case_a.json");
    let nu = dir.path().join("case_a_nonuniform.json");
    save_case(&case_a(), &a).unwrap();
    save_case(&case_a_nonuniform(), &nu).unwrap();

    let (r1, r2, r3) = (
        dir.path().join("r1.json"),
        dir.path().join("r2.json"),
        dir.path().join("r3.json"),
    );
    let code_a = run_verify(&a, &r1);
    let code_a2 = run_verify(&a, &r2);
    let identical = std::fs::read(&r1).unwrap() == std::fs::read(&r2).unwrap();
    let code_nu = run_verify(&nu, &r3);

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&r3).unwrap()).unwrap();
    let failing: Vec<String> = json["verification"]["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| !c["pass"].as_bool().unwrap())
        .map(|c| c["name"].as_str().unwrap().to_string())
        .collect();
    let expected = ["lemma_1_2", "lemma_1_4", "lemma_2_1", "claim_1", "claim_2"];
    let pass = code_a == 0 && code_a2 == 0 && identical && code_nu == 2 && failing == expected;
    Outcome {
        pass,
        detail: format!(
            "reports identical: {identical}; exit codes {code_a}/{code_nu}; failing {failing:?}"
        ),
    }
}

#[test]
fn acceptance_criteria() {
    let mut results = Vec::new();
    let suite = Suite::new();

    let (el, o) = timed(Some(1.0), || criterion_1(&suite));
    report(&mut results, 1, "row sums of N", el, o);

    let (el, o) = timed(Some(5.0), || criterion_2(&suite));
    report(&mut results, 2, "mean-motion eigenvalues", el, o);

    let bases = suite.bases();
    let (el, o) = timed(None, || criterion_3(&bases));
    report(&mut results, 3, "mean-motion eigenvectors", el, o);

    let (el, o) = timed(None, || criterion_4(&bases));
    report(&mut results, 4, "oscillatory left eigenvectors", el, o);

    let (el, o) = timed(Some(30.0), || criterion_5(&suite, &bases));
    report(&mut results, 5, "nonlinear decoupling", el, o);

    let (el, o) = timed(Some(10.0), criterion_6);
    report(&mut results, 6, "decoupling trajectories", el, o);

    let (el, o) = timed(None, || criterion_7(&suite));
    report(&mut results, 7, "oracle cross-checks", el, o);

    let (el, o) = timed(None, criterion_8);
    report(&mut results, 8, "determinism and exit codes", el, o);

    let failed: Vec<usize> = results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
