//! Numerical checks of the mean/relative motion structure.
//!
//! | check       | statement                                                    |
//! |-------------|--------------------------------------------------------------|
//! | `lemma_1_1` | rows of `N` sum to zero                                      |
//! | `lemma_1_2` | the two real eigenvalues of `J` are `{0, μ}`                 |
//! | `lemma_1_3` | zero-mode eigenvector: equal angle entries, zero speeds      |
//! | `lemma_1_4` | `μ`-mode eigenvector: equal angle entries, speed = μ·angle   |
//! | `lemma_2_1` | oscillatory left eigenvectors: each half sums to zero        |
//! | `lemma_2_2` | electrical power is invariant under a common angle shift     |
//! | `claim_1`   | mean coordinates do not enter any `δ_i - δ_j`                |
//! | `claim_2`   | mean coordinates do not enter the oscillatory rows of `Ẏ`    |
//!
//! `claim_2` samples finite-amplitude states, so it tests the nonlinear
//! decoupling and not only its linearization.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::equilibrium::{solve_equilibrium_with, Equilibrium, NewtonSettings};
use crate::linearization::{build_jacobian_auto, JacobianBundle, JacobianForm};
use crate::modal::{
    eigendecompose, from_modal, modal_vector_field, to_modal, ModalBasis, ModalTolerances,
};
use crate::model::{case_fingerprint, electrical_power, validate_case, StateVec, SystemCase};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub worst_residual: f64,
    pub tolerance: f64,
    pub samples: usize,
    pub seed: Option<u64>,
    pub retries: usize,
}

impl CheckResult {
    fn new(name: &str, worst_residual: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            // NaN residuals fail
            pass: worst_residual <= tolerance,
            worst_residual,
            tolerance,
            samples: 0,
            seed: None,
            retries: 0,
        }
    }

    fn sampled(mut self, samples: usize, seed: u64) -> Self {
        self.samples = samples;
        self.seed = Some(seed);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyTolerances {
    /// Exact-arithmetic identities (row sums, translation invariance).
    pub structural: f64,
    /// Eigenstructure checks, limited by the eigensolver.
    pub eigen: f64,
    /// Sampled nonlinear checks.
    pub sampled: f64,
}

impl Default for VerifyTolerances {
    fn default() -> Self {
        Self {
            structural: 1e-12,
            eigen: 1e-8,
            sampled: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub samples: usize,
    pub seed: u64,
    pub form: JacobianForm,
    /// Half-width of the uniform box the sampled states are drawn from.
    pub amplitude: f64,
    pub tolerances: VerifyTolerances,
    #[serde(skip)]
    pub modal: ModalTolerances,
    #[serde(skip)]
    pub newton: NewtonSettings,
    /// Equilibrium guess; zeros when absent.
    pub guess: Option<Vec<f64>>,
    /// Zero-based pinned machine; the last one when absent.
    pub reference: Option<usize>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            samples: 100,
            seed: 42,
            form: JacobianForm::Physical,
            amplitude: 1.0,
            tolerances: VerifyTolerances::default(),
            modal: ModalTolerances::default(),
            newton: NewtonSettings::default(),
            guess: None,
            reference: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckResult>,
    pub overall_pass: bool,
    pub case_fingerprint: String,
    pub form: JacobianForm,
    /// The case had non-uniform damping and the guard was bypassed.
    pub damping_forced: bool,
    pub equilibrium: Equilibrium,
}

impl VerificationReport {
    pub fn failing(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect()
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub fn check_lemma_1_1(n: &DMatrix<f64>, tol: f64) -> CheckResult {
    let scale = n.norm();
    let worst = n.row_iter().map(|row| row.sum().abs()).fold(0.0, f64::max);
    let rel = if scale > 0.0 { worst / scale } else { worst };
    CheckResult::new("lemma_1_1", rel, tol)
}

pub fn check_lemma_1_2(bundle: &JacobianBundle, tol: f64) -> CheckResult {
    check_lemma_1_2_against(bundle, bundle.mu, tol)
}

/// Distance of the two eigenvalues nearest the real axis from `{0, expected_mu}`,
/// relative to `‖J‖`, under the better of the two pairings.
pub fn check_lemma_1_2_against(bundle: &JacobianBundle, expected_mu: f64, tol: f64) -> CheckResult {
    let Ok(mut eigs) = crate::modal::eigenvalues(&bundle.j) else {
        return CheckResult::new("lemma_1_2", f64::NAN, tol);
    };
    eigs.sort_by(|a, b| a.im.abs().total_cmp(&b.im.abs()));
    let (a, b) = (eigs[0], eigs[1]);
    let zero = C64::new(0.0, 0.0);
    let mu = C64::new(expected_mu, 0.0);
    let straight = (a - zero).norm().max((b - mu).norm());
    let swapped = (b - zero).norm().max((a - mu).norm());
    let jn = bundle.j.norm();
    CheckResult::new("lemma_1_2", straight.min(swapped) / jn, tol)
}

fn angle_spread(v: &DVector<C64>, m: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m {
        for j in (i + 1)..m {
            worst = worst.max((v[i] - v[j]).norm());
        }
    }
    worst
}

fn angle_scale(v: &DVector<C64>, m: usize) -> f64 {
    (0..m).map(|i| v[i].norm()).fold(0.0, f64::max)
}

/// Zero-mode right eigenvector: angle entries equal, speed entries zero.
pub fn check_lemma_1_3(basis: &ModalBasis, tol: f64) -> CheckResult {
    let m = basis.machines;
    let r = basis.right(basis.zero_mode());
    let scale = angle_scale(&r, m);
    let speed = (m..2 * m).map(|i| r[i].norm()).fold(0.0, f64::max);
    CheckResult::new("lemma_1_3", angle_spread(&r, m).max(speed) / scale, tol)
}

/// `μ`-mode right eigenvector: angle entries equal, speed entries `μ` times angle entries.
pub fn check_lemma_1_4(basis: &ModalBasis, tol: f64) -> CheckResult {
    let m = basis.machines;
    let r = basis.right(basis.damping_mode());
    let scale = angle_scale(&r, m);
    let prop = (0..m)
        .map(|i| (r[m + i] - r[i] * basis.mu).norm())
        .fold(0.0, f64::max);
    CheckResult::new("lemma_1_4", angle_spread(&r, m).max(prop) / scale, tol)
}

pub fn check_lemmas_1_3_1_4(basis: &ModalBasis, tol: f64) -> (CheckResult, CheckResult) {
    (check_lemma_1_3(basis, tol), check_lemma_1_4(basis, tol))
}

/// Each oscillatory row of `L` has vanishing angle-half and speed-half sums.
pub fn check_lemma_2_1(basis: &ModalBasis, tol: f64) -> CheckResult {
    let m = basis.machines;
    let worst = basis
        .relative_modes()
        .map(|k| {
            let l = basis.left(k);
            let norm = l.norm();
            let ang: C64 = l.rows(0, m).sum();
            let spe: C64 = l.rows(m, m).sum();
            ang.norm().max(spe.norm()) / norm
        })
        .fold(0.0, f64::max);
    CheckResult::new("lemma_2_1", worst, tol)
}

pub fn check_lemma_2_2(case: &SystemCase, samples: usize, seed: u64, tol: f64) -> CheckResult {
    check_translation_invariance(
        case.len(),
        |d| electrical_power(case, d).expect("sampled with matching length"),
        samples,
        seed,
        tol,
    )
}

/// Samples `‖P(δ + a·1) - P(δ)‖∞ / (1 + ‖P(δ)‖∞)` for an arbitrary power map.
pub fn check_translation_invariance<F>(
    m: usize,
    power: F,
    samples: usize,
    seed: u64,
    tol: f64,
) -> CheckResult
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pi = std::f64::consts::PI;
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let delta = DVector::from_fn(m, |_, _| rng.gen_range(-pi..pi));
        let a = rng.gen_range(-2.0 * pi..2.0 * pi);
        let p0 = power(&delta);
        let p1 = power(&delta.add_scalar(a));
        worst = worst.max((p1 - &p0).amax() / (1.0 + p0.amax()));
    }
    CheckResult::new("lemma_2_2", worst, tol).sampled(samples, seed)
}

fn random_modal_point<R: Rng>(
    basis: &ModalBasis,
    rng: &mut R,
    amplitude: f64,
) -> Result<DVector<C64>> {
    let m = basis.machines;
    let delta = DVector::from_fn(m, |i, _| {
        basis.delta_s[i] + rng.gen_range(-amplitude..=amplitude)
    });
    let speed = DVector::from_fn(m, |_, _| rng.gen_range(-amplitude..=amplitude));
    to_modal(basis, &StateVec::new(delta, speed)?)
}

fn shift_mean<R: Rng>(
    basis: &ModalBasis,
    y: &DVector<C64>,
    rng: &mut R,
    amplitude: f64,
) -> DVector<C64> {
    let mut shifted = y.clone();
    shifted[basis.zero_mode()] += C64::new(rng.gen_range(-amplitude..=amplitude), 0.0);
    shifted[basis.damping_mode()] += C64::new(rng.gen_range(-amplitude..=amplitude), 0.0);
    shifted
}

fn pairwise_change(a: &StateVec, b: &StateVec) -> f64 {
    let m = a.len();
    let mut worst: f64 = 0.0;
    for i in 0..m {
        for j in (i + 1)..m {
            let da = a.delta[i] - a.delta[j];
            let db = b.delta[i] - b.delta[j];
            worst = worst.max((da - db).abs());
        }
    }
    worst
}

/// Structural part: pairwise differences of the mean-mode angle entries.
/// Sampled part: change of every reconstructed `δ_i - δ_j` when the mean
/// coordinates are shifted.
pub fn check_claim_1(
    basis: &ModalBasis,
    samples: usize,
    seed: u64,
    amplitude: f64,
    tol: f64,
) -> Result<CheckResult> {
    let m = basis.machines;
    let structural = [basis.zero_mode(), basis.damping_mode()]
        .into_iter()
        .map(|k| {
            let r = basis.right(k);
            angle_spread(&r, m) / angle_scale(&r, m)
        })
        .fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sampled: f64 = 0.0;
    for _ in 0..samples {
        let y = random_modal_point(basis, &mut rng, amplitude)?;
        let shifted = shift_mean(basis, &y, &mut rng, amplitude);
        let a = from_modal(basis, &y)?;
        let b = from_modal(basis, &shifted)?;
        sampled = sampled.max(pairwise_change(&a, &b));
    }
    Ok(CheckResult::new("claim_1", structural.max(sampled), tol).sampled(samples, seed))
}

const MAX_RETRIES: usize = 100;

/// Change of the oscillatory components of `Ẏ = L f(RY)` under real shifts
/// of the two mean coordinates, relative to `‖Ẏ‖`.
pub fn check_claim_2(
    case: &SystemCase,
    basis: &ModalBasis,
    samples: usize,
    seed: u64,
    amplitude: f64,
    tol: f64,
) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut retries = 0;
    let mut done = 0;
    while done < samples {
        let y = random_modal_point(basis, &mut rng, amplitude)?;
        let shifted = shift_mean(basis, &y, &mut rng, amplitude);
        let pair = modal_vector_field(case, basis, &y)
            .and_then(|a| Ok((a, modal_vector_field(case, basis, &shifted)?)));
        let (dy, dy_shifted) = match pair {
            Ok(p) => p,
            Err(e @ Error::NonRealReconstruction { .. }) => {
                retries += 1;
                if retries > MAX_RETRIES {
                    return Err(e);
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        let scale = dy.norm().max(f64::MIN_POSITIVE);
        let change = basis
            .relative_modes()
            .map(|i| (dy_shifted[i] - dy[i]).norm())
            .fold(0.0, f64::max);
        worst = worst.max(change / scale);
        done += 1;
    }
    let mut res = CheckResult::new("claim_2", worst, tol).sampled(samples, seed);
    res.retries = retries;
    Ok(res)
}

/// Runs every check in a fixed order with one seed.
///
/// Cases with non-uniform damping go through the forced Jacobian so the
/// failing checks are reported rather than refused. With the paper form the
/// eigenstructure checks use the `+c` Jacobian, while `claim_1` and `claim_2`
/// always use the physical basis, since they involve the vector field itself.
pub fn run_verification(case: &SystemCase, config: &VerifyConfig) -> Result<VerificationReport> {
    let validation = validate_case(case);
    if !validation.passed() {
        return Err(Error::InvalidCase(validation.messages()));
    }
    let m = case.len();
    let guess = match &config.guess {
        Some(g) => DVector::from_column_slice(g),
        None => DVector::zeros(m),
    };
    let reference = config.reference.unwrap_or(m - 1);
    let eq = solve_equilibrium_with(case, &guess, reference, &config.newton)?;
    let delta_s = eq.delta();

    let (bundle, forced) = build_jacobian_auto(case, &delta_s, config.form)?;
    let basis = eigendecompose(&bundle, &config.modal)?;
    let physical = if config.form == JacobianForm::Physical {
        basis.clone()
    } else {
        let (pb, _) = build_jacobian_auto(case, &delta_s, JacobianForm::Physical)?;
        eigendecompose(&pb, &config.modal)?
    };

    let tol = &config.tolerances;
    let (l13, l14) = check_lemmas_1_3_1_4(&basis, tol.eigen);
    let checks = vec![
        check_lemma_1_1(&bundle.n, tol.structural),
        check_lemma_1_2(&bundle, tol.eigen),
        l13,
        l14,
        check_lemma_2_1(&basis, tol.eigen),
        check_lemma_2_2(case, config.samples, config.seed, tol.structural),
        check_claim_1(
            &physical,
            config.samples,
            config.seed,
            config.amplitude,
            tol.sampled,
        )?,
        check_claim_2(
            case,
            &physical,
            config.samples,
            config.seed,
            config.amplitude,
            tol.sampled,
        )?,
    ];
    Ok(VerificationReport {
        overall_pass: checks.iter().all(|c| c.pass),
        checks,
        case_fingerprint: case_fingerprint(case),
        form: config.form,
        damping_forced: forced,
        equilibrium: eq,
    })
}
