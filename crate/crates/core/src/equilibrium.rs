//! Operating-point solve and the assumption report.
//!
//! The full residual `P_m - P_e(δ)` has a singular Jacobian (rows of the
//! power sensitivity sum to zero), so one angle is pinned at its guess value
//! and Newton runs on the remaining `m - 1` equations. The dropped equation is
//! checked after convergence: if it does not vanish as well, the case has no
//! equilibrium at all (total mechanical power does not balance the losses).

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::linearization::damping_uniformity;
use crate::modal::ModalBasis;
use crate::model::{check_len, electrical_power, SystemCase};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    pub delta_s: Vec<f64>,
    /// Max-norm of `P_m - P_e` over all machines, pinned one included.
    pub residual_norm: f64,
    /// Zero-based index of the pinned machine.
    pub reference: usize,
    pub iterations: usize,
}

impl Equilibrium {
    pub fn delta(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.delta_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 50,
            max_halvings: 30,
        }
    }
}

fn mismatch(case: &SystemCase, delta: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(case.mechanical_power() - electrical_power(case, delta)?)
}

/// `∂P_e / ∂δ`, full `m × m`.
pub(crate) fn power_sensitivity(case: &SystemCase, delta: &DVector<f64>) -> DMatrix<f64> {
    let m = case.len();
    let net = &case.network;
    let mut s = DMatrix::zeros(m, m);
    for i in 0..m {
        for k in (0..m).filter(|&k| k != i) {
            let (sn, cs) = (delta[i] - delta[k]).sin_cos();
            let d = net.c[(i, k)] * cs - net.dmat[(i, k)] * sn;
            s[(i, k)] = -d;
            s[(i, i)] += d;
        }
    }
    s
}

fn reduced(v: &DVector<f64>, skip: usize) -> DVector<f64> {
    DVector::from_iterator(
        v.len() - 1,
        v.iter()
            .enumerate()
            .filter(|(i, _)| *i != skip)
            .map(|(_, x)| *x),
    )
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.amax()
}

pub fn solve_equilibrium(
    case: &SystemCase,
    guess: &DVector<f64>,
    reference: usize,
) -> Result<Equilibrium> {
    solve_equilibrium_with(case, guess, reference, &NewtonSettings::default())
}

/// Newton solve of `P_m = P_e(δ)` with `δ[reference]` held at its guess.
/// `reference` is zero-based.
pub fn solve_equilibrium_with(
    case: &SystemCase,
    guess: &DVector<f64>,
    reference: usize,
    settings: &NewtonSettings,
) -> Result<Equilibrium> {
    let m = case.len();
    check_len("guess", m, guess.len())?;
    if reference >= m {
        return Err(Error::InvalidArgument(format!(
            "reference machine {} out of range for {m} machines",
            reference + 1
        )));
    }
    let free: Vec<usize> = (0..m).filter(|&i| i != reference).collect();

    let mut delta = guess.clone();
    let mut f = mismatch(case, &delta)?;
    let mut norm = max_abs(&reduced(&f, reference));
    let mut iterations = 0;

    while norm > settings.tolerance {
        if iterations == settings.max_iterations {
            return Err(Error::NoConvergence {
                iterations,
                residual: norm,
            });
        }
        iterations += 1;

        // dF/dδ = -∂P_e/∂δ restricted to free rows/columns
        let sens = power_sensitivity(case, &delta);
        let jac = DMatrix::from_fn(m - 1, m - 1, |r, c| -sens[(free[r], free[c])]);
        let rhs = -reduced(&f, reference);
        let step = jac
            .lu()
            .solve(&rhs)
            .filter(|s| s.iter().all(|v| v.is_finite()))
            .ok_or(Error::SingularStep {
                iteration: iterations,
            })?;

        let mut scale = 1.0;
        let mut halvings = 0;
        loop {
            let mut trial = delta.clone();
            for (k, &i) in free.iter().enumerate() {
                trial[i] += scale * step[k];
            }
            let f_trial = mismatch(case, &trial)?;
            let n_trial = max_abs(&reduced(&f_trial, reference));
            if n_trial <= norm || halvings == settings.max_halvings {
                delta = trial;
                f = f_trial;
                norm = n_trial;
                break;
            }
            scale *= 0.5;
            halvings += 1;
        }
    }

    let ref_residual = f[reference].abs();
    if ref_residual > settings.tolerance {
        return Err(Error::InconsistentPowerBalance {
            residual: ref_residual,
            tolerance: settings.tolerance,
        });
    }
    Ok(Equilibrium {
        delta_s: delta.iter().copied().collect(),
        residual_norm: max_abs(&f),
        reference,
        iterations,
    })
}

/// Copy of `case` whose mechanical powers make `delta_target` an exact equilibrium.
pub fn synthesize_equilibrium(
    case: &SystemCase,
    delta_target: &DVector<f64>,
) -> Result<SystemCase> {
    let pe = electrical_power(case, delta_target)?;
    case.with_mechanical_power(&pe)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AssumptionTolerances {
    /// Relative deviation of damping ratios accepted as uniform.
    pub uniform_damping: f64,
    /// Looser relative deviation reported as "near uniform".
    pub near_uniform: f64,
    /// Eigenvalue tolerance relative to `‖J‖`.
    pub eigen: f64,
}

impl Default for AssumptionTolerances {
    fn default() -> Self {
        Self {
            uniform_damping: 1e-9,
            near_uniform: 1e-3,
            eigen: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityEvidence {
    pub pass: bool,
    /// Largest real part among the non-real eigenvalues.
    pub oscillatory_abscissa: f64,
    /// The two eigenvalues closest to the real axis, ordered by magnitude.
    pub real_eigenvalues: Vec<f64>,
    pub interpretation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OscillatoryEvidence {
    pub pass: bool,
    pub complex_count: usize,
    pub expected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DampingEvidence {
    pub pass: bool,
    pub near_uniform: bool,
    pub ratios: Vec<f64>,
    pub mean: f64,
    /// `max - min` of the ratios.
    pub spread: f64,
    /// `max |ratio - mean| / mean`.
    pub relative_deviation: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub model_class: bool,
    pub stable_equilibrium: StabilityEvidence,
    pub oscillatory_pairs: OscillatoryEvidence,
    pub uniform_damping: DampingEvidence,
    pub equilibrium_residual: f64,
    pub tolerances: AssumptionTolerances,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.model_class
            && self.stable_equilibrium.pass
            && self.oscillatory_pairs.pass
            && self.uniform_damping.pass
    }
}

pub fn check_assumptions(
    case: &SystemCase,
    eq: &Equilibrium,
    basis: &ModalBasis,
    tol: &AssumptionTolerances,
) -> AssumptionReport {
    check_assumptions_spectrum(case, eq, &basis.eigenvalues, basis.jacobian_norm, tol)
}

/// Same as [`check_assumptions`] from a raw spectrum, for Jacobians that do
/// not admit an ordered modal basis (e.g. decoupled machines).
pub fn check_assumptions_spectrum(
    case: &SystemCase,
    eq: &Equilibrium,
    eigenvalues: &[C64],
    jacobian_norm: f64,
    tol: &AssumptionTolerances,
) -> AssumptionReport {
    let m = case.len();
    let eig_tol = tol.eigen * jacobian_norm.max(f64::MIN_POSITIVE);

    let complex: Vec<&C64> = eigenvalues
        .iter()
        .filter(|l| l.im.abs() > eig_tol)
        .collect();
    let oscillatory_pairs = OscillatoryEvidence {
        pass: complex.len() == 2 * (m - 1),
        complex_count: complex.len(),
        expected: 2 * (m - 1),
    };

    let mut by_imag: Vec<C64> = eigenvalues.to_vec();
    by_imag.sort_by(|a, b| a.im.abs().total_cmp(&b.im.abs()));
    let mut reals: Vec<f64> = by_imag.iter().take(2).map(|l| l.re).collect();
    reals.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let abscissa = complex
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let real_ok = reals.len() == 2
        && by_imag.iter().take(2).all(|l| l.im.abs() <= eig_tol)
        && reals[0].abs() <= eig_tol
        && reals[1] < -eig_tol;
    let stable_equilibrium = StabilityEvidence {
        pass: real_ok && abscissa < 0.0,
        oscillatory_abscissa: abscissa,
        real_eigenvalues: reals,
        interpretation: "stability of relative motions: every oscillatory mode strictly damped, \
                         mean motion eigenvalues {0, mu} with mu < 0"
            .to_string(),
    };

    let ratios = case.damping_ratios();
    let (mean, deviation) = damping_uniformity(&ratios);
    let spread = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let uniform_damping = DampingEvidence {
        pass: deviation <= tol.uniform_damping,
        near_uniform: deviation <= tol.near_uniform,
        ratios,
        mean,
        spread,
        relative_deviation: deviation,
        tolerance: tol.uniform_damping,
    };

    AssumptionReport {
        model_class: true,
        stable_equilibrium,
        oscillatory_pairs,
        uniform_damping,
        equilibrium_residual: eq.residual_norm,
        tolerances: *tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases::{case_a, case_a_nonuniform};
    use crate::linearization::{build_jacobian, general_jacobian, JacobianForm};
    use crate::modal::{eigendecompose, ModalTolerances};
    use crate::model::vector_field;
    use crate::model::StateVec;
    use approx::assert_abs_diff_eq;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn zero_power_case_converges_to_origin() {
        let eq = solve_equilibrium(&case_a(), &v(&[0.1, 0.0]), 1).unwrap();
        assert_abs_diff_eq!(eq.delta_s[0], 0.0, epsilon = 1e-10);
        assert_eq!(eq.delta_s[1], 0.0);
        assert!(eq.residual_norm <= 1e-10);
    }

    #[test]
    fn recovers_synthesized_equilibrium() {
        let case = synthesize_equilibrium(&case_a(), &v(&[0.3, 0.0])).unwrap();
        let eq = solve_equilibrium(&case, &v(&[0.1, 0.0]), 1).unwrap();
        assert_abs_diff_eq!(eq.delta_s[0], 0.3, epsilon = 1e-10);
        // independent residual evaluation
        let r = case.mechanical_power() - electrical_power(&case, &eq.delta()).unwrap();
        assert!(r.amax() <= 1e-10);
    }

    #[test]
    fn unbalanced_lossless_case_has_no_equilibrium() {
        let case = case_a().with_mechanical_power(&v(&[0.5, 0.4])).unwrap();
        let err = solve_equilibrium(&case, &v(&[0.1, 0.0]), 1).unwrap_err();
        match err {
            Error::InconsistentPowerBalance { residual, .. } => {
                assert_abs_diff_eq!(residual, 0.9, epsilon = 1e-9)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn decoupled_machines_give_singular_step() {
        let mut case = case_a();
        case.network.c.fill(0.0);
        let case = case.with_mechanical_power(&v(&[0.1, -0.1])).unwrap();
        let err = solve_equilibrium(&case, &v(&[0.0, 0.0]), 1).unwrap_err();
        assert!(matches!(err, Error::SingularStep { .. }));
    }

    #[test]
    fn unreachable_power_hits_iteration_cap() {
        // |P_m| > max C sin, no real root
        let case = case_a().with_mechanical_power(&v(&[1.5, -1.5])).unwrap();
        let err = solve_equilibrium(&case, &v(&[0.2, 0.0]), 1).unwrap_err();
        assert!(matches!(
            err,
            Error::NoConvergence { .. } | Error::SingularStep { .. }
        ));
    }

    #[test]
    fn bad_reference_is_rejected() {
        assert!(solve_equilibrium(&case_a(), &v(&[0.0, 0.0]), 2).is_err());
    }

    #[test]
    fn synthesize_examples() {
        let s = synthesize_equilibrium(&case_a(), &v(&[0.0, 0.0])).unwrap();
        assert_eq!(s.mechanical_power().as_slice(), &[0.0, 0.0]);
        let target = v(&[std::f64::consts::PI / 6.0, 0.0]);
        let s = synthesize_equilibrium(&case_a(), &target).unwrap();
        assert_abs_diff_eq!(s.machines[0].pm, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.machines[1].pm, -0.5, epsilon = 1e-15);
        let f = vector_field(&s, &StateVec::at_rest(target)).unwrap();
        assert!(f.stacked().iter().all(|&x| x == 0.0));
    }

    fn eq_for(case: &SystemCase) -> Equilibrium {
        solve_equilibrium(case, &DVector::zeros(case.len()), case.len() - 1).unwrap()
    }

    #[test]
    fn case_a_passes_all_assumptions() {
        let case = case_a();
        let eq = eq_for(&case);
        let bundle = build_jacobian(&case, &eq.delta(), JacobianForm::Physical).unwrap();
        let basis = eigendecompose(&bundle, &ModalTolerances::default()).unwrap();
        let rep = check_assumptions(&case, &eq, &basis, &AssumptionTolerances::default());
        assert!(rep.all_pass(), "{rep:?}");
        assert_abs_diff_eq!(
            rep.stable_equilibrium.oscillatory_abscissa,
            -0.05,
            epsilon = 1e-12
        );
    }

    #[test]
    fn nonuniform_damping_fails_asm4() {
        let case = case_a_nonuniform();
        let eq = eq_for(&case);
        let j = general_jacobian(&case, &eq.delta());
        let eig = crate::modal::eigenvalues(&j).unwrap();
        let rep = check_assumptions_spectrum(
            &case,
            &eq,
            &eig,
            j.norm(),
            &AssumptionTolerances::default(),
        );
        assert!(!rep.uniform_damping.pass);
        assert_abs_diff_eq!(rep.uniform_damping.spread, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(rep.uniform_damping.mean, 0.15, epsilon = 1e-15);
        assert!(rep.oscillatory_pairs.pass);
    }

    #[test]
    fn decoupled_machines_fail_asm3() {
        let mut case = case_a();
        case.network.c.fill(0.0);
        let eq = eq_for(&case);
        let j = general_jacobian(&case, &eq.delta());
        let eig = crate::modal::eigenvalues(&j).unwrap();
        // spectrum {0, 0, -c, -c}
        let mut re: Vec<f64> = eig.iter().map(|l| l.re).collect();
        re.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(re[0], -0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(re[3], 0.0, epsilon = 1e-12);
        let rep = check_assumptions_spectrum(
            &case,
            &eq,
            &eig,
            j.norm(),
            &AssumptionTolerances::default(),
        );
        assert!(!rep.oscillatory_pairs.pass);
        assert_eq!(rep.oscillatory_pairs.complex_count, 0);
    }
}
