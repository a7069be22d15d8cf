//! Structured Jacobian of the swing system at an operating point.
//!
//! With uniform damping `c = D_i / 2H_i` the Jacobian is
//!
//! ```text
//! J = [ 0  I  ]
//!     [ N  μI ]
//! ```
//!
//! where `N` is the (full) coupling matrix and `μ = -c` for the physical sign
//! convention. [`JacobianForm::PaperEq4`] keeps the printed `+c` block so its
//! real eigenvalue pair `{0, +c}` can be reproduced verbatim; it is not the
//! derivative of [`vector_field`](crate::model::vector_field).

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::model::{check_len, vector_field_stacked, StateVec, SystemCase};
use crate::{Error, Result};

/// Default relative tolerance on damping-ratio deviation for uniform damping.
pub const UNIFORM_DAMPING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianForm {
    /// Lower-right block `-cI`; exact derivative of the vector field.
    Physical,
    /// Lower-right block `+cI`, as printed.
    PaperEq4,
}

impl JacobianForm {
    fn sign(self) -> f64 {
        match self {
            JacobianForm::Physical => -1.0,
            JacobianForm::PaperEq4 => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacobianBundle {
    pub n: DMatrix<f64>,
    /// Uniform damping constant (mean ratio when forced).
    pub c: f64,
    /// Nonzero real eigenvalue implied by the form: `-c` or `+c`.
    pub mu: f64,
    pub form: JacobianForm,
    pub j: DMatrix<f64>,
    pub delta_s: DVector<f64>,
    /// Set when built through [`build_jacobian_forced`] from non-uniform damping;
    /// the lower-right block then holds the individual ratios, not `μI`.
    pub forced: bool,
}

impl JacobianBundle {
    pub fn machines(&self) -> usize {
        self.n.nrows()
    }
}

/// Mean damping ratio and `max |r_i - mean| / mean` (absolute when the mean is zero).
pub fn damping_uniformity(ratios: &[f64]) -> (f64, f64) {
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let dev = ratios.iter().map(|r| (r - mean).abs()).fold(0.0, f64::max);
    let rel = if mean != 0.0 { dev / mean.abs() } else { dev };
    (mean, rel)
}

/// Coupling matrix: `N_ij = (ω_s/2H_i)(C_ij cos δ_ij - D_ij sin δ_ij)` off the
/// diagonal, and the negated row sum on the diagonal.
pub fn build_n(case: &SystemCase, delta_s: &DVector<f64>) -> Result<DMatrix<f64>> {
    let m = case.len();
    check_len("delta_s", m, delta_s.len())?;
    let net = &case.network;
    let mut n = DMatrix::zeros(m, m);
    for i in 0..m {
        let gain = case.acceleration_gain(i);
        let mut row = 0.0;
        for j in (0..m).filter(|&j| j != i) {
            let (s, c) = (delta_s[i] - delta_s[j]).sin_cos();
            let v = gain * (net.c[(i, j)] * c - net.dmat[(i, j)] * s);
            n[(i, j)] = v;
            row += v;
        }
        n[(i, i)] = -row;
    }
    Ok(n)
}

fn assemble(n: &DMatrix<f64>, lower_right: &[f64]) -> DMatrix<f64> {
    let m = n.nrows();
    let mut j = DMatrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        j[(i, m + i)] = 1.0;
        j[(m + i, m + i)] = lower_right[i];
    }
    j.view_mut((m, 0), (m, m)).copy_from(n);
    j
}

/// Exact derivative of the vector field at `(delta, 0)` for arbitrary damping:
/// `[0, I; N, -diag(D_i/2H_i)]`.
pub fn general_jacobian(case: &SystemCase, delta: &DVector<f64>) -> DMatrix<f64> {
    let n = build_n(case, delta).expect("caller checks dimensions");
    let damp: Vec<f64> = case.damping_ratios().iter().map(|r| -r).collect();
    assemble(&n, &damp)
}

pub fn build_jacobian(
    case: &SystemCase,
    delta_s: &DVector<f64>,
    form: JacobianForm,
) -> Result<JacobianBundle> {
    build_jacobian_with(case, delta_s, form, UNIFORM_DAMPING_TOL)
}

/// Builds `[0, I; N, μI]`, refusing non-uniform damping beyond `tolerance`.
pub fn build_jacobian_with(
    case: &SystemCase,
    delta_s: &DVector<f64>,
    form: JacobianForm,
    tolerance: f64,
) -> Result<JacobianBundle> {
    let (c, deviation) = damping_uniformity(&case.damping_ratios());
    if deviation > tolerance {
        return Err(Error::NonuniformDamping {
            deviation,
            tolerance,
        });
    }
    let n = build_n(case, delta_s)?;
    let mu = form.sign() * c;
    let j = assemble(&n, &vec![mu; case.len()]);
    Ok(JacobianBundle {
        n,
        c,
        mu,
        form,
        j,
        delta_s: delta_s.clone(),
        forced: false,
    })
}

/// Bypasses the uniform-damping guard. The lower-right block carries each
/// machine's own ratio (with the form's sign) and `c` is their mean, so the
/// consequences of non-uniform damping stay visible to the checks.
pub fn build_jacobian_forced(
    case: &SystemCase,
    delta_s: &DVector<f64>,
    form: JacobianForm,
) -> Result<JacobianBundle> {
    let ratios = case.damping_ratios();
    let (c, _) = damping_uniformity(&ratios);
    let n = build_n(case, delta_s)?;
    let lr: Vec<f64> = ratios.iter().map(|r| form.sign() * r).collect();
    let j = assemble(&n, &lr);
    Ok(JacobianBundle {
        n,
        c,
        mu: form.sign() * c,
        form,
        j,
        delta_s: delta_s.clone(),
        forced: true,
    })
}

/// [`build_jacobian`] when damping is uniform, otherwise [`build_jacobian_forced`].
/// The flag reports whether the guard was bypassed.
pub fn build_jacobian_auto(
    case: &SystemCase,
    delta_s: &DVector<f64>,
    form: JacobianForm,
) -> Result<(JacobianBundle, bool)> {
    let (_, deviation) = damping_uniformity(&case.damping_ratios());
    if deviation <= UNIFORM_DAMPING_TOL {
        Ok((build_jacobian(case, delta_s, form)?, false))
    } else {
        Ok((build_jacobian_forced(case, delta_s, form)?, true))
    }
}

/// Central-difference Jacobian of the vector field.
pub fn finite_diff_jacobian(case: &SystemCase, state: &StateVec, h: f64) -> Result<DMatrix<f64>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("step must be > 0, got {h}")));
    }
    let x = state.stacked();
    check_len("state", 2 * case.len(), x.len())?;
    let n = x.len();
    let mut jac = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[k] += h;
        xm[k] -= h;
        let col = (vector_field_stacked(case, &xp)? - vector_field_stacked(case, &xm)?) / (2.0 * h);
        jac.set_column(k, &col);
    }
    Ok(jac)
}
