//! Modal basis of the Jacobian and the modal-space vector field.
//!
//! Eigenvalues come from a dense nonsymmetric eigensolver; each eigenvector is
//! the right singular vector of `J - λI` for its smallest singular value
//! (several of them for a cluster of repeated eigenvalues). Conjugate pairs
//! are built from one vector and its exact conjugate, so real states map to
//! conjugate-symmetric modal coordinates. `L` is obtained as `R⁻¹`, never by
//! solving for left eigenvectors separately.
//!
//! Ordering: the `m - 1` conjugate pairs first, sorted by ascending imaginary
//! part with the positive member leading, then the zero eigenvalue, then `μ`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::linearization::{JacobianBundle, JacobianForm};
use crate::model::{check_len, vector_field, StateVec, SystemCase};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModalTolerances {
    /// Eigenpair residual bound, relative to `‖J‖`.
    pub eigen_residual: f64,
    /// `max |L R - I|`.
    pub biorthogonality: f64,
    /// `|Im λ|` below this times `‖J‖` counts as real.
    pub classification: f64,
    /// Eigenvalues closer than this times `‖J‖` are treated as one cluster.
    pub cluster_gap: f64,
    /// Condition bound on `R` applied when eigenvalues cluster.
    pub max_condition: f64,
    /// Allowed imaginary residual of a reconstructed state, relative to its norm.
    pub reconstruction: f64,
}

impl Default for ModalTolerances {
    fn default() -> Self {
        Self {
            eigen_residual: 1e-8,
            biorthogonality: 1e-10,
            classification: 1e-8,
            cluster_gap: 1e-6,
            max_condition: 1e8,
            reconstruction: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModalBasis {
    /// `2m` eigenvalues in modal order.
    pub eigenvalues: Vec<C64>,
    /// Right eigenvectors as columns.
    pub r: DMatrix<C64>,
    /// `R⁻¹`; its rows are scaled left eigenvectors.
    pub l: DMatrix<C64>,
    /// `‖J r_k - λ_k r_k‖ / ‖r_k‖` per column.
    pub residuals: Vec<f64>,
    /// `‖R‖_F ‖L‖_F`.
    pub condition: f64,
    pub biorthogonality_defect: f64,
    /// `max |L J R - diag(λ)| / ‖J‖`.
    pub diagonalization_defect: f64,
    pub jacobian_norm: f64,
    pub mu: f64,
    pub c: f64,
    pub form: JacobianForm,
    pub forced: bool,
    pub machines: usize,
    pub reconstruction_tol: f64,
    /// Linearization point.
    pub delta_s: DVector<f64>,
}

impl ModalBasis {
    pub fn dim(&self) -> usize {
        2 * self.machines
    }

    /// Index of the zero (mean-angle) mode.
    pub fn zero_mode(&self) -> usize {
        self.dim() - 2
    }

    /// Index of the damping (`μ`) mode.
    pub fn damping_mode(&self) -> usize {
        self.dim() - 1
    }

    pub fn relative_modes(&self) -> std::ops::Range<usize> {
        0..self.dim() - 2
    }

    pub fn right(&self, k: usize) -> DVector<C64> {
        self.r.column(k).into_owned()
    }

    pub fn left(&self, k: usize) -> DVector<C64> {
        self.l.row(k).transpose()
    }
}

fn to_complex(a: &DMatrix<f64>) -> DMatrix<C64> {
    a.map(|x| C64::new(x, 0.0))
}

const SVD_MAX_ITER: usize = 100_000;

fn svd_failed() -> Error {
    Error::NotDiagonalizable("singular value decomposition did not converge".into())
}

/// All `n` eigenvalues of a real square matrix, in no particular order.
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<C64>> {
    let n = a.nrows();
    check_len("square matrix columns", n, a.ncols())?;
    let fa = faer::Mat::<f64>::from_fn(n, n, |i, j| a[(i, j)]);
    let ev = fa
        .eigenvalues()
        .map_err(|e| Error::NotDiagonalizable(format!("eigenvalue iteration failed: {e:?}")))?;
    Ok(ev.into_iter().map(|z| C64::new(z.re, z.im)).collect())
}

/// The `k` right singular vectors of `a` with the smallest singular values.
fn null_vectors_complex(a: DMatrix<C64>, k: usize) -> Result<Vec<DVector<C64>>> {
    let svd = a
        .try_svd(false, true, f64::EPSILON, SVD_MAX_ITER)
        .ok_or_else(svd_failed)?;
    let v_t = svd.v_t.expect("requested V^H");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]));
    Ok(order
        .into_iter()
        .take(k)
        .map(|i| v_t.row(i).adjoint())
        .collect())
}

fn null_vector_real(a: DMatrix<f64>) -> Result<DVector<f64>> {
    let svd = a
        .try_svd(false, true, f64::EPSILON, SVD_MAX_ITER)
        .ok_or_else(svd_failed)?;
    let v_t = svd.v_t.expect("requested V^T");
    let i = svd.singular_values.imin();
    Ok(v_t.row(i).transpose())
}

/// Unit norm, with the largest angle-block entry rotated onto the positive real axis.
fn normalize_oscillatory(mut v: DVector<C64>, m: usize) -> DVector<C64> {
    let norm = v.norm();
    v /= C64::new(norm, 0.0);
    let (mut best, mut mag) = (0, -1.0);
    for i in 0..m {
        if v[i].norm() > mag {
            mag = v[i].norm();
            best = i;
        }
    }
    let z = v[best];
    if z.norm() > 0.0 {
        v *= z.conj() / z.norm();
    }
    v
}

/// Scaled so the angle entries average exactly 1; falls back to unit norm
/// with a positive largest angle entry when that average vanishes.
fn normalize_mean(v: DVector<f64>, m: usize) -> DVector<f64> {
    let avg = v.rows(0, m).sum() / m as f64;
    if avg.abs() > 1e-6 * v.norm() {
        return v / avg;
    }
    let imax = v.rows(0, m).iamax();
    let s = v[imax].signum() * v.norm();
    v / s
}

fn classify(eigs: &[C64], m: usize, imag_tol: f64) -> Result<(Vec<C64>, Vec<f64>)> {
    let upper: Vec<C64> = eigs.iter().copied().filter(|l| l.im > imag_tol).collect();
    let lower = eigs.iter().filter(|l| l.im < -imag_tol).count();
    let reals: Vec<f64> = eigs
        .iter()
        .filter(|l| l.im.abs() <= imag_tol)
        .map(|l| l.re)
        .collect();
    if upper.len() != m - 1 || lower != m - 1 || reals.len() != 2 {
        return Err(Error::ClassificationFailure {
            real: reals.len(),
            complex: upper.len() + lower,
            machines: m,
        });
    }
    Ok((upper, reals))
}

/// Ordered modal basis of `bundle.j`.
pub fn eigendecompose(bundle: &JacobianBundle, tol: &ModalTolerances) -> Result<ModalBasis> {
    let j = &bundle.j;
    let m = bundle.machines();
    let dim = 2 * m;
    let jn = j.norm();
    let jc = to_complex(j);

    let raw = eigenvalues(j)?;
    let (mut upper, mut reals) = classify(&raw, m, tol.classification * jn)?;

    upper.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
    reals.sort_by(|a, b| a.abs().total_cmp(&b.abs()));

    let mut eigenvalues = Vec::with_capacity(dim);
    let mut columns: Vec<DVector<C64>> = Vec::with_capacity(dim);

    let gap = tol.cluster_gap * jn;
    let mut start = 0;
    while start < upper.len() {
        let mut end = start + 1;
        while end < upper.len() && (upper[end] - upper[end - 1]).norm() <= gap {
            end += 1;
        }
        let size = end - start;
        let lambda = upper[start..end].iter().sum::<C64>() / C64::new(size as f64, 0.0);
        let shifted = &jc - DMatrix::from_diagonal_element(dim, dim, lambda);
        for v in null_vectors_complex(shifted, size)? {
            let v = normalize_oscillatory(v, m);
            eigenvalues.push(lambda);
            eigenvalues.push(lambda.conj());
            let conj = v.map(|z| z.conj());
            columns.push(v);
            columns.push(conj);
        }
        start = end;
    }

    for &lambda in &reals {
        let shifted = j - DMatrix::from_diagonal_element(dim, dim, lambda);
        let v = normalize_mean(null_vector_real(shifted)?, m);
        eigenvalues.push(C64::new(lambda, 0.0));
        columns.push(v.map(|x| C64::new(x, 0.0)));
    }

    let r = DMatrix::from_columns(&columns);
    let l = r
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NotDiagonalizable("eigenvector matrix is singular".to_string()))?;

    let residuals: Vec<f64> = (0..dim)
        .map(|k| {
            let rk = r.column(k);
            (&jc * rk - rk * eigenvalues[k]).norm() / rk.norm()
        })
        .collect();
    let worst = residuals.iter().copied().fold(0.0, f64::max);
    if worst > tol.eigen_residual * jn {
        return Err(Error::NotDiagonalizable(format!(
            "eigenpair residual {worst:e} exceeds {:e}",
            tol.eigen_residual * jn
        )));
    }

    let condition = r.norm() * l.norm();
    let min_gap = min_pairwise_gap(&eigenvalues);
    if min_gap < gap && condition > tol.max_condition {
        return Err(Error::NotDiagonalizable(format!(
            "clustered eigenvalues (gap {min_gap:e}) with cond(R) = {condition:e}"
        )));
    }

    let biorthogonality_defect = (&l * &r - DMatrix::<C64>::identity(dim, dim))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if biorthogonality_defect > tol.biorthogonality {
        return Err(Error::NotDiagonalizable(format!(
            "|LR - I| = {biorthogonality_defect:e} with cond(R) = {condition:e}"
        )));
    }

    let diag = DMatrix::from_diagonal(&DVector::from_column_slice(&eigenvalues));
    let diagonalization_defect = (&l * &jc * &r - diag)
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
        / jn;

    Ok(ModalBasis {
        eigenvalues,
        r,
        l,
        residuals,
        condition,
        biorthogonality_defect,
        diagonalization_defect,
        jacobian_norm: jn,
        mu: bundle.mu,
        c: bundle.c,
        form: bundle.form,
        forced: bundle.forced,
        machines: m,
        reconstruction_tol: tol.reconstruction,
        delta_s: bundle.delta_s.clone(),
    })
}

fn min_pairwise_gap(eigs: &[C64]) -> f64 {
    let mut gap = f64::INFINITY;
    for a in 0..eigs.len() {
        for b in (a + 1)..eigs.len() {
            gap = gap.min((eigs[a] - eigs[b]).norm());
        }
    }
    gap
}

/// `Y = L Δ` with `Δ` the stacked state.
pub fn to_modal(basis: &ModalBasis, state: &StateVec) -> Result<DVector<C64>> {
    let x = state.stacked();
    check_len("state", basis.dim(), x.len())?;
    Ok(&basis.l * x.map(|v| C64::new(v, 0.0)))
}

/// `Δ = R Y`, refusing modal vectors whose image is not real.
pub fn from_modal(basis: &ModalBasis, y: &DVector<C64>) -> Result<StateVec> {
    check_len("modal vector", basis.dim(), y.len())?;
    let x = &basis.r * y;
    let imag = x.map(|z| z.im).norm();
    let norm = x.norm();
    if imag > basis.reconstruction_tol * norm {
        return Err(Error::NonRealReconstruction {
            residual: imag,
            norm,
        });
    }
    StateVec::from_stacked(&x.map(|z| z.re))
}

/// `Ẏ = L f(R Y)` with the nonlinear physical vector field.
pub fn modal_vector_field(
    case: &SystemCase,
    basis: &ModalBasis,
    y: &DVector<C64>,
) -> Result<DVector<C64>> {
    let state = from_modal(basis, y)?;
    let f = vector_field(case, &state)?.stacked();
    Ok(&basis.l * f.map(|v| C64::new(v, 0.0)))
}

/// Largest `|y_{2i} - conj(y_{2i-1})|` over the oscillatory pairs, plus the
/// imaginary parts of the two real-mode coordinates.
pub fn conjugate_asymmetry(basis: &ModalBasis, y: &DVector<C64>) -> f64 {
    let mut worst: f64 = 0.0;
    for p in (0..basis.dim() - 2).step_by(2) {
        worst = worst.max((y[p + 1] - y[p].conj()).norm());
    }
    worst
        .max(y[basis.zero_mode()].im.abs())
        .max(y[basis.damping_mode()].im.abs())
}
