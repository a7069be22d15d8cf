//! Fixed-step RK4 simulation in physical and modal coordinates.
//!
//! The decoupling experiment integrates the full model and, from the same
//! disturbed state, the modal model with both mean coordinates frozen. Under
//! uniform damping the two agree on every relative angle up to round-off;
//! with non-uniform damping they drift apart.

use nalgebra::{ComplexField, DVector};
use serde::Serialize;

use crate::equilibrium::Equilibrium;
use crate::linearization::{build_jacobian, damping_uniformity, JacobianForm, UNIFORM_DAMPING_TOL};
use crate::modal::{
    conjugate_asymmetry, eigendecompose, from_modal, modal_vector_field, to_modal, ModalBasis,
    ModalTolerances,
};
use crate::model::{check_len, coi_view, vector_field_stacked, StateVec, SystemCase};
use crate::{Error, Result, C64};

/// Per-step bound on conjugate asymmetry of modal coordinates, relative to `‖Y‖`.
pub const CONJUGATE_TOL: f64 = 1e-8;

/// Instantaneous offsets applied to the equilibrium at `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Disturbance {
    pub ddelta: Vec<f64>,
    pub domega: Vec<f64>,
}

impl Disturbance {
    pub fn zeros(m: usize) -> Self {
        Self {
            ddelta: vec![0.0; m],
            domega: vec![0.0; m],
        }
    }

    pub fn angle(m: usize, machine: usize, offset: f64) -> Self {
        let mut d = Self::zeros(m);
        d.ddelta[machine] = offset;
        d
    }

    /// Equilibrium state at rest plus the offsets.
    pub fn apply(&self, eq: &Equilibrium) -> Result<StateVec> {
        let m = eq.delta_s.len();
        check_len("disturbance angles", m, self.ddelta.len())?;
        check_len("disturbance speeds", m, self.domega.len())?;
        if self
            .ddelta
            .iter()
            .chain(&self.domega)
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidArgument(
                "disturbance entries must be finite".into(),
            ));
        }
        StateVec::new(
            DVector::from_fn(m, |i, _| eq.delta_s[i] + self.ddelta[i]),
            DVector::from_column_slice(&self.domega),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVec>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanMode {
    /// Integrate all `2m` modal coordinates.
    Evolve,
    /// Hold both mean coordinates at their initial values.
    FreezeInitial,
    /// Set both mean coordinates to zero and hold them there.
    FreezeZero,
}

impl MeanMode {
    pub fn is_frozen(self) -> bool {
        !matches!(self, MeanMode::Evolve)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModalTrajectory {
    pub times: Vec<f64>,
    pub coords: Vec<DVector<C64>>,
    pub frozen_mean: bool,
}

impl ModalTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Physical states of every sample.
    pub fn reconstruct(&self, basis: &ModalBasis) -> Result<Vec<StateVec>> {
        self.coords.iter().map(|y| from_modal(basis, y)).collect()
    }
}

fn rk4_step<T, F>(f: &mut F, x: &DVector<T>, dt: f64) -> Result<DVector<T>>
where
    T: ComplexField<RealField = f64> + Copy,
    F: FnMut(&DVector<T>) -> Result<DVector<T>>,
{
    let half = T::from_real(0.5 * dt);
    let k1 = f(x)?;
    let k2 = f(&(x + &k1 * half))?;
    let k3 = f(&(x + &k2 * half))?;
    let k4 = f(&(x + &k3 * T::from_real(dt)))?;
    let two = T::from_real(2.0);
    Ok(x + (k1 + k2 * two + k3 * two + k4) * T::from_real(dt / 6.0))
}

fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) || !(t_end >= dt && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need dt > 0 and t_end >= dt, got dt = {dt}, t_end = {t_end}"
        )));
    }
    Ok((t_end / dt).round() as usize)
}

/// Classical RK4 on the swing equations, sampling every step.
pub fn integrate(case: &SystemCase, initial: &StateVec, t_end: f64, dt: f64) -> Result<Trajectory> {
    let steps = step_count(t_end, dt)?;
    let mut x = initial.stacked();
    check_len("initial state", 2 * case.len(), x.len())?;
    let mut f = |v: &DVector<f64>| vector_field_stacked(case, v);

    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(initial.clone());
    for k in 1..=steps {
        x = rk4_step(&mut f, &x, dt)?;
        let t = k as f64 * dt;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { time: t });
        }
        times.push(t);
        states.push(StateVec::from_stacked(&x)?);
    }
    Ok(Trajectory { times, states })
}

/// RK4 on `Ẏ = L f(RY)`. Frozen mean coordinates have their derivatives dropped.
pub fn integrate_modal(
    case: &SystemCase,
    basis: &ModalBasis,
    y0: &DVector<C64>,
    t_end: f64,
    dt: f64,
    mean: MeanMode,
) -> Result<ModalTrajectory> {
    let steps = step_count(t_end, dt)?;
    check_len("initial modal vector", basis.dim(), y0.len())?;
    let (zm, dm) = (basis.zero_mode(), basis.damping_mode());

    let mut y = y0.clone();
    if mean == MeanMode::FreezeZero {
        y[zm] = C64::new(0.0, 0.0);
        y[dm] = C64::new(0.0, 0.0);
    }
    let check = |y: &DVector<C64>| -> Result<()> {
        let asym = conjugate_asymmetry(basis, y);
        let norm = y.norm();
        if asym > CONJUGATE_TOL * norm.max(f64::MIN_POSITIVE) {
            return Err(Error::NonRealReconstruction {
                residual: asym,
                norm,
            });
        }
        Ok(())
    };
    check(&y)?;

    let mut f = |v: &DVector<C64>| -> Result<DVector<C64>> {
        let mut dy = modal_vector_field(case, basis, v)?;
        if mean.is_frozen() {
            dy[zm] = C64::new(0.0, 0.0);
            dy[dm] = C64::new(0.0, 0.0);
        }
        Ok(dy)
    };

    let mut times = Vec::with_capacity(steps + 1);
    let mut coords = Vec::with_capacity(steps + 1);
    times.push(0.0);
    coords.push(y.clone());
    for k in 1..=steps {
        y = rk4_step(&mut f, &y, dt)?;
        let t = k as f64 * dt;
        if y.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite { time: t });
        }
        check(&y)?;
        times.push(t);
        coords.push(y.clone());
    }
    Ok(ModalTrajectory {
        times,
        coords,
        frozen_mean: mean.is_frozen(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairDiscrepancy {
    /// Zero-based machine indices, `i < j`.
    pub i: usize,
    pub j: usize,
    pub max_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecouplingReport {
    pub pairs: Vec<PairDiscrepancy>,
    pub max_pair: f64,
    /// `max_i |(δ_i - δ_COI)_full - (δ_i - δ_COI)_reduced|` over time.
    pub max_coi: f64,
    pub t_end: f64,
    pub dt: f64,
    pub steps: usize,
    /// `max - min` of the damping ratios.
    pub damping_spread: f64,
    /// Damping was non-uniform and the basis came from the mean-ratio surrogate.
    pub forced_basis: bool,
}

/// Full simulation versus the frozen-mean modal reduction from the same disturbed state.
pub fn decoupling_experiment(
    case: &SystemCase,
    eq: &Equilibrium,
    disturbance: &Disturbance,
    t_end: f64,
    dt: f64,
) -> Result<DecouplingReport> {
    let m = case.len();
    let ratios = case.damping_ratios();
    let (c, deviation) = damping_uniformity(&ratios);
    // non-uniform cases reduce with the basis of the uniform surrogate at the mean ratio
    let forced = deviation > UNIFORM_DAMPING_TOL;
    let surrogate;
    let basis_case = if forced {
        surrogate = case.with_damping_ratios(&vec![c; m])?;
        &surrogate
    } else {
        case
    };
    let bundle = build_jacobian(basis_case, &eq.delta(), JacobianForm::Physical)?;
    let basis = eigendecompose(&bundle, &ModalTolerances::default())?;
    let initial = disturbance.apply(eq)?;

    let full = integrate(case, &initial, t_end, dt)?;
    let y0 = to_modal(&basis, &initial)?;
    let reduced = integrate_modal(case, &basis, &y0, t_end, dt, MeanMode::FreezeInitial)?
        .reconstruct(&basis)?;

    let mut pairs: Vec<PairDiscrepancy> = (0..m)
        .flat_map(|i| ((i + 1)..m).map(move |j| PairDiscrepancy { i, j, max_abs: 0.0 }))
        .collect();
    let mut max_coi: f64 = 0.0;
    for (a, b) in full.states.iter().zip(&reduced) {
        for p in pairs.iter_mut() {
            let da = a.delta[p.i] - a.delta[p.j];
            let db = b.delta[p.i] - b.delta[p.j];
            p.max_abs = p.max_abs.max((da - db).abs());
        }
        let ca = coi_view(case, a)?;
        let cb = coi_view(case, b)?;
        for (x, y) in ca.rel_delta.iter().zip(&cb.rel_delta) {
            max_coi = max_coi.max((x - y).abs());
        }
    }
    let spread = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - ratios.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(DecouplingReport {
        max_pair: pairs.iter().map(|p| p.max_abs).fold(0.0, f64::max),
        pairs,
        max_coi,
        t_end,
        dt,
        steps: full.len() - 1,
        damping_spread: spread,
        forced_basis: forced,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub spread: f64,
    pub ratios: Vec<f64>,
    pub max_discrepancy: f64,
    pub max_coi_discrepancy: f64,
}

/// Damping ratios `c (1 + s (k/(m-1) - 1/2))` for machine `k`, with `c` the
/// case's mean ratio: evenly spaced over `[c(1 - s/2), c(1 + s/2)]`.
pub fn spread_ratios(case: &SystemCase, spread: f64) -> Vec<f64> {
    let (c, _) = damping_uniformity(&case.damping_ratios());
    let m = case.len();
    (0..m)
        .map(|k| c * (1.0 + spread * (k as f64 / (m - 1) as f64 - 0.5)))
        .collect()
}

/// Reruns [`decoupling_experiment`] for each relative damping spread. The base
/// case must have uniform damping, which defines `c`. The experiments run on
/// separate threads; rows come back in input order.
pub fn damping_sweep(
    case: &SystemCase,
    eq: &Equilibrium,
    spreads: &[f64],
    disturbance: &Disturbance,
    t_end: f64,
    dt: f64,
) -> Result<Vec<SweepRow>> {
    if let Some(s) = spreads.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
        return Err(Error::InvalidArgument(format!(
            "spread must be >= 0, got {s}"
        )));
    }
    let (_, deviation) = damping_uniformity(&case.damping_ratios());
    if deviation > UNIFORM_DAMPING_TOL {
        return Err(Error::NonuniformDamping {
            deviation,
            tolerance: UNIFORM_DAMPING_TOL,
        });
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = spreads
            .iter()
            .map(|&spread| {
                scope.spawn(move || -> Result<SweepRow> {
                    let ratios = spread_ratios(case, spread);
                    let variant = case.with_damping_ratios(&ratios)?;
                    let rep = decoupling_experiment(&variant, eq, disturbance, t_end, dt)?;
                    Ok(SweepRow {
                        spread,
                        ratios,
                        max_discrepancy: rep.max_pair,
                        max_coi_discrepancy: rep.max_coi,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    })
}
