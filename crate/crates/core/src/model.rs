//! Classical-model swing dynamics of an m-machine system.
//!
//! Machine `i` obeys
//!
//! ```text
//! d²δ_i/dt² = -(D_i / 2H_i) dδ_i/dt + (ω_s / 2H_i) (P_mi - P_ei)
//! P_ei      = E_i² G_i + Σ_{j≠i} [ C_ij sin(δ_i - δ_j) + D_ij cos(δ_i - δ_j) ]
//! ```
//!
//! The power term carries the standard sign: a machine accelerates when its
//! mechanical input exceeds its electrical output.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::{Error, Result};

/// Default synchronous speed, 60 Hz.
pub const DEFAULT_OMEGA_S: f64 = 120.0 * std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MachineParams {
    /// Inertia constant (s).
    pub h: f64,
    /// Damping constant (pu).
    pub d: f64,
    /// Mechanical power (pu).
    pub pm: f64,
    /// Internal EMF magnitude (pu).
    pub e: f64,
}

impl MachineParams {
    pub fn new(h: f64, d: f64, pm: f64, e: f64) -> Self {
        Self { h, d, pm, e }
    }

    /// `D / 2H`, the per-machine damping ratio.
    pub fn damping_ratio(&self) -> f64 {
        self.d / (2.0 * self.h)
    }
}

/// Reduced-network coefficients. `c` multiplies `sin(δ_i - δ_j)`, `dmat`
/// multiplies `cos(δ_i - δ_j)`; both have zero diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub g: DVector<f64>,
    pub c: DMatrix<f64>,
    pub dmat: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemCase {
    pub omega_s: f64,
    pub machines: Vec<MachineParams>,
    pub network: NetworkParams,
}

impl SystemCase {
    /// Builds a case and rejects it if any invariant is violated.
    pub fn new(omega_s: f64, machines: Vec<MachineParams>, network: NetworkParams) -> Result<Self> {
        let case = Self {
            omega_s,
            machines,
            network,
        };
        let report = validate_case(&case);
        if report.passed() {
            Ok(case)
        } else {
            Err(Error::InvalidCase(report.messages()))
        }
    }

    pub fn len(&self) -> usize {
        self.machines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.machines.is_empty()
    }

    pub fn damping_ratios(&self) -> Vec<f64> {
        self.machines
            .iter()
            .map(MachineParams::damping_ratio)
            .collect()
    }

    /// `ω_s / 2H_i` for machine `i`.
    pub fn acceleration_gain(&self, i: usize) -> f64 {
        self.omega_s / (2.0 * self.machines[i].h)
    }

    pub fn mechanical_power(&self) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.machines.iter().map(|mc| mc.pm))
    }

    /// Copy of the case with the mechanical powers replaced.
    pub fn with_mechanical_power(&self, pm: &DVector<f64>) -> Result<Self> {
        check_len("mechanical power", self.len(), pm.len())?;
        let mut out = self.clone();
        for (mc, &p) in out.machines.iter_mut().zip(pm.iter()) {
            mc.pm = p;
        }
        Ok(out)
    }

    /// Copy of the case with per-machine damping ratios `D_i / 2H_i` set to `ratios`.
    pub fn with_damping_ratios(&self, ratios: &[f64]) -> Result<Self> {
        check_len("damping ratios", self.len(), ratios.len())?;
        let mut out = self.clone();
        for (mc, &r) in out.machines.iter_mut().zip(ratios) {
            mc.d = 2.0 * mc.h * r;
        }
        Ok(out)
    }
}

/// Rotor angles and their rates.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVec {
    pub delta: DVector<f64>,
    pub speed: DVector<f64>,
}

impl StateVec {
    pub fn new(delta: DVector<f64>, speed: DVector<f64>) -> Result<Self> {
        check_len("speed", delta.len(), speed.len())?;
        Ok(Self { delta, speed })
    }

    pub fn at_rest(delta: DVector<f64>) -> Self {
        let m = delta.len();
        Self {
            delta,
            speed: DVector::zeros(m),
        }
    }

    pub fn zeros(m: usize) -> Self {
        Self::at_rest(DVector::zeros(m))
    }

    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }

    /// Stacks angles over speeds into one `2m` vector.
    pub fn stacked(&self) -> DVector<f64> {
        let m = self.len();
        DVector::from_fn(2 * m, |k, _| {
            if k < m {
                self.delta[k]
            } else {
                self.speed[k - m]
            }
        })
    }

    pub fn from_stacked(x: &DVector<f64>) -> Result<Self> {
        if !x.len().is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "stacked state has odd length {}",
                x.len()
            )));
        }
        let m = x.len() / 2;
        Ok(Self {
            delta: x.rows(0, m).into_owned(),
            speed: x.rows(m, m).into_owned(),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.delta
            .iter()
            .chain(self.speed.iter())
            .all(|v| v.is_finite())
    }
}

/// Center-of-inertia view of a state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoiView {
    pub delta_coi: f64,
    pub speed_coi: f64,
    pub rel_delta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub location: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn messages(&self) -> Vec<String> {
        self.violations
            .iter()
            .map(|v| format!("{}: {}", v.location, v.message))
            .collect()
    }

    fn push(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            location: location.into(),
            message: message.into(),
        });
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        })
    }
}

/// Collects every violated invariant; never fails.
pub fn validate_case(case: &SystemCase) -> ValidationReport {
    let mut report = ValidationReport::default();
    let m = case.len();

    if m < 2 {
        report.push("machines", format!("need at least 2 machines, found {m}"));
    }
    if !(case.omega_s.is_finite() && case.omega_s > 0.0) {
        report.push(
            "omega_s",
            format!("must be finite and > 0, got {}", case.omega_s),
        );
    }
    for (i, mc) in case.machines.iter().enumerate() {
        let n = i + 1;
        if !(mc.h.is_finite() && mc.h > 0.0) {
            report.push(
                format!("machines[{i}].H"),
                format!("machine {n}: H must be > 0, got {}", mc.h),
            );
        }
        if !(mc.e.is_finite() && mc.e > 0.0) {
            report.push(
                format!("machines[{i}].E"),
                format!("machine {n}: E must be > 0, got {}", mc.e),
            );
        }
        if !(mc.d.is_finite() && mc.d >= 0.0) {
            report.push(
                format!("machines[{i}].D"),
                format!("machine {n}: D must be >= 0, got {}", mc.d),
            );
        }
        if !mc.pm.is_finite() {
            report.push(
                format!("machines[{i}].Pm"),
                format!("machine {n}: Pm must be finite"),
            );
        }
    }

    let net = &case.network;
    if net.g.len() != m {
        report.push(
            "network.G",
            format!("length {} does not match {m} machines", net.g.len()),
        );
    }
    for (name, mat) in [("C", &net.c), ("Dmat", &net.dmat)] {
        if mat.nrows() != m || mat.ncols() != m {
            report.push(
                format!("network.{name}"),
                format!(
                    "shape {}x{} does not match {m} machines",
                    mat.nrows(),
                    mat.ncols()
                ),
            );
            continue;
        }
        for i in 0..m {
            if mat[(i, i)] != 0.0 {
                report.push(
                    format!("network.{name}[{i}][{i}]"),
                    format!("diagonal entry must be exactly zero, got {}", mat[(i, i)]),
                );
            }
            for j in 0..m {
                if !mat[(i, j)].is_finite() {
                    report.push(format!("network.{name}[{i}][{j}]"), "entry must be finite");
                }
            }
        }
    }
    for (i, g) in net.g.iter().enumerate() {
        if !g.is_finite() {
            report.push(format!("network.G[{i}]"), "entry must be finite");
        }
    }
    report
}

/// Electrical power `P_e` of every machine at angles `delta`.
pub fn electrical_power(case: &SystemCase, delta: &DVector<f64>) -> Result<DVector<f64>> {
    let m = case.len();
    check_len("delta", m, delta.len())?;
    let net = &case.network;
    Ok(DVector::from_fn(m, |i, _| {
        let e = case.machines[i].e;
        let mut p = e * e * net.g[i];
        for j in (0..m).filter(|&j| j != i) {
            let (s, c) = (delta[i] - delta[j]).sin_cos();
            p += net.c[(i, j)] * s + net.dmat[(i, j)] * c;
        }
        p
    }))
}

/// Right-hand side of the first-order swing system.
pub fn vector_field(case: &SystemCase, state: &StateVec) -> Result<StateVec> {
    let m = case.len();
    check_len("state.delta", m, state.delta.len())?;
    check_len("state.speed", m, state.speed.len())?;
    let pe = electrical_power(case, &state.delta)?;
    let accel = DVector::from_fn(m, |i, _| {
        let mc = &case.machines[i];
        -mc.damping_ratio() * state.speed[i] + case.acceleration_gain(i) * (mc.pm - pe[i])
    });
    Ok(StateVec {
        delta: state.speed.clone(),
        speed: accel,
    })
}

/// Stacked-vector form of [`vector_field`].
pub fn vector_field_stacked(case: &SystemCase, x: &DVector<f64>) -> Result<DVector<f64>> {
    check_len("stacked state", 2 * case.len(), x.len())?;
    Ok(vector_field(case, &StateVec::from_stacked(x)?)?.stacked())
}

/// Inertia-weighted center-of-inertia angle and speed.
pub fn coi_view(case: &SystemCase, state: &StateVec) -> Result<CoiView> {
    let m = case.len();
    check_len("state.delta", m, state.delta.len())?;
    check_len("state.speed", m, state.speed.len())?;
    let total: f64 = case.machines.iter().map(|mc| mc.h).sum();
    let weighted = |v: &DVector<f64>| {
        case.machines
            .iter()
            .zip(v.iter())
            .map(|(mc, x)| mc.h * x)
            .sum::<f64>()
            / total
    };
    let delta_coi = weighted(&state.delta);
    let speed_coi = weighted(&state.speed);
    Ok(CoiView {
        delta_coi,
        speed_coi,
        rel_delta: state.delta.iter().map(|d| d - delta_coi).collect(),
    })
}

/// Hex SHA-256 over the bit patterns of every numeric parameter, in a fixed order.
pub fn case_fingerprint(case: &SystemCase) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update((case.len() as u64).to_le_bytes());
    hasher.update(case.omega_s.to_bits().to_le_bytes());
    for mc in &case.machines {
        for v in [mc.h, mc.d, mc.pm, mc.e] {
            hasher.update(v.to_bits().to_le_bytes());
        }
    }
    let net = &case.network;
    let row_major = |mat: &DMatrix<f64>| -> Vec<f64> { mat.transpose().iter().copied().collect() };
    for v in net
        .g
        .iter()
        .copied()
        .chain(row_major(&net.c))
        .chain(row_major(&net.dmat))
    {
        hasher.update(v.to_bits().to_le_bytes());
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
