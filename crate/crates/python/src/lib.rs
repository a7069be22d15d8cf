//! Python bindings. Machine indices are zero-based here, like the Rust API.
//! Reports come back as plain dicts (parsed from the same JSON the CLI writes).

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyComplex;

use relmotion::cases;
use relmotion::io::{case_to_json, load_case, parse_case, save_case, ReportFile};
use relmotion::{
    build_jacobian_forced, coi_view, decoupling_experiment, eigendecompose, electrical_power,
    integrate, solve_equilibrium, synthesize_equilibrium, vector_field, Disturbance, JacobianForm,
    MachineParams, ModalTolerances, NetworkParams, StateVec, SystemCase, VerifyConfig,
};

fn err(e: relmotion::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json_to_py(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn form(paper_form: bool) -> JacobianForm {
    if paper_form {
        JacobianForm::PaperEq4
    } else {
        JacobianForm::Physical
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn matrix(name: &str, r: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = r.len();
    if r.iter().any(|row| row.len() != n) {
        return Err(PyValueError::new_err(format!("{name} must be square")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| r[i][j]))
}

/// A validated multi-machine case.
#[pyclass(name = "SystemCase", module = "relmotion_py", from_py_object)]
#[derive(Clone)]
struct PyCase {
    inner: SystemCase,
}

#[pymethods]
impl PyCase {
    #[new]
    #[pyo3(signature = (omega_s, H, D, Pm, E, G, C, Dmat))]
    #[allow(non_snake_case, clippy::too_many_arguments)]
    fn new(
        omega_s: f64,
        H: Vec<f64>,
        D: Vec<f64>,
        Pm: Vec<f64>,
        E: Vec<f64>,
        G: Vec<f64>,
        C: Vec<Vec<f64>>,
        Dmat: Vec<Vec<f64>>,
    ) -> PyResult<Self> {
        let m = H.len();
        if [D.len(), Pm.len(), E.len()].iter().any(|&l| l != m) {
            return Err(PyValueError::new_err(
                "H, D, Pm and E must have the same length",
            ));
        }
        let machines = (0..m)
            .map(|i| MachineParams::new(H[i], D[i], Pm[i], E[i]))
            .collect();
        let network = NetworkParams {
            g: DVector::from_vec(G),
            c: matrix("C", &C)?,
            dmat: matrix("Dmat", &Dmat)?,
        };
        let inner = SystemCase::new(omega_s, machines, network).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn case_a() -> Self {
        Self {
            inner: cases::case_a(),
        }
    }

    #[staticmethod]
    fn case_a_nonuniform() -> Self {
        Self {
            inner: cases::case_a_nonuniform(),
        }
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: load_case(path).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: parse_case(text).map_err(err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save_case(&self.inner, path).map_err(err)
    }

    fn to_json(&self) -> String {
        case_to_json(&self.inner)
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn omega_s(&self) -> f64 {
        self.inner.omega_s
    }

    fn damping_ratios(&self) -> Vec<f64> {
        self.inner.damping_ratios()
    }

    #[getter]
    #[allow(non_snake_case)]
    fn C(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.network.c)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "SystemCase(m={}, omega_s={})",
            self.inner.len(),
            self.inner.omega_s
        )
    }
}

#[pyfunction]
#[pyo3(name = "electrical_power")]
fn py_electrical_power(case: &PyCase, delta: Vec<f64>) -> PyResult<Vec<f64>> {
    let p = electrical_power(&case.inner, &DVector::from_vec(delta)).map_err(err)?;
    Ok(p.iter().copied().collect())
}

/// Returns `(d delta/dt, d omega/dt)`.
#[pyfunction]
#[pyo3(name = "vector_field")]
fn py_vector_field(
    case: &PyCase,
    delta: Vec<f64>,
    speed: Vec<f64>,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let s = StateVec::new(DVector::from_vec(delta), DVector::from_vec(speed)).map_err(err)?;
    let f = vector_field(&case.inner, &s).map_err(err)?;
    Ok((
        f.delta.iter().copied().collect(),
        f.speed.iter().copied().collect(),
    ))
}

/// Returns `(delta_coi, speed_coi, delta - delta_coi)`.
#[pyfunction]
#[pyo3(name = "coi_view")]
fn py_coi_view(case: &PyCase, delta: Vec<f64>, speed: Vec<f64>) -> PyResult<(f64, f64, Vec<f64>)> {
    let s = StateVec::new(DVector::from_vec(delta), DVector::from_vec(speed)).map_err(err)?;
    let v = coi_view(&case.inner, &s).map_err(err)?;
    Ok((v.delta_coi, v.speed_coi, v.rel_delta))
}

#[pyfunction]
#[pyo3(signature = (case, guess=None, reference=None))]
#[pyo3(name = "solve_equilibrium")]
fn py_solve_equilibrium(
    case: &PyCase,
    guess: Option<Vec<f64>>,
    reference: Option<usize>,
) -> PyResult<Vec<f64>> {
    let m = case.inner.len();
    let guess = guess
        .map(DVector::from_vec)
        .unwrap_or_else(|| DVector::zeros(m));
    let eq = solve_equilibrium(&case.inner, &guess, reference.unwrap_or(m - 1)).map_err(err)?;
    Ok(eq.delta_s)
}

#[pyfunction]
#[pyo3(name = "synthesize_equilibrium")]
fn py_synthesize_equilibrium(case: &PyCase, angles: Vec<f64>) -> PyResult<PyCase> {
    let inner = synthesize_equilibrium(&case.inner, &DVector::from_vec(angles)).map_err(err)?;
    Ok(PyCase { inner })
}

/// Jacobian at `delta_s`; each machine keeps its own damping ratio.
#[pyfunction]
#[pyo3(signature = (case, delta_s, paper_form=false))]
#[pyo3(name = "jacobian")]
fn py_jacobian(case: &PyCase, delta_s: Vec<f64>, paper_form: bool) -> PyResult<Vec<Vec<f64>>> {
    let b = build_jacobian_forced(&case.inner, &DVector::from_vec(delta_s), form(paper_form))
        .map_err(err)?;
    Ok(rows(&b.j))
}

/// Eigenvalues in modal order: oscillatory pairs, then 0, then the damping eigenvalue.
#[pyfunction]
#[pyo3(signature = (case, delta_s, paper_form=false))]
#[pyo3(name = "eigenvalues")]
fn py_eigenvalues<'py>(
    py: Python<'py>,
    case: &PyCase,
    delta_s: Vec<f64>,
    paper_form: bool,
) -> PyResult<Vec<Bound<'py, PyComplex>>> {
    let (b, _) = relmotion::linearization::build_jacobian_auto(
        &case.inner,
        &DVector::from_vec(delta_s),
        form(paper_form),
    )
    .map_err(err)?;
    let basis = eigendecompose(&b, &ModalTolerances::default()).map_err(err)?;
    Ok(basis
        .eigenvalues
        .iter()
        .map(|z| PyComplex::from_doubles(py, z.re, z.im))
        .collect())
}

/// Full report (as written by `relmotion verify`) as a dict.
#[pyfunction]
#[pyo3(signature = (case, samples=100, seed=42, paper_form=false, amplitude=1.0))]
#[pyo3(name = "run_verification")]
fn py_run_verification(
    py: Python<'_>,
    case: &PyCase,
    samples: usize,
    seed: u64,
    paper_form: bool,
    amplitude: f64,
) -> PyResult<Py<PyAny>> {
    let config = VerifyConfig {
        samples,
        seed,
        amplitude,
        form: form(paper_form),
        ..VerifyConfig::default()
    };
    let report = ReportFile::verify(&case.inner, &config).map_err(err)?;
    json_to_py(py, &report.to_json())
}

fn disturbance(m: usize, ddelta: Option<Vec<f64>>, domega: Option<Vec<f64>>) -> Disturbance {
    let mut d = Disturbance::zeros(m);
    if let Some(v) = ddelta {
        d.ddelta = v;
    }
    if let Some(v) = domega {
        d.domega = v;
    }
    d
}

/// RK4 from the equilibrium plus offsets. Returns `(times, deltas, speeds)`
/// with one row per sample.
#[pyfunction]
#[pyo3(signature = (case, t_end, dt, ddelta=None, domega=None))]
#[allow(clippy::type_complexity)]
#[pyo3(name = "simulate")]
fn py_simulate(
    case: &PyCase,
    t_end: f64,
    dt: f64,
    ddelta: Option<Vec<f64>>,
    domega: Option<Vec<f64>>,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let m = case.inner.len();
    let eq = solve_equilibrium(&case.inner, &DVector::zeros(m), m - 1).map_err(err)?;
    let init = disturbance(m, ddelta, domega).apply(&eq).map_err(err)?;
    let tr = integrate(&case.inner, &init, t_end, dt).map_err(err)?;
    let deltas = tr
        .states
        .iter()
        .map(|s| s.delta.iter().copied().collect())
        .collect();
    let speeds = tr
        .states
        .iter()
        .map(|s| s.speed.iter().copied().collect())
        .collect();
    Ok((tr.times, deltas, speeds))
}

#[pyfunction]
#[pyo3(signature = (case, t_end, dt, ddelta=None, domega=None))]
#[pyo3(name = "decoupling_experiment")]
fn py_decoupling_experiment(
    py: Python<'_>,
    case: &PyCase,
    t_end: f64,
    dt: f64,
    ddelta: Option<Vec<f64>>,
    domega: Option<Vec<f64>>,
) -> PyResult<Py<PyAny>> {
    let m = case.inner.len();
    let eq = solve_equilibrium(&case.inner, &DVector::zeros(m), m - 1).map_err(err)?;
    let d = disturbance(m, ddelta, domega);
    let rep = decoupling_experiment(&case.inner, &eq, &d, t_end, dt).map_err(err)?;
    let text = serde_json::to_string(&rep).map_err(|e| PyValueError::new_err(e.to_string()))?;
    json_to_py(py, &text)
}

#[pymodule]
fn relmotion_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCase>()?;
    m.add_function(wrap_pyfunction!(py_electrical_power, m)?)?;
    m.add_function(wrap_pyfunction!(py_vector_field, m)?)?;
    m.add_function(wrap_pyfunction!(py_coi_view, m)?)?;
    m.add_function(wrap_pyfunction!(py_solve_equilibrium, m)?)?;
    m.add_function(wrap_pyfunction!(py_synthesize_equilibrium, m)?)?;
    m.add_function(wrap_pyfunction!(py_jacobian, m)?)?;
    m.add_function(wrap_pyfunction!(py_eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(py_run_verification, m)?)?;
    m.add_function(wrap_pyfunction!(py_simulate, m)?)?;
    m.add_function(wrap_pyfunction!(py_decoupling_experiment, m)?)?;
    Ok(())
}
