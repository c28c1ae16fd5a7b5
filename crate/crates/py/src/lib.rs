//! Python bindings for `geoqm`. Complex vectors cross the boundary as lists of
//! Python `complex`, matrices as lists of rows.

use num_complex::Complex64;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use geoqm::dynamics::{self, HamiltonianFunction};
use geoqm::ensembles;
use geoqm::entanglement::{self, BipartiteSpace};
use geoqm::linalg::{CMatrix, CVector};
use geoqm::phase::{self, Loop};
use geoqm::projective::{self, io};
use geoqm::selftest::{self, SelftestConfig, ToleranceProfile};
use geoqm::spin::{self, Spinor};
use geoqm::statistics;
use geoqm::{ChartPoint, Error};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(msg) => PyIOError::new_err(msg),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn matrix_from_rows(rows: Vec<Vec<Complex64>>) -> PyResult<CMatrix> {
    let n = rows.len();
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(PyValueError::new_err(format!("row {i} has {} entries, expected {n}", r.len())));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn matrix_rows(m: &CMatrix) -> Vec<Vec<Complex64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

/// A ray in `CP^n`, held through a normalized representative.
#[pyclass(name = "PureState", module = "geoqm_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPureState {
    inner: geoqm::PureState,
}

#[pymethods]
impl PyPureState {
    #[new]
    fn new(components: Vec<Complex64>) -> PyResult<Self> {
        let inner = geoqm::PureState::new(CVector::from_vec(components)).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: io::state_from_str(text).map_err(to_py)? })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&io::state_to_json(&self.inner)).expect("plain data serializes")
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn components(&self) -> Vec<Complex64> {
        self.inner.components().iter().copied().collect()
    }

    fn distance(&self, other: &PyPureState) -> PyResult<f64> {
        projective::geodesic_distance(&self.inner, &other.inner).map_err(to_py)
    }

    fn transition_probability(&self, other: &PyPureState) -> PyResult<f64> {
        projective::transition_probability(&self.inner, &other.inner).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("PureState(dim={})", self.inner.dim())
    }
}

/// A Hermitian operator together with the value of ħ used for its dynamics.
#[pyclass(name = "Observable", module = "geoqm_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyObservable {
    inner: geoqm::Observable,
}

#[pymethods]
impl PyObservable {
    #[new]
    #[pyo3(signature = (matrix, hbar = 1.0))]
    fn new(matrix: Vec<Vec<Complex64>>, hbar: f64) -> PyResult<Self> {
        let inner = geoqm::Observable::with_hbar(matrix_from_rows(matrix)?, hbar).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (text, hbar = 1.0))]
    fn from_json(text: &str, hbar: f64) -> PyResult<Self> {
        Ok(Self { inner: io::observable_from_str(text, hbar).map_err(to_py)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn matrix(&self) -> Vec<Vec<Complex64>> {
        matrix_rows(self.inner.matrix())
    }

    fn expectation(&self, state: &PyPureState) -> PyResult<f64> {
        self.inner.expectation(&state.inner).map_err(to_py)
    }

    fn variance(&self, state: &PyPureState) -> PyResult<f64> {
        self.inner.variance(&state.inner).map_err(to_py)
    }

    /// `g_ab F^a F^b` at the state, from the Fubini-Study metric.
    fn geometric_variance(&self, state: &PyPureState) -> PyResult<f64> {
        statistics::geometric_variance(&self.inner, &ChartPoint::from_state(&state.inner)).map_err(to_py)
    }
}

#[pyclass(name = "EntanglementReport", module = "geoqm_py", frozen, get_all)]
struct PyEntanglementReport {
    delta: f64,
    gamma: f64,
    rho: f64,
    kappa: f64,
    lambda_abs: f64,
    maximal: bool,
    nearest: PyPureState,
    farthest: PyPureState,
}

/// Closed-form geodesic distance of a two-qubit state to the product states.
#[pyfunction]
fn entanglement_measure(state: &PyPureState) -> PyResult<PyEntanglementReport> {
    let r = entanglement::entanglement_measure(&state.inner).map_err(to_py)?;
    Ok(PyEntanglementReport {
        delta: r.delta,
        gamma: r.gamma,
        rho: r.rho,
        kappa: r.kappa,
        lambda_abs: r.lambda_abs,
        maximal: r.maximal,
        nearest: PyPureState { inner: r.nearest },
        farthest: PyPureState { inner: r.farthest },
    })
}

#[pyfunction]
#[pyo3(signature = (state, dim_a = 2, dim_b = 2))]
fn brute_force_delta(py: Python<'_>, state: &PyPureState, dim_a: usize, dim_b: usize) -> PyResult<f64> {
    let space = BipartiteSpace::new(dim_a, dim_b).map_err(to_py)?;
    let psi = state.inner.clone();
    py.detach(move || entanglement::brute_force_delta(&psi, &space)).map_err(to_py)
}

/// `(label, probability)` for each outcome of a spin-k/2 measurement along `axis`.
#[pyfunction]
fn spin_measure(state: &PyPureState, axis: (Complex64, Complex64)) -> PyResult<Vec<(f64, f64)>> {
    let axis = Spinor::new(axis.0, axis.1).map_err(to_py)?;
    let k = state.inner.dim() - 1;
    let family = spin::spin_eigenstates(&axis, k).map_err(to_py)?;
    let states: Vec<_> = family.iter().map(|e| e.state.clone()).collect();
    let probs = spin::measurement_probabilities(&state.inner, &states).map_err(to_py)?;
    Ok(family.iter().map(|e| e.label).zip(probs).collect())
}

#[pyfunction]
fn evolve_exact(h: &PyObservable, state: &PyPureState, t: f64) -> PyResult<PyPureState> {
    Ok(PyPureState { inner: dynamics::evolve_exact(&h.inner, &state.inner, t).map_err(to_py)? })
}

/// RK4 integration of the Hamiltonian flow of `⟨H⟩` (or `⟨H⟩²` with `squared`).
#[pyfunction]
#[pyo3(signature = (h, state, t, dt, squared = false))]
fn flow_state(py: Python<'_>, h: &PyObservable, state: &PyPureState, t: f64, dt: f64, squared: bool) -> PyResult<PyPureState> {
    let hf = if squared { HamiltonianFunction::Squared(h.inner.clone()) } else { HamiltonianFunction::Linear(h.inner.clone()) };
    let psi = state.inner.clone();
    let out = py.detach(move || dynamics::flow_state(&hf, &psi, t, dt)).map_err(to_py)?;
    Ok(PyPureState { inner: out })
}

/// `(ħ ds/dt, 2ΔH)` at the state.
#[pyfunction]
fn speed_check(h: &PyObservable, state: &PyPureState) -> PyResult<(f64, f64)> {
    let s = dynamics::speed_check(&h.inner, &state.inner).map_err(to_py)?;
    Ok((s.hbar * s.ds_dt, s.two_delta_h))
}

fn make_loop(points: Vec<PyRef<'_, PyPureState>>) -> PyResult<Loop> {
    Loop::new(points.iter().map(|p| p.inner.clone()).collect()).map_err(to_py)
}

#[pyfunction]
fn holonomy_phase(points: Vec<PyRef<'_, PyPureState>>) -> PyResult<f64> {
    Ok(phase::holonomy_phase(&make_loop(points)?))
}

#[pyfunction]
fn surface_phase(points: Vec<PyRef<'_, PyPureState>>, base: &PyPureState) -> PyResult<f64> {
    phase::surface_phase(&make_loop(points)?, &base.inner).map_err(to_py)
}

/// Ratio of the Poisson bracket to `⟨[F,G]⟩/iℏ`, measured on spin-½ in units of ħ.
#[pyfunction]
#[pyo3(signature = (hbar = 1.0))]
fn bracket_constant(hbar: f64) -> PyResult<f64> {
    statistics::calibrate_bracket_constant(hbar).map_err(to_py)
}

/// `(lhs, slack, sharp_slack)` of the Kähler uncertainty inequality.
#[pyfunction]
fn kahler_inequality(f: &PyObservable, g: &PyObservable, state: &PyPureState) -> PyResult<(f64, f64, f64)> {
    let t = statistics::kahler_inequality_terms(&f.inner, &g.inner, &ChartPoint::from_state(&state.inner)).map_err(to_py)?;
    Ok((t.lhs(), t.slack(), t.sharp_slack()))
}

#[pyfunction]
fn gibbs_density(h: &PyObservable, beta: f64) -> PyResult<Vec<Vec<Complex64>>> {
    Ok(matrix_rows(ensembles::gibbs_density(&h.inner, beta).map_err(to_py)?.matrix()))
}

/// Sampled maxent density matrix and its entrywise standard errors.
#[pyfunction]
fn maxent_density(
    py: Python<'_>,
    h: &PyObservable,
    beta: f64,
    samples: usize,
    seed: u64,
) -> PyResult<(Vec<Vec<Complex64>>, Vec<Vec<f64>>)> {
    let hh = h.inner.clone();
    let res = py.detach(move || ensembles::maxent_ensemble(&hh, beta, samples, seed)).map_err(to_py)?;
    let n = res.density.dim();
    let stderr = (0..n).map(|i| (0..n).map(|j| res.stderr[(i, j)]).collect()).collect();
    Ok((matrix_rows(res.density.matrix()), stderr))
}

/// Runs one acceptance criterion; returns `(passed, report)`.
#[pyfunction]
#[pyo3(signature = (id, seed = 7, strict = false))]
fn run_criterion(py: Python<'_>, id: usize, seed: u64, strict: bool) -> (bool, String) {
    let profile = if strict { ToleranceProfile::Strict } else { ToleranceProfile::Default };
    let cfg = SelftestConfig { seed, profile, hbar: 1.0 };
    let r = py.detach(move || selftest::run_criterion(id, &cfg));
    (r.passed(), r.to_string())
}

#[pymodule]
fn geoqm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPureState>()?;
    m.add_class::<PyObservable>()?;
    m.add_class::<PyEntanglementReport>()?;
    m.add_function(wrap_pyfunction!(entanglement_measure, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_delta, m)?)?;
    m.add_function(wrap_pyfunction!(spin_measure, m)?)?;
    m.add_function(wrap_pyfunction!(evolve_exact, m)?)?;
    m.add_function(wrap_pyfunction!(flow_state, m)?)?;
    m.add_function(wrap_pyfunction!(speed_check, m)?)?;
    m.add_function(wrap_pyfunction!(holonomy_phase, m)?)?;
    m.add_function(wrap_pyfunction!(surface_phase, m)?)?;
    m.add_function(wrap_pyfunction!(bracket_constant, m)?)?;
    m.add_function(wrap_pyfunction!(kahler_inequality, m)?)?;
    m.add_function(wrap_pyfunction!(gibbs_density, m)?)?;
    m.add_function(wrap_pyfunction!(maxent_density, m)?)?;
    m.add_function(wrap_pyfunction!(run_criterion, m)?)?;
    Ok(())
}
