//! Python bindings: a thin, GIL-friendly surface over the core library.
//!
//! The module mirrors the library's main operations — neutral-delay
//! integration, closed-form dissipativity certificates, memory-kernel
//! checks, Cesàro averaging, and the transmission-line reduction — with
//! plain Python scalars, lists, and callables at the boundary.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ergodyn_core::certify;
use ergodyn_core::difference;
use ergodyn_core::history::HistorySegment;
use ergodyn_core::measure;
use ergodyn_core::memory;
use ergodyn_core::ndde;
use ergodyn_core::telegraph;

/// Precondition violations become `ValueError`; numerical failures
/// (blow-up, non-finite data) become `RuntimeError`.
fn err(e: ergodyn_core::Error) -> PyErr {
    use ergodyn_core::Error::*;
    match e {
        Invalid(_) | OutOfRange(_) | Config(_) => PyValueError::new_err(e.to_string()),
        NonFinite(_) | Blowup { .. } | Io(_) => PyRuntimeError::new_err(e.to_string()),
    }
}

/// A neutral delay differential equation d/dt[x(t) − B·x(t−τ)] = g(x, x(t−τ)).
#[pyclass(name = "System")]
#[derive(Clone)]
struct PySystem {
    inner: ndde::NddeSystem,
}

#[pymethods]
impl PySystem {
    /// Scalar preset d/dt[x − b·x(t−τ)] = −a·x + p.
    #[staticmethod]
    fn linear_scalar(b: f64, a: f64, p: f64, tau: f64) -> PyResult<Self> {
        Ok(PySystem { inner: ndde::linear_scalar(b, a, p, tau).map_err(err)? })
    }

    /// Two-component transmission-line oscillator preset.
    #[staticmethod]
    #[allow(clippy::too_many_arguments)]
    fn brayton_miranker(
        q: f64,
        m: f64,
        p: f64,
        b: f64,
        c: f64,
        alpha1: f64,
        alpha2: f64,
        tau: f64,
    ) -> PyResult<Self> {
        let params =
            ndde::BraytonMirankerParams { q, m, p, b, c, alpha1, alpha2, tau };
        Ok(PySystem { inner: ndde::brayton_miranker(params).map_err(err)? })
    }

    /// Lossless line terminated by a dynamic (rate-form) boundary, reduced
    /// to a two-component neutral equation in the wave variables.
    #[staticmethod]
    fn telegraph_dynamic(l: f64, c: f64, r0: f64, e: f64) -> PyResult<Self> {
        let line =
            telegraph::TelegraphLine::new(l, c, r0, e, telegraph::BoundaryKind::Dynamic)
                .map_err(err)?;
        Ok(PySystem { inner: telegraph::boundary_to_ndde(&line).map_err(err)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau()
    }

    #[getter]
    fn b_norm(&self) -> f64 {
        self.inner.b_norm()
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label().to_string()
    }

    fn __repr__(&self) -> String {
        format!(
            "System(label='{}', dim={}, tau={})",
            self.inner.label(),
            self.inner.dim(),
            self.inner.tau()
        )
    }
}

/// An initial history segment on [−τ, 0] (uniform nodes, linear in between).
#[pyclass(name = "History")]
#[derive(Clone)]
struct PyHistory {
    inner: HistorySegment,
}

#[pymethods]
impl PyHistory {
    /// Constant history with the given node count.
    #[staticmethod]
    fn constant(tau: f64, intervals: usize, value: Vec<f64>) -> PyResult<Self> {
        Ok(PyHistory { inner: HistorySegment::constant(tau, intervals, &value).map_err(err)? })
    }

    /// History from sample rows: `values[j]` is the state at
    /// θ = −τ + j·τ/(len−1).
    #[staticmethod]
    fn samples(tau: f64, values: Vec<Vec<f64>>) -> PyResult<Self> {
        let dim = values.first().map(Vec::len).unwrap_or(0);
        if dim == 0 || values.len() < 2 {
            return Err(PyValueError::new_err(
                "need at least two sample rows with at least one component",
            ));
        }
        if values.iter().any(|row| row.len() != dim) {
            return Err(PyValueError::new_err("sample rows must have equal length"));
        }
        Ok(PyHistory {
            inner: HistorySegment::new(dim, tau, values.concat()).map_err(err)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau()
    }

    #[getter]
    fn intervals(&self) -> usize {
        self.inner.intervals()
    }

    /// Sup over nodes of the pointwise Euclidean norm.
    fn sup_norm(&self) -> f64 {
        self.inner.sup_norm()
    }

    /// Node values as rows from θ = −τ to θ = 0.
    fn values(&self) -> Vec<Vec<f64>> {
        (0..=self.inner.intervals()).map(|j| self.inner.value(j).to_vec()).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "History(dim={}, tau={}, intervals={})",
            self.inner.dim(),
            self.inner.tau(),
            self.inner.intervals()
        )
    }
}

/// A stored solution on a uniform grid (history nodes included).
#[pyclass(name = "Trajectory")]
#[derive(Clone)]
struct PyTrajectory {
    inner: ndde::Trajectory,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau()
    }

    #[getter]
    fn final_time(&self) -> f64 {
        self.inner.final_time()
    }

    /// Grid times (negative entries are the stored history).
    fn times(&self) -> Vec<f64> {
        self.inner.times().to_vec()
    }

    /// Grid states, one row per time.
    fn states(&self) -> Vec<Vec<f64>> {
        (0..self.inner.len()).map(|i| self.inner.state(i).to_vec()).collect()
    }

    /// Euclidean norm at each grid point.
    fn norms(&self) -> Vec<f64> {
        (0..self.inner.len()).map(|i| self.inner.norm(i)).collect()
    }

    /// The history window ending at time t (snapped to the grid).
    fn segment_at_time(&self, t: f64) -> PyResult<PyHistory> {
        Ok(PyHistory { inner: self.inner.segment_at_time(t).map_err(err)? })
    }

    fn __repr__(&self) -> String {
        format!(
            "Trajectory(dim={}, tau={}, nodes={}, final_time={})",
            self.inner.dim(),
            self.inner.tau(),
            self.inner.len(),
            self.inner.final_time()
        )
    }
}

/// Integrates the system from the history to `t_max` with step `h`.
#[pyfunction]
fn integrate(sys: &PySystem, phi: &PyHistory, t_max: f64, h: f64) -> PyResult<PyTrajectory> {
    Ok(PyTrajectory { inner: ndde::integrate(&sys.inner, &phi.inner, t_max, h).map_err(err)? })
}

/// Advances the history by time `t`, returning the new history window.
#[pyfunction]
fn semigroup(sys: &PySystem, phi: &PyHistory, t: f64, h: f64) -> PyResult<PyHistory> {
    Ok(PyHistory { inner: ndde::semigroup(&sys.inner, &phi.inner, t, h).map_err(err)? })
}

/// Closed-form dissipativity certificate for one parameter tuple.
#[pyclass(name = "Certificate")]
struct PyCertificate {
    inner: certify::DissipativityCertificate,
}

#[pymethods]
impl PyCertificate {
    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    #[getter]
    fn b_norm(&self) -> f64 {
        self.inner.b_norm
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau
    }

    /// Interval-to-interval contraction constant 𝔠.
    #[getter]
    fn frak_c(&self) -> f64 {
        self.inner.frak_c
    }

    /// First-interval amplification constant 𝔠₀.
    #[getter]
    fn frak_c0(&self) -> f64 {
        self.inner.frak_c0
    }

    /// Per-interval additive radius r.
    #[getter]
    fn r(&self) -> f64 {
        self.inner.r
    }

    /// Absorbing radius (None when the certificate does not close).
    #[getter]
    fn r_abs(&self) -> Option<f64> {
        self.inner.r_abs
    }

    /// Critical delay (None outside the admissible window).
    #[getter]
    fn tau_star(&self) -> Option<f64> {
        self.inner.tau_star
    }

    #[getter]
    fn satisfied(&self) -> bool {
        self.inner.satisfied
    }

    /// Time after which every trajectory with |φ|_∞ ≤ `phi_sup` has entered
    /// the absorbing ball.
    fn t_absorb(&self, phi_sup: f64) -> PyResult<f64> {
        self.inner.t_absorb(phi_sup).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Certificate(frak_c={:.6}, r_abs={:?}, satisfied={})",
            self.inner.frak_c, self.inner.r_abs, self.inner.satisfied
        )
    }
}

/// Evaluates the certificate formulas at (α, β, γ, ‖B‖, τ).
#[pyfunction]
fn certificate(alpha: f64, beta: f64, gamma: f64, b_norm: f64, tau: f64) -> PyResult<PyCertificate> {
    Ok(PyCertificate {
        inner: certify::contraction_constants(alpha, beta, gamma, b_norm, tau).map_err(err)?,
    })
}

/// Critical delay τ* beyond which the contraction constant drops below 1.
#[pyfunction]
fn critical_delay(alpha: f64, beta: f64, b_norm: f64) -> PyResult<f64> {
    certify::critical_delay(alpha, beta, b_norm).map_err(err)
}

/// Largest-modulus eigenvalue of a square matrix (row-major rows).
#[pyfunction]
fn spectral_radius(rows: Vec<Vec<f64>>) -> PyResult<f64> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square and nonempty"));
    }
    let m = nalgebra_matrix(&rows);
    Ok(certify::spectral_radius(&m))
}

/// Operator 2-norm of a square matrix (row-major rows).
#[pyfunction]
fn operator_norm(rows: Vec<Vec<f64>>) -> PyResult<f64> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square and nonempty"));
    }
    let m = nalgebra_matrix(&rows);
    Ok(certify::operator_norm(&m))
}

fn nalgebra_matrix(rows: &[Vec<f64>]) -> nalgebra::DMatrix<f64> {
    let n = rows.len();
    nalgebra::DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

/// A memory kernel: nonincreasing density μ with tail mass κ.
#[pyclass(name = "Kernel")]
#[derive(Clone)]
struct PyKernel {
    inner: memory::MemoryKernel,
}

#[pymethods]
impl PyKernel {
    /// μ(s) = μ₀·e^{−δs}.
    #[staticmethod]
    fn exponential(mu0: f64, delta: f64) -> PyResult<Self> {
        Ok(PyKernel { inner: memory::kernel_exponential(mu0, delta).map_err(err)? })
    }

    /// μ(s) = μ₀ on [0, t*], 0 beyond.
    #[staticmethod]
    fn piecewise(mu0: f64, t_star: f64) -> PyResult<Self> {
        Ok(PyKernel { inner: memory::kernel_piecewise(mu0, t_star).map_err(err)? })
    }

    /// Tabulated density on an increasing grid (linear in between).
    #[staticmethod]
    fn tabulated(grid: Vec<f64>, values: Vec<f64>) -> PyResult<Self> {
        Ok(PyKernel { inner: memory::kernel_tabulated(grid, values).map_err(err)? })
    }

    fn mu(&self, s: f64) -> f64 {
        self.inner.mu(s)
    }

    fn kappa(&self, s: f64) -> f64 {
        self.inner.kappa(s)
    }

    #[getter]
    fn kappa0(&self) -> f64 {
        self.inner.kappa0()
    }

    /// Canonical constant β with κ ≤ β·μ.
    #[getter]
    fn beta_nec(&self) -> f64 {
        self.inner.beta_nec()
    }

    /// Sweeps κ(s) ≤ β·μ(s); returns (holds, max_defect).
    fn check_nec(&self, beta: f64) -> PyResult<(bool, f64)> {
        let rep = memory::check_nec(&self.inner, beta).map_err(err)?;
        Ok((rep.holds, rep.max_defect))
    }

    /// Sweeps μ(s+σ) ≤ K·e^{−δσ}·μ(s) on the kernel grid; returns
    /// (holds, max_defect, witness or None).
    fn check_decay(&self, k: f64, delta: f64) -> PyResult<(bool, f64, Option<(f64, f64)>)> {
        let grid: Vec<f64> = self.inner.grid().to_vec();
        let rep = memory::check_decay_condition(&self.inner, k, delta, &grid).map_err(err)?;
        Ok((rep.holds, rep.max_defect, rep.witness))
    }

    fn __repr__(&self) -> String {
        format!("Kernel(kappa0={}, beta_nec={})", self.inner.kappa0(), self.inner.beta_nec())
    }
}

/// Integrates the mode-truncated memory system; `tensor` is the raw m³
/// coupling array (row-major), antisymmetrized internally so the quadratic
/// term conserves energy.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn integrate_memory(
    lambdas: Vec<f64>,
    nu: f64,
    forcing: Vec<f64>,
    tensor: Vec<f64>,
    kernel: &PyKernel,
    u0: Vec<f64>,
    t_max: f64,
    h: f64,
) -> PyResult<PyTrajectory> {
    let m = lambdas.len();
    let tensor = if tensor.is_empty() {
        vec![0.0; m * m * m]
    } else {
        memory::GalerkinMemorySystem::antisymmetrize(m, &tensor).map_err(err)?
    };
    let sys = memory::GalerkinMemorySystem::new(
        lambdas,
        nu,
        forcing,
        tensor,
        kernel.inner.clone(),
        "python galerkin",
    )
    .map_err(err)?;
    Ok(PyTrajectory { inner: memory::integrate_memory(&sys, &u0, t_max, h).map_err(err)? })
}

/// Energy diagnostics of a memory run: a dict of equal-length columns
/// (times, u_sq, grad_sq, eta_sq, gamma1, t_eta_sq, tail).
#[pyfunction]
fn memory_diagnostics(
    py: Python<'_>,
    traj: &PyTrajectory,
    kernel: &PyKernel,
    lambdas: Vec<f64>,
) -> PyResult<PyObject> {
    let d = memory::memory_diagnostics(&traj.inner, &kernel.inner, &lambdas).map_err(err)?;
    let dict = pyo3::types::PyDict::new_bound(py);
    dict.set_item("times", d.times)?;
    dict.set_item("u_sq", d.u_sq)?;
    dict.set_item("grad_sq", d.grad_sq)?;
    dict.set_item("eta_sq", d.eta_sq)?;
    dict.set_item("gamma1", d.gamma1)?;
    dict.set_item("t_eta_sq", d.t_eta_sq)?;
    dict.set_item("tail", d.tail)?;
    Ok(dict.unbind().into_any())
}

/// An observable φ(x_t) for time averaging.
#[pyclass(name = "Observable")]
#[derive(Clone)]
struct PyObservable {
    inner: measure::Observable,
}

#[pymethods]
impl PyObservable {
    /// x_i(0) — the current value of component i.
    #[staticmethod]
    fn component(i: usize) -> Self {
        PyObservable { inner: measure::Observable::component(i) }
    }

    /// x_i(0)².
    #[staticmethod]
    fn component_sq(i: usize) -> Self {
        PyObservable { inner: measure::Observable::component_sq(i) }
    }

    /// x_i(−τ) — the delayed value of component i.
    #[staticmethod]
    fn delayed_component(i: usize) -> Self {
        PyObservable { inner: measure::Observable::delayed_component(i) }
    }

    /// sup over the window of the pointwise Euclidean norm.
    #[staticmethod]
    fn sup_norm() -> Self {
        PyObservable { inner: measure::Observable::sup_norm() }
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label().to_string()
    }

    fn __repr__(&self) -> String {
        format!("Observable('{}')", self.inner.label())
    }
}

/// Trapezoid time average of the observable past the burn-in.
#[pyfunction]
fn time_average(traj: &PyTrajectory, obs: &PyObservable, burn_in: f64) -> PyResult<f64> {
    measure::time_average(&traj.inner, &obs.inner, burn_in).map_err(err)
}

/// Running Cesàro averages A_T at every grid point, as (t, A_t) pairs.
#[pyfunction]
fn running_average(traj: &PyTrajectory, obs: &PyObservable) -> PyResult<Vec<(f64, f64)>> {
    measure::running_average(&traj.inner, &obs.inner).map_err(err)
}

/// Cauchy test over the last decade of a running-average series; returns
/// (value, spread, converged).
#[pyfunction]
fn convergence(series: Vec<(f64, f64)>, tol: f64) -> PyResult<(f64, f64, bool)> {
    let rep = measure::convergence_diagnostic(&series, tol).map_err(err)?;
    Ok((rep.value, rep.spread, rep.converged))
}

/// Builds the empirical measure of one trajectory and reports how far it is
/// from invariance at t*: returns (max_defect, {label: defect}).
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn measure_invariance(
    py: Python<'_>,
    sys: &PySystem,
    phi: &PyHistory,
    t_max: f64,
    h: f64,
    burn_in: f64,
    stride: f64,
    t_star: f64,
    observables: Vec<PyObservable>,
) -> PyResult<(f64, PyObject)> {
    let mu = measure::empirical_measure(&sys.inner, &phi.inner, t_max, h, burn_in, stride)
        .map_err(err)?;
    let suite: Vec<measure::Observable> = observables.into_iter().map(|o| o.inner).collect();
    let rep = measure::invariance_defect(&mu, &sys.inner, t_star, h, &suite).map_err(err)?;
    let dict = pyo3::types::PyDict::new_bound(py);
    for (label, defect) in &rep.defects {
        dict.set_item(label, *defect)?;
    }
    Ok((rep.max_defect, dict.unbind().into_any()))
}

/// A lossless transmission line with a resistive source termination.
#[pyclass(name = "TelegraphLine")]
#[derive(Clone)]
struct PyTelegraphLine {
    inner: telegraph::TelegraphLine,
}

#[pymethods]
impl PyTelegraphLine {
    /// `boundary` is "static" (voltage level source) or "dynamic" (rate
    /// source entering through the derivative).
    #[new]
    fn new(l: f64, c: f64, r0: f64, e: f64, boundary: &str) -> PyResult<Self> {
        let kind = match boundary {
            "static" => telegraph::BoundaryKind::Static,
            "dynamic" => telegraph::BoundaryKind::Dynamic,
            other => {
                return Err(PyValueError::new_err(format!(
                    "boundary must be 'static' or 'dynamic', got '{other}'"
                )))
            }
        };
        Ok(PyTelegraphLine {
            inner: telegraph::TelegraphLine::new(l, c, r0, e, kind).map_err(err)?,
        })
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau()
    }

    #[getter]
    fn wave_speed(&self) -> f64 {
        self.inner.wave_speed()
    }

    #[getter]
    fn admittance(&self) -> f64 {
        self.inner.admittance()
    }

    #[getter]
    fn reflection_ratio(&self) -> f64 {
        self.inner.reflection_ratio()
    }
}

/// Splits initial (V₀, I₀) profiles (Python callables on [0, 1]) into the
/// progressive/reflected wave histories.
#[pyfunction]
fn telegraph_decompose(
    v0: Bound<'_, PyAny>,
    i0: Bound<'_, PyAny>,
    line: &PyTelegraphLine,
    n: usize,
) -> PyResult<(PyHistory, PyHistory)> {
    let sample = |f: &Bound<'_, PyAny>, x: f64| -> f64 {
        f.call1((x,)).and_then(|r| r.extract::<f64>()).unwrap_or(f64::NAN)
    };
    let (phi, psi) =
        telegraph::decompose(|x| sample(&v0, x), |x| sample(&i0, x), &line.inner, n)
            .map_err(err)?;
    Ok((PyHistory { inner: phi }, PyHistory { inner: psi }))
}

/// Evolves the static-boundary wave recursion for `k_max` delay intervals.
#[pyfunction]
fn telegraph_solve(
    line: &PyTelegraphLine,
    phi: &PyHistory,
    psi_tilde: &PyHistory,
    k_max: usize,
) -> PyResult<PyTrajectory> {
    let joint = telegraph::join_waves(&phi.inner, &psi_tilde.inner).map_err(err)?;
    let sys = telegraph::boundary_to_difference(&line.inner).map_err(err)?;
    Ok(PyTrajectory { inner: difference::solve_difference(&sys, &joint, k_max).map_err(err)? })
}

/// Field values (V, I) at position x and time t from an evolved wave pair.
#[pyfunction]
fn telegraph_reconstruct(
    traj: &PyTrajectory,
    line: &PyTelegraphLine,
    x: f64,
    t: f64,
) -> PyResult<(f64, f64)> {
    let (phi, psi) = telegraph::split_waves(&traj.inner).map_err(err)?;
    telegraph::reconstruct(&phi, &psi, &line.inner, x, t).map_err(err)
}

/// Solves the static-boundary line from (V₀, I₀) callables and returns the
/// worst boundary/characteristic residual (round-off for compatible data;
/// the initial jump magnitude otherwise).
#[pyfunction]
fn telegraph_cross_validate(
    v0: Bound<'_, PyAny>,
    i0: Bound<'_, PyAny>,
    line: &PyTelegraphLine,
    t_max: f64,
    h: f64,
) -> PyResult<f64> {
    let sample = |f: &Bound<'_, PyAny>, x: f64| -> f64 {
        f.call1((x,)).and_then(|r| r.extract::<f64>()).unwrap_or(f64::NAN)
    };
    telegraph::cross_validate(|x| sample(&v0, x), |x| sample(&i0, x), &line.inner, t_max, h)
        .map_err(err)
}

#[pymodule]
fn ergodyn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystem>()?;
    m.add_class::<PyHistory>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PyCertificate>()?;
    m.add_class::<PyKernel>()?;
    m.add_class::<PyObservable>()?;
    m.add_class::<PyTelegraphLine>()?;
    m.add_function(wrap_pyfunction!(integrate, m)?)?;
    m.add_function(wrap_pyfunction!(semigroup, m)?)?;
    m.add_function(wrap_pyfunction!(certificate, m)?)?;
    m.add_function(wrap_pyfunction!(critical_delay, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_radius, m)?)?;
    m.add_function(wrap_pyfunction!(operator_norm, m)?)?;
    m.add_function(wrap_pyfunction!(integrate_memory, m)?)?;
    m.add_function(wrap_pyfunction!(memory_diagnostics, m)?)?;
    m.add_function(wrap_pyfunction!(time_average, m)?)?;
    m.add_function(wrap_pyfunction!(running_average, m)?)?;
    m.add_function(wrap_pyfunction!(convergence, m)?)?;
    m.add_function(wrap_pyfunction!(measure_invariance, m)?)?;
    m.add_function(wrap_pyfunction!(telegraph_decompose, m)?)?;
    m.add_function(wrap_pyfunction!(telegraph_solve, m)?)?;
    m.add_function(wrap_pyfunction!(telegraph_reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(telegraph_cross_validate, m)?)?;
    Ok(())
}
