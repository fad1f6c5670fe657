//! Neutral delay differential equations and the method-of-steps integrator.
//!
//! Systems have the form
//!
//! ```text
//!   d/dt [ x(t) − B·x(t−τ) ] = g(x(t), x(t−τ)),
//! ```
//!
//! with a constant n×n matrix B acting on the delayed state. The difference
//! transform y(t) = x(t) − B·x(t−τ) is C¹ even where x itself has derivative
//! kinks (these sit at the breakpoints t = kτ and decay geometrically when
//! ρ(B) < 1), so y is the variable that gets integrated:
//!
//!   y′(t) = g(y(t) + B·x(t−τ), x(t−τ)).
//!
//! On each interval [kτ, (k+1)τ] the delayed argument is known data, and y is
//! advanced by classical RK4 with step h chosen so that τ/h is an integer —
//! steps never straddle a breakpoint, and every delayed stage argument
//! t − τ + {0, h/2, h} lands on the stored h/2 grid of the previous interval.
//! The h/2 node internal to a step is filled by the two-point cubic Hermite
//! dense output of y (its O(h⁴) interpolation error matches the RK4 global
//! order; y′ is available exactly at the step ends).

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::history::{euclid, HistorySegment};

/// Right-hand side g(u, v) where u = x(t) and v = x(t−τ).
pub type RhsFn = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// A neutral delay differential equation with constant delay and constant B.
#[derive(Clone)]
pub struct NddeSystem {
    dim: usize,
    tau: f64,
    b: DMatrix<f64>,
    g: RhsFn,
    label: String,
}

impl std::fmt::Debug for NddeSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NddeSystem")
            .field("dim", &self.dim)
            .field("tau", &self.tau)
            .field("b", &self.b)
            .field("label", &self.label)
            .finish()
    }
}

impl NddeSystem {
    /// Builds a system; B must be dim×dim, τ positive, g maps ℝⁿ×ℝⁿ → ℝⁿ.
    ///
    /// g is trusted to be C¹ in both arguments (not machine-checkable); the
    /// integrator's order claims assume it.
    pub fn new(
        dim: usize,
        tau: f64,
        b: DMatrix<f64>,
        g: RhsFn,
        label: impl Into<String>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("system dimension must be at least 1"));
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::invalid(format!("delay tau must be positive and finite, got {tau}")));
        }
        if b.nrows() != dim || b.ncols() != dim {
            return Err(Error::invalid(format!(
                "B must be {dim}x{dim}, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("entry of B".into()));
        }
        Ok(NddeSystem { dim, tau, b, g, label: label.into() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn b_matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Evaluates g(u, v), checking the output length.
    pub fn eval_g(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        (self.g)(u, v)
    }

    /// Operator 2-norm of B (largest singular value).
    pub fn b_norm(&self) -> f64 {
        crate::certify::operator_norm(&self.b)
    }
}

/// Parameters of the two-dimensional transmission-line oscillator preset
/// (lossless line coupled to a nonlinear resistive termination).
///
/// B = [[0, q], [m, 0]],
/// g(u, v) = (p − b·u₁ + F₁(u,v), −c·u₂ + F₂(u,v)),
/// F_i(u, v) = −α_i·u_i / (1 + |v|²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BraytonMirankerParams {
    pub q: f64,
    pub m: f64,
    pub p: f64,
    pub b: f64,
    pub c: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub tau: f64,
}

impl BraytonMirankerParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v, lo, hi) in [
            ("q", self.q, 0.0, 1.0),
            ("m", self.m, 0.0, 1.0),
        ] {
            if !(v > lo && v < hi) {
                return Err(Error::invalid(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        for (name, v) in [
            ("b", self.b),
            ("c", self.c),
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("tau", self.tau),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.p.is_finite() {
            return Err(Error::invalid("p must be finite"));
        }
        Ok(())
    }
}

/// The transmission-line oscillator preset as an `NddeSystem`.
pub fn brayton_miranker(params: BraytonMirankerParams) -> Result<NddeSystem> {
    params.validate()?;
    let BraytonMirankerParams { q, m, p, b, c, alpha1, alpha2, tau } = params;
    let bmat = DMatrix::from_row_slice(2, 2, &[0.0, q, m, 0.0]);
    let g: RhsFn = Arc::new(move |u, v| {
        let damp = 1.0 / (1.0 + v[0] * v[0] + v[1] * v[1]);
        vec![
            p - b * u[0] - alpha1 * u[0] * damp,
            -c * u[1] - alpha2 * u[1] * damp,
        ]
    });
    NddeSystem::new(2, tau, bmat, g, "brayton_miranker")
}

/// Scalar affine preset d/dt[x − b·x(t−τ)] = −a·x + p.
pub fn linear_scalar(b: f64, a: f64, p: f64, tau: f64) -> Result<NddeSystem> {
    if !b.is_finite() || !a.is_finite() || !p.is_finite() {
        return Err(Error::invalid("linear_scalar parameters must be finite"));
    }
    let bmat = DMatrix::from_element(1, 1, b);
    let g: RhsFn = Arc::new(move |u, _v| vec![p - a * u[0]]);
    NddeSystem::new(1, tau, bmat, g, "linear_scalar")
}

/// A solution sampled on a uniform grid of spacing `delta`, including the
/// initial history window [−τ, 0].
///
/// Index i holds the state at time (i − hist_len)·delta; `hist_len` is the
/// index of t = 0. Breakpoints (derivative-jump locations t = kτ, k ≥ 0) sit
/// at indices hist_len + k·window where window = τ/delta.
#[derive(Debug, Clone)]
pub struct Trajectory {
    dim: usize,
    tau: f64,
    delta: f64,
    hist_len: usize,
    window: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    label: String,
}

impl Trajectory {
    pub(crate) fn from_parts(
        dim: usize,
        tau: f64,
        delta: f64,
        hist_len: usize,
        window: usize,
        states: Vec<f64>,
        label: String,
    ) -> Self {
        let len = states.len() / dim;
        let times = (0..len)
            .map(|i| (i as f64 - hist_len as f64) * delta)
            .collect();
        Trajectory { dim, tau, delta, hist_len, window, times, states, label }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Storage grid spacing.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Number of stored nodes.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of t = 0 (start of the evolution; earlier nodes are history).
    pub fn start_index(&self) -> usize {
        self.hist_len
    }

    /// Nodes per delay window (τ/delta).
    pub fn window(&self) -> usize {
        self.window
    }

    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// True if node i is a breakpoint t = kτ, k ≥ 0 (always false for
    /// delay-free trajectories, which have no window).
    pub fn is_breakpoint(&self, i: usize) -> bool {
        self.window != 0 && i >= self.hist_len && (i - self.hist_len) % self.window == 0
    }

    /// Euclidean norm of the state at node i.
    pub fn norm(&self, i: usize) -> f64 {
        euclid(self.state(i))
    }

    /// Index of the grid node nearest to time t (must land within 1e−6·delta
    /// of a node; the caller controls t, so silent snapping is not allowed).
    pub fn index_of_time(&self, t: f64) -> Result<usize> {
        let pos = t / self.delta + self.hist_len as f64;
        let i = pos.round();
        if i < 0.0 || i as usize >= self.len() {
            return Err(Error::OutOfRange(format!("time {t} outside the stored range")));
        }
        if (pos - i).abs() > 1e-6 {
            return Err(Error::OutOfRange(format!(
                "time {t} is not a storage grid node (spacing {})",
                self.delta
            )));
        }
        Ok(i as usize)
    }

    /// Extracts the segment x_t (θ ↦ x(t+θ), θ ∈ [−τ, 0]) ending at node i.
    pub fn segment_at(&self, i: usize) -> Result<HistorySegment> {
        if i < self.window || i >= self.len() {
            return Err(Error::OutOfRange(format!(
                "segment needs a full delay window before node {i}"
            )));
        }
        let lo = (i - self.window) * self.dim;
        let hi = (i + 1) * self.dim;
        HistorySegment::new(self.dim, self.tau, self.states[lo..hi].to_vec())
    }

    /// Segment x_t at time t (t must be a grid node at least τ after the
    /// stored start).
    pub fn segment_at_time(&self, t: f64) -> Result<HistorySegment> {
        self.segment_at(self.index_of_time(t)?)
    }
}

/// Integration options; `Default` gives the documented behavior.
#[derive(Debug, Clone, Copy)]
pub struct IntegrateOptions {
    /// Norm threshold beyond which the run is declared blown up.
    pub blowup_threshold: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions { blowup_threshold: 1e12 }
    }
}

/// Integrates the system over [0, T] from initial history φ with requested
/// step h, storing the solution (and the resampled history) at spacing h_eff/2.
///
/// h is rounded down to h_eff = τ/⌈τ/h⌉ so the delay is an exact multiple of
/// the step; requires 0 < h ≤ τ/4 and T > 0. The horizon is rounded up to a
/// whole number of steps. The initial history is resampled to the storage
/// grid by linear interpolation (part of the numerical method: the computed
/// solution is the exact flow of the resampled data up to O(h⁴)).
pub fn integrate(sys: &NddeSystem, phi: &HistorySegment, t_max: f64, h: f64) -> Result<Trajectory> {
    integrate_with(sys, phi, t_max, h, &IntegrateOptions::default())
}

/// `integrate` with explicit options.
pub fn integrate_with(
    sys: &NddeSystem,
    phi: &HistorySegment,
    t_max: f64,
    h: f64,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    if phi.dim() != sys.dim {
        return Err(Error::invalid(format!(
            "history dimension {} does not match system dimension {}",
            phi.dim(),
            sys.dim
        )));
    }
    if phi.tau() != sys.tau {
        return Err(Error::invalid(format!(
            "history window {} does not match system delay {}",
            phi.tau(),
            sys.tau
        )));
    }
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::invalid(format!("horizon T must be positive and finite, got {t_max}")));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::invalid(format!("step h must be positive and finite, got {h}")));
    }
    if h > sys.tau / 4.0 * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "step h = {h} exceeds tau/4 = {}; the method of steps needs at least 4 steps per delay",
            sys.tau / 4.0
        )));
    }

    let n_sub = (sys.tau / h - 1e-9).ceil() as usize; // steps per delay, >= 4
    let h_eff = sys.tau / n_sub as f64;
    let delta = 0.5 * h_eff;
    let window = 2 * n_sub; // storage nodes per delay
    let n_steps = ((t_max / h_eff - 1e-9).ceil() as usize).max(1);

    let dim = sys.dim;
    let hist = phi.resample(window)?;
    let mut states = Vec::with_capacity((window + 2 * n_steps + 1) * dim);
    states.extend_from_slice(hist.raw_values());

    // x-state index helpers into the flat storage.
    let state_of = |states: &Vec<f64>, i: usize| -> Vec<f64> {
        states[i * dim..(i + 1) * dim].to_vec()
    };

    let b = &sys.b;
    let matvec = |x: &[f64]| -> Vec<f64> {
        (0..dim)
            .map(|r| (0..dim).map(|c| b[(r, c)] * x[c]).sum())
            .collect()
    };

    // y at the current full step node.
    let x0 = state_of(&states, window);
    let xd0 = state_of(&states, 0);
    let bx = matvec(&xd0);
    let mut y: Vec<f64> = x0.iter().zip(&bx).map(|(x, b)| x - b).collect();

    let check = |x: &[f64], t: f64| -> Result<()> {
        let n = euclid(x);
        if !n.is_finite() {
            return Err(Error::NonFinite(format!("state at t = {t}")));
        }
        if n > opts.blowup_threshold {
            return Err(Error::Blowup { t, norm: n });
        }
        Ok(())
    };

    for k in 0..n_steps {
        let t_k = k as f64 * h_eff;
        // Delayed values for the three stage offsets: all stored nodes.
        let xd_a = state_of(&states, 2 * k); // x(t_k − τ)
        let xd_m = state_of(&states, 2 * k + 1); // x(t_k − τ + h/2)
        let xd_b = state_of(&states, 2 * k + 2); // x(t_k − τ + h)
        let bxa = matvec(&xd_a);
        let bxm = matvec(&xd_m);
        let bxb = matvec(&xd_b);

        let x_now: Vec<f64> = y.iter().zip(&bxa).map(|(y, b)| y + b).collect();
        let k1 = sys.eval_g(&x_now, &xd_a);
        let stage = |base: &[f64], kv: &[f64], w: f64, bx: &[f64]| -> Vec<f64> {
            base.iter()
                .zip(kv)
                .zip(bx)
                .map(|((y, k), b)| y + w * k + b)
                .collect()
        };
        let k2 = sys.eval_g(&stage(&y, &k1, 0.5 * h_eff, &bxm), &xd_m);
        let k3 = sys.eval_g(&stage(&y, &k2, 0.5 * h_eff, &bxm), &xd_m);
        let k4 = sys.eval_g(&stage(&y, &k3, h_eff, &bxb), &xd_b);

        let y_next: Vec<f64> = (0..dim)
            .map(|c| y[c] + h_eff / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]))
            .collect();
        let x_next: Vec<f64> = y_next.iter().zip(&bxb).map(|(y, b)| y + b).collect();

        // Cubic Hermite dense output for the h/2 node: derivative of y at both
        // step ends is just g evaluated there.
        let d0 = &k1;
        let d1 = sys.eval_g(&x_next, &xd_b);
        let y_mid: Vec<f64> = (0..dim)
            .map(|c| 0.5 * (y[c] + y_next[c]) + h_eff / 8.0 * (d0[c] - d1[c]))
            .collect();
        let x_mid: Vec<f64> = y_mid.iter().zip(&bxm).map(|(y, b)| y + b).collect();

        check(&x_mid, t_k + 0.5 * h_eff)?;
        check(&x_next, t_k + h_eff)?;
        states.extend_from_slice(&x_mid);
        states.extend_from_slice(&x_next);
        y = y_next;
    }

    Ok(Trajectory::from_parts(
        dim,
        sys.tau,
        delta,
        window,
        window,
        states,
        sys.label.clone(),
    ))
}

/// The solution semigroup S(t): advances φ by time t and returns the segment
/// x_t. t = 0 returns φ resampled to the integrator grid; otherwise t is
/// rounded to the nearest storage node (documented snapping ≤ h/4).
pub fn semigroup(sys: &NddeSystem, phi: &HistorySegment, t: f64, h: f64) -> Result<HistorySegment> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("semigroup time must be >= 0, got {t}")));
    }
    let n_sub = (sys.tau / h - 1e-9).ceil() as usize;
    let window = 2 * n_sub;
    if t == 0.0 {
        if phi.dim() != sys.dim {
            return Err(Error::invalid("history dimension does not match system"));
        }
        return phi.resample(window);
    }
    let traj = integrate(sys, phi, t, h)?;
    let idx = ((t / traj.delta()).round() as usize + traj.start_index()).min(traj.len() - 1);
    traj.segment_at(idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Exact method-of-steps solution of the reference scalar system
    /// B = [0.5], τ = 1, g(u, v) = −u, φ ≡ 1 on the first two intervals:
    /// x = e^{−t} on [0, 1]; x = e^{−t}·(1 + e/2·(1 − t)) on [1, 2].
    fn scalar_exact(t: f64) -> f64 {
        assert!((-1.0..=2.0).contains(&t));
        if t <= 0.0 {
            1.0
        } else if t <= 1.0 {
            (-t).exp()
        } else {
            (-t).exp() * (1.0 + 0.5 * 1f64.exp() * (1.0 - t))
        }
    }

    fn scalar_system() -> NddeSystem {
        linear_scalar(0.5, 1.0, 0.0, 1.0).unwrap()
    }

    #[test]
    fn matches_method_of_steps_on_first_interval() {
        let sys = scalar_system();
        let phi = HistorySegment::constant(1.0, 100, &[1.0]).unwrap();
        let traj = integrate(&sys, &phi, 1.0, 0.01).unwrap();
        let i = traj.index_of_time(0.5).unwrap();
        assert!((traj.state(i)[0] - 0.606531).abs() <= 1e-6);
        assert!((traj.state(i)[0] - scalar_exact(0.5)).abs() <= 1e-8);
    }

    #[test]
    fn matches_method_of_steps_across_breakpoint() {
        let sys = scalar_system();
        let phi = HistorySegment::constant(1.0, 100, &[1.0]).unwrap();
        let traj = integrate(&sys, &phi, 2.0, 0.01).unwrap();
        let mut worst = 0.0f64;
        for i in traj.start_index()..traj.len() {
            let err = (traj.state(i)[0] - scalar_exact(traj.time(i))).abs();
            worst = worst.max(err);
        }
        assert!(worst <= 1e-8, "max error {worst}");
    }

    #[test]
    fn trajectory_has_breakpoints_at_delay_multiples() {
        let sys = scalar_system();
        let phi = HistorySegment::constant(1.0, 8, &[1.0]).unwrap();
        let traj = integrate(&sys, &phi, 2.0, 0.25).unwrap();
        let marks: Vec<f64> = (0..traj.len())
            .filter(|&i| traj.is_breakpoint(i))
            .map(|i| traj.time(i))
            .collect();
        assert_eq!(marks.len(), 3);
        for (k, &t) in marks.iter().enumerate() {
            assert_relative_eq!(t, k as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn semigroup_at_zero_reproduces_history() {
        let sys = scalar_system();
        let phi = HistorySegment::from_function(1, 1.0, 16, |t| vec![t * t]).unwrap();
        let seg = semigroup(&sys, &phi, 0.0, 0.125).unwrap();
        // Same grid (N = 8 intervals for h = 0.125 means window 8... resample to window)
        for (j, &theta) in seg.nodes().iter().enumerate() {
            assert_relative_eq!(seg.value(j)[0], phi.eval(theta).unwrap()[0], epsilon = 1e-12);
        }
    }

    #[test]
    fn semigroup_advances_by_one_delay() {
        let sys = scalar_system();
        let phi = HistorySegment::constant(1.0, 64, &[1.0]).unwrap();
        let seg = semigroup(&sys, &phi, 1.0, 0.01).unwrap();
        for (j, &theta) in seg.nodes().iter().enumerate() {
            assert!((seg.value(j)[0] - scalar_exact(1.0 + theta)).abs() <= 1e-8, "node {j}");
        }
    }

    #[test]
    fn difference_transform_is_smooth_across_breakpoints() {
        // Finite-difference second derivatives of y = x − B·x(·−τ) stay at the
        // interior scale across t = kτ, while those of x blow up like 1/Δ.
        let sys = scalar_system();
        let phi = HistorySegment::constant(1.0, 50, &[1.0]).unwrap();
        let traj = integrate(&sys, &phi, 3.0, 0.02).unwrap();
        let w = traj.window();
        let y: Vec<f64> = (w..traj.len())
            .map(|i| traj.state(i)[0] - 0.5 * traj.state(i - w)[0])
            .collect();
        let x: Vec<f64> = (w..traj.len()).map(|i| traj.state(i)[0]).collect();
        let fd2 = |v: &[f64], i: usize| (v[i - 1] - 2.0 * v[i] + v[i + 1]) / traj.delta().powi(2);
        let bp: Vec<usize> = (w..traj.len() - 1)
            .filter(|&i| traj.is_breakpoint(i) && traj.time(i) > 0.0)
            .map(|i| i - w)
            .collect();
        assert!(!bp.is_empty());
        let interior_max = (1..y.len() - 1)
            .filter(|i| bp.iter().all(|&b| i.abs_diff(b) > 2))
            .map(|i| fd2(&y, i).abs())
            .fold(0.0f64, f64::max);
        for &b in &bp {
            let on_y = fd2(&y, b).abs();
            let on_x = fd2(&x, b).abs();
            assert!(on_y <= 10.0 * interior_max + 1e-6, "y kinked at breakpoint: {on_y} vs {interior_max}");
            assert!(on_x > 10.0 * on_y.max(interior_max), "x unexpectedly smooth: {on_x}");
        }
    }

    #[test]
    fn rejects_coarse_step_and_bad_history() {
        let sys = scalar_system();
        let phi = HistorySegment::constant(1.0, 8, &[1.0]).unwrap();
        assert!(integrate(&sys, &phi, 1.0, 0.3).is_err()); // h > tau/4
        let phi2 = HistorySegment::constant(2.0, 8, &[1.0]).unwrap(); // wrong window
        assert!(integrate(&sys, &phi2, 1.0, 0.1).is_err());
        let phi3 = HistorySegment::constant(1.0, 8, &[1.0, 0.0]).unwrap(); // wrong dim
        assert!(integrate(&sys, &phi3, 1.0, 0.1).is_err());
        assert!(integrate(&sys, &phi, 0.0, 0.1).is_err()); // empty horizon
    }

    #[test]
    fn blowup_is_detected_with_time_stamp() {
        // ẋ = x² from x₀ = 2 escapes at t = 0.5; B = 0 makes this a plain ODE.
        let g: RhsFn = Arc::new(|u, _| vec![u[0] * u[0]]);
        let sys = NddeSystem::new(1, 1.0, DMatrix::zeros(1, 1), g, "riccati").unwrap();
        let phi = HistorySegment::constant(1.0, 8, &[2.0]).unwrap();
        match integrate(&sys, &phi, 1.0, 0.001) {
            Err(Error::Blowup { t, .. }) => assert!((0.4..0.6).contains(&t), "blow-up at t = {t}"),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn preset_validation_catches_bad_parameters() {
        let ok = BraytonMirankerParams {
            q: 0.1,
            m: 0.1,
            p: 0.2,
            b: 1.0,
            c: 1.0,
            alpha1: 1.0,
            alpha2: 1.0,
            tau: 2.0,
        };
        assert!(brayton_miranker(ok).is_ok());
        assert!(brayton_miranker(BraytonMirankerParams { q: 1.0, ..ok }).is_err());
        assert!(brayton_miranker(BraytonMirankerParams { m: 0.0, ..ok }).is_err());
        assert!(brayton_miranker(BraytonMirankerParams { b: -1.0, ..ok }).is_err());
        assert!(brayton_miranker(BraytonMirankerParams { tau: 0.0, ..ok }).is_err());
    }

    #[test]
    fn quiescent_preset_stays_at_zero() {
        let sys = brayton_miranker(BraytonMirankerParams {
            q: 0.1,
            m: 0.1,
            p: 0.0,
            b: 1.0,
            c: 1.0,
            alpha1: 1.0,
            alpha2: 1.0,
            tau: 2.0,
        })
        .unwrap();
        let phi = HistorySegment::constant(2.0, 16, &[0.0, 0.0]).unwrap();
        let traj = integrate(&sys, &phi, 10.0, 0.1).unwrap();
        for i in 0..traj.len() {
            assert_eq!(traj.state(i), &[0.0, 0.0]);
        }
    }
}
