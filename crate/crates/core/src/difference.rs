//! Continuous-time difference equations x(t) = B·x(t−τ) + f.
//!
//! These are the degenerate-at-the-top relatives of the neutral equations:
//! no derivative at all, just the delay recursion. Solutions are obtained by
//! exact bitwise recursion on the history grid, discontinuities at the
//! breakpoints kτ propagate as Bᵏ-images of the initial compatibility defect,
//! and on the compatible subspace (null space of φ ↦ φ(0) − Bφ(−τ)) the
//! homogeneous semigroup decays at the rate ln ρ(B)/τ.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::history::{euclid, HistorySegment};
use crate::ndde::Trajectory;

/// Difference system x(t) = B·x(t−τ) + f with constant B and f.
#[derive(Debug, Clone)]
pub struct DifferenceSystem {
    dim: usize,
    tau: f64,
    b: DMatrix<f64>,
    f: Vec<f64>,
    label: String,
}

impl DifferenceSystem {
    pub fn new(tau: f64, b: DMatrix<f64>, f: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        let dim = f.len();
        if dim == 0 {
            return Err(Error::invalid("difference system needs dimension at least 1"));
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
        if b.iter().any(|v| !v.is_finite()) || f.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("entry of B or f".into()));
        }
        Ok(DifferenceSystem { dim, tau, b, f, label: label.into() })
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

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// One application of the recursion map x ↦ B·x + f (fixed evaluation
    /// order; tests rely on recomputing this bitwise).
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|r| {
                let mut acc = 0.0;
                for c in 0..self.dim {
                    acc += self.b[(r, c)] * x[c];
                }
                acc + self.f[r]
            })
            .collect()
    }
}

/// Solves the difference equation by exact recursion on φ's grid, shifted
/// through `k_max` delay intervals. No integration error: the output is
/// bitwise-deterministic. Stored values at breakpoints are the right limits
/// x(kτ⁺); left limits obey the same recursion seeded with φ(0).
pub fn solve_difference(
    sys: &DifferenceSystem,
    phi: &HistorySegment,
    k_max: usize,
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
    if k_max < 1 {
        return Err(Error::invalid("k_max must be at least 1"));
    }
    let n = phi.intervals();
    let dim = sys.dim;
    let delta = phi.spacing();
    let total = n * (k_max + 1) + 1; // nodes from −τ to k_max·τ
    let mut states = Vec::with_capacity(total * dim);
    // History nodes θ ∈ [−τ, −Δ]; the node at t = 0 is the recursion value.
    states.extend_from_slice(&phi.raw_values()[..n * dim]);
    for i in n..total {
        let prev = states[(i - n) * dim..(i - n + 1) * dim].to_vec();
        let next = sys.apply(&prev);
        states.extend_from_slice(&next);
    }
    Ok(Trajectory::from_parts(dim, sys.tau, delta, n, n, states, sys.label.clone()))
}

/// |B·φ(−τ) + f − φ(0)|: the jump the solution makes at t = 0. Zero iff the
/// solution is continuous there (and hence at every breakpoint).
pub fn compatibility_defect(sys: &DifferenceSystem, phi: &HistorySegment) -> Result<f64> {
    if phi.dim() != sys.dim || phi.tau() != sys.tau {
        return Err(Error::invalid("history does not match system dimension or delay"));
    }
    let jumped = sys.apply(phi.value(0));
    let diff: Vec<f64> = jumped
        .iter()
        .zip(phi.value(phi.intervals()))
        .map(|(a, b)| a - b)
        .collect();
    Ok(euclid(&diff))
}

/// Removes the incompatibility of φ by a linear ramp correction:
/// φ̃(θ) = φ(θ) − w(θ)·(φ(0) − B·φ(−τ)) with w(−τ) = 0, w(0) = 1.
///
/// Leaves φ(−τ) untouched and lands φ̃ in the compatible subspace
/// (φ̃(0) = B·φ̃(−τ) up to round-off).
pub fn project_to_kernel(phi: &HistorySegment, b: &DMatrix<f64>) -> Result<HistorySegment> {
    let dim = phi.dim();
    if b.nrows() != dim || b.ncols() != dim {
        return Err(Error::invalid("projection matrix must match the segment dimension"));
    }
    let n = phi.intervals();
    let phi0 = phi.value(n);
    let phim = phi.value(0);
    let defect: Vec<f64> = (0..dim)
        .map(|r| {
            let mut acc = 0.0;
            for c in 0..dim {
                acc += b[(r, c)] * phim[c];
            }
            phi0[r] - acc
        })
        .collect();
    let mut values = Vec::with_capacity((n + 1) * dim);
    for j in 0..=n {
        let w = j as f64 / n as f64;
        for c in 0..dim {
            values.push(phi.value(j)[c] - w * defect[c]);
        }
    }
    HistorySegment::new(dim, phi.tau(), values)
}

/// Empirical decay exponent of the homogeneous difference semigroup:
/// least-squares slope of log(per-interval sup norm) against the interval
/// index, divided by τ. Returns −∞ if the solution is exactly zero on some
/// interval. The estimate is contracted to lie at or below
/// ln ρ(B)/τ + tolerance for compatible data.
pub fn measure_decay_rate(
    sys: &DifferenceSystem,
    phi: &HistorySegment,
    k_max: usize,
) -> Result<f64> {
    if sys.f.iter().any(|&v| v != 0.0) {
        return Err(Error::invalid("decay rate is defined for the homogeneous system (f = 0)"));
    }
    if k_max < 4 {
        return Err(Error::invalid("decay regression needs k_max >= 4"));
    }
    let defect = compatibility_defect(sys, phi)?;
    if defect >= 1e-10 {
        return Err(Error::invalid(format!(
            "history must be compatible (defect {defect:.3e} >= 1e-10); project it first"
        )));
    }
    let traj = solve_difference(sys, phi, k_max)?;
    let n = traj.window();
    // M_k = sup over ((k−1)τ, kτ], k = 1..k_max.
    let mut logs = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let lo = traj.start_index() + (k - 1) * n + 1;
        let hi = traj.start_index() + k * n;
        let m = (lo..=hi).map(|i| traj.norm(i)).fold(0.0f64, f64::max);
        if m == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        logs.push(m.ln());
    }
    // Least squares slope of logs against k = 1..k_max.
    let kbar = (k_max as f64 + 1.0) / 2.0;
    let lbar = logs.iter().sum::<f64>() / k_max as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &l) in logs.iter().enumerate() {
        let dk = (i + 1) as f64 - kbar;
        num += dk * (l - lbar);
        den += dk * dk;
    }
    Ok(num / den / sys.tau)
}
