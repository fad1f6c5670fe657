//! Distributed-memory kernels and a mode-truncated dissipative system with
//! memory.
//!
//! A memory kernel is a nonincreasing density μ ≥ 0 with tail mass
//! κ(s) = ∫_s^∞ μ(σ)dσ and total mass κ₀ = κ(0). Two structural conditions
//! drive all estimates:
//!
//! * decay: μ(s+σ) ≤ K e^{−δσ} μ(s) for some K ≥ 1, δ > 0;
//! * normalized exponential criterion (NEC): κ(s) ≤ β μ(s), which implies
//!   κ(s) ≤ κ₀ e^{−s/β}.
//!
//! The dynamical side is the spectral truncation of a viscous flow with
//! memory: du/dt = −νΛu − Conv(u) − B(u,u) + F, where Λ = diag(λ_k),
//! Conv_k(t) = λ_k∫₀ᵗ κ(σ)u_k(t−σ)dσ, and the quadratic term built from
//! structure constants antisymmetric in their last two indices, so that
//! ⟨B(u,u),u⟩ = 0 exactly. With vanishing initial memory the auxiliary
//! history variable has the explicit form η^t(s) = ∫_{t−min(s,t)}^t u, which
//! the diagnostics reconstruct instead of discretizing a transport equation.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ndde::{IntegrateOptions, Trajectory};

/// Relative tail threshold: the evaluation grid is cut where κ drops below
/// `EPS_TAIL`·κ₀.
pub const EPS_TAIL: f64 = 1e-10;

/// Kernel family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    Exponential,
    PiecewiseConstant,
    Tabulated,
}

/// A memory kernel: density μ, tail mass κ, and its certified constants.
#[derive(Debug, Clone)]
pub struct MemoryKernel {
    family: KernelFamily,
    /// μ₀ = μ(0).
    mu0: f64,
    /// Exponential rate (exponential family only).
    exp_rate: Option<f64>,
    /// Support end t* (piecewise family only).
    t_star: Option<f64>,
    /// Evaluation grid on [0, s_max].
    grid: Vec<f64>,
    /// Tabulated μ on `grid` (tabulated family; empty otherwise).
    mu_table: Vec<f64>,
    /// Tabulated κ on `grid` (tabulated family; empty otherwise).
    kappa_table: Vec<f64>,
    kappa0: f64,
    /// Canonical NEC constant (κ ≤ β_nec·μ).
    beta_nec: f64,
    /// Canonical decay-condition pair (K, δ).
    decay_k: f64,
    decay_delta: f64,
    s_max: f64,
}

/// Piecewise-linear interpolation on a sorted grid, zero beyond the last
/// node.
fn interp(grid: &[f64], table: &[f64], s: f64) -> f64 {
    debug_assert_eq!(grid.len(), table.len());
    if s <= grid[0] {
        return table[0];
    }
    let last = *grid.last().unwrap();
    if s >= last {
        return 0.0;
    }
    let j = match grid.binary_search_by(|g| g.partial_cmp(&s).unwrap()) {
        Ok(j) => return table[j],
        Err(j) => j,
    };
    let (g0, g1) = (grid[j - 1], grid[j]);
    let w = (s - g0) / (g1 - g0);
    table[j - 1] * (1.0 - w) + table[j] * w
}

impl MemoryKernel {
    pub fn family(&self) -> KernelFamily {
        self.family
    }

    /// Density μ(s) (0 for s < 0).
    pub fn mu(&self, s: f64) -> f64 {
        if s < 0.0 {
            return 0.0;
        }
        match self.family {
            KernelFamily::Exponential => self.mu0 * (-self.exp_rate.unwrap() * s).exp(),
            // Closed-support convention μ(t*) = μ₀ (a null-set choice that
            // keeps the grid quadrature of κ exact at the jump).
            KernelFamily::PiecewiseConstant => {
                if s <= self.t_star.unwrap() {
                    self.mu0
                } else {
                    0.0
                }
            }
            KernelFamily::Tabulated => interp(&self.grid, &self.mu_table, s),
        }
    }

    /// Tail mass κ(s) = ∫_s^∞ μ.
    pub fn kappa(&self, s: f64) -> f64 {
        if s < 0.0 {
            return self.kappa0;
        }
        match self.family {
            // Evaluated as μ(s)/δ so that κ − (1/δ)μ vanishes exactly when
            // 1/δ is representable.
            KernelFamily::Exponential => self.mu(s) / self.exp_rate.unwrap(),
            KernelFamily::PiecewiseConstant => self.mu0 * (self.t_star.unwrap() - s).max(0.0),
            KernelFamily::Tabulated => interp(&self.grid, &self.kappa_table, s),
        }
    }

    /// Total mass κ₀ = κ(0) = ‖μ‖_{L¹}.
    pub fn kappa0(&self) -> f64 {
        self.kappa0
    }

    /// Canonical NEC constant β with κ ≤ βμ.
    pub fn beta_nec(&self) -> f64 {
        self.beta_nec
    }

    /// Canonical decay-condition constants (K, δ).
    pub fn decay_constants(&self) -> (f64, f64) {
        (self.decay_k, self.decay_delta)
    }

    /// Grid cutoff: κ(s_max) ≤ EPS_TAIL·κ₀.
    pub fn s_max(&self) -> f64 {
        self.s_max
    }

    /// Evaluation grid.
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn is_zero(&self) -> bool {
        self.kappa0 == 0.0
    }

    /// Construction-time invariants: μ nonincreasing and nonnegative on the
    /// grid, and κ(s) = ∫_s^∞ μ verified by quadrature (per-cell Simpson,
    /// cumulative from the right) with residual ≤ 1e−8·κ₀.
    fn validate(&self) -> Result<()> {
        let mut prev = f64::INFINITY;
        for (j, &s) in self.grid.iter().enumerate() {
            let m = self.mu(s);
            if !(m >= 0.0) || !m.is_finite() {
                return Err(Error::invalid(format!("mu({s}) = {m} is not a nonnegative real")));
            }
            if m > prev + 1e-12 * self.mu0.max(1.0) {
                return Err(Error::invalid(format!(
                    "mu must be nonincreasing: mu({s}) = {m} exceeds the previous node value \
                     {prev} (grid node {j})"
                )));
            }
            prev = m;
        }
        if self.is_zero() {
            return Ok(());
        }
        // Right-to-left cumulative Simpson for ∫_s^{s_max} μ.
        let n = self.grid.len();
        let mut acc = vec![0.0; n];
        for j in (0..n - 1).rev() {
            let (a, b) = (self.grid[j], self.grid[j + 1]);
            let mid = 0.5 * (a + b);
            acc[j] = acc[j + 1] + (b - a) / 6.0 * (self.mu(a) + 4.0 * self.mu(mid) + self.mu(b));
        }
        let tol = 1e-8 * self.kappa0;
        for (j, &s) in self.grid.iter().enumerate() {
            // The quadrature misses the tail past s_max, which is ≤ EPS_TAIL·κ₀.
            let resid = (self.kappa(s) - acc[j] - self.kappa(self.s_max)).abs();
            if resid > tol {
                return Err(Error::invalid(format!(
                    "kappa({s}) disagrees with the quadrature of mu by {resid:e} \
                     (tolerance {tol:e})"
                )));
            }
        }
        if (self.kappa0 - self.kappa(0.0)).abs() > tol {
            return Err(Error::invalid("kappa0 must equal kappa(0)"));
        }
        Ok(())
    }
}

/// Uniform grid of `n` intervals on [0, s_max].
fn uniform_grid(s_max: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|j| s_max * (j as f64 / n as f64)).collect()
}

/// Exponential kernel μ(s) = μ₀e^{−δs}, κ(s) = (μ₀/δ)e^{−δs}.
///
/// μ₀ = 0 gives the memoryless limit (κ ≡ 0). Canonical constants:
/// β = 1/δ, (K, δ) = (1, δ).
pub fn kernel_exponential(mu0: f64, delta: f64) -> Result<MemoryKernel> {
    if !(mu0 >= 0.0) || !mu0.is_finite() {
        return Err(Error::invalid(format!("mu0 must be nonnegative, got {mu0}")));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::invalid(format!("delta must be positive, got {delta}")));
    }
    // κ(s_max)/κ₀ = e^{−δ·s_max} = EPS_TAIL.
    let s_max = if mu0 == 0.0 { 0.0 } else { -EPS_TAIL.ln() / delta };
    let kernel = MemoryKernel {
        family: KernelFamily::Exponential,
        mu0,
        exp_rate: Some(delta),
        t_star: None,
        grid: uniform_grid(s_max.max(1.0 / delta), 1024),
        mu_table: Vec::new(),
        kappa_table: Vec::new(),
        kappa0: mu0 / delta,
        beta_nec: 1.0 / delta,
        decay_k: 1.0,
        decay_delta: delta,
        s_max,
    };
    kernel.validate()?;
    Ok(kernel)
}

/// Piecewise-constant kernel μ = μ₀ on [0, t*), 0 beyond; κ declines
/// linearly from κ₀ = μ₀t* to 0 at t*.
///
/// Canonical constants: β = t*; the decay condition needs K = e^{δt*} (it
/// fails for K = 1 whenever s < t* < s+σ), reported for δ = 1/t*.
pub fn kernel_piecewise(mu0: f64, t_star: f64) -> Result<MemoryKernel> {
    if !(mu0 >= 0.0) || !mu0.is_finite() {
        return Err(Error::invalid(format!("mu0 must be nonnegative, got {mu0}")));
    }
    if !(t_star > 0.0) || !t_star.is_finite() {
        return Err(Error::invalid(format!("t_star must be positive, got {t_star}")));
    }
    let kernel = MemoryKernel {
        family: KernelFamily::PiecewiseConstant,
        mu0,
        exp_rate: None,
        t_star: Some(t_star),
        grid: uniform_grid(t_star, 1024),
        mu_table: Vec::new(),
        kappa_table: Vec::new(),
        kappa0: mu0 * t_star,
        beta_nec: t_star,
        decay_k: std::f64::consts::E,
        decay_delta: 1.0 / t_star,
        s_max: if mu0 == 0.0 { 0.0 } else { t_star },
    };
    kernel.validate()?;
    Ok(kernel)
}

/// Tabulated kernel: μ sampled on a grid starting at 0, extended by zero
/// beyond the last node; κ is the right-tail trapezoid quadrature.
pub fn kernel_tabulated(grid: Vec<f64>, values: Vec<f64>) -> Result<MemoryKernel> {
    if grid.len() < 2 || grid.len() != values.len() {
        return Err(Error::invalid("need matching grid/value tables with at least 2 nodes"));
    }
    if grid[0] != 0.0 {
        return Err(Error::invalid("the kernel grid must start at s = 0"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("the kernel grid must be strictly increasing"));
    }
    for (j, w) in values.windows(2).enumerate() {
        if !(w[0] >= 0.0) || !w[0].is_finite() || !w[1].is_finite() {
            return Err(Error::invalid("tabulated values must be nonnegative reals"));
        }
        if w[1] > w[0] {
            return Err(Error::invalid(format!(
                "tabulated mu must be nonincreasing; values[{}] = {} < values[{}] = {}",
                j,
                w[0],
                j + 1,
                w[1]
            )));
        }
    }
    if *values.last().unwrap() < 0.0 {
        return Err(Error::invalid("tabulated values must be nonnegative reals"));
    }
    let n = grid.len();
    let mut kappa_table = vec![0.0; n];
    for j in (0..n - 1).rev() {
        kappa_table[j] = kappa_table[j + 1]
            + (grid[j + 1] - grid[j]) * 0.5 * (values[j] + values[j + 1]);
    }
    let kappa0 = kappa_table[0];
    let mu0 = values[0];
    // Minimal NEC constant on the grid (µ = 0 forces κ = 0 there since µ is
    // nonincreasing, so those nodes impose nothing).
    let mut beta = 0.0f64;
    for j in 0..n {
        if values[j] > 0.0 {
            beta = beta.max(kappa_table[j] / values[j]);
        } else if kappa_table[j] > 1e-14 * kappa0.max(1.0) {
            return Err(Error::invalid(
                "tabulated kernel admits no NEC constant: kappa > 0 where mu = 0",
            ));
        }
    }
    let decay_delta = if beta > 0.0 { 1.0 / beta } else { 1.0 };
    // Empirical K on grid pairs for the canonical report.
    let mut decay_k = 1.0f64;
    for i in 0..n {
        if values[i] <= 0.0 {
            continue;
        }
        for j in i + 1..n {
            let sigma = grid[j] - grid[i];
            decay_k = decay_k.max(values[j] / ((-decay_delta * sigma).exp() * values[i]));
        }
    }
    let s_max = *grid.last().unwrap();
    let kernel = MemoryKernel {
        family: KernelFamily::Tabulated,
        mu0,
        exp_rate: None,
        t_star: None,
        grid,
        mu_table: values,
        kappa_table,
        kappa0,
        beta_nec: beta,
        decay_k,
        decay_delta,
        s_max,
    };
    kernel.validate()?;
    Ok(kernel)
}

/// Outcome of a kernel-condition sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionCheck {
    pub holds: bool,
    /// Largest inequality defect found (positive = violation).
    pub max_defect: f64,
    /// Location (s, σ) of the worst defect when positive; σ = 0 for the
    /// single-variable NEC check.
    pub witness: Option<(f64, f64)>,
}

/// Sweeps μ(s+σ) ≤ K·e^{−δσ}·μ(s) over all pairs from `grid`; holds when the
/// worst defect stays within round-off (1e−12·μ₀).
pub fn check_decay_condition(
    kernel: &MemoryKernel,
    k: f64,
    delta: f64,
    grid: &[f64],
) -> Result<ConditionCheck> {
    if !(k >= 1.0) {
        return Err(Error::invalid(format!("K must be at least 1, got {k}")));
    }
    if !(delta > 0.0) {
        return Err(Error::invalid(format!("delta must be positive, got {delta}")));
    }
    let mut max_defect = f64::NEG_INFINITY;
    let mut witness = None;
    for &s in grid {
        let ms = kernel.mu(s);
        for &sigma in grid {
            if sigma < 0.0 || s < 0.0 {
                continue;
            }
            let defect = kernel.mu(s + sigma) - k * (-delta * sigma).exp() * ms;
            if defect > max_defect {
                max_defect = defect;
                witness = (defect > 0.0).then_some((s, sigma));
            }
        }
    }
    Ok(ConditionCheck {
        holds: max_defect <= 1e-12 * kernel.mu0.max(f64::MIN_POSITIVE),
        max_defect,
        witness,
    })
}

/// NEC sweep outcome: the pointwise inequality and its exponential-tail
/// consequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NecCheck {
    pub holds: bool,
    /// max κ(s) − βμ(s) over the grid.
    pub max_defect: f64,
    /// Worst s when the defect is positive.
    pub witness: Option<f64>,
    /// max κ(s) − κ₀e^{−s/β} over the grid.
    pub tail_defect: f64,
    pub tail_holds: bool,
}

/// Sweeps κ(s) ≤ βμ(s) on the kernel grid, plus the consequence
/// κ(s) ≤ κ₀e^{−s/β}.
pub fn check_nec(kernel: &MemoryKernel, beta: f64) -> Result<NecCheck> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::invalid(format!("beta must be positive, got {beta}")));
    }
    let mut max_defect = f64::NEG_INFINITY;
    let mut witness = None;
    let mut tail_defect = f64::NEG_INFINITY;
    for &s in &kernel.grid {
        let d = kernel.kappa(s) - beta * kernel.mu(s);
        if d > max_defect {
            max_defect = d;
            witness = (d > 0.0).then_some(s);
        }
        tail_defect = tail_defect.max(kernel.kappa(s) - kernel.kappa0 * (-s / beta).exp());
    }
    let round_off = 1e-12 * kernel.kappa0.max(f64::MIN_POSITIVE);
    Ok(NecCheck {
        holds: max_defect <= round_off,
        max_defect,
        witness,
        tail_defect,
        tail_holds: tail_defect <= round_off,
    })
}

/// Spectral truncation of a viscous flow with memory.
#[derive(Debug, Clone)]
pub struct GalerkinMemorySystem {
    lambdas: Vec<f64>,
    nu: f64,
    forcing: Vec<f64>,
    /// Structure constants c_{ijk}, flattened as i·m² + j·m + k.
    tensor: Vec<f64>,
    kernel: MemoryKernel,
    label: String,
}

impl GalerkinMemorySystem {
    /// Validates: λ strictly increasing and positive, ν > 0, matching sizes,
    /// and exact antisymmetry c_{ijk} = −c_{ikj}.
    pub fn new(
        lambdas: Vec<f64>,
        nu: f64,
        forcing: Vec<f64>,
        tensor: Vec<f64>,
        kernel: MemoryKernel,
        label: impl Into<String>,
    ) -> Result<Self> {
        let m = lambdas.len();
        if m == 0 {
            return Err(Error::invalid("need at least one mode"));
        }
        if !(lambdas[0] > 0.0) {
            return Err(Error::invalid("eigenvalues must be positive"));
        }
        if lambdas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("eigenvalues must be strictly increasing"));
        }
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::invalid(format!("viscosity must be positive, got {nu}")));
        }
        if forcing.len() != m {
            return Err(Error::invalid("forcing length must match the mode count"));
        }
        if forcing.iter().any(|f| !f.is_finite()) {
            return Err(Error::invalid("forcing must be finite"));
        }
        if tensor.len() != m * m * m {
            return Err(Error::invalid("structure tensor must have m^3 entries"));
        }
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let a = tensor[i * m * m + j * m + k];
                    let b = tensor[i * m * m + k * m + j];
                    if a != -b {
                        return Err(Error::invalid(format!(
                            "structure constants must satisfy c[{i}][{j}][{k}] = \
                             -c[{i}][{k}][{j}] exactly (got {a} and {b})"
                        )));
                    }
                }
            }
        }
        Ok(GalerkinMemorySystem {
            lambdas,
            nu,
            forcing,
            tensor,
            kernel,
            label: label.into(),
        })
    }

    /// Antisymmetrizes a raw tensor in its last two indices: (c − cᵀ)/2,
    /// making the construction invariant exact by arithmetic symmetry.
    pub fn antisymmetrize(m: usize, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != m * m * m {
            return Err(Error::invalid("raw tensor must have m^3 entries"));
        }
        let mut out = vec![0.0; raw.len()];
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let a = raw[i * m * m + j * m + k];
                    let b = raw[i * m * m + k * m + j];
                    out[i * m * m + j * m + k] = (a - b) / 2.0;
                }
            }
        }
        Ok(out)
    }

    pub fn modes(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn forcing(&self) -> &[f64] {
        &self.forcing
    }

    pub fn kernel(&self) -> &MemoryKernel {
        &self.kernel
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Duality-norm of the forcing: |F|²_{V′} = Σ F_k²/λ_k.
    pub fn f_dual_sq(&self) -> f64 {
        self.forcing
            .iter()
            .zip(&self.lambdas)
            .map(|(f, l)| f * f / l)
            .sum()
    }

    /// Quadratic term (B(u,u))_i = Σ_{j,k} c_{jik} u_j u_k.
    fn quadratic(&self, u: &[f64], out: &mut [f64]) {
        let m = self.modes();
        for i in 0..m {
            let mut acc = 0.0;
            for j in 0..m {
                let base = j * m * m + i * m;
                for k in 0..m {
                    acc += self.tensor[base + k] * u[j] * u[k];
                }
            }
            out[i] = acc;
        }
    }
}

/// Integrates the memory system from u(0) = u0 with vanishing initial
/// history: du/dt = −νΛu − Conv(t) − B(u,u) + F, where
/// Conv_k(t) = λ_k·∫₀^{min(t,s_max)} κ(σ)u_k(t−σ)dσ (trapezoid over the
/// stored grid). The convolution is frozen per RK4 step at its start-of-step
/// value — a first-order splitting of the memory term whose error is
/// dominated by quadrature error at default step sizes.
pub fn integrate_memory(
    sys: &GalerkinMemorySystem,
    u0: &[f64],
    t_max: f64,
    h: f64,
) -> Result<Trajectory> {
    integrate_memory_with(sys, u0, t_max, h, IntegrateOptions::default())
}

pub fn integrate_memory_with(
    sys: &GalerkinMemorySystem,
    u0: &[f64],
    t_max: f64,
    h: f64,
    opts: IntegrateOptions,
) -> Result<Trajectory> {
    let m = sys.modes();
    if u0.len() != m {
        return Err(Error::invalid("initial state length must match the mode count"));
    }
    if u0.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("initial state must be finite"));
    }
    if !(h > 0.0) || !(t_max > 0.0) || !h.is_finite() || !t_max.is_finite() {
        return Err(Error::invalid("need positive step size and horizon"));
    }
    let n_steps = (t_max / h - 1e-9).ceil().max(1.0) as usize;
    let h_eff = t_max / n_steps as f64;

    // κ table on the step grid up to the tail cutoff.
    let kernel = &sys.kernel;
    let conv_len = if kernel.is_zero() {
        0
    } else {
        ((kernel.s_max() / h_eff) as usize).min(n_steps) + 1
    };
    let kappa_tab: Vec<f64> = (0..conv_len).map(|i| kernel.kappa(i as f64 * h_eff)).collect();

    let mut states = Vec::with_capacity((n_steps + 1) * m);
    states.extend_from_slice(u0);
    let mut u = u0.to_vec();
    let mut quad = vec![0.0; m];
    let mut conv = vec![0.0; m];

    // Trapezoid convolution at t_j over σ ∈ {0, h, …, min(j,conv_len−1)·h}.
    let convolve = |j: usize, states: &[f64], conv: &mut [f64]| {
        conv.iter_mut().for_each(|c| *c = 0.0);
        if conv_len == 0 || j == 0 {
            return;
        }
        let top = j.min(conv_len - 1);
        for (i, &kv) in kappa_tab.iter().enumerate().take(top + 1) {
            let w = if i == 0 || i == top { 0.5 } else { 1.0 };
            let past = &states[(j - i) * m..(j - i + 1) * m];
            for (c, p) in conv.iter_mut().zip(past) {
                *c += w * kv * p;
            }
        }
        for (c, l) in conv.iter_mut().zip(&sys.lambdas) {
            *c *= h_eff * l;
        }
    };

    let rhs = |u: &[f64], conv: &[f64], quad: &mut Vec<f64>| -> Vec<f64> {
        sys.quadratic(u, quad);
        (0..m)
            .map(|i| -sys.nu * sys.lambdas[i] * u[i] - conv[i] - quad[i] + sys.forcing[i])
            .collect()
    };

    for j in 0..n_steps {
        convolve(j, &states, &mut conv);
        let k1 = rhs(&u, &conv, &mut quad);
        let mid1: Vec<f64> = (0..m).map(|i| u[i] + 0.5 * h_eff * k1[i]).collect();
        let k2 = rhs(&mid1, &conv, &mut quad);
        let mid2: Vec<f64> = (0..m).map(|i| u[i] + 0.5 * h_eff * k2[i]).collect();
        let k3 = rhs(&mid2, &conv, &mut quad);
        let end: Vec<f64> = (0..m).map(|i| u[i] + h_eff * k3[i]).collect();
        let k4 = rhs(&end, &conv, &mut quad);
        for i in 0..m {
            u[i] += h_eff / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(Error::NonFinite(format!(
                "state at t = {}",
                (j + 1) as f64 * h_eff
            )));
        }
        if norm > opts.blowup_threshold {
            return Err(Error::Blowup { t: (j + 1) as f64 * h_eff, norm });
        }
        states.extend_from_slice(&u);
    }
    Ok(Trajectory::from_parts(m, 0.0, h_eff, 0, 0, states, sys.label.clone()))
}

/// Diagnostic time series for a memory run (all on the trajectory grid).
#[derive(Debug, Clone)]
pub struct MemoryDiagnostics {
    pub times: Vec<f64>,
    /// |u|² = Σu_k².
    pub u_sq: Vec<f64>,
    /// ‖u‖² = Σλ_k u_k².
    pub grad_sq: Vec<f64>,
    /// [η]₁² = ∫μ(s)‖η^t(s)‖²ds.
    pub eta_sq: Vec<f64>,
    /// Γ₁(η^t) = ∫κ(s)‖η^t(s)‖²ds.
    pub gamma1: Vec<f64>,
    /// [Tη]₁² = ∫μ(s)‖∂_sη^t(s)‖²ds.
    pub t_eta_sq: Vec<f64>,
    /// Tail functional sup_{σ≥1} σ·∫_{(0,1/σ)∪(σ,∞)}μ(s)‖η^t(s)‖²ds on a
    /// dyadic σ-grid.
    pub tail: Vec<f64>,
}

/// Reconstructs the memory diagnostics from the representation formula
/// η^t(s) = P(t) − P(t−min(s,t)) with P(t) = ∫₀ᵗu (vanishing initial
/// history). The s-integrals run to min(t, s_max) + one cell; the discarded
/// remainder carries μ ≤ EPS_TAIL·μ₀.
pub fn memory_diagnostics(
    traj: &Trajectory,
    kernel: &MemoryKernel,
    lambdas: &[f64],
) -> Result<MemoryDiagnostics> {
    let m = traj.dim();
    if lambdas.len() != m {
        return Err(Error::invalid("eigenvalue count must match the trajectory dimension"));
    }
    let n = traj.len();
    let h = traj.delta();

    // Cumulative trapezoid P(t_j) componentwise.
    let mut p = vec![0.0; n * m];
    for j in 1..n {
        let (prev, cur) = (traj.state(j - 1), traj.state(j));
        for i in 0..m {
            p[j * m + i] = p[(j - 1) * m + i] + 0.5 * h * (prev[i] + cur[i]);
        }
    }
    let grad_norm_sq = |v: &[f64]| -> f64 {
        v.iter().zip(lambdas).map(|(x, l)| l * x * x).sum()
    };
    let l2_norm_sq = |v: &[f64]| -> f64 { v.iter().map(|x| x * x).sum() };

    // ‖η^{t_j}(s_i)‖² for s_i = i·h ≤ t_j, with the gradient norm.
    let eta_norm_sq = |j: usize, i: usize| -> f64 {
        let (pj, pji) = (&p[j * m..(j + 1) * m], &p[(j - i) * m..(j - i + 1) * m]);
        (0..m).map(|c| {
            let d = pj[c] - pji[c];
            lambdas[c] * d * d
        }).sum()
    };

    let s_cells = if kernel.is_zero() {
        0
    } else {
        ((kernel.s_max() / h) as usize + 1).min(n.saturating_sub(1))
    };
    let mu_tab: Vec<f64> = (0..=s_cells).map(|i| kernel.mu(i as f64 * h)).collect();
    let kap_tab: Vec<f64> = (0..=s_cells).map(|i| kernel.kappa(i as f64 * h)).collect();

    // Dyadic σ grid for the tail functional.
    let mut sigmas = vec![1.0f64];
    while *sigmas.last().unwrap() * 2.0 <= kernel.s_max().max(1.0) {
        let next = sigmas.last().unwrap() * 2.0;
        sigmas.push(next);
    }

    let rows: Vec<(f64, f64, f64, f64, f64, f64)> = (0..n)
        .into_par_iter()
        .map(|j| {
            let t = traj.time(j);
            let top = j.min(s_cells);
            // Trapezoid accumulators over s ∈ [0, top·h] for μ‖η‖², κ‖η‖²,
            // and μ‖u(t−s)‖².
            let mut eta = 0.0;
            let mut gam = 0.0;
            let mut teta = 0.0;
            for i in 0..=top {
                let w = if i == 0 || i == top { 0.5 } else { 1.0 };
                let e = eta_norm_sq(j, i);
                eta += w * mu_tab[i] * e;
                gam += w * kap_tab[i] * e;
                teta += w * mu_tab[i] * grad_norm_sq(traj.state(j - i));
            }
            if top == 0 {
                eta = 0.0;
                gam = 0.0;
                teta = 0.0;
            } else {
                eta *= h;
                gam *= h;
                teta *= h;
            }
            // Plateau branch s > t: η = P(t), weights ∫_t^∞μ = κ(t) and
            // ∫_t^∞κ (closed forms per family; zero when t ≥ s_max).
            let plateau = eta_norm_sq(j, j);
            eta += plateau * kernel.kappa(t);
            gam += plateau * kappa_int(kernel, t);

            // Tail functional on the dyadic grid: σ·[∫_0^{1/σ} + ∫_σ^∞],
            // each piece split into its on-grid part (s ≤ t) and the
            // plateau remainder (s > t, where η = P(t)).
            let mut tail = 0.0f64;
            for &sigma in &sigmas {
                let mut val = 0.0;
                let cut = 1.0 / sigma;
                let l_top = ((cut / h) as usize).min(top);
                if l_top >= 1 {
                    let mut left = 0.0;
                    for i in 0..=l_top {
                        let w = if i == 0 || i == l_top { 0.5 } else { 1.0 };
                        left += w * mu_tab[i] * eta_norm_sq(j, i);
                    }
                    val += left * h;
                }
                if cut > t {
                    // [max(t, 0), 1/σ] lies on the plateau.
                    val += plateau * (kernel.kappa(t) - kernel.kappa(cut));
                }
                let r_lo = (sigma / h).ceil() as usize;
                if r_lo < top {
                    let mut right = 0.0;
                    for i in r_lo..=top {
                        let w = if i == r_lo || i == top { 0.5 } else { 1.0 };
                        right += w * mu_tab[i] * eta_norm_sq(j, i);
                    }
                    val += right * h;
                }
                // Plateau part of [σ, ∞).
                val += plateau * kernel.kappa(t.max(sigma));
                tail = tail.max(sigma * val);
            }
            (l2_norm_sq(traj.state(j)), grad_norm_sq(traj.state(j)), eta, gam.max(0.0), teta, tail)
        })
        .collect();

    let mut out = MemoryDiagnostics {
        times: traj.times().to_vec(),
        u_sq: Vec::with_capacity(n),
        grad_sq: Vec::with_capacity(n),
        eta_sq: Vec::with_capacity(n),
        gamma1: Vec::with_capacity(n),
        t_eta_sq: Vec::with_capacity(n),
        tail: Vec::with_capacity(n),
    };
    for (usq, gsq, eta, gam, teta, tail) in rows {
        out.u_sq.push(usq);
        out.grad_sq.push(gsq);
        out.eta_sq.push(eta);
        out.gamma1.push(gam);
        out.t_eta_sq.push(teta);
        out.tail.push(tail);
    }
    Ok(out)
}

/// Sanity requirements shared by the inequality checks.
fn check_grid(diag: &MemoryDiagnostics) -> Result<f64> {
    if diag.times.len() < 3 {
        return Err(Error::invalid("inequality checks need at least 3 grid points"));
    }
    Ok(diag.times[1] - diag.times[0])
}

/// Suggested residual tolerance for the differential-inequality checks:
/// central differences of a smooth inequality-satisfying energy can show
/// O(h) positive residual (splitting + quadrature), scaled by the peak
/// energy so genuine O(1) violations still stand out.
pub fn inequality_tolerance(diag: &MemoryDiagnostics, nu: f64) -> f64 {
    let h = if diag.times.len() > 1 { diag.times[1] - diag.times[0] } else { 0.0 };
    let peak = diag
        .u_sq
        .iter()
        .zip(&diag.eta_sq)
        .map(|(a, b)| a + b)
        .fold(0.0, f64::max);
    10.0 * h * peak * nu
}

/// Max central-difference residual of the energy inequality
/// d/dt(|u|² + [η]²) + ν‖u‖² ≤ C_ν·|F|²_{V′} with C_ν = 1/ν and
/// |F|²_{V′} = ΣF_k²/λ_k; values ≤ `inequality_tolerance` are consistent
/// with the bound.
pub fn check_energy_inequality(
    diag: &MemoryDiagnostics,
    nu: f64,
    forcing: &[f64],
    lambdas: &[f64],
) -> Result<f64> {
    let dt = check_grid(diag)?;
    if forcing.len() != lambdas.len() {
        return Err(Error::invalid("forcing and eigenvalue lengths must match"));
    }
    let f_dual_sq: f64 = forcing.iter().zip(lambdas).map(|(f, l)| f * f / l).sum();
    let source = f_dual_sq / nu;
    let energy = |j: usize| diag.u_sq[j] + diag.eta_sq[j];
    let mut max_resid = f64::NEG_INFINITY;
    for j in 1..diag.times.len() - 1 {
        let ddt = (energy(j + 1) - energy(j - 1)) / (2.0 * dt);
        max_resid = max_resid.max(ddt + nu * diag.grad_sq[j] - source);
    }
    Ok(max_resid)
}

/// Max central-difference residual of the memory-functional inequality
/// dΓ₁/dt + (1/4β)(Γ₁ + β[η]²) ≤ 2β²‖μ‖_{L¹}‖u‖², with ‖μ‖_{L¹} = κ₀.
/// `beta` must pass the kernel's NEC sweep.
pub fn check_gamma_inequality(
    diag: &MemoryDiagnostics,
    kernel: &MemoryKernel,
    beta: f64,
) -> Result<f64> {
    let dt = check_grid(diag)?;
    let nec = check_nec(kernel, beta)?;
    if !nec.holds {
        return Err(Error::invalid(format!(
            "beta = {beta} fails the kernel's normalized exponential criterion \
             (defect {:e})",
            nec.max_defect
        )));
    }
    let c_mu = 2.0 * beta * beta * kernel.kappa0();
    let mut max_resid = f64::NEG_INFINITY;
    for j in 1..diag.times.len() - 1 {
        let ddt = (diag.gamma1[j + 1] - diag.gamma1[j - 1]) / (2.0 * dt);
        let resid = ddt + (diag.gamma1[j] + beta * diag.eta_sq[j]) / (4.0 * beta)
            - c_mu * diag.grad_sq[j];
        max_resid = max_resid.max(resid);
    }
    Ok(max_resid)
}

/// Absorbing-bound check outcome.
#[derive(Debug, Clone)]
pub struct AbsorbingReport {
    /// Memory-augmented dissipation constant Λ = 1/(4λ₁ν) + 2β²κ₀/ν.
    pub lambda_big: f64,
    /// Decay rate γ = 1/(4·max{β, Λ}).
    pub gamma_rate: f64,
    /// Envelope C_fit·(e^{−γt}·x0_norm_sq + |F|²_{V′}) on the grid.
    pub bound_series: Vec<f64>,
    pub violated: bool,
}

/// Checks the total energy against the Grönwall envelope
/// |u|² + [η]² ≤ C_fit·(e^{−γt}‖x₀‖² + |F|²_{V′}); the multiplicative
/// constant is a fit parameter (default 100), as the theory only asserts
/// its existence.
pub fn check_absorbing_bound(
    diag: &MemoryDiagnostics,
    kernel: &MemoryKernel,
    nu: f64,
    lambdas: &[f64],
    forcing: &[f64],
    x0_norm_sq: f64,
    c_fit: Option<f64>,
) -> Result<AbsorbingReport> {
    if lambdas.is_empty() || forcing.len() != lambdas.len() {
        return Err(Error::invalid("forcing and eigenvalue lengths must match"));
    }
    if !(nu > 0.0) {
        return Err(Error::invalid("viscosity must be positive"));
    }
    let c_fit = c_fit.unwrap_or(100.0);
    let beta = kernel.beta_nec();
    let lambda_big = 1.0 / (4.0 * lambdas[0] * nu) + 2.0 * beta * beta * kernel.kappa0() / nu;
    let gamma_rate = 1.0 / (4.0 * beta.max(lambda_big));
    let f_dual_sq: f64 = forcing.iter().zip(lambdas).map(|(f, l)| f * f / l).sum();
    let mut bound_series = Vec::with_capacity(diag.times.len());
    let mut violated = false;
    for (j, &t) in diag.times.iter().enumerate() {
        let bound = c_fit * ((-gamma_rate * t).exp() * x0_norm_sq + f_dual_sq);
        if diag.u_sq[j] + diag.eta_sq[j] > bound {
            violated = true;
        }
        bound_series.push(bound);
    }
    Ok(AbsorbingReport { lambda_big, gamma_rate, bound_series, violated })
}

/// ∫_t^∞ κ(s) ds in closed form per family (0 beyond the support).
fn kappa_int(kernel: &MemoryKernel, t: f64) -> f64 {
    match kernel.family() {
        KernelFamily::Exponential => kernel.kappa(t) / kernel.exp_rate.unwrap(),
        KernelFamily::PiecewiseConstant => {
            let ts = kernel.t_star.unwrap();
            if t >= ts {
                0.0
            } else {
                // ∫_t^{t*} μ₀(t*−s)ds = μ₀(t*−t)²/2.
                0.5 * kernel.mu0 * (ts - t) * (ts - t)
            }
        }
        KernelFamily::Tabulated => {
            // Right-tail trapezoid of the κ table.
            let grid = &kernel.grid;
            let mut acc = 0.0;
            for j in (0..grid.len() - 1).rev() {
                if grid[j + 1] <= t {
                    break;
                }
                let lo = grid[j].max(t);
                let k_lo = kernel.kappa(lo);
                acc += (grid[j + 1] - lo) * 0.5 * (k_lo + kernel.kappa_table[j + 1]);
            }
            acc
        }
    }
}
