//! Lossless transmission line reduced to a delay system on its boundary.
//!
//! The line occupies x ∈ [0, 1] and carries voltage V(x, t) and current
//! I(x, t) governed by ∂ₓV = −L·∂ₜI, ∂ₓI = −C·∂ₜV. Every solution is a
//! superposition of two traveling waves,
//!
//! ```text
//! V(x, t) = ½·[φ(t − x/c) + ψ(t + x/c)],
//! I(x, t) = (√(C/L)/2)·[φ(t − x/c) − ψ(t + x/c)],      c = 1/√(LC),
//! ```
//!
//! so the whole field is captured by the two scalar wave profiles φ
//! (progressive) and ψ (reflected). Initial data (V₀, I₀) on the line pins
//! φ on [−τ, 0] and ψ on [0, τ] where τ = √(LC) is the transit time; after
//! the substitution ψ̃(t) = ψ(t + τ) both profiles live on [−τ, 0] and the
//! boundary conditions turn their evolution into a 2-dimensional difference
//! (or neutral differential) equation with delay τ. This module performs
//! that reduction, the inverse field reconstruction, and a cross-validation
//! that round-trips initial data through the reduction.
//!
//! Two boundary variants at x = 0 (a resistive source) and x = 1 (open end)
//! are supported:
//!
//! * static: V(0,t) + R₀·I(0,t) = E and I(1,t) = 0, giving the difference
//!   equation x(t) = B·x(t−τ) + f;
//! * dynamic: the same conditions imposed on the time derivatives,
//!   d/dt[V(0,t) + R₀·I(0,t)] = E and d/dt I(1,t) = 0, giving the neutral
//!   equation d/dt[x(t) − B·x(t−τ)] = f with the same B and f.
//!
//! In both cases x = (φ, ψ̃), B = [[0, −(1−r)/(1+r)], [1, 0]] and
//! f = (2E/(1+r), 0) with reflection ratio r = R₀·√(C/L).

use nalgebra::DMatrix;

use crate::difference::{compatibility_defect, solve_difference, DifferenceSystem};
use crate::error::{Error, Result};
use crate::history::HistorySegment;
use crate::ndde::{NddeSystem, RhsFn, Trajectory};

/// Which boundary conditions close the line at x = 0 and x = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    /// V(0,t) + R₀·I(0,t) = E, I(1,t) = 0 — reduces to a difference equation.
    Static,
    /// d/dt[V(0,t) + R₀·I(0,t)] = E, d/dt I(1,t) = 0 — reduces to an NDDE.
    /// Here E is the source *rate*; the constant of integration is whatever
    /// the initial data provides.
    Dynamic,
}

/// A lossless transmission line of unit length with a resistive source at
/// x = 0 and an open end at x = 1.
#[derive(Debug, Clone, Copy)]
pub struct TelegraphLine {
    inductance: f64,
    capacitance: f64,
    resistance: f64,
    source: f64,
    boundary: BoundaryKind,
}

impl TelegraphLine {
    /// Builds a line; L and C must be positive, R₀ nonnegative, E finite.
    pub fn new(
        inductance: f64,
        capacitance: f64,
        resistance: f64,
        source: f64,
        boundary: BoundaryKind,
    ) -> Result<Self> {
        if !(inductance > 0.0) || !inductance.is_finite() {
            return Err(Error::invalid(format!(
                "inductance must be positive and finite, got {inductance}"
            )));
        }
        if !(capacitance > 0.0) || !capacitance.is_finite() {
            return Err(Error::invalid(format!(
                "capacitance must be positive and finite, got {capacitance}"
            )));
        }
        if !(resistance >= 0.0) || !resistance.is_finite() {
            return Err(Error::invalid(format!(
                "boundary resistance must be nonnegative and finite, got {resistance}"
            )));
        }
        if !source.is_finite() {
            return Err(Error::NonFinite("source voltage".into()));
        }
        Ok(TelegraphLine { inductance, capacitance, resistance, source, boundary })
    }

    pub fn inductance(&self) -> f64 {
        self.inductance
    }

    pub fn capacitance(&self) -> f64 {
        self.capacitance
    }

    pub fn resistance(&self) -> f64 {
        self.resistance
    }

    pub fn source(&self) -> f64 {
        self.source
    }

    pub fn boundary(&self) -> BoundaryKind {
        self.boundary
    }

    /// Wave transit time over the unit-length line: τ = √(LC).
    pub fn tau(&self) -> f64 {
        (self.inductance * self.capacitance).sqrt()
    }

    /// Wave speed c = 1/√(LC); c·τ = 1 (the line length).
    pub fn wave_speed(&self) -> f64 {
        1.0 / self.tau()
    }

    /// Characteristic admittance √(C/L): the current-to-voltage scale of a
    /// single traveling wave.
    pub fn admittance(&self) -> f64 {
        (self.capacitance / self.inductance).sqrt()
    }

    /// Reflection ratio r = R₀·√(C/L) of the source termination. r = 1 is a
    /// matched (perfectly absorbing) boundary.
    pub fn reflection_ratio(&self) -> f64 {
        self.resistance * self.admittance()
    }

    /// The delay-system structure matrix B = [[0, −(1−r)/(1+r)], [1, 0]] and
    /// forcing f = (2E/(1+r), 0) shared by both boundary variants.
    fn structure(&self) -> (DMatrix<f64>, Vec<f64>) {
        let r = self.reflection_ratio();
        let b = DMatrix::from_row_slice(2, 2, &[0.0, -(1.0 - r) / (1.0 + r), 1.0, 0.0]);
        let f = vec![2.0 * self.source / (1.0 + r), 0.0];
        (b, f)
    }
}

/// Samples the wave profiles pinned by initial line data:
///
/// ```text
/// φ(θ)  = V₀(−cθ)   + √(L/C)·I₀(−cθ),
/// ψ̃(θ) = V₀(cθ + 1) − √(L/C)·I₀(cθ + 1),        θ ∈ [−τ, 0],
/// ```
///
/// each on the n+1 uniform nodes of [−τ, 0]. V₀ and I₀ must be defined on
/// [0, 1] (both arguments −cθ and cθ+1 stay in that interval); n is the node
/// count minus one.
pub fn decompose<FV, FI>(
    v0: FV,
    i0: FI,
    line: &TelegraphLine,
    n: usize,
) -> Result<(HistorySegment, HistorySegment)>
where
    FV: Fn(f64) -> f64,
    FI: Fn(f64) -> f64,
{
    let tau = line.tau();
    let c = line.wave_speed();
    let z = 1.0 / line.admittance(); // √(L/C)
    let phi = HistorySegment::from_function(1, tau, n, |theta| {
        let x = (-c * theta).clamp(0.0, 1.0);
        vec![v0(x) + z * i0(x)]
    })?;
    let psi_tilde = HistorySegment::from_function(1, tau, n, |theta| {
        let x = (c * theta + 1.0).clamp(0.0, 1.0);
        vec![v0(x) - z * i0(x)]
    })?;
    Ok((phi, psi_tilde))
}

/// Interleaves the two scalar wave profiles into the 2-dimensional history
/// x₀ = (φ, ψ̃) that seeds the delay system. Both segments must share the
/// delay and grid.
pub fn join_waves(phi: &HistorySegment, psi_tilde: &HistorySegment) -> Result<HistorySegment> {
    if phi.dim() != 1 || psi_tilde.dim() != 1 {
        return Err(Error::invalid("wave profiles must be scalar segments"));
    }
    if phi.tau() != psi_tilde.tau() || phi.intervals() != psi_tilde.intervals() {
        return Err(Error::invalid(format!(
            "wave profiles disagree on window or grid: ({}, {} intervals) vs ({}, {} intervals)",
            phi.tau(),
            phi.intervals(),
            psi_tilde.tau(),
            psi_tilde.intervals()
        )));
    }
    let values: Vec<f64> = phi
        .raw_values()
        .iter()
        .zip(psi_tilde.raw_values())
        .flat_map(|(&p, &q)| [p, q])
        .collect();
    HistorySegment::new(2, phi.tau(), values)
}

/// Splits a 2-dimensional (φ, ψ̃) trajectory into its scalar wave
/// trajectories, sharing grid and breakpoint structure.
pub fn split_waves(traj: &Trajectory) -> Result<(Trajectory, Trajectory)> {
    if traj.dim() != 2 {
        return Err(Error::invalid(format!(
            "wave trajectory must have 2 components, got {}",
            traj.dim()
        )));
    }
    let component = |c: usize, label: &str| {
        let states: Vec<f64> = (0..traj.len()).map(|i| traj.state(i)[c]).collect();
        Trajectory::from_parts(
            1,
            traj.tau(),
            traj.delta(),
            traj.start_index(),
            traj.window(),
            states,
            format!("{} ({label})", traj.label()),
        )
    };
    Ok((component(0, "progressive wave"), component(1, "reflected wave")))
}

/// Translates the static boundary conditions into the continuous-time
/// difference equation x(t) = B·x(t−τ) + f.
pub fn boundary_to_difference(line: &TelegraphLine) -> Result<DifferenceSystem> {
    if line.boundary != BoundaryKind::Static {
        return Err(Error::invalid(
            "difference-equation reduction requires the static boundary variant",
        ));
    }
    let (b, f) = line.structure();
    DifferenceSystem::new(line.tau(), b, f, "transmission line (static boundary)")
}

/// Translates the dynamic (rate-form) boundary conditions into the neutral
/// equation d/dt[x(t) − B·x(t−τ)] = f with the same B and f; the source
/// field of the line is read as the rate constant E.
pub fn boundary_to_ndde(line: &TelegraphLine) -> Result<NddeSystem> {
    if line.boundary != BoundaryKind::Dynamic {
        return Err(Error::invalid(
            "neutral-equation reduction requires the dynamic boundary variant",
        ));
    }
    let (b, f) = line.structure();
    let g: RhsFn = std::sync::Arc::new(move |_u: &[f64], _v: &[f64]| f.clone());
    NddeSystem::new(2, line.tau(), b, g, "transmission line (dynamic boundary)")
}

/// Linear interpolation of a scalar wave trajectory at time s.
///
/// Node values are taken as stored (right limits at breakpoints); arguments
/// outside the covered window [−τ, final_time] are range errors.
fn eval_wave(traj: &Trajectory, s: f64) -> Result<f64> {
    if traj.dim() != 1 {
        return Err(Error::invalid("wave trajectory must be scalar; use split_waves first"));
    }
    let t0 = traj.time(0);
    let tf = traj.final_time();
    let tol = 1e-9 * traj.delta().max(1.0);
    if !s.is_finite() || s < t0 - tol || s > tf + tol {
        return Err(Error::OutOfRange(format!(
            "wave argument t = {s} outside the covered window [{t0}, {tf}]"
        )));
    }
    let pos = (s.clamp(t0, tf) - t0) / traj.delta();
    let i = (pos.floor() as usize).min(traj.len() - 2);
    let w = (pos - i as f64).clamp(0.0, 1.0);
    Ok(traj.state(i)[0] * (1.0 - w) + traj.state(i + 1)[0] * w)
}

/// Reconstructs the field (V, I) at position x ∈ [0, 1] and time t from the
/// two wave trajectories:
///
/// ```text
/// V = ½·[φ(t − x/c) + ψ(t + x/c)],
/// I = (√(C/L)/2)·[φ(t − x/c) − ψ(t + x/c)],     ψ(s) = ψ̃(s − τ).
/// ```
///
/// Both wave arguments reduce to times in [t − τ, t]; if either falls
/// outside a trajectory's covered window the call is a range error.
pub fn reconstruct(
    phi: &Trajectory,
    psi_tilde: &Trajectory,
    line: &TelegraphLine,
    x: f64,
    t: f64,
) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfRange(format!("position x = {x} outside the line [0, 1]")));
    }
    let c = line.wave_speed();
    let forward = eval_wave(phi, t - x / c)?;
    let backward = eval_wave(psi_tilde, t + x / c - line.tau())?;
    let v = 0.5 * (forward + backward);
    let i = 0.5 * line.admittance() * (forward - backward);
    Ok((v, i))
}

/// Spatial resolution of the cross-validation grid.
const CROSS_VALIDATE_NODES: usize = 16;

/// Round-trips initial data through the boundary reduction and checks that
/// the reconstructed field behaves like a solution of the line equations.
///
/// The data is decomposed into wave profiles on a grid of spacing ≤ h,
/// evolved with the difference equation of the static boundary up to time
/// ≥ T, and the field is reconstructed on a space–time grid. Reported
/// discrepancies, whose maximum is returned:
///
/// * the initial-data compatibility defect |B·x₀(−τ) + f − x₀(0)| (a genuine
///   jump of the solution at t = 0 that propagates to every multiple of τ;
///   it is reported rather than treated as a failure),
/// * the boundary residuals V(0,t) + R₀·I(0,t) − E and I(1,t) on the time
///   grid,
/// * the transport residuals of the Riemann invariants V ± √(L/C)·I, which
///   the exact solution keeps constant along the characteristics
///   dx/dt = ±c (checked across single grid cells).
///
/// Compatible smooth data keeps every term at round-off level; a genuinely
/// incompatible datum surfaces as its jump magnitude.
pub fn cross_validate<FV, FI>(
    v0: FV,
    i0: FI,
    line: &TelegraphLine,
    t_max: f64,
    h: f64,
) -> Result<f64>
where
    FV: Fn(f64) -> f64,
    FI: Fn(f64) -> f64,
{
    if line.boundary != BoundaryKind::Static {
        return Err(Error::invalid("cross-validation requires the static boundary variant"));
    }
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::invalid(format!("horizon must be positive and finite, got {t_max}")));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::invalid(format!("grid spacing must be positive and finite, got {h}")));
    }
    let tau = line.tau();
    let c = line.wave_speed();
    let n = ((tau / h).ceil() as usize).max(2);
    let (phi0, psi0) = decompose(&v0, &i0, line, n)?;
    let joint = join_waves(&phi0, &psi0)?;
    let sys = boundary_to_difference(line)?;
    let mut worst = compatibility_defect(&sys, &joint)?;

    // One extra delay window of coverage so characteristic steps near t_max
    // stay inside the trajectory.
    let k_max = (t_max / tau).ceil() as usize + 1;
    let traj = solve_difference(&sys, &joint, k_max)?;
    let (phi, psi) = split_waves(&traj)?;

    let n_t = ((t_max / h).ceil() as usize).max(1);
    let dt = t_max / n_t as f64;
    let dx = 1.0 / CROSS_VALIDATE_NODES as f64;
    let z = 1.0 / line.admittance();
    for i in 0..=n_t {
        let t = i as f64 * dt;
        // (a) Boundary conditions at both ends.
        let (v_left, i_left) = reconstruct(&phi, &psi, line, 0.0, t)?;
        worst = worst.max((v_left + line.resistance * i_left - line.source).abs());
        let (_, i_right) = reconstruct(&phi, &psi, line, 1.0, t)?;
        worst = worst.max(i_right.abs());
        // (b) Riemann invariants transported across one spatial cell: the
        // + invariant along dx/dt = c, the − invariant along dx/dt = −c.
        for j in 0..CROSS_VALIDATE_NODES {
            let (x_lo, x_hi) = (j as f64 * dx, (j + 1) as f64 * dx);
            let step = dx / c;
            if t + step > traj.final_time() {
                continue;
            }
            let (v_a, i_a) = reconstruct(&phi, &psi, line, x_lo, t)?;
            let (v_b, i_b) = reconstruct(&phi, &psi, line, x_hi, t + step)?;
            worst = worst.max(((v_b + z * i_b) - (v_a + z * i_a)).abs());
            let (v_c, i_c) = reconstruct(&phi, &psi, line, x_hi, t)?;
            let (v_d, i_d) = reconstruct(&phi, &psi, line, x_lo, t + step)?;
            worst = worst.max(((v_d - z * i_d) - (v_c - z * i_c)).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_line(resistance: f64, source: f64, boundary: BoundaryKind) -> TelegraphLine {
        TelegraphLine::new(1.0, 1.0, resistance, source, boundary).unwrap()
    }

    #[test]
    fn line_constants_follow_from_inductance_and_capacitance() {
        let line = TelegraphLine::new(4.0, 0.25, 3.0, 1.5, BoundaryKind::Static).unwrap();
        assert_relative_eq!(line.tau(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(line.wave_speed(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(line.admittance(), 0.25, epsilon = 1e-15);
        assert_relative_eq!(line.reflection_ratio(), 0.75, epsilon = 1e-15);

        let unit = unit_line(0.0, 0.0, BoundaryKind::Static);
        assert_eq!(unit.tau(), 1.0);
        assert_eq!(unit.wave_speed(), 1.0);

        assert!(TelegraphLine::new(0.0, 1.0, 0.0, 0.0, BoundaryKind::Static).is_err());
        assert!(TelegraphLine::new(1.0, -1.0, 0.0, 0.0, BoundaryKind::Static).is_err());
        assert!(TelegraphLine::new(1.0, 1.0, -0.5, 0.0, BoundaryKind::Static).is_err());
        assert!(TelegraphLine::new(1.0, 1.0, 0.0, f64::NAN, BoundaryKind::Static).is_err());
    }

    #[test]
    fn steady_data_decomposes_to_constant_waves() {
        let e = 3.25;
        let line = TelegraphLine::new(2.0, 0.5, 1.7, e, BoundaryKind::Static).unwrap();
        let (phi, psi) = decompose(|_| e, |_| 0.0, &line, 8).unwrap();
        for j in 0..=8 {
            assert_eq!(phi.value(j)[0], e);
            assert_eq!(psi.value(j)[0], e);
        }

        let (phi0, psi0) = decompose(|_| 0.0, |_| 0.0, &line, 8).unwrap();
        assert_eq!(phi0.sup_norm(), 0.0);
        assert_eq!(psi0.sup_norm(), 0.0);
    }

    #[test]
    fn decomposition_samples_the_traveling_wave_profiles() {
        let line = TelegraphLine::new(4.0, 1.0, 0.0, 0.0, BoundaryKind::Static).unwrap();
        // τ = 2, c = 1/2, √(L/C) = 2.
        let v0 = |x: f64| x * x;
        let i0 = |x: f64| 1.0 - x;
        let (phi, psi) = decompose(v0, i0, &line, 10).unwrap();
        for (j, &theta) in phi.nodes().iter().enumerate() {
            let x_fwd = -0.5 * theta;
            assert_relative_eq!(
                phi.value(j)[0],
                v0(x_fwd) + 2.0 * i0(x_fwd),
                epsilon = 1e-14
            );
            let x_bwd = 0.5 * theta + 1.0;
            assert_relative_eq!(
                psi.value(j)[0],
                v0(x_bwd) - 2.0 * i0(x_bwd),
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn static_boundary_reduces_to_the_reflection_recursion() {
        // Matched impedance r = 1: the reflected entry vanishes and B is
        // nilpotent of order 2.
        let matched = unit_line(1.0, 0.7, BoundaryKind::Static);
        let sys = boundary_to_difference(&matched).unwrap();
        assert_eq!(sys.dim(), 2);
        assert_eq!(sys.tau(), 1.0);
        assert_eq!(sys.b_matrix()[(0, 1)], 0.0);
        assert_eq!(sys.b_matrix()[(1, 0)], 1.0);
        assert_eq!(sys.f(), &[0.7, 0.0]);
        let b2 = sys.b_matrix() * sys.b_matrix();
        assert!(b2.iter().all(|&v| v == 0.0));

        // r = 3 reflects with coefficient −(1−3)/(1+3) = 1/2.
        let reflective = unit_line(3.0, 0.0, BoundaryKind::Static);
        let sys3 = boundary_to_difference(&reflective).unwrap();
        assert_eq!(sys3.b_matrix()[(0, 1)], 0.5);
        assert_eq!(sys3.f(), &[0.0, 0.0]);

        assert!(boundary_to_difference(&unit_line(1.0, 0.0, BoundaryKind::Dynamic)).is_err());
    }

    #[test]
    fn dynamic_boundary_reduces_to_a_constant_rate_neutral_equation() {
        let line = unit_line(3.0, 2.0, BoundaryKind::Dynamic);
        let sys = boundary_to_ndde(&line).unwrap();
        assert_eq!(sys.dim(), 2);
        assert_eq!(sys.b_matrix()[(0, 1)], 0.5);
        assert_eq!(sys.b_matrix()[(1, 0)], 1.0);
        // g is the constant forcing (2E/(1+r), 0) regardless of state.
        assert_eq!(sys.eval_g(&[1.0, -2.0], &[3.0, 4.0]), vec![1.0, 0.0]);
        assert_eq!(sys.eval_g(&[0.0, 0.0], &[0.0, 0.0]), vec![1.0, 0.0]);

        assert!(boundary_to_ndde(&unit_line(3.0, 2.0, BoundaryKind::Static)).is_err());
    }

    #[test]
    fn steady_waves_reconstruct_a_steady_field() {
        let e = 1.3;
        let line = unit_line(0.5, e, BoundaryKind::Static);
        let (phi0, psi0) = decompose(|_| e, |_| 0.0, &line, 16).unwrap();
        let joint = join_waves(&phi0, &psi0).unwrap();
        let sys = boundary_to_difference(&line).unwrap();
        assert!(compatibility_defect(&sys, &joint).unwrap() < 1e-14);
        let traj = solve_difference(&sys, &joint, 4).unwrap();
        let (phi, psi) = split_waves(&traj).unwrap();
        for &x in &[0.0, 0.3, 0.77, 1.0] {
            for &t in &[0.0, 0.9, 1.55, 3.2] {
                let (v, i) = reconstruct(&phi, &psi, &line, x, t).unwrap();
                assert_relative_eq!(v, e, epsilon = 1e-12);
                assert!(i.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reconstruction_at_time_zero_inverts_the_decomposition() {
        // Compatible smooth data: I₀(1) = 0 exactly and V₀(0) + R₀·I₀(0) = E.
        let r0 = 2.0;
        let i0 = |x: f64| 0.4 * (std::f64::consts::FRAC_PI_2 * x).cos();
        let v0 = |x: f64| 1.0 + 0.5 * (std::f64::consts::PI * x).sin();
        let e = v0(0.0) + r0 * i0(0.0);
        let line = unit_line(r0, e, BoundaryKind::Static);

        let n = 64;
        let (phi0, psi0) = decompose(v0, i0, &line, n).unwrap();
        let joint = join_waves(&phi0, &psi0).unwrap();
        let sys = boundary_to_difference(&line).unwrap();
        assert!(compatibility_defect(&sys, &joint).unwrap() < 1e-12);
        let traj = solve_difference(&sys, &joint, 2).unwrap();
        let (phi, psi) = split_waves(&traj).unwrap();

        // Second derivatives of the wave profiles are bounded by
        // max|V₀''| + √(L/C)·max|I₀''| ≲ 5.92, so linear interpolation on a
        // grid of spacing Δ is exact to (Δ²/8)·5.92; allow twice that.
        let delta = 1.0 / n as f64;
        let bound = 2.0 * delta * delta / 8.0 * 5.92;
        for &x in &[0.0, 0.137, 0.401, 0.733, 1.0] {
            let (v, i) = reconstruct(&phi, &psi, &line, x, 0.0).unwrap();
            assert!(
                (v - v0(x)).abs() <= bound,
                "V mismatch {} at x = {x}",
                (v - v0(x)).abs()
            );
            assert!(
                (i - i0(x)).abs() <= bound,
                "I mismatch {} at x = {x}",
                (i - i0(x)).abs()
            );
        }
    }

    #[test]
    fn reconstruction_rejects_uncovered_arguments() {
        let line = unit_line(1.0, 0.0, BoundaryKind::Static);
        let (phi0, psi0) = decompose(|_| 0.0, |_| 0.0, &line, 8).unwrap();
        let joint = join_waves(&phi0, &psi0).unwrap();
        let sys = boundary_to_difference(&line).unwrap();
        let traj = solve_difference(&sys, &joint, 2).unwrap();
        let (phi, psi) = split_waves(&traj).unwrap();
        // Position off the line.
        assert!(reconstruct(&phi, &psi, &line, -0.1, 0.5).is_err());
        assert!(reconstruct(&phi, &psi, &line, 1.1, 0.5).is_err());
        // φ argument t − x/c below −τ.
        assert!(reconstruct(&phi, &psi, &line, 1.0, -0.5).is_err());
        // ψ argument t + x/c − τ beyond the trajectory horizon.
        assert!(reconstruct(&phi, &psi, &line, 1.0, traj.final_time() + 0.5).is_err());
        // Interior points of the covered window are fine.
        assert!(reconstruct(&phi, &psi, &line, 0.5, 0.5).is_ok());
    }

    #[test]
    fn reflection_relation_holds_bitwise_on_the_grid() {
        let line = unit_line(2.5, 0.8, BoundaryKind::Static);
        let (phi0, psi0) = decompose(
            |x| 0.2 + (std::f64::consts::PI * x).sin(),
            |x| 0.1 * x * (1.0 - x) + 0.05,
            &line,
            24,
        )
        .unwrap();
        let joint = join_waves(&phi0, &psi0).unwrap();
        let sys = boundary_to_difference(&line).unwrap();
        let traj = solve_difference(&sys, &joint, 5).unwrap();
        let n = traj.window();
        // ψ̃(t) = φ(t − τ) is the second row of the recursion: exact equality
        // of the stored doubles, not merely approximate.
        for i in n..traj.len() {
            assert_eq!(traj.state(i)[1], traj.state(i - n)[0], "node {i}");
        }
    }

    #[test]
    fn boundary_residual_vanishes_on_the_grid() {
        let line = unit_line(2.5, 0.8, BoundaryKind::Static);
        let (phi0, psi0) = decompose(
            |x| 0.2 + (std::f64::consts::PI * x).sin(),
            |x| 0.1 * x * (1.0 - x) + 0.05,
            &line,
            24,
        )
        .unwrap();
        let joint = join_waves(&phi0, &psi0).unwrap();
        let sys = boundary_to_difference(&line).unwrap();
        let traj = solve_difference(&sys, &joint, 5).unwrap();
        let n = traj.window();
        let r = line.reflection_ratio();
        // (1+r)·φ(t) + (1−r)·ψ(t) = 2E with ψ(t) = ψ̃(t−τ): the first row of
        // the recursion, recomputed in boundary-condition form.
        for i in n..traj.len() {
            let residual = (1.0 + r) * traj.state(i)[0] + (1.0 - r) * traj.state(i - n)[1]
                - 2.0 * line.source();
            assert!(residual.abs() < 1e-12, "residual {residual} at node {i}");
        }
    }

    #[test]
    fn compatible_smooth_data_cross_validates_to_round_off() {
        let e = 0.7;
        let i0 = |x: f64| 0.2 * (1.0 - x) * (1.0 - x);
        let v0 = move |x: f64| (e - 0.2) + 0.3 * x * x * (1.0 - x);
        let line = unit_line(1.0, e, BoundaryKind::Static);
        let worst = cross_validate(v0, i0, &line, 4.0, 0.05).unwrap();
        assert!(worst < 1e-9, "residual {worst}");
    }

    #[test]
    fn matched_line_settles_to_the_steady_field_after_two_transits() {
        let e = 0.7;
        let i0 = |x: f64| 0.2 * (1.0 - x) * (1.0 - x);
        let v0 = move |x: f64| (e - 0.2) + 0.3 * x * x * (1.0 - x);
        let line = unit_line(1.0, e, BoundaryKind::Static);
        let (phi0, psi0) = decompose(v0, i0, &line, 32).unwrap();
        let joint = join_waves(&phi0, &psi0).unwrap();
        let sys = boundary_to_difference(&line).unwrap();
        let traj = solve_difference(&sys, &joint, 4).unwrap();
        let (phi, psi) = split_waves(&traj).unwrap();
        // The matched boundary absorbs the progressive wave completely: B is
        // nilpotent, so after two transit times every wave sample is the
        // steady value and the field is V ≡ E, I ≡ 0.
        for &t in &[2.03, 2.5, 2.97] {
            for &x in &[0.0, 0.3, 0.77, 1.0] {
                let (v, i) = reconstruct(&phi, &psi, &line, x, t).unwrap();
                assert!((v - e).abs() < 1e-13, "V = {v} at (x, t) = ({x}, {t})");
                assert!(i.abs() < 1e-13, "I = {i} at (x, t) = ({x}, {t})");
            }
        }
    }

    #[test]
    fn incompatible_data_reports_the_initial_jump() {
        // V₀(0) + R₀·I₀(0) = 1.6 ≠ 0.9 = E: the datum violates the boundary
        // condition, so the difference solution jumps at t = 0.
        let line = unit_line(2.0, 0.9, BoundaryKind::Static);
        let v0 = |_: f64| 1.0;
        let i0 = |_: f64| 0.3;
        let worst = cross_validate(v0, i0, &line, 3.0, 0.1).unwrap();

        let n = ((line.tau() / 0.1_f64).ceil() as usize).max(2);
        let (phi0, psi0) = decompose(v0, i0, &line, n).unwrap();
        let joint = join_waves(&phi0, &psi0).unwrap();
        let sys = boundary_to_difference(&line).unwrap();
        let defect = compatibility_defect(&sys, &joint).unwrap();
        assert!(defect > 0.5, "expected an O(1) jump, got {defect}");
        assert_eq!(worst, defect);
    }

    #[test]
    fn wave_helpers_validate_their_inputs() {
        let line = unit_line(1.0, 0.0, BoundaryKind::Static);
        let (phi0, psi0) = decompose(|_| 0.0, |_| 0.0, &line, 8).unwrap();
        let coarse = HistorySegment::constant(1.0, 4, &[0.0]).unwrap();
        assert!(join_waves(&phi0, &coarse).is_err());
        let planar = HistorySegment::constant(1.0, 8, &[0.0, 0.0]).unwrap();
        assert!(join_waves(&planar, &psi0).is_err());

        let joint = join_waves(&phi0, &psi0).unwrap();
        let sys = boundary_to_difference(&line).unwrap();
        let traj = solve_difference(&sys, &joint, 2).unwrap();
        let (phi, _) = split_waves(&traj).unwrap();
        assert!(split_waves(&phi).is_err());

        assert!(cross_validate(|_| 0.0, |_| 0.0, &line, -1.0, 0.1).is_err());
        assert!(cross_validate(|_| 0.0, |_| 0.0, &line, 1.0, 0.0).is_err());
        let dynamic = unit_line(1.0, 0.0, BoundaryKind::Dynamic);
        assert!(cross_validate(|_| 0.0, |_| 0.0, &dynamic, 1.0, 0.1).is_err());
    }
}
