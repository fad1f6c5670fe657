//! Invariant-measure estimation by time averaging.
//!
//! For a dissipative semiflow S(t) on history segments, Cesàro averages
//! (1/T)∫₀ᵀ φ(S(t)x₀) dt of continuous observables converge (through a
//! generalized limit) to ∫φ dm for an invariant measure m. This module
//! realizes the construction with finite data: trapezoid time averages with
//! a convergence diagnostic in place of the nonconstructive generalized
//! limit, snapshot-based empirical measures, an invariance-defect test
//! (compare ∫φ dm against ∫φ∘S(t*) dm), seeded ensemble averages over
//! initial distributions, and the Hausdorff semi-distance for attractor
//! containment diagnostics.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::history::HistorySegment;
use crate::ndde::{integrate, semigroup, NddeSystem, Trajectory};

/// Default Cauchy tolerance for declaring a running average convergent.
pub const CESARO_TOL: f64 = 1e-6;

/// A scalar observable φ on history segments.
///
/// `bounded_hint` records the caller's claim that φ is bounded (the
/// ensemble-average theory needs boundedness, the single-trajectory theory
/// only continuity); it is metadata, not enforced.
#[derive(Clone)]
pub struct Observable {
    label: String,
    bounded_hint: bool,
    map: Arc<dyn Fn(&HistorySegment) -> f64 + Send + Sync>,
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Observable")
            .field("label", &self.label)
            .field("bounded_hint", &self.bounded_hint)
            .finish_non_exhaustive()
    }
}

impl Observable {
    pub fn new(
        label: impl Into<String>,
        bounded_hint: bool,
        map: impl Fn(&HistorySegment) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Observable { label: label.into(), bounded_hint, map: Arc::new(map) }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn bounded_hint(&self) -> bool {
        self.bounded_hint
    }

    /// Evaluates φ, rejecting non-finite results.
    pub fn eval(&self, seg: &HistorySegment) -> Result<f64> {
        let v = (self.map)(seg);
        if !v.is_finite() {
            return Err(Error::NonFinite(format!(
                "observable '{}' returned {v}",
                self.label
            )));
        }
        Ok(v)
    }

    /// Current value of component i: φ(x_t) = x_i(t).
    pub fn component(i: usize) -> Self {
        Observable::new(format!("x[{i}](0)"), false, move |seg: &HistorySegment| {
            seg.value(seg.intervals())[i]
        })
    }

    /// Squared current value of component i.
    pub fn component_sq(i: usize) -> Self {
        Observable::new(format!("x[{i}](0)^2"), false, move |seg: &HistorySegment| {
            let v = seg.value(seg.intervals())[i];
            v * v
        })
    }

    /// Delayed value of component i: φ(x_t) = x_i(t−τ).
    pub fn delayed_component(i: usize) -> Self {
        Observable::new(format!("x[{i}](-tau)"), false, move |seg: &HistorySegment| {
            seg.value(0)[i]
        })
    }

    /// Segment sup norm |x_t|_∞.
    pub fn sup_norm() -> Self {
        Observable::new("sup_norm", false, |seg: &HistorySegment| seg.sup_norm())
    }
}

/// First stored index whose time is ≥ t (with a small snap tolerance), and
/// that carries a full delay window.
fn first_index_at_or_after(traj: &Trajectory, t: f64) -> usize {
    let pos = (t - traj.time(0)) / traj.delta();
    let i = (pos - 1e-9).ceil().max(0.0) as usize;
    i.max(traj.start_index())
}

/// Trapezoid time average (1/(T−t₀))·∫ φ(x_t) dt over the stored grid from
/// the first segment time ≥ `burn_in` to the final time.
pub fn time_average(traj: &Trajectory, obs: &Observable, burn_in: f64) -> Result<f64> {
    let series = averaging_series(traj, obs, burn_in)?;
    Ok(series.last().expect("series is nonempty").1)
}

/// Cumulative trapezoid averages A_T at every stored grid point from the
/// first full segment on: A_{t₀} = φ(x_{t₀}), then
/// A_T = (1/(T−t₀))·∫_{t₀}^T φ(x_t) dt.
pub fn running_average(traj: &Trajectory, obs: &Observable) -> Result<Vec<(f64, f64)>> {
    averaging_series(traj, obs, 0.0)
}

fn averaging_series(traj: &Trajectory, obs: &Observable, burn_in: f64) -> Result<Vec<(f64, f64)>> {
    if !(burn_in >= 0.0) || !burn_in.is_finite() {
        return Err(Error::invalid(format!("burn_in must be nonnegative, got {burn_in}")));
    }
    if burn_in >= traj.final_time() {
        return Err(Error::invalid(format!(
            "burn_in {burn_in} is not below the trajectory horizon {}",
            traj.final_time()
        )));
    }
    let start = first_index_at_or_after(traj, burn_in);
    if start + 1 >= traj.len() {
        return Err(Error::invalid(
            "fewer than two grid points remain after the burn-in",
        ));
    }
    let eval = |i: usize| -> Result<f64> {
        let seg = traj.segment_at(i)?;
        obs.eval(&seg)
            .map_err(|e| Error::NonFinite(format!("{e} at t = {}", traj.time(i))))
    };
    let t0 = traj.time(start);
    let mut integral = 0.0;
    let mut prev = eval(start)?;
    let mut out = Vec::with_capacity(traj.len() - start);
    out.push((t0, prev));
    for i in start + 1..traj.len() {
        let cur = eval(i)?;
        integral += (traj.time(i) - traj.time(i - 1)) * 0.5 * (prev + cur);
        out.push((traj.time(i), integral / (traj.time(i) - t0)));
        prev = cur;
    }
    Ok(out)
}

/// Convergence diagnostic for a running-average series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceReport {
    /// Average at the horizon.
    pub value: f64,
    /// max |A_t − A_T| over the last decade t ∈ [T/10, T].
    pub spread: f64,
    /// spread ≤ tol.
    pub converged: bool,
}

/// Cauchy test over the last decade of the horizon: the limit claim is only
/// made when every running average with t ≥ T/10 sits within `tol` of A_T.
pub fn convergence_diagnostic(series: &[(f64, f64)], tol: f64) -> Result<ConvergenceReport> {
    let &(horizon, value) = series.last().ok_or_else(|| Error::invalid("empty series"))?;
    let from = horizon / 10.0;
    let spread = series
        .iter()
        .filter(|(t, _)| *t >= from)
        .map(|(_, a)| (a - value).abs())
        .fold(0.0, f64::max);
    Ok(ConvergenceReport { value, spread, converged: spread <= tol })
}

/// Uniformly weighted snapshots {x_{t_j}} of one trajectory, a finite
/// stand-in for an invariant measure.
#[derive(Debug, Clone)]
pub struct EmpiricalMeasure {
    snapshots: Vec<HistorySegment>,
    burn_in: f64,
    stride: f64,
    /// Provenance: system label plus the sampling parameters.
    source: String,
}

impl EmpiricalMeasure {
    /// Wraps externally built snapshots; they must agree in τ and dim and
    /// carry uniform weight 1/M each.
    pub fn new(
        snapshots: Vec<HistorySegment>,
        burn_in: f64,
        stride: f64,
        source: impl Into<String>,
    ) -> Result<Self> {
        let first = snapshots
            .first()
            .ok_or_else(|| Error::invalid("an empirical measure needs at least one snapshot"))?;
        let (tau, dim) = (first.tau(), first.dim());
        if snapshots.iter().any(|s| s.tau() != tau || s.dim() != dim) {
            return Err(Error::invalid("snapshots must share delay and dimension"));
        }
        Ok(EmpiricalMeasure { snapshots, burn_in, stride, source: source.into() })
    }

    pub fn snapshots(&self) -> &[HistorySegment] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn burn_in(&self) -> f64 {
        self.burn_in
    }

    pub fn stride(&self) -> f64 {
        self.stride
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

/// Integrates `sys` from `phi` to horizon `t_max` and collects snapshots at
/// t_j = burn_in + j·stride, j = 1, 2, … (the first snapshot falls one full
/// stride after the burn-in; times snap to the storage grid).
pub fn empirical_measure(
    sys: &NddeSystem,
    phi: &HistorySegment,
    t_max: f64,
    h: f64,
    burn_in: f64,
    stride: f64,
) -> Result<EmpiricalMeasure> {
    if !(stride > 0.0) || !stride.is_finite() {
        return Err(Error::invalid(format!("stride must be positive, got {stride}")));
    }
    if !(burn_in >= 0.0) || burn_in + stride > t_max + 1e-9 {
        return Err(Error::invalid(format!(
            "need 0 <= burn_in and burn_in + stride <= t_max (got burn_in = {burn_in}, \
             stride = {stride}, t_max = {t_max})"
        )));
    }
    let traj = integrate(sys, phi, t_max, h)?;
    let mut snapshots = Vec::new();
    let mut j = 1u64;
    loop {
        let t = burn_in + j as f64 * stride;
        if t > traj.final_time() + 1e-9 {
            break;
        }
        let pos = (t - traj.time(0)) / traj.delta();
        let i = (pos.round() as usize).min(traj.len() - 1);
        snapshots.push(traj.segment_at(i)?);
        j += 1;
    }
    EmpiricalMeasure::new(
        snapshots,
        burn_in,
        stride,
        format!("{} t_max={t_max} h={h} burn_in={burn_in} stride={stride}", sys.label()),
    )
}

/// ∫φ dμ: the uniformly weighted mean of φ over the snapshots.
pub fn expect(mu: &EmpiricalMeasure, obs: &Observable) -> Result<f64> {
    let mut sum = 0.0;
    for (j, snap) in mu.snapshots.iter().enumerate() {
        sum += obs
            .eval(snap)
            .map_err(|e| Error::NonFinite(format!("{e} at snapshot {j}")))?;
    }
    Ok(sum / mu.len() as f64)
}

/// Invariance test outcome: per-observable defects |∫φ dμ − ∫φ∘S(t*) dμ|.
#[derive(Debug, Clone)]
pub struct InvarianceReport {
    pub t_star: f64,
    /// (observable label, defect), in input order.
    pub defects: Vec<(String, f64)>,
    pub max_defect: f64,
}

/// Measures how far μ is from invariance: each snapshot is advanced by t*
/// with the integrator and ∫φ dμ is compared against the advanced mean.
pub fn invariance_defect(
    mu: &EmpiricalMeasure,
    sys: &NddeSystem,
    t_star: f64,
    h: f64,
    obs_suite: &[Observable],
) -> Result<InvarianceReport> {
    if !(t_star > 0.0) || !t_star.is_finite() {
        return Err(Error::invalid(format!("t_star must be positive, got {t_star}")));
    }
    let advanced: Vec<HistorySegment> = mu
        .snapshots
        .iter()
        .map(|snap| semigroup(sys, snap, t_star, h))
        .collect::<Result<_>>()?;
    let advanced_mu = EmpiricalMeasure::new(advanced, mu.burn_in, mu.stride, "advanced")?;
    let mut defects = Vec::with_capacity(obs_suite.len());
    let mut max_defect = 0.0f64;
    for obs in obs_suite {
        let d = (expect(mu, obs)? - expect(&advanced_mu, obs)?).abs();
        max_defect = max_defect.max(d);
        defects.push((obs.label.clone(), d));
    }
    Ok(InvarianceReport { t_star, defects, max_defect })
}

/// Seeded generator of initial history segments (a sample from m₀).
pub type Sampler = Arc<dyn Fn(&mut ChaCha12Rng) -> Result<HistorySegment> + Send + Sync>;

/// Ensemble-average outcome.
#[derive(Debug, Clone)]
pub struct EnsembleStats {
    /// Mean over trajectories of the time average.
    pub mean: f64,
    /// Standard error of that mean (0 for a single trajectory).
    pub stderr: f64,
    /// Per-trajectory time averages, in trajectory-index order.
    pub averages: Vec<f64>,
}

/// Averages `obs` over `n_traj` independent initial conditions drawn from
/// `sampler`: trajectory i uses the PRNG stream (seed, i), runs to `t_max`,
/// and contributes its time average past `burn_in`. Trajectories integrate
/// in parallel; the reduction is in index order, so the result does not
/// depend on thread count or interleaving.
#[allow(clippy::too_many_arguments)]
pub fn ensemble_average(
    sys: &NddeSystem,
    sampler: &Sampler,
    n_traj: usize,
    t_max: f64,
    h: f64,
    obs: &Observable,
    burn_in: f64,
    seed: u64,
) -> Result<EnsembleStats> {
    if n_traj < 1 {
        return Err(Error::invalid("need at least one trajectory"));
    }
    let averages: Vec<f64> = (0..n_traj)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let run = |e: Error| Error::invalid(format!("trajectory {i}: {e}"));
            let phi = sampler(&mut rng).map_err(run)?;
            let traj = integrate(sys, &phi, t_max, h).map_err(run)?;
            time_average(&traj, obs, burn_in).map_err(run)
        })
        .collect::<Result<_>>()?;
    let n = averages.len() as f64;
    let mean = averages.iter().sum::<f64>() / n;
    let stderr = if averages.len() > 1 {
        let var = averages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(EnsembleStats { mean, stderr, averages })
}

/// Hausdorff semi-distance sup_{x∈E} inf_{y∈F} |x − y|_∞ between finite
/// segment sets (asymmetric: containment of E near F only).
pub fn hausdorff_semidistance(e: &[HistorySegment], f: &[HistorySegment]) -> Result<f64> {
    if e.is_empty() || f.is_empty() {
        return Err(Error::invalid("Hausdorff semi-distance needs nonempty sets"));
    }
    let mut sup = 0.0f64;
    for x in e {
        let mut inf = f64::INFINITY;
        for y in f {
            inf = inf.min(x.distance(y)?);
        }
        sup = sup.max(inf);
    }
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::contraction_constants;
    use crate::ndde::linear_scalar;
    use approx::assert_relative_eq;
    use std::sync::Arc as StdArc;

    /// B = 0 scalar system d/dt x = −(x − 2) wrapped as an NDDE.
    fn relaxation_system() -> NddeSystem {
        NddeSystem::new(
            1,
            1.0,
            nalgebra::DMatrix::zeros(1, 1),
            StdArc::new(|u: &[f64], _v: &[f64]| vec![-(u[0] - 2.0)]),
            "relaxation",
        )
        .unwrap()
    }

    #[test]
    fn constant_observable_averages_to_the_constant() {
        let sys = relaxation_system();
        let phi = HistorySegment::constant(1.0, 8, &[0.0]).unwrap();
        let traj = integrate(&sys, &phi, 5.0, 0.125).unwrap();
        let c = Observable::new("c", true, |_: &HistorySegment| 2.5);
        // Trapezoid of a constant: exact up to round-off in the final division.
        assert_relative_eq!(time_average(&traj, &c, 0.0).unwrap(), 2.5, max_relative = 1e-14);
        for (_, a) in running_average(&traj, &c).unwrap() {
            assert_relative_eq!(a, 2.5, max_relative = 1e-14);
        }
    }

    #[test]
    fn relaxation_average_matches_closed_form() {
        // x(t) = 2(1 − e^{−t}); (1/20)∫₀²⁰ x = 2 − 2(1 − e^{−20})/20.
        let sys = relaxation_system();
        let phi = HistorySegment::constant(1.0, 8, &[0.0]).unwrap();
        let traj = integrate(&sys, &phi, 20.0, 0.125).unwrap();
        let obs = Observable::component(0);
        let exact = 2.0 - 2.0 * (1.0 - (-20.0f64).exp()) / 20.0;
        assert_relative_eq!(time_average(&traj, &obs, 0.0).unwrap(), exact, epsilon = 1e-4);
    }

    #[test]
    fn neutral_equilibrium_average_is_p_over_a() {
        // d/dt[x − 0.5x(t−τ)] = −2x + 1 has the unique equilibrium 1/2.
        let sys = linear_scalar(0.5, 2.0, 1.0, 1.0).unwrap();
        let phi = HistorySegment::constant(1.0, 16, &[0.0]).unwrap();
        let traj = integrate(&sys, &phi, 200.0, 0.0625).unwrap();
        let obs = Observable::component(0);
        assert_relative_eq!(time_average(&traj, &obs, 0.0).unwrap(), 0.5, epsilon = 1e-3);
    }

    #[test]
    fn running_average_final_entry_is_the_time_average() {
        let sys = relaxation_system();
        let phi = HistorySegment::constant(1.0, 8, &[0.5]).unwrap();
        let traj = integrate(&sys, &phi, 10.0, 0.125).unwrap();
        let obs = Observable::component_sq(0);
        let series = running_average(&traj, &obs).unwrap();
        assert_eq!(series.last().unwrap().1, time_average(&traj, &obs, 0.0).unwrap());
        // Monotone time column.
        assert!(series.windows(2).all(|w| w[0].0 < w[1].0));
        // First entry is the observable at the first full segment.
        let first_seg = traj.segment_at(traj.start_index()).unwrap();
        assert_eq!(series[0].1, obs.eval(&first_seg).unwrap());
    }

    #[test]
    fn running_average_is_cauchy_on_a_decaying_system() {
        let sys = relaxation_system();
        let phi = HistorySegment::constant(1.0, 8, &[0.0]).unwrap();
        let traj = integrate(&sys, &phi, 40.0, 0.125).unwrap();
        let obs = Observable::component(0);
        let series = running_average(&traj, &obs).unwrap();
        let at = |t: f64| {
            series
                .iter()
                .find(|(s, _)| (s - t).abs() < 1e-9)
                .map(|(_, a)| *a)
                .unwrap()
        };
        let (d1, d2, d3) = (
            (at(5.0) - at(10.0)).abs(),
            (at(10.0) - at(20.0)).abs(),
            (at(20.0) - at(40.0)).abs(),
        );
        assert!(d1 > d2 && d2 > d3, "doubling gaps should shrink: {d1} {d2} {d3}");

        // A transient average drifts like 1/T, far above the Cauchy bar…
        let report = convergence_diagnostic(&series, CESARO_TOL).unwrap();
        assert!(!report.converged);
        assert_eq!(report.value, series.last().unwrap().1);
        // …while a run started on the equilibrium has a flat average.
        let eq = HistorySegment::constant(1.0, 8, &[2.0]).unwrap();
        let eq_traj = integrate(&sys, &eq, 40.0, 0.125).unwrap();
        let eq_series = running_average(&eq_traj, &obs).unwrap();
        assert!(convergence_diagnostic(&eq_series, CESARO_TOL).unwrap().converged);
    }

    #[test]
    fn banach_limit_consistency_on_convergent_averages() {
        // Whenever the running average passes the Cauchy test, the reported
        // time average agrees with its limit value within the tolerance.
        let sys = linear_scalar(0.1, 2.0, 1.0, 1.0).unwrap();
        let phi = HistorySegment::constant(1.0, 16, &[3.0]).unwrap();
        let traj = integrate(&sys, &phi, 120.0, 0.0625).unwrap();
        let obs = Observable::component(0);
        let series = running_average(&traj, &obs).unwrap();
        let report = convergence_diagnostic(&series, CESARO_TOL).unwrap();
        if report.converged {
            let ta = time_average(&traj, &obs, 0.0).unwrap();
            assert!((ta - report.value).abs() <= CESARO_TOL);
        } else {
            // The horizon must then be reported as nonconvergent, never as
            // a limit; the diagnostic carries the spread for the caller.
            assert!(report.spread > CESARO_TOL);
        }
    }

    #[test]
    fn averages_are_positive_and_dominated_by_the_sup() {
        let sys = relaxation_system();
        let phi = HistorySegment::constant(1.0, 8, &[1.0]).unwrap();
        let traj = integrate(&sys, &phi, 15.0, 0.125).unwrap();
        let obs = Observable::new("sq_plus", true, |s: &HistorySegment| {
            let v = s.value(s.intervals())[0];
            v * v + 0.1
        });
        let a = time_average(&traj, &obs, 0.0).unwrap();
        assert!(a >= 0.0);
        let sup = (traj.start_index()..traj.len())
            .map(|i| obs.eval(&traj.segment_at(i).unwrap()).unwrap().abs())
            .fold(0.0, f64::max);
        assert!(a <= sup + 1e-12);
    }

    #[test]
    fn burn_in_validation_and_non_finite_observables_are_rejected() {
        let sys = relaxation_system();
        let phi = HistorySegment::constant(1.0, 8, &[0.0]).unwrap();
        let traj = integrate(&sys, &phi, 5.0, 0.125).unwrap();
        let obs = Observable::component(0);
        assert!(time_average(&traj, &obs, 5.0).is_err());
        assert!(time_average(&traj, &obs, -1.0).is_err());

        let bad = Observable::new("inv", false, |s: &HistorySegment| {
            1.0 / (s.value(s.intervals())[0] - 1.0)
        });
        // x crosses … no: x(t) = 2(1−e^{−t}) passes through 1 between grid
        // points; force a hit by dividing by zero at the initial value.
        let bad0 = Observable::new("inv0", false, |s: &HistorySegment| {
            1.0 / s.value(s.intervals())[0]
        });
        let err = time_average(&traj, &bad0, 0.0).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
        assert!(err.to_string().contains("t = 0"), "{err}");
        let _ = bad;
    }

    #[test]
    fn empirical_measure_snapshot_schedule() {
        let sys = relaxation_system();
        let phi = HistorySegment::constant(1.0, 8, &[2.0]).unwrap();
        // stride = t_max − burn_in → exactly one snapshot, at the horizon.
        let mu = empirical_measure(&sys, &phi, 10.0, 0.125, 4.0, 6.0).unwrap();
        assert_eq!(mu.len(), 1);
        // Equilibrium start (x ≡ 2 is the fixed point): snapshots constant.
        let mu = empirical_measure(&sys, &phi, 10.0, 0.125, 2.0, 1.0).unwrap();
        assert_eq!(mu.len(), 8);
        for snap in mu.snapshots() {
            for j in 0..=snap.intervals() {
                assert_relative_eq!(snap.value(j)[0], 2.0, epsilon = 1e-9);
            }
        }
        // Preconditions.
        assert!(empirical_measure(&sys, &phi, 10.0, 0.125, 8.0, 3.0).is_err());
        assert!(empirical_measure(&sys, &phi, 10.0, 0.125, 0.0, 0.0).is_err());
    }

    #[test]
    fn expect_is_the_snapshot_mean_and_is_linear() {
        let sys = relaxation_system();
        let phi = HistorySegment::constant(1.0, 8, &[0.0]).unwrap();
        let mu = empirical_measure(&sys, &phi, 12.0, 0.125, 0.0, 2.0).unwrap();
        let f = Observable::component(0);
        let g = Observable::component_sq(0);
        let combo = Observable::new("2f+3g", false, |s: &HistorySegment| {
            let v = s.value(s.intervals())[0];
            2.0 * v + 3.0 * v * v
        });
        let mean = mu
            .snapshots()
            .iter()
            .map(|s| f.eval(s).unwrap())
            .sum::<f64>()
            / mu.len() as f64;
        assert_eq!(expect(&mu, &f).unwrap(), mean);
        assert_relative_eq!(
            expect(&mu, &combo).unwrap(),
            2.0 * expect(&mu, &f).unwrap() + 3.0 * expect(&mu, &g).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn equilibrium_measure_has_tiny_invariance_defect() {
        // Point mass at the fixed point x̄ = 1/2 of the neutral system.
        let sys = linear_scalar(0.1, 2.0, 1.0, 1.0).unwrap();
        let snap = HistorySegment::constant(1.0, 16, &[0.5]).unwrap();
        let mu = EmpiricalMeasure::new(vec![snap], 0.0, 1.0, "point mass").unwrap();
        let suite = [
            Observable::component(0),
            Observable::component_sq(0),
            Observable::delayed_component(0),
        ];
        let rep = invariance_defect(&mu, &sys, 2.0, 0.0625, &suite).unwrap();
        assert!(rep.max_defect <= 1e-9, "defect {}", rep.max_defect);
        assert_eq!(rep.defects.len(), 3);
    }

    #[test]
    fn burned_in_measure_beats_the_transient_one() {
        let sys = linear_scalar(0.1, 2.0, 1.0, 1.0).unwrap();
        let phi = HistorySegment::constant(1.0, 16, &[5.0]).unwrap();
        let suite = [
            Observable::component(0),
            Observable::component_sq(0),
            Observable::delayed_component(0),
        ];
        let h = 0.0625;
        let hot = empirical_measure(&sys, &phi, 40.0, h, 0.0, 1.0).unwrap();
        let cold = empirical_measure(&sys, &phi, 52.0, h, 20.0, 1.0).unwrap();
        let hot_rep = invariance_defect(&hot, &sys, 1.0, h, &suite).unwrap();
        let cold_rep = invariance_defect(&cold, &sys, 1.0, h, &suite).unwrap();
        assert!(cold_rep.max_defect <= 1e-3, "burned-in defect {}", cold_rep.max_defect);
        assert!(
            hot_rep.max_defect > cold_rep.max_defect,
            "transient {} vs burned-in {}",
            hot_rep.max_defect,
            cold_rep.max_defect
        );
    }

    #[test]
    fn invariance_defect_is_consistent_under_chained_advances() {
        let sys = linear_scalar(0.1, 2.0, 1.0, 1.0).unwrap();
        let phi = HistorySegment::constant(1.0, 16, &[3.0]).unwrap();
        let h = 0.0625;
        let mu = empirical_measure(&sys, &phi, 30.0, h, 10.0, 1.0).unwrap();
        let suite = [Observable::component(0), Observable::component_sq(0)];
        let direct = invariance_defect(&mu, &sys, 2.0, h, &suite).unwrap();
        // Advance every snapshot by τ twice, then measure the defect of the
        // original measure against the doubly advanced one by hand.
        let advanced: Vec<HistorySegment> = mu
            .snapshots()
            .iter()
            .map(|s| {
                let once = semigroup(&sys, s, 1.0, h).unwrap();
                semigroup(&sys, &once, 1.0, h).unwrap()
            })
            .collect();
        let adv_mu = EmpiricalMeasure::new(advanced, 0.0, 1.0, "chained").unwrap();
        for (obs, (_, d)) in suite.iter().zip(&direct.defects) {
            let chained = (expect(&mu, obs).unwrap() - expect(&adv_mu, obs).unwrap()).abs();
            assert!((chained - d).abs() <= 1e-6, "chained {chained} vs direct {d}");
        }
    }

    #[test]
    fn snapshots_after_absorption_stay_in_the_certified_ball() {
        // d/dt[x − 0.1x(t−1)] = −2x + 1 satisfies the one-sided bound with
        // (α, β, γ) = (1.85, 0.15, 5.05) (Young with weights 0.05 and 0.05).
        let sys = linear_scalar(0.1, 2.0, 1.0, 1.0).unwrap();
        let cert = contraction_constants(1.85, 0.15, 5.05, 0.1, 1.0).unwrap();
        assert!(cert.satisfied && cert.frak_c < 0.75);
        let phi = HistorySegment::constant(1.0, 16, &[6.0]).unwrap();
        let burn = cert.t_absorb(phi.sup_norm()).unwrap();
        let mu = empirical_measure(&sys, &phi, burn + 12.0, 0.0625, burn, 1.0).unwrap();
        let r_abs = cert.r_abs.unwrap();
        for snap in mu.snapshots() {
            assert!(snap.sup_norm() <= r_abs + 1e-6);
        }
    }

    #[test]
    fn point_mass_ensemble_equals_the_single_time_average() {
        let sys = linear_scalar(0.1, 2.0, 1.0, 1.0).unwrap();
        let phi = HistorySegment::constant(1.0, 16, &[1.0]).unwrap();
        let obs = Observable::component(0);
        let traj = integrate(&sys, &phi, 30.0, 0.0625).unwrap();
        let direct = time_average(&traj, &obs, 5.0).unwrap();
        let phi2 = phi.clone();
        let sampler: Sampler = StdArc::new(move |_rng| Ok(phi2.clone()));
        for n in [1, 4] {
            let stats =
                ensemble_average(&sys, &sampler, n, 30.0, 0.0625, &obs, 5.0, 7).unwrap();
            assert_relative_eq!(stats.mean, direct, max_relative = 1e-14);
            assert_eq!(stats.averages.len(), n);
        }
    }

    #[test]
    fn two_samplers_agree_on_the_contracting_system() {
        use rand::Rng;
        let sys = linear_scalar(0.1, 2.0, 1.0, 1.0).unwrap();
        let obs = Observable::component(0);
        let constants: Sampler = StdArc::new(|rng: &mut ChaCha12Rng| {
            let a = rng.gen_range(-1.0..1.0);
            HistorySegment::constant(1.0, 16, &[a])
        });
        let waves: Sampler = StdArc::new(|rng: &mut ChaCha12Rng| {
            let a: f64 = rng.gen_range(0.0..2.0);
            HistorySegment::from_function(1, 1.0, 16, |t| vec![a * (3.0 * t).sin()])
        });
        let s1 = ensemble_average(&sys, &constants, 8, 60.0, 0.0625, &obs, 10.0, 1).unwrap();
        let s2 = ensemble_average(&sys, &waves, 8, 60.0, 0.0625, &obs, 10.0, 2).unwrap();
        let tol = 3.0 * (s1.stderr + s2.stderr) + 1e-6;
        assert!((s1.mean - s2.mean).abs() <= tol, "{} vs {}", s1.mean, s2.mean);
        assert_relative_eq!(s1.mean, 0.5, epsilon = 1e-2);
    }

    #[test]
    fn ensemble_is_bitwise_deterministic_in_the_seed() {
        use rand::Rng;
        let sys = linear_scalar(0.1, 2.0, 1.0, 1.0).unwrap();
        let obs = Observable::component(0);
        let sampler: Sampler = StdArc::new(|rng: &mut ChaCha12Rng| {
            let a = rng.gen_range(-2.0..2.0);
            HistorySegment::constant(1.0, 16, &[a])
        });
        let a = ensemble_average(&sys, &sampler, 6, 20.0, 0.0625, &obs, 2.0, 42).unwrap();
        let b = ensemble_average(&sys, &sampler, 6, 20.0, 0.0625, &obs, 2.0, 42).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
        assert_eq!(a.averages, b.averages);
        assert!(ensemble_average(&sys, &sampler, 0, 20.0, 0.0625, &obs, 2.0, 42).is_err());
    }

    #[test]
    fn blown_up_ensemble_member_reports_its_index() {
        let sys = NddeSystem::new(
            1,
            1.0,
            nalgebra::DMatrix::zeros(1, 1),
            StdArc::new(|u: &[f64], _: &[f64]| vec![u[0] * u[0]]),
            "riccati",
        )
        .unwrap();
        let obs = Observable::component(0);
        // Index 0 stays at the 0 equilibrium; later indices blow up.
        let sampler: Sampler = StdArc::new(|rng: &mut ChaCha12Rng| {
            use rand::Rng;
            let first: f64 = rng.gen_range(0.0..1.0);
            let _ = first;
            HistorySegment::constant(1.0, 8, &[3.0])
        });
        let err = ensemble_average(&sys, &sampler, 3, 5.0, 0.0625, &obs, 0.0, 5).unwrap_err();
        assert!(err.to_string().contains("trajectory"), "{err}");
    }

    #[test]
    fn hausdorff_semidistance_basics() {
        let seg = |v: f64| HistorySegment::constant(1.0, 4, &[v]).unwrap();
        let e = vec![seg(0.0), seg(1.0)];
        let f = vec![seg(0.0), seg(1.0), seg(5.0)];
        // E ⊆ F → 0.
        assert_eq!(hausdorff_semidistance(&e, &f).unwrap(), 0.0);
        // Single far element: distance 2.
        assert_eq!(hausdorff_semidistance(&[seg(3.0)], &[seg(1.0)]).unwrap(), 2.0);
        // Asymmetry: F has a point far from E.
        let d_ef = hausdorff_semidistance(&e, &f).unwrap();
        let d_fe = hausdorff_semidistance(&f, &e).unwrap();
        assert_ne!(d_ef, d_fe);
        assert_eq!(d_fe, 4.0);
        assert!(hausdorff_semidistance(&[], &f).is_err());
    }
}
