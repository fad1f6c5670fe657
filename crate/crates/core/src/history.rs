//! Phase-space elements for delay systems: functions on the window [−τ, 0].
//!
//! The natural state of a delay system is not a point but a segment — the
//! solution's trace over the last delay window, x_t(θ) = x(t+θ) for
//! θ ∈ [−τ, 0], living in C([−τ,0], ℝⁿ) with the sup norm. `HistorySegment`
//! stores such a segment on a uniform θ-grid with linear interpolation
//! between nodes.

use crate::error::{Error, Result};

/// A sampled function [−τ, 0] → ℝⁿ on a uniform grid, interpolated linearly.
///
/// Node j sits at θ_j = −τ + j·(τ/N) for j = 0..=N; `values` is node-major
/// (`values[j*dim..(j+1)*dim]` is the ℝⁿ value at θ_j). Values must be finite.
#[derive(Debug, Clone, PartialEq)]
pub struct HistorySegment {
    dim: usize,
    tau: f64,
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl HistorySegment {
    /// Builds a segment from explicit node values (node-major, (N+1)·dim long).
    ///
    /// Requires dim ≥ 1, τ > 0, at least two nodes, and finite values.
    pub fn new(dim: usize, tau: f64, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("segment dimension must be at least 1"));
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::invalid(format!("delay tau must be positive and finite, got {tau}")));
        }
        if values.len() < 2 * dim || values.len() % dim != 0 {
            return Err(Error::invalid(format!(
                "segment needs k*dim values with k >= 2, got {} values for dim {}",
                values.len(),
                dim
            )));
        }
        let n = values.len() / dim - 1;
        for (idx, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!(
                    "segment value at node index {} (component {})",
                    idx / dim,
                    idx % dim
                )));
            }
        }
        let nodes = uniform_nodes(tau, n);
        Ok(HistorySegment { dim, tau, nodes, values })
    }

    /// Samples f at the N+1 grid nodes of [−τ, 0].
    ///
    /// Fails (naming the offending node) if f returns a non-finite component
    /// or a vector of the wrong length.
    pub fn from_function<F>(dim: usize, tau: f64, n: usize, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Vec<f64>,
    {
        if n < 1 {
            return Err(Error::invalid("segment grid needs at least 1 interval"));
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::invalid(format!("delay tau must be positive and finite, got {tau}")));
        }
        let nodes = uniform_nodes(tau, n);
        let mut values = Vec::with_capacity((n + 1) * dim);
        for (j, &theta) in nodes.iter().enumerate() {
            let v = f(theta);
            if v.len() != dim {
                return Err(Error::invalid(format!(
                    "history function returned {} components at node index {j}, expected {dim}",
                    v.len()
                )));
            }
            for (c, &x) in v.iter().enumerate() {
                if !x.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "history function value at node index {j} (component {c})"
                    )));
                }
            }
            values.extend_from_slice(&v);
        }
        Ok(HistorySegment { dim, tau, nodes, values })
    }

    /// Constant segment φ ≡ value.
    pub fn constant(tau: f64, n: usize, value: &[f64]) -> Result<Self> {
        let v = value.to_vec();
        Self::from_function(v.len(), tau, n, move |_| v.clone())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Number of grid intervals N (there are N+1 nodes).
    pub fn intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Grid spacing τ/N.
    pub fn spacing(&self) -> f64 {
        self.tau / self.intervals() as f64
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Value at node j as a slice of length dim.
    pub fn value(&self, j: usize) -> &[f64] {
        &self.values[j * self.dim..(j + 1) * self.dim]
    }

    /// Raw node-major values, (N+1)·dim long.
    pub fn raw_values(&self) -> &[f64] {
        &self.values
    }

    /// Evaluates the segment at θ by linear interpolation.
    ///
    /// Exact (bitwise) at grid nodes. θ may overshoot the ends by up to half a
    /// grid step (clamped); beyond that it is an error.
    pub fn eval(&self, theta: f64) -> Result<Vec<f64>> {
        let n = self.intervals();
        let dx = self.spacing();
        if !theta.is_finite() {
            return Err(Error::OutOfRange(format!("eval at non-finite theta {theta}")));
        }
        if theta < -self.tau - 0.5 * dx || theta > 0.5 * dx {
            return Err(Error::OutOfRange(format!(
                "theta {theta} outside [{}, 0] (clamp tolerance {})",
                -self.tau,
                0.5 * dx
            )));
        }
        // Snap to the nearest node first: guarantees bitwise node exactness.
        let jr = ((theta + self.tau) / dx).round();
        let jr = (jr.max(0.0) as usize).min(n);
        if self.nodes[jr] == theta {
            return Ok(self.value(jr).to_vec());
        }
        let pos = ((theta + self.tau) / dx).clamp(0.0, n as f64);
        let j = (pos.floor() as usize).min(n - 1);
        let w = pos - j as f64;
        let a = self.value(j);
        let b = self.value(j + 1);
        Ok(a.iter().zip(b).map(|(x, y)| x + w * (y - x)).collect())
    }

    /// Sup norm: max over grid nodes of the Euclidean norm of the value.
    ///
    /// This is the exact sup norm of the piecewise-linear interpolant (the
    /// Euclidean norm is convex, so maxima sit at nodes).
    pub fn sup_norm(&self) -> f64 {
        (0..=self.intervals())
            .map(|j| euclid(self.value(j)))
            .fold(0.0, f64::max)
    }

    /// Resamples onto a new uniform grid with m intervals (linear interpolation).
    pub fn resample(&self, m: usize) -> Result<Self> {
        let nodes = uniform_nodes(self.tau, m);
        let mut values = Vec::with_capacity((m + 1) * self.dim);
        for &theta in &nodes {
            values.extend_from_slice(&self.eval(theta)?);
        }
        Ok(HistorySegment { dim: self.dim, tau: self.tau, nodes, values })
    }

    /// Pointwise sum with another segment on the identical grid.
    pub fn add(&self, other: &HistorySegment) -> Result<Self> {
        if self.dim != other.dim
            || self.tau != other.tau
            || self.intervals() != other.intervals()
        {
            return Err(Error::invalid("segment add requires matching dim, tau and grid"));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        Ok(HistorySegment { dim: self.dim, tau: self.tau, nodes: self.nodes.clone(), values })
    }

    /// Pointwise scaling by a real factor.
    pub fn scale(&self, factor: f64) -> Self {
        let values = self.values.iter().map(|v| factor * v).collect();
        HistorySegment {
            dim: self.dim,
            tau: self.tau,
            nodes: self.nodes.clone(),
            values,
        }
    }

    /// Sup-norm distance to another segment on the identical grid.
    pub fn distance(&self, other: &HistorySegment) -> Result<f64> {
        Ok(self.add(&other.scale(-1.0))?.sup_norm())
    }
}

/// θ_j = −τ + j·(τ/N), with the endpoints −τ and 0 exact.
fn uniform_nodes(tau: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|j| tau * (j as f64 / n as f64) - tau)
        .collect()
}

pub(crate) fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn nodes_hit_endpoints_exactly() {
        for &(tau, n) in &[(1.0, 4), (2.0, 7), (0.3, 33), (17.0, 5)] {
            let seg = HistorySegment::constant(tau, n, &[1.0]).unwrap();
            assert_eq!(seg.nodes()[0], -tau);
            assert_eq!(*seg.nodes().last().unwrap(), 0.0);
        }
    }

    #[test]
    fn eval_is_bitwise_exact_at_nodes() {
        let seg =
            HistorySegment::from_function(2, 1.5, 9, |t| vec![t.sin(), t * t - 0.5]).unwrap();
        for j in 0..=9 {
            let theta = seg.nodes()[j];
            assert_eq!(seg.eval(theta).unwrap(), seg.value(j).to_vec());
        }
    }

    #[test]
    fn eval_interpolates_linearly() {
        // φ(θ) = 2θ + 1 is reproduced exactly by linear interpolation.
        let seg = HistorySegment::from_function(1, 1.0, 4, |t| vec![2.0 * t + 1.0]).unwrap();
        for &theta in &[-0.9, -0.65, -0.3, -0.0625] {
            assert_relative_eq!(seg.eval(theta).unwrap()[0], 2.0 * theta + 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn eval_clamps_half_step_and_rejects_beyond() {
        let seg = HistorySegment::constant(1.0, 4, &[3.0]).unwrap();
        // half a grid step is 0.125
        assert_eq!(seg.eval(0.1).unwrap(), vec![3.0]);
        assert_eq!(seg.eval(-1.1).unwrap(), vec![3.0]);
        assert!(matches!(seg.eval(0.2), Err(Error::OutOfRange(_))));
        assert!(matches!(seg.eval(-1.2), Err(Error::OutOfRange(_))));
        assert!(seg.eval(f64::NAN).is_err());
    }

    #[test]
    fn from_function_reports_offending_node() {
        // τ=1, N=4: θ=0 is node index 4.
        let err = HistorySegment::from_function(1, 1.0, 4, |t| {
            vec![if t == 0.0 { f64::NAN } else { 1.0 }]
        })
        .unwrap_err();
        match err {
            Error::NonFinite(msg) => assert!(msg.contains("node index 4"), "{msg}"),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn constructor_rejects_bad_shapes() {
        assert!(HistorySegment::new(0, 1.0, vec![1.0, 2.0]).is_err());
        assert!(HistorySegment::new(1, 0.0, vec![1.0, 2.0]).is_err());
        assert!(HistorySegment::new(1, -1.0, vec![1.0, 2.0]).is_err());
        assert!(HistorySegment::new(2, 1.0, vec![1.0, 2.0, 3.0]).is_err()); // not k*dim
        assert!(HistorySegment::new(2, 1.0, vec![1.0, 2.0]).is_err()); // single node
        assert!(HistorySegment::new(1, 1.0, vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn sup_norm_of_known_segment() {
        let seg = HistorySegment::from_function(2, 2.0, 8, |t| vec![t, 1.0]).unwrap();
        // max Euclidean norm at θ=−2: √(4+1)
        assert_relative_eq!(seg.sup_norm(), 5.0_f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn resample_preserves_piecewise_linear_data() {
        let seg = HistorySegment::from_function(1, 1.0, 4, |t| vec![3.0 * t - 1.0]).unwrap();
        let fine = seg.resample(16).unwrap();
        for (j, &theta) in fine.nodes().iter().enumerate() {
            assert_relative_eq!(fine.value(j)[0], 3.0 * theta - 1.0, epsilon = 1e-14);
        }
    }

    proptest! {
        // ‖cφ‖ = |c|·‖φ‖ up to round-off.
        #[test]
        fn sup_norm_homogeneous(c in -10.0..10.0f64, vals in proptest::collection::vec(-5.0..5.0f64, 6..40)) {
            let seg = HistorySegment::new(1, 1.0, vals).unwrap();
            let lhs = seg.scale(c).sup_norm();
            let rhs = c.abs() * seg.sup_norm();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
        }

        // ‖φ+ψ‖ ≤ ‖φ‖ + ‖ψ‖ (+ round-off).
        #[test]
        fn sup_norm_triangle(
            a in proptest::collection::vec(-5.0..5.0f64, 11),
            b in proptest::collection::vec(-5.0..5.0f64, 11),
        ) {
            let sa = HistorySegment::new(1, 1.0, a).unwrap();
            let sb = HistorySegment::new(1, 1.0, b).unwrap();
            let sum = sa.add(&sb).unwrap();
            prop_assert!(sum.sup_norm() <= sa.sup_norm() + sb.sup_norm() + 1e-12);
        }
    }
}
