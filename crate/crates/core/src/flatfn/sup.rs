use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::FlatFn;

/// Sampling grid on `[0, 1]`: uniform points plus a geometric refinement `2⁻ʲ` near 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub uniform: usize,
    pub geometric: u32,
}

impl Default for Grid {
    fn default() -> Self {
        Self { uniform: 512, geometric: 20 }
    }
}

impl Grid {
    pub fn new(uniform: usize, geometric: u32) -> Self {
        Self { uniform: uniform.max(2), geometric }
    }

    /// Sorted, deduplicated sample points including both endpoints.
    pub fn points(&self) -> Vec<f64> {
        let n = self.uniform.max(2);
        let mut ts: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        ts.extend((1..=self.geometric).map(|j| 0.5f64.powi(j as i32)));
        ts.sort_by(|a, b| a.partial_cmp(b).expect("grid points are finite"));
        ts.dedup();
        ts
    }
}

/// A sampled maximum together with a derivative-certified upper bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupEstimate {
    pub estimate: f64,
    pub bound: f64,
}

impl SupEstimate {
    pub fn zero() -> Self {
        Self { estimate: 0.0, bound: 0.0 }
    }

    /// Relative width `(bound − estimate)/estimate`.
    pub fn spread(&self) -> f64 {
        if self.estimate == 0.0 {
            if self.bound == 0.0 { 0.0 } else { f64::INFINITY }
        } else {
            (self.bound - self.estimate) / self.estimate
        }
    }
}

/// `sup_{t∈(0,1]} tᵖ e^{−k/t}`.
pub fn term_sup(t_pow: i32, rate: f64) -> f64 {
    if rate == 0.0 {
        return if t_pow >= 0 { 1.0 } else { f64::INFINITY };
    }
    if t_pow >= 0 {
        return (-rate).exp();
    }
    let peak = rate / f64::from(-t_pow);
    if peak >= 1.0 {
        (-rate).exp()
    } else {
        (f64::from(t_pow) * peak.ln() + f64::from(t_pow)).exp()
    }
}

/// Given samples of a nonnegative `Φ` and of `Φ′` on sorted points, returns the
/// sampled maximum and the interval-wise bound `max(Φᵢ, Φᵢ₊₁) + ½Δᵢ·max|Φ′|`.
pub(crate) fn certify(ts: &[f64], phi: &[f64], dphi: &[f64]) -> (f64, f64) {
    let est = phi.iter().cloned().fold(0.0, f64::max);
    let mut bound = est;
    for i in 0..ts.len().saturating_sub(1) {
        let dt = ts[i + 1] - ts[i];
        let slope = dphi[i].abs().max(dphi[i + 1].abs());
        let local = phi[i].max(phi[i + 1]) + 0.5 * dt * slope;
        bound = bound.max(local);
    }
    (est, bound)
}

/// Sampled sup of `|f|` with a certified bound built from the exact derivative of `|f|²`.
pub fn sup_norm(f: &FlatFn, grid: &Grid) -> SupEstimate {
    if f.is_zero() {
        return SupEstimate::zero();
    }
    let ts = grid.points();
    let df = f.derivative();
    let mut phi = Vec::with_capacity(ts.len());
    let mut dphi = Vec::with_capacity(ts.len());
    for &t in &ts {
        let v = f.eval(t);
        let dv: Complex64 = df.eval(t);
        phi.push(v.norm_sqr());
        dphi.push(2.0 * (dv * v.conj()).re);
    }
    let (est, bound) = certify(&ts, &phi, &dphi);
    let est = est.sqrt();
    let bound = bound.sqrt().min(f.magnitude()).max(est);
    SupEstimate { estimate: est, bound }
}
