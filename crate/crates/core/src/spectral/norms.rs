use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ModeFn;
use crate::error::Result;
use crate::flatfn::{antiderivative_values, FlatFn, Grid, QuadratureOptions, SupEstimate};

/// Spatial sequence norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Spatial {
    /// `(Σ|a_n|²(1+n²)ˢ)^{1/2}`.
    L2s { s: f64 },
    /// `(Σ|a_n|ᵖ)^{1/p}`.
    Lp { p: f64 },
}

impl Spatial {
    pub fn weight(&self, n: i64) -> f64 {
        match *self {
            Spatial::L2s { s } => (1.0 + (n as f64) * (n as f64)).powf(s),
            Spatial::Lp { .. } => 1.0,
        }
    }

    pub fn exponent(&self) -> f64 {
        match *self {
            Spatial::L2s { .. } => 2.0,
            Spatial::Lp { p } => p,
        }
    }

    /// Combines per-mode magnitudes into the sequence norm.
    pub fn combine(&self, values: impl IntoIterator<Item = (i64, f64)>) -> f64 {
        let q = self.exponent();
        values.into_iter().map(|(n, a)| self.weight(n) * a.powf(q)).sum::<f64>().powf(1.0 / q)
    }

    pub fn label(&self) -> String {
        match *self {
            Spatial::L2s { s } => format!("l2s(s={s})"),
            Spatial::Lp { p } => format!("lp(p={p})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeMode {
    /// `sup_t ‖v(t)‖`.
    C0,
    /// `sup_t ‖∫₀ᵗ v‖`.
    Cminus1,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormSpace {
    pub spatial: Spatial,
    pub time: TimeMode,
}

impl NormSpace {
    pub fn new(spatial: Spatial, time: TimeMode) -> Self {
        Self { spatial, time }
    }

    pub fn l2s(s: f64, time: TimeMode) -> Self {
        Self { spatial: Spatial::L2s { s }, time }
    }

    pub fn lp(p: f64, time: TimeMode) -> Self {
        Self { spatial: Spatial::Lp { p }, time }
    }

    pub fn label(&self) -> String {
        let t = match self.time {
            TimeMode::C0 => "C0",
            TimeMode::Cminus1 => "C-1",
        };
        format!("{t}({})", self.spatial.label())
    }
}

/// Per-mode samples of a value and of its time derivative on a grid.
struct ModeSamples {
    n: i64,
    values: Vec<Complex64>,
    slopes: Vec<Complex64>,
}

fn sample_mode(n: i64, f: &FlatFn, time: TimeMode, ts: &[f64], opts: &QuadratureOptions) -> Result<ModeSamples> {
    match time {
        TimeMode::C0 => {
            let df = f.derivative();
            Ok(ModeSamples { n, values: ts.iter().map(|&t| f.eval(t)).collect(), slopes: ts.iter().map(|&t| df.eval(t)).collect() })
        }
        TimeMode::Cminus1 => {
            let values = antiderivative_values(f, ts, opts)?;
            Ok(ModeSamples { n, values, slopes: ts.iter().map(|&t| f.eval(t)).collect() })
        }
    }
}

fn certify_samples(spatial: &Spatial, ts: &[f64], samples: &[ModeSamples]) -> SupEstimate {
    let q = spatial.exponent();
    let mut phi = vec![0.0; ts.len()];
    let mut dphi = vec![0.0; ts.len()];
    for s in samples {
        let w = spatial.weight(s.n);
        for i in 0..ts.len() {
            let a = s.values[i].norm();
            if a == 0.0 {
                continue;
            }
            phi[i] += w * a.powf(q);
            dphi[i] += w * q * a.powf(q - 2.0) * (s.slopes[i] * s.values[i].conj()).re;
        }
    }
    let (est, bound) = crate::flatfn::sup::certify(ts, &phi, &dphi);
    SupEstimate { estimate: est.powf(1.0 / q), bound: bound.powf(1.0 / q) }
}

/// Time-sup of the spatial norm, with a derivative-certified upper bound.
pub fn norm(v: &ModeFn, space: &NormSpace, grid: &Grid) -> Result<SupEstimate> {
    norm_with(v, space, grid, &QuadratureOptions::default())
}

pub fn norm_with(v: &ModeFn, space: &NormSpace, grid: &Grid, opts: &QuadratureOptions) -> Result<SupEstimate> {
    if v.is_zero() {
        return Ok(SupEstimate::zero());
    }
    let ts = grid.points();
    let entries: Vec<(i64, &FlatFn)> = v.iter().collect();
    let samples: Vec<ModeSamples> =
        entries.par_iter().map(|(n, f)| sample_mode(*n, f, space.time, &ts, opts)).collect::<Result<_>>()?;
    let mut out = certify_samples(&space.spatial, &ts, &samples);
    if space.time == TimeMode::C0 {
        let triangle = space.spatial.combine(entries.iter().map(|(n, f)| (*n, f.magnitude())));
        out.bound = out.bound.min(triangle).max(out.estimate);
    }
    Ok(out)
}

/// Per-mode time-sup of `|v_n|` (C0) or `|∫₀ᵗ v_n|` (Cminus1), unweighted.
pub fn mode_sups(v: &ModeFn, time: TimeMode, grid: &Grid) -> Result<BTreeMap<i64, SupEstimate>> {
    let ts = grid.points();
    let opts = QuadratureOptions::default();
    let entries: Vec<(i64, &FlatFn)> = v.iter().collect();
    let samples: Vec<ModeSamples> =
        entries.par_iter().map(|(n, f)| sample_mode(*n, f, time, &ts, &opts)).collect::<Result<_>>()?;
    let unit = Spatial::Lp { p: 2.0 };
    Ok(samples.iter().map(|s| (s.n, certify_samples(&unit, &ts, std::slice::from_ref(s)))).collect())
}
