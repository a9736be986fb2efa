use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ModeFn;
use crate::error::{Error, Result};
use crate::flatfn::{FlatFn, FlatTerm};

/// Which nonlinearity drives the equation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `|u|²u` with the mean-subtracted modification: restricted main sum plus diagonal.
    CubicModified,
    /// `u²`.
    QuadSquare,
    /// `ū²`.
    QuadConjSquare,
    /// `|u|² − mean(|u|²)`.
    QuadModulusCentered,
}

impl Variant {
    pub fn is_cubic(self) -> bool {
        matches!(self, Variant::CubicModified)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySpec {
    pub omega: f64,
    pub variant: Variant,
}

impl NonlinearitySpec {
    pub fn new(omega: f64, variant: Variant) -> Result<Self> {
        if omega == 0.0 || !omega.is_finite() {
            return Err(Error::InvalidConfig("coupling omega must be finite and nonzero".into()));
        }
        Ok(Self { omega, variant })
    }

    pub fn cubic(omega: f64) -> Self {
        Self { omega, variant: Variant::CubicModified }
    }

    pub fn quad_square(omega: f64) -> Self {
        Self { omega, variant: Variant::QuadSquare }
    }

    fn i_omega(&self) -> Complex64 {
        Complex64::new(0.0, self.omega)
    }
}

/// Resonance phase `n² − j² + k² − l²`.
pub fn sigma(j: i64, k: i64, l: i64, n: i64) -> i128 {
    let sq = |x: i64| i128::from(x) * i128::from(x);
    sq(n) - sq(j) + sq(k) - sq(l)
}

pub(crate) fn phase_i64(phase: i128) -> i64 {
    i64::try_from(phase).expect("resonance phase exceeds the 64-bit range")
}

/// Raw-term accumulator that canonicalizes a mode once its buffer grows large.
pub(crate) struct Accumulator {
    raw: BTreeMap<i64, Vec<FlatTerm>>,
}

impl Accumulator {
    pub(crate) fn new() -> Self {
        Self { raw: BTreeMap::new() }
    }

    pub(crate) fn push(&mut self, n: i64, f: &FlatFn, scale: Complex64, osc_shift: i64) {
        let buf = self.raw.entry(n).or_default();
        buf.extend(f.terms().iter().map(|t| FlatTerm { coeff: t.coeff * scale, osc: t.osc + osc_shift, ..*t }));
        if buf.len() > 1 << 20 {
            let merged = FlatFn::from_terms(std::mem::take(buf));
            buf.extend_from_slice(merged.terms());
        }
    }

    pub(crate) fn finish(self) -> ModeFn {
        ModeFn::from_raw(self.raw)
    }
}

/// Restricted cubic sum over triples accepted by `keep(j, k, l)`; `keep` must be symmetric in `j ↔ l`.
pub fn n_main_filtered(y: &ModeFn, spec: &NonlinearitySpec, keep: impl Fn(i64, i64, i64) -> bool) -> ModeFn {
    let modes: Vec<(i64, &FlatFn)> = y.iter().collect();
    let conj: Vec<FlatFn> = modes.iter().map(|(_, f)| f.conj()).collect();
    let mut acc = Accumulator::new();
    for a in 0..modes.len() {
        for b in a..modes.len() {
            let (j, yj) = modes[a];
            let (l, yl) = modes[b];
            let mut product: Option<FlatFn> = None;
            for (c, (k, _)) in modes.iter().enumerate() {
                let k = *k;
                if k == j || k == l || !keep(j, k, l) {
                    continue;
                }
                let pair = product.get_or_insert_with(|| yj.mul(yl));
                let n = j - k + l;
                let mult = if a == b { 1.0 } else { 2.0 };
                let phase = phase_i64(sigma(j, k, l, n));
                acc.push(n, &pair.mul(&conj[c]), spec.i_omega() * mult, phase);
            }
        }
    }
    acc.finish()
}

/// `[𝒩_main(y)]_n = iω Σ_{j−k+l=n, j≠n, l≠n} y_j ȳ_k y_l e^{iσ(j,k,l,n)t}`.
pub fn n_main(y: &ModeFn, spec: &NonlinearitySpec) -> Result<ModeFn> {
    require_cubic(spec)?;
    Ok(n_main_filtered(y, spec, |_, _, _| true))
}

/// `[𝒩_diag(y)]_n = −iω|y_n|²y_n`.
pub fn n_diag(y: &ModeFn, spec: &NonlinearitySpec) -> Result<ModeFn> {
    require_cubic(spec)?;
    Ok(n_diag_unchecked(y, spec))
}

fn n_diag_unchecked(y: &ModeFn, spec: &NonlinearitySpec) -> ModeFn {
    y.map(|_, f| f.mul(&f.conj()).mul(f).scale(-spec.i_omega()))
}

fn require_cubic(spec: &NonlinearitySpec) -> Result<()> {
    if spec.variant.is_cubic() {
        Ok(())
    } else {
        Err(Error::VariantMismatch(format!("{:?} is not the cubic nonlinearity", spec.variant)))
    }
}

/// How a quadratic variant couples an ordered pair `(j, l)`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PairRule {
    pub variant: Variant,
}

impl PairRule {
    pub(crate) fn output(&self, j: i64, l: i64) -> i64 {
        match self.variant {
            Variant::QuadSquare => j + l,
            Variant::QuadConjSquare => -(j + l),
            _ => j - l,
        }
    }

    pub(crate) fn phase(&self, j: i64, l: i64) -> i128 {
        let sq = |x: i64| i128::from(x) * i128::from(x);
        let n = self.output(j, l);
        match self.variant {
            Variant::QuadSquare => sq(n) - sq(j) - sq(l),
            Variant::QuadConjSquare => sq(n) + sq(j) + sq(l),
            _ => sq(n) - sq(j) + sq(l),
        }
    }

    pub(crate) fn admits(&self, j: i64, l: i64) -> bool {
        !matches!(self.variant, Variant::QuadModulusCentered) || j != l
    }

    /// Both factors of the ordered pair, conjugated as the variant requires.
    pub(crate) fn factors(&self, yj: &FlatFn, yl: &FlatFn) -> FlatFn {
        match self.variant {
            Variant::QuadSquare => yj.mul(yl),
            Variant::QuadConjSquare => yj.conj().mul(&yl.conj()),
            _ => yj.mul(&yl.conj()),
        }
    }

    /// Ordered pairs are symmetric for `u²` and `ū²`, so those sums run over `j ≤ l` with weight 2.
    fn symmetric(&self) -> bool {
        !matches!(self.variant, Variant::QuadModulusCentered)
    }
}

/// Quadratic sum over ordered pairs accepted by `keep(j, l)`.
pub fn q_filtered(y: &ModeFn, spec: &NonlinearitySpec, keep: impl Fn(i64, i64) -> bool) -> Result<ModeFn> {
    if spec.variant.is_cubic() {
        return Err(Error::VariantMismatch("cubic spec passed to the quadratic nonlinearity".into()));
    }
    let rule = PairRule { variant: spec.variant };
    let modes: Vec<(i64, &FlatFn)> = y.iter().collect();
    let mut acc = Accumulator::new();
    for a in 0..modes.len() {
        let start = if rule.symmetric() { a } else { 0 };
        for (b, &(l, yl)) in modes.iter().enumerate().skip(start) {
            let (j, yj) = modes[a];
            if !rule.admits(j, l) || !keep(j, l) {
                continue;
            }
            let mult = if rule.symmetric() && a != b { 2.0 } else { 1.0 };
            let phase = phase_i64(rule.phase(j, l));
            acc.push(rule.output(j, l), &rule.factors(yj, yl), spec.i_omega() * mult, phase);
        }
    }
    Ok(acc.finish())
}

pub fn q_nonlinearity(y: &ModeFn, spec: &NonlinearitySpec) -> Result<ModeFn> {
    q_filtered(y, spec, |_, _| true)
}

/// The full nonlinearity of the variant.
pub fn nonlinearity(y: &ModeFn, spec: &NonlinearitySpec) -> ModeFn {
    if spec.variant.is_cubic() {
        n_main_filtered(y, spec, |_, _, _| true).add(&n_diag_unchecked(y, spec))
    } else {
        q_nonlinearity(y, spec).expect("quadratic variant")
    }
}

/// `dx/dt − 𝒩(x)`.
pub fn residual(x: &ModeFn, spec: &NonlinearitySpec) -> ModeFn {
    let mut r = x.derivative().sub(&nonlinearity(x, spec));
    r.note = x.note.clone();
    r
}

/// Direction of the free-evolution conjugation `y_n = e^{in²t}û_n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    ToU,
    ToY,
}

pub fn u_side(v: &ModeFn, direction: Direction) -> ModeFn {
    v.map(|n, f| {
        let sq = phase_i64(i128::from(n) * i128::from(n));
        match direction {
            Direction::ToU => f.shift_osc(-sq),
            Direction::ToY => f.shift_osc(sq),
        }
    })
}
