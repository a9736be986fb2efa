//! Exact algebra of functions on `[0, 1]` of the form `Σ c·tᵖ·e^{−k/t}·e^{iθt}`.
//!
//! Every object the construction touches (trajectories, forcings, their
//! derivatives and the solved amplitudes) lives in this algebra, so all
//! identities can be checked term by term.

mod quad;
pub(crate) mod sup;

pub use quad::{antiderivative_values, QuadratureOptions};
pub use sup::{sup_norm, term_sup, Grid, SupEstimate};

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact rate `k` in the flat factor `e^{−k/t}`.
pub type Rate = Ratio<i64>;

/// Relative size below which a merged coefficient is treated as an exact cancellation.
const CANCELLATION_EPS: f64 = 1e-14;

pub(crate) fn rate_f64(r: &Rate) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// One term `c·tᵖ·e^{−k/t}·e^{iθt}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlatTerm {
    pub coeff: Complex64,
    pub t_pow: i32,
    pub flat_rate: Rate,
    pub osc: i64,
}

impl FlatTerm {
    pub fn new(coeff: Complex64, t_pow: i32, flat_rate: Rate, osc: i64) -> Self {
        Self { coeff, t_pow, flat_rate, osc }
    }

    /// `c·e^{−k/t}` with `k = num/den`.
    pub fn flat(coeff: Complex64, num: i64, den: i64) -> Self {
        Self::new(coeff, 0, Rate::new(num, den), 0)
    }

    pub fn key(&self) -> (Rate, i32, i64) {
        (self.flat_rate, self.t_pow, self.osc)
    }

    fn key_cmp(&self, other: &Self) -> Ordering {
        self.flat_rate
            .cmp(&other.flat_rate)
            .then(self.t_pow.cmp(&other.t_pow))
            .then(self.osc.cmp(&other.osc))
    }

    /// Nonnegative rate, and a bounded power of `t` when the rate vanishes.
    pub fn is_admissible(&self) -> bool {
        let zero = Rate::from_integer(0);
        self.flat_rate > zero || (self.flat_rate == zero && self.t_pow >= 0)
    }

    pub fn rate(&self) -> f64 {
        rate_f64(&self.flat_rate)
    }

    /// `p·ln t − k/t`, the log of the real envelope without the coefficient.
    pub fn log_envelope(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return f64::NEG_INFINITY;
        }
        f64::from(self.t_pow) * t.ln() - self.rate() / t
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        if t <= 0.0 {
            let zero = Rate::from_integer(0);
            return if self.flat_rate == zero && self.t_pow == 0 { self.coeff } else { Complex64::new(0.0, 0.0) };
        }
        self.eval_at(t, t.ln(), 1.0 / t)
    }

    #[inline]
    pub(crate) fn eval_at(&self, t: f64, ln_t: f64, inv_t: f64) -> Complex64 {
        let lm = f64::from(self.t_pow) * ln_t - self.rate() * inv_t;
        if lm < -745.0 {
            return Complex64::new(0.0, 0.0);
        }
        let mag = lm.exp();
        let phase = self.osc as f64 * t;
        self.coeff * Complex64::from_polar(mag, phase)
    }

    /// Exact supremum of `|term|` over `(0, 1]`.
    pub fn sup(&self) -> f64 {
        self.coeff.norm() * term_sup(self.t_pow, self.rate())
    }

    pub fn conj(&self) -> Self {
        Self { coeff: self.coeff.conj(), osc: -self.osc, ..*self }
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self {
            coeff: self.coeff * other.coeff,
            t_pow: self.t_pow + other.t_pow,
            flat_rate: self.flat_rate + other.flat_rate,
            osc: self.osc + other.osc,
        }
    }
}

/// Canonical finite sum of [`FlatTerm`]s, sorted by `(flat_rate, t_pow, osc)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlatFn {
    terms: Vec<FlatTerm>,
}

fn canonicalize(mut terms: Vec<FlatTerm>) -> Vec<FlatTerm> {
    terms.sort_unstable_by(|a, b| a.key_cmp(b));
    let mut out: Vec<FlatTerm> = Vec::with_capacity(terms.len());
    let mut i = 0;
    while i < terms.len() {
        let mut acc = terms[i];
        let mut mass = acc.coeff.norm();
        let mut j = i + 1;
        while j < terms.len() && terms[j].key_cmp(&acc) == Ordering::Equal {
            acc.coeff += terms[j].coeff;
            mass += terms[j].coeff.norm();
            j += 1;
        }
        let size = acc.coeff.norm();
        if size != 0.0 && size > CANCELLATION_EPS * mass {
            out.push(acc);
        }
        i = j;
    }
    out
}

impl FlatFn {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn constant(c: Complex64) -> Self {
        Self::from_terms(vec![FlatTerm::new(c, 0, Rate::from_integer(0), 0)])
    }

    pub fn monomial(term: FlatTerm) -> Self {
        Self::from_terms(vec![term])
    }

    /// Canonicalizes without checking admissibility.
    pub fn from_terms(terms: Vec<FlatTerm>) -> Self {
        Self { terms: canonicalize(terms) }
    }

    /// Canonicalizes and rejects terms outside the algebra.
    pub fn try_from_terms(terms: Vec<FlatTerm>) -> Result<Self> {
        if let Some(bad) = terms.iter().find(|t| !t.is_admissible()) {
            return Err(Error::FlatnessViolation(format!(
                "term with rate {} and t-power {} is unbounded at t = 0",
                bad.flat_rate, bad.t_pow
            )));
        }
        Ok(Self::from_terms(terms))
    }

    pub fn terms(&self) -> &[FlatTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut v = Vec::with_capacity(self.len() + other.len());
        v.extend_from_slice(&self.terms);
        v.extend_from_slice(&other.terms);
        Self::from_terms(v)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut v = Vec::with_capacity(self.len() * other.len());
        for a in &self.terms {
            for b in &other.terms {
                v.push(a.mul(b));
            }
        }
        Self::from_terms(v)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        if c == Complex64::new(0.0, 0.0) {
            return Self::zero();
        }
        Self::from_terms(self.terms.iter().map(|t| FlatTerm { coeff: t.coeff * c, ..*t }).collect())
    }

    pub fn conj(&self) -> Self {
        Self::from_terms(self.terms.iter().map(FlatTerm::conj).collect())
    }

    /// Multiplies by `e^{iδt}`.
    pub fn shift_osc(&self, delta: i64) -> Self {
        Self { terms: self.terms.iter().map(|t| FlatTerm { osc: t.osc + delta, ..*t }).collect() }
    }

    pub fn derivative(&self) -> Self {
        let zero = Rate::from_integer(0);
        let mut v = Vec::with_capacity(3 * self.len());
        for t in &self.terms {
            if t.t_pow != 0 {
                v.push(FlatTerm { coeff: t.coeff * f64::from(t.t_pow), t_pow: t.t_pow - 1, ..*t });
            }
            if t.flat_rate != zero {
                v.push(FlatTerm { coeff: t.coeff * t.rate(), t_pow: t.t_pow - 2, ..*t });
            }
            if t.osc != 0 {
                v.push(FlatTerm { coeff: t.coeff * Complex64::new(0.0, t.osc as f64), ..*t });
            }
        }
        Self::from_terms(v)
    }

    /// Exact quotient by a single monomial.
    pub fn div_by_monomial(&self, m: &FlatTerm) -> Result<Self> {
        if m.coeff == Complex64::new(0.0, 0.0) {
            return Err(Error::DivisionByZeroMonomial);
        }
        let zero = Rate::from_integer(0);
        let inv = 1.0 / m.coeff;
        let mut v = Vec::with_capacity(self.len());
        for t in &self.terms {
            let rate = t.flat_rate - m.flat_rate;
            let t_pow = t.t_pow - m.t_pow;
            if rate < zero || (rate == zero && t_pow < 0) {
                return Err(Error::FlatnessViolation(format!(
                    "quotient term would have rate {rate} and t-power {t_pow}"
                )));
            }
            v.push(FlatTerm { coeff: t.coeff * inv, t_pow, flat_rate: rate, osc: t.osc - m.osc });
        }
        Ok(Self::from_terms(v))
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        if t <= 0.0 {
            return self.terms.iter().map(|x| x.eval(0.0)).sum();
        }
        let (ln_t, inv_t) = (t.ln(), 1.0 / t);
        self.terms.iter().map(|x| x.eval_at(t, ln_t, inv_t)).sum()
    }

    /// Smallest flat rate among the terms, `None` for the zero function.
    pub fn min_rate(&self) -> Option<Rate> {
        self.terms.first().map(|t| t.flat_rate)
    }

    pub fn max_abs_osc(&self) -> i64 {
        self.terms.iter().map(|t| t.osc.abs()).max().unwrap_or(0)
    }

    /// Triangle-inequality bound `Σ sup|term| ≥ sup|f|`.
    pub fn magnitude(&self) -> f64 {
        self.terms.iter().map(FlatTerm::sup).sum()
    }

    /// True when every term has a strictly positive flat rate.
    pub fn is_flat(&self) -> bool {
        let zero = Rate::from_integer(0);
        self.terms.iter().all(|t| t.flat_rate > zero)
    }

    /// Largest term-wise discrepancy `sup|c_a − c_b|·envelope` between two functions.
    pub fn max_term_gap(&self, other: &Self) -> f64 {
        let diff = self.sub(other);
        diff.terms.iter().map(FlatTerm::sup).fold(0.0, f64::max)
    }

    /// Term-wise equality up to `tol` relative to the larger magnitude (floored at 1).
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        let scale = self.magnitude().max(other.magnitude()).max(1.0);
        let (a, b) = (&self.terms, &other.terms);
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            let order = match (a.get(i), b.get(j)) {
                (Some(x), Some(y)) => x.key_cmp(y),
                (Some(_), None) => Ordering::Less,
                _ => Ordering::Greater,
            };
            let gap = match order {
                Ordering::Less => {
                    i += 1;
                    a[i - 1].sup()
                }
                Ordering::Greater => {
                    j += 1;
                    b[j - 1].sup()
                }
                Ordering::Equal => {
                    let (x, y) = (a[i], b[j]);
                    i += 1;
                    j += 1;
                    (x.coeff - y.coeff).norm() * term_sup(x.t_pow, x.rate())
                }
            };
            if gap > tol * scale {
                return false;
            }
        }
        true
    }

    /// Splits into groups sharing one oscillation rate, ordered by `osc`.
    pub fn phase_groups(&self) -> Vec<(i64, Vec<FlatTerm>)> {
        let mut terms = self.terms.clone();
        terms.sort_by(|a, b| a.osc.cmp(&b.osc).then(a.key_cmp(b)));
        let mut out: Vec<(i64, Vec<FlatTerm>)> = Vec::new();
        for t in terms {
            match out.last_mut() {
                Some((osc, group)) if *osc == t.osc => group.push(t),
                _ => out.push((t.osc, vec![t])),
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("flat function serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(Error::from_json)
    }
}

impl fmt::Display for FlatFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({:.6}{:+.6}i)", t.coeff.re, t.coeff.im)?;
            if t.t_pow != 0 {
                write!(f, "·t^{}", t.t_pow)?;
            }
            if *t.flat_rate.numer() != 0 {
                write!(f, "·e^(-{}/t)", t.flat_rate)?;
            }
            if t.osc != 0 {
                write!(f, "·e^(i{}t)", t.osc)?;
            }
        }
        Ok(())
    }
}

impl Add for &FlatFn {
    type Output = FlatFn;
    fn add(self, rhs: &FlatFn) -> FlatFn {
        FlatFn::add(self, rhs)
    }
}

impl Sub for &FlatFn {
    type Output = FlatFn;
    fn sub(self, rhs: &FlatFn) -> FlatFn {
        FlatFn::sub(self, rhs)
    }
}

impl Mul for &FlatFn {
    type Output = FlatFn;
    fn mul(self, rhs: &FlatFn) -> FlatFn {
        FlatFn::mul(self, rhs)
    }
}

impl Neg for &FlatFn {
    type Output = FlatFn;
    fn neg(self) -> FlatFn {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermRecord {
    re: f64,
    im: f64,
    p: i32,
    k_num: i64,
    k_den: i64,
    theta: i64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlatFnRecord {
    terms: Vec<TermRecord>,
}

impl Serialize for FlatFn {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let record = FlatFnRecord {
            terms: self
                .terms
                .iter()
                .map(|t| TermRecord {
                    re: t.coeff.re,
                    im: t.coeff.im,
                    p: t.t_pow,
                    k_num: *t.flat_rate.numer(),
                    k_den: *t.flat_rate.denom(),
                    theta: t.osc,
                })
                .collect(),
        };
        record.serialize(s)
    }
}

impl<'de> Deserialize<'de> for FlatFn {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let record = FlatFnRecord::deserialize(d)?;
        let mut terms = Vec::with_capacity(record.terms.len());
        for (i, r) in record.terms.iter().enumerate() {
            if r.k_den <= 0 {
                return Err(D::Error::custom(format!("terms[{i}]: k_den must be positive")));
            }
            let rate = Rate::new(r.k_num, r.k_den);
            if *rate.numer() != r.k_num || *rate.denom() != r.k_den {
                return Err(D::Error::custom(format!("terms[{i}]: rate {}/{} is not reduced", r.k_num, r.k_den)));
            }
            if !r.re.is_finite() || !r.im.is_finite() {
                return Err(D::Error::custom(format!("terms[{i}]: non-finite coefficient")));
            }
            let term = FlatTerm::new(Complex64::new(r.re, r.im), r.p, rate, r.theta);
            if !term.is_admissible() {
                return Err(D::Error::custom(format!(
                    "terms[{i}]: rate {rate} with t-power {} leaves the algebra",
                    r.p
                )));
            }
            terms.push(term);
        }
        Ok(FlatFn::from_terms(terms))
    }
}
