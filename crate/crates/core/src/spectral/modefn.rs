use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flatfn::{FlatFn, FlatTerm};

/// Finitely supported map from Fourier mode to trajectory. Zero entries are never stored.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModeFn {
    entries: BTreeMap<i64, FlatFn>,
    pub note: String,
}

impl ModeFn {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn with_note(note: impl Into<String>) -> Self {
        Self { entries: BTreeMap::new(), note: note.into() }
    }

    pub fn single(n: i64, f: FlatFn) -> Self {
        let mut v = Self::zero();
        v.set(n, f);
        v
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (i64, FlatFn)>) -> Self {
        let mut v = Self::zero();
        for (n, f) in entries {
            v.add_to(n, &f);
        }
        v
    }

    /// Builds from raw term lists, canonicalizing each mode once.
    pub(crate) fn from_raw(raw: BTreeMap<i64, Vec<FlatTerm>>) -> Self {
        let mut v = Self::zero();
        for (n, terms) in raw {
            v.set(n, FlatFn::from_terms(terms));
        }
        v
    }

    pub fn set(&mut self, n: i64, f: FlatFn) {
        if f.is_zero() {
            self.entries.remove(&n);
        } else {
            self.entries.insert(n, f);
        }
    }

    pub fn add_to(&mut self, n: i64, f: &FlatFn) {
        let sum = match self.entries.get(&n) {
            Some(old) => old.add(f),
            None => f.clone(),
        };
        self.set(n, sum);
    }

    pub fn get(&self, n: i64) -> Option<&FlatFn> {
        self.entries.get(&n)
    }

    pub fn entry(&self, n: i64) -> FlatFn {
        self.entries.get(&n).cloned().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &FlatFn)> {
        self.entries.iter().map(|(n, f)| (*n, f))
    }

    pub fn support(&self) -> Vec<i64> {
        self.entries.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn term_count(&self) -> usize {
        self.entries.values().map(FlatFn::len).sum()
    }

    pub fn max_abs_mode(&self) -> i64 {
        self.entries.keys().map(|n| n.abs()).max().unwrap_or(0)
    }

    pub fn max_abs_osc(&self) -> i64 {
        self.entries.values().map(FlatFn::max_abs_osc).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (n, f) in other.iter() {
            out.add_to(n, f);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map(|_, f| f.scale(c))
    }

    /// Applies `op` entry-wise, dropping entries that become zero.
    pub fn map(&self, op: impl Fn(i64, &FlatFn) -> FlatFn) -> Self {
        let mut out = Self::with_note(self.note.clone());
        for (n, f) in self.iter() {
            out.set(n, op(n, f));
        }
        out
    }

    pub fn derivative(&self) -> Self {
        self.map(|_, f| f.derivative())
    }

    /// Keeps only the entries whose mode satisfies `keep`.
    pub fn restrict(&self, keep: impl Fn(i64) -> bool) -> Self {
        let mut out = Self::with_note(self.note.clone());
        for (n, f) in self.iter().filter(|(n, _)| keep(*n)) {
            out.set(n, f.clone());
        }
        out
    }

    pub fn eval(&self, t: f64) -> BTreeMap<i64, Complex64> {
        self.iter().map(|(n, f)| (n, f.eval(t))).collect()
    }

    /// True when every entry vanishes at `t = 0`.
    pub fn is_zero_at_origin(&self) -> bool {
        self.entries.values().all(|f| f.eval(0.0).norm() == 0.0)
    }

    pub fn is_flat(&self) -> bool {
        self.entries.values().all(FlatFn::is_flat)
    }

    /// Entry-wise term comparison, see [`FlatFn::approx_eq`].
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        let modes: std::collections::BTreeSet<i64> = self.entries.keys().chain(other.entries.keys()).copied().collect();
        modes.into_iter().all(|n| self.entry(n).approx_eq(&other.entry(n), tol))
    }

    /// Mode and size of the worst entry-wise discrepancy, relative to the entry's magnitude.
    pub fn worst_gap(&self, other: &Self) -> Option<(i64, f64)> {
        let modes: std::collections::BTreeSet<i64> = self.entries.keys().chain(other.entries.keys()).copied().collect();
        modes
            .into_iter()
            .map(|n| {
                let (a, b) = (self.entry(n), other.entry(n));
                let scale = a.magnitude().max(b.magnitude()).max(1.0);
                (n, a.max_term_gap(&b) / scale)
            })
            .max_by(|x, y| x.1.total_cmp(&y.1))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("mode function serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(Error::from_json)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModeRecord {
    n: i64,
    #[serde(rename = "fn")]
    func: FlatFn,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModeFnRecord {
    modes: Vec<ModeRecord>,
    note: String,
}

impl Serialize for ModeFn {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ModeFnRecord {
            modes: self.iter().map(|(n, f)| ModeRecord { n, func: f.clone() }).collect(),
            note: self.note.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ModeFn {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let record = ModeFnRecord::deserialize(d)?;
        let mut out = ModeFn::with_note(record.note);
        for m in record.modes {
            if out.entries.contains_key(&m.n) {
                return Err(D::Error::custom(format!("mode {} listed twice", m.n)));
            }
            out.set(m.n, m.func);
        }
        Ok(out)
    }
}
