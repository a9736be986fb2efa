//! Choice of the fresh high frequencies `S†`.
//!
//! Each candidate pair is affine in a single free integer `m`. Every tuple that touches the new pair
//! turns into a forbidden interval of `m` (its output would land below the floor), so the first
//! admissible `m` is found by interval skipping. The exhaustive numeric checker then re-audits the
//! final set.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{PairRule, Variant};

/// Largest mode magnitude the selector will emit; keeps every phase `n²` comfortably inside `i64`.
pub const MODE_LIMIT: i64 = 1 << 30;

/// A target mode and the two fresh modes that feed it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModePair {
    pub target: i64,
    pub m: i64,
    pub m_prime: i64,
}

/// Fresh modes for the ℓᵖ step: a shared anchor `m₀` plus `K` pairs per target.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchoredPairs {
    pub anchor: i64,
    pub pairs: Vec<ModePair>,
}

impl AnchoredPairs {
    pub fn modes(&self) -> Vec<i64> {
        let mut out = vec![self.anchor];
        out.extend(self.pairs.iter().flat_map(|p| [p.m, p.m_prime]));
        out
    }
}

/// Which interaction the fresh modes must respect.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coupling {
    Cubic,
    Quadratic(Variant),
}

impl Coupling {
    pub fn of(variant: Variant) -> Self {
        if variant.is_cubic() {
            Coupling::Cubic
        } else {
            Coupling::Quadratic(variant)
        }
    }

    /// `m'` as `(slope, offset)` in the free mode `m` for target `n`.
    fn partner(self, n: i64) -> (i64, i64) {
        match self {
            Coupling::Cubic => (2, -n),
            Coupling::Quadratic(Variant::QuadSquare) => (-1, n),
            Coupling::Quadratic(Variant::QuadConjSquare) => (-1, -n),
            Coupling::Quadratic(_) => (1, -n),
        }
    }
}

/// Tuples that a pair feeds on purpose. Indices refer to the element list of the checker.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Tuple {
    Triple(usize, usize, usize),
    Pair(usize, usize),
}

/// Element `value(m) = slope·m + offset`; fixed elements have slope 0.
#[derive(Clone, Copy, Debug)]
struct Affine {
    slope: i64,
    offset: i64,
}

impl Affine {
    fn fixed(v: i64) -> Self {
        Self { slope: 0, offset: v }
    }

    fn at(&self, m: i64) -> i128 {
        i128::from(self.slope) * i128::from(m) + i128::from(self.offset)
    }
}

fn div_floor(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn div_ceil(a: i128, b: i128) -> i128 {
    -div_floor(-a, b)
}

/// Incremental constraint state shared by the cubic, quadratic and ℓᵖ selectors.
struct Selector {
    coupling: Coupling,
    floor: i64,
    /// Modes of `x`; every tuple is drawn from these and the fresh modes.
    base: Vec<i64>,
    /// Further modes the fresh ones must not hit (targets, carried residual modes).
    avoid: Vec<i64>,
    chosen: Vec<i64>,
    designated: HashSet<Tuple>,
}

impl Selector {
    fn new(coupling: Coupling, floor: i64, x_support: &[i64], avoid: &[i64]) -> Self {
        let mut base: Vec<i64> = x_support.to_vec();
        base.sort_unstable();
        base.dedup();
        Self { coupling, floor, base, avoid: avoid.to_vec(), chosen: Vec::new(), designated: HashSet::new() }
    }

    fn elements(&self) -> Vec<i64> {
        self.base.iter().chain(&self.chosen).copied().collect()
    }

    /// Smallest `m ≥ start` such that the new affine elements pass every constraint.
    /// `designated` lists tuples over indices where `len(elements) + i` means the `i`-th new element.
    fn first_fit(&self, start: i64, fresh: &[Affine], designated: &[Tuple], exempt: &[Tuple]) -> Result<i64> {
        let old = self.elements();
        let mut all: Vec<Affine> = old.iter().map(|&v| Affine::fixed(v)).collect();
        all.extend_from_slice(fresh);
        let first_new = old.len();
        let is_new = |i: usize| i >= first_new;
        let floor = i128::from(self.floor);
        let mut intervals: Vec<(i128, i128)> = Vec::new();
        let mut points: HashSet<i128> = HashSet::new();
        let forbid = |e: Affine, bound: i128, intervals: &mut Vec<(i128, i128)>| -> Result<()> {
            // forbid |slope·m + offset| < bound
            let (a, b) = (i128::from(e.slope), i128::from(e.offset));
            if a == 0 {
                if b.abs() < bound {
                    return Err(Error::InfeasibleSupport(format!(
                        "an output {b} below the floor {bound} does not depend on the fresh mode"
                    )));
                }
                return Ok(());
            }
            let (lo, hi) = if a > 0 {
                (div_floor(-bound - b, a) + 1, div_ceil(bound - b, a) - 1)
            } else {
                (div_floor(bound - b, a) + 1, div_ceil(-bound - b, a) - 1)
            };
            if lo <= hi {
                intervals.push((lo, hi));
            }
            Ok(())
        };
        for &e in fresh {
            forbid(e, floor, &mut intervals)?;
            // distinct from every fixed element and from each other
            for &v in old.iter().chain(&self.avoid) {
                let (a, b) = (i128::from(e.slope), i128::from(e.offset) - i128::from(v));
                if a != 0 && b % a == 0 {
                    points.insert(-b / a);
                }
            }
        }
        for (i, x) in fresh.iter().enumerate() {
            for y in &fresh[i + 1..] {
                let (a, b) = (i128::from(x.slope - y.slope), i128::from(x.offset - y.offset));
                if a == 0 && b == 0 {
                    return Err(Error::InfeasibleSupport("fresh modes coincide identically".into()));
                }
                if a != 0 && b % a == 0 {
                    points.insert(-b / a);
                }
            }
        }
        let skip: HashSet<Tuple> = designated.iter().chain(exempt).copied().collect();
        let n = all.len();
        let combine = |coef: &[(usize, i64)]| {
            let mut slope = 0i64;
            let mut offset = 0i64;
            for &(idx, c) in coef {
                slope += c * all[idx].slope;
                offset += c * all[idx].offset;
            }
            Affine { slope, offset }
        };
        match self.coupling {
            Coupling::Cubic => {
                for j in 0..n {
                    for k in 0..n {
                        if k == j {
                            continue;
                        }
                        // with j and k fixed, only l may bring in the fresh element
                        let from = if is_new(j) || is_new(k) { 0 } else { first_new };
                        for l in from..n {
                            if k == l || skip.contains(&Tuple::Triple(j, k, l)) {
                                continue;
                            }
                            forbid(combine(&[(j, 1), (k, -1), (l, 1)]), floor, &mut intervals)?;
                        }
                    }
                }
            }
            Coupling::Quadratic(variant) => {
                for j in 0..n {
                    let from = if is_new(j) { 0 } else { first_new };
                    for l in from..n {
                        if skip.contains(&Tuple::Pair(j, l)) {
                            continue;
                        }
                        if matches!(variant, Variant::QuadModulusCentered) && j == l {
                            continue;
                        }
                        let out = match variant {
                            Variant::QuadSquare => combine(&[(j, 1), (l, 1)]),
                            Variant::QuadConjSquare => combine(&[(j, -1), (l, -1)]),
                            _ => combine(&[(j, 1), (l, -1)]),
                        };
                        forbid(out, floor, &mut intervals)?;
                    }
                }
            }
        }
        // keep every fresh mode inside the representable range
        let limit = i128::from(MODE_LIMIT);
        let mut m = i128::from(start);
        loop {
            let mut moved = false;
            for &(lo, hi) in &intervals {
                if lo <= m && m <= hi {
                    m = hi + 1;
                    moved = true;
                }
            }
            while points.contains(&m) {
                m += 1;
                moved = true;
            }
            if fresh.iter().any(|e| e.at(m as i64).abs() > limit) || m > limit {
                return Err(Error::InfeasibleSupport(format!(
                    "fresh modes would exceed the mode limit {MODE_LIMIT} (floor {})",
                    self.floor
                )));
            }
            if !moved {
                return Ok(m as i64);
            }
        }
    }

    fn commit(&mut self, values: &[i64], designated: &[Tuple]) {
        self.chosen.extend_from_slice(values);
        self.designated.extend(designated.iter().copied());
    }
}

fn validate_floor(targets: &[i64], x_support: &[i64], floor: i64) -> Result<()> {
    if floor < 1 {
        return Err(Error::InvalidConfig(format!("frequency floor must be positive, got {floor}")));
    }
    if let Some(n) = targets.iter().chain(x_support).find(|n| n.abs() >= floor) {
        return Err(Error::InfeasibleSupport(format!("mode {n} is not below the frequency floor {floor}")));
    }
    Ok(())
}

/// Greedy first-fit choice of one pair per target, `2m − m' = n` (cubic) or the quadratic analogue.
pub fn choose_sdagger(targets: &[i64], x_support: &[i64], floor: i64, variant: Variant) -> Result<Vec<ModePair>> {
    choose_sdagger_avoiding(targets, x_support, &[], floor, variant)
}

/// As [`choose_sdagger`], with fresh modes also kept off `avoid`.
pub fn choose_sdagger_avoiding(
    targets: &[i64],
    x_support: &[i64],
    avoid: &[i64],
    floor: i64,
    variant: Variant,
) -> Result<Vec<ModePair>> {
    if targets.is_empty() {
        return Err(Error::InfeasibleSupport("no target modes".into()));
    }
    validate_floor(targets, x_support, floor)?;
    let coupling = Coupling::of(variant);
    let avoid: Vec<i64> = targets.iter().chain(avoid).copied().collect();
    let mut sel = Selector::new(coupling, floor, x_support, &avoid);
    let mut out = Vec::with_capacity(targets.len());
    let mut start = 4 * floor;
    for &n in targets {
        if matches!(variant, Variant::QuadModulusCentered) && n == 0 {
            return Err(Error::InfeasibleSupport("the mean-free nonlinearity never reaches mode 0".into()));
        }
        let (slope, offset) = coupling.partner(n);
        let fresh = [Affine { slope: 1, offset: 0 }, Affine { slope, offset }];
        let base = sel.elements().len();
        let (designated, exempt) = match coupling {
            Coupling::Cubic => (vec![Tuple::Triple(base, base + 1, base)], vec![]),
            Coupling::Quadratic(Variant::QuadModulusCentered) => {
                // the reversed pair lands on −n; it is kept and audited as part of g
                (vec![Tuple::Pair(base, base + 1)], vec![Tuple::Pair(base + 1, base)])
            }
            Coupling::Quadratic(_) => (vec![Tuple::Pair(base, base + 1), Tuple::Pair(base + 1, base)], vec![]),
        };
        let m = sel.first_fit(start, &fresh, &designated, &exempt)?;
        let m_prime = slope * m + offset;
        sel.commit(&[m, m_prime], &designated);
        out.push(ModePair { target: n, m, m_prime });
        start = m + 1;
    }
    let chosen: Vec<i64> = out.iter().flat_map(|p| [p.m, p.m_prime]).collect();
    if let Some(problem) = audit(coupling, x_support, &avoid, &chosen, &designated_tuples(coupling, &out, None), floor) {
        return Err(Error::AssertionFailure { check: "sdagger constraints".into(), detail: problem });
    }
    Ok(out)
}

/// Anchor first, then `k_split` pairs per target with `m₀ + m − m' = n`.
pub fn choose_sdagger_lp(targets: &[i64], x_support: &[i64], floor: i64, k_split: u32) -> Result<AnchoredPairs> {
    choose_sdagger_lp_avoiding(targets, x_support, &[], floor, k_split)
}

pub fn choose_sdagger_lp_avoiding(
    targets: &[i64],
    x_support: &[i64],
    avoid: &[i64],
    floor: i64,
    k_split: u32,
) -> Result<AnchoredPairs> {
    if targets.is_empty() {
        return Err(Error::InfeasibleSupport("no target modes".into()));
    }
    if k_split == 0 {
        return Err(Error::InvalidConfig("splitting count K must be at least 1".into()));
    }
    validate_floor(targets, x_support, floor)?;
    let avoid: Vec<i64> = targets.iter().chain(avoid).copied().collect();
    let mut sel = Selector::new(Coupling::Cubic, floor, x_support, &avoid);
    let anchor = sel.first_fit(4 * floor, &[Affine { slope: 1, offset: 0 }], &[], &[])?;
    sel.commit(&[anchor], &[]);
    let anchor_idx = sel.elements().len() - 1;
    let mut pairs = Vec::new();
    let mut start = anchor + 1;
    for &n in targets {
        for _ in 0..k_split {
            let base = sel.elements().len();
            let fresh = [Affine { slope: 1, offset: 0 }, Affine { slope: 1, offset: anchor - n }];
            let designated =
                [Tuple::Triple(base, base + 1, anchor_idx), Tuple::Triple(anchor_idx, base + 1, base)];
            let m = sel.first_fit(start, &fresh, &designated, &[])?;
            let m_prime = m + anchor - n;
            sel.commit(&[m, m_prime], &designated);
            pairs.push(ModePair { target: n, m, m_prime });
            start = m + 1;
        }
    }
    let out = AnchoredPairs { anchor, pairs };
    let chosen = out.modes();
    if let Some(problem) =
        audit(Coupling::Cubic, x_support, &avoid, &chosen, &designated_tuples(Coupling::Cubic, &out.pairs, Some(anchor)), floor)
    {
        return Err(Error::AssertionFailure { check: "sdagger constraints".into(), detail: problem });
    }
    Ok(out)
}

/// Designated and exempt tuples by mode value: `(j, k, l)` triples or `(j, l)` pairs with `k = i64::MIN`.
pub(crate) fn designated_tuples(coupling: Coupling, pairs: &[ModePair], anchor: Option<i64>) -> HashSet<(i64, i64, i64)> {
    let mut out = HashSet::new();
    for p in pairs {
        match (coupling, anchor) {
            (Coupling::Cubic, Some(a)) => {
                out.insert((p.m, p.m_prime, a));
                out.insert((a, p.m_prime, p.m));
            }
            (Coupling::Cubic, None) => {
                out.insert((p.m, p.m_prime, p.m));
            }
            (Coupling::Quadratic(_), _) => {
                out.insert((p.m, i64::MIN, p.m_prime));
                out.insert((p.m_prime, i64::MIN, p.m));
            }
        }
    }
    out
}

/// Exhaustive check of every tuple touching a fresh mode. Returns a description of the first violation.
pub(crate) fn audit(
    coupling: Coupling,
    x_support: &[i64],
    avoid: &[i64],
    chosen: &[i64],
    designated: &HashSet<(i64, i64, i64)>,
    floor: i64,
) -> Option<String> {
    let fresh: HashSet<i64> = chosen.iter().copied().collect();
    if fresh.len() != chosen.len() {
        return Some("fresh modes are not distinct".into());
    }
    let mut elems: Vec<i64> = x_support.to_vec();
    elems.sort_unstable();
    elems.dedup();
    if let Some(m) = chosen.iter().find(|m| elems.binary_search(m).is_ok() || avoid.contains(m) || m.abs() < floor) {
        return Some(format!("fresh mode {m} collides with the occupied set or sits below the floor"));
    }
    // fresh modes last, so tuples touching them are enumerated in O(n²)
    let first_fresh = elems.len();
    elems.extend_from_slice(chosen);
    let n = elems.len();
    match coupling {
        Coupling::Cubic => {
            for a in 0..n {
                for b in 0..n {
                    if a == b {
                        continue;
                    }
                    let from = if a >= first_fresh || b >= first_fresh { 0 } else { first_fresh };
                    for c in from..n {
                        let (j, k, l) = (elems[a], elems[b], elems[c]);
                        if b == c || designated.contains(&(j, k, l)) {
                            continue;
                        }
                        let out = j - k + l;
                        if out.abs() < floor {
                            return Some(format!("triple ({j}, {k}, {l}) lands on {out}"));
                        }
                    }
                }
            }
        }
        Coupling::Quadratic(variant) => {
            let rule = PairRule { variant };
            for a in 0..n {
                let from = if a >= first_fresh { 0 } else { first_fresh };
                for &l in &elems[from..] {
                    let j = elems[a];
                    if !rule.admits(j, l) || designated.contains(&(j, i64::MIN, l)) {
                        continue;
                    }
                    let out = rule.output(j, l);
                    if out.abs() < floor {
                        return Some(format!("pair ({j}, {l}) lands on {out}"));
                    }
                }
            }
        }
    }
    None
}
