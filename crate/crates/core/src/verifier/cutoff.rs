use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::spectral::ModeFn;

/// Fourier multiplier families `n ↦ m_N(n)`: finitely supported, uniformly bounded, pointwise → 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CutoffFamily {
    /// `1` on `|n| ≤ N`.
    Sharp,
    /// `(1 − |n|/N)₊`.
    Fejer,
    /// `φ(n/N)` with `φ = 1` on `[−1, 1]`, smooth, zero outside `(−2, 2)`.
    SmoothBump,
    /// Sharp times `1 + ζ_{N,n}`, `|ζ_{N,n}| ≤ min(1, 10/ln(N+2))`, drawn from a stream keyed by `(seed, N, n)`.
    Perturbed { seed: u64 },
}

impl CutoffFamily {
    pub fn all(seed: u64) -> [CutoffFamily; 4] {
        [CutoffFamily::Sharp, CutoffFamily::Fejer, CutoffFamily::SmoothBump, CutoffFamily::Perturbed { seed }]
    }

    pub fn name(&self) -> &'static str {
        match self {
            CutoffFamily::Sharp => "sharp",
            CutoffFamily::Fejer => "fejer",
            CutoffFamily::SmoothBump => "smooth_bump",
            CutoffFamily::Perturbed { .. } => "perturbed",
        }
    }

    /// Bound `B` on `|m_N(n)|` over all `N, n`.
    pub fn uniform_bound(&self) -> f64 {
        match self {
            CutoffFamily::Perturbed { .. } => 2.0,
            _ => 1.0,
        }
    }
}

/// `e^{−1/u}` for `u > 0`, else 0.
fn smooth_step(u: f64) -> f64 {
    if u > 0.0 {
        (-1.0 / u).exp()
    } else {
        0.0
    }
}

/// Plateau bump: 1 on `|x| ≤ 1`, 0 on `|x| ≥ 2`, C∞ in between.
pub fn plateau(x: f64) -> f64 {
    let a = x.abs();
    let up = smooth_step(2.0 - a);
    let down = smooth_step(a - 1.0);
    if up + down == 0.0 {
        0.0
    } else {
        up / (up + down)
    }
}

/// Perturbation amplitude `min(1, 10/ln(N+2))`.
pub fn perturbation_amplitude(cut: i64) -> f64 {
    (10.0 / ((cut as f64) + 2.0).ln()).min(1.0)
}

fn perturbation(seed: u64, cut: i64, n: i64) -> f64 {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&cut.to_le_bytes());
    key[16..24].copy_from_slice(&n.to_le_bytes());
    let u: f64 = ChaCha8Rng::from_seed(key).gen_range(-1.0..=1.0);
    perturbation_amplitude(cut) * u
}

/// The multiplier `m_N` of one family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cutoff {
    pub family: CutoffFamily,
    pub cut: i64,
}

impl Cutoff {
    pub fn value(&self, n: i64) -> f64 {
        let cut = self.cut;
        match self.family {
            CutoffFamily::Sharp => f64::from(u8::from(n.abs() <= cut)),
            CutoffFamily::Fejer => (1.0 - n.abs() as f64 / cut as f64).max(0.0),
            CutoffFamily::SmoothBump => plateau(n as f64 / cut as f64),
            CutoffFamily::Perturbed { seed } => {
                if n.abs() <= cut {
                    1.0 + perturbation(seed, cut, n)
                } else {
                    0.0
                }
            }
        }
    }

    /// Every mode with a nonzero multiplier satisfies `|n| ≤ radius`.
    pub fn radius(&self) -> i64 {
        match self.family {
            CutoffFamily::SmoothBump => 2 * self.cut,
            _ => self.cut,
        }
    }

    /// The finite multiplier table.
    pub fn to_map(&self) -> BTreeMap<i64, f64> {
        (-self.radius()..=self.radius()).map(|n| (n, self.value(n))).filter(|(_, v)| *v != 0.0).collect()
    }
}

pub fn make_cutoff(family: CutoffFamily, cut: i64) -> Cutoff {
    assert!(cut >= 1, "cutoff parameter must be positive");
    Cutoff { family, cut }
}

/// `(𝒫_N v)_n = m_N(n)·v_n`.
pub fn apply_cutoff(v: &ModeFn, cutoff: &Cutoff) -> ModeFn {
    let mut out = ModeFn::with_note(v.note.clone());
    for (n, f) in v.iter() {
        let m = cutoff.value(n);
        if m != 0.0 {
            out.set(n, f.scale(num_complex::Complex64::new(m, 0.0)));
        }
    }
    out
}
