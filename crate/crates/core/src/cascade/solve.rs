//! Increments `h` whose designated products reproduce the addressed residual modes exactly.

use num_complex::Complex64;

use super::sdagger::{AnchoredPairs, ModePair};
use crate::error::{Error, Result};
use crate::flatfn::{rate_f64, sup_norm, FlatFn, FlatTerm, Grid, Rate};
use crate::spectral::{phase_i64, sigma, ModeFn, NonlinearitySpec, PairRule, Variant};

/// `a·e^{r}·e^{−r/t}`, sup exactly `a` at `t = 1`.
fn normalized_monomial(amplitude: f64, rate: Rate) -> FlatTerm {
    FlatTerm::new(Complex64::new(amplitude * rate_f64(&rate).exp(), 0.0), 0, rate, 0)
}

fn target_entry(f: &ModeFn, n: i64) -> Option<(FlatFn, Rate)> {
    let entry = f.get(n)?;
    Some((entry.clone(), entry.min_rate()?))
}

fn positive_rate(n: i64, k_min: Rate) -> Result<()> {
    if k_min <= Rate::from_integer(0) {
        return Err(Error::FlatnessViolation(format!("residual mode {n} has a term with flat rate {k_min}")));
    }
    Ok(())
}

fn place(h: &mut ModeFn, n: i64, f: FlatFn) {
    if h.get(n).is_some() {
        h.add_to(n, &f);
    } else {
        h.set(n, f);
    }
}

/// One increment per pair. Cubic: `iω·conj(h_m')·h_m² = e^{−iσt}f_n`; quadratic: the two ordered
/// pairs (one for `|u|²`) multiply back to `f_n`.
pub fn solve_h(f: &ModeFn, pairs: &[ModePair], spec: &NonlinearitySpec, grid: &Grid) -> Result<ModeFn> {
    let i_omega = Complex64::new(0.0, spec.omega);
    let mut h = ModeFn::with_note("increment");
    for p in pairs {
        let Some((fn_, k_min)) = target_entry(f, p.target) else { continue };
        positive_rate(p.target, k_min)?;
        let size = sup_norm(&fn_, grid).estimate;
        match spec.variant {
            Variant::CubicModified => {
                let rate = k_min / 3;
                let alpha = (size / spec.omega.abs()).cbrt();
                let hm = normalized_monomial(alpha, rate);
                let phase = phase_i64(sigma(p.m, p.m_prime, p.m, p.target));
                let square = hm.mul(&hm);
                let divisor = FlatTerm { coeff: square.coeff * i_omega, ..square };
                let hmp = fn_.shift_osc(-phase).div_by_monomial(&divisor)?.conj();
                place(&mut h, p.m, FlatFn::monomial(hm));
                place(&mut h, p.m_prime, hmp);
            }
            variant => {
                let rule = PairRule { variant };
                let rate = k_min / 2;
                let ordered = if variant == Variant::QuadModulusCentered { 1.0 } else { 2.0 };
                let alpha = (size / (ordered * spec.omega.abs())).sqrt();
                let hm = normalized_monomial(alpha, rate);
                let phase = phase_i64(rule.phase(p.m, p.m_prime));
                let share = fn_.shift_osc(-phase).scale(Complex64::new(1.0 / ordered, 0.0));
                let hmp = match variant {
                    // iω·h_m·h_m' = share
                    Variant::QuadSquare => share.div_by_monomial(&FlatTerm { coeff: hm.coeff * i_omega, ..hm })?,
                    // iω·conj(h_m)·conj(h_m') = share
                    Variant::QuadConjSquare => {
                        let c = hm.conj();
                        share.div_by_monomial(&FlatTerm { coeff: c.coeff * i_omega, ..c })?.conj()
                    }
                    // iω·h_m·conj(h_m') = share
                    _ => share.div_by_monomial(&FlatTerm { coeff: hm.coeff * i_omega, ..hm })?.conj(),
                };
                place(&mut h, p.m, FlatFn::monomial(hm));
                place(&mut h, p.m_prime, hmp);
            }
        }
    }
    Ok(h)
}

/// ℓᵖ increments: `h_{m₀} = ½ε·e^{−η/t}` with `η = k_min/4`, each of the `K` families carrying
/// `f_n/K` through `iω·h_m·conj(h_m')·h_{m₀}·e^{iσt} = f_n/(2K)` on both designated triples.
pub fn solve_h_lp(
    f: &ModeFn,
    chosen: &AnchoredPairs,
    k_split: u32,
    epsilon: f64,
    spec: &NonlinearitySpec,
    grid: &Grid,
) -> Result<ModeFn> {
    if !spec.variant.is_cubic() {
        return Err(Error::VariantMismatch("the ℓᵖ step uses the cubic nonlinearity".into()));
    }
    let mut h = ModeFn::with_note("increment");
    let targets: Vec<i64> = {
        let mut t: Vec<i64> = chosen.pairs.iter().map(|p| p.target).collect();
        t.dedup();
        t
    };
    let mut k_min: Option<Rate> = None;
    for &n in &targets {
        if let Some(r) = f.get(n).and_then(FlatFn::min_rate) {
            positive_rate(n, r)?;
            k_min = Some(k_min.map_or(r, |k: Rate| k.min(r)));
        }
    }
    let Some(k_min) = k_min else { return Ok(h) };
    let eta = k_min / 4;
    let rho = k_min * Rate::new(3, 8);
    let anchor = FlatTerm::new(Complex64::new(0.5 * epsilon, 0.0), 0, eta, 0);
    let anchor_sup = 0.5 * epsilon * (-rate_f64(&eta)).exp();
    h.set(chosen.anchor, FlatFn::monomial(anchor));
    let i_omega = Complex64::new(0.0, spec.omega);
    let k = f64::from(k_split);
    for p in &chosen.pairs {
        let Some(fn_) = f.get(p.target) else { continue };
        let size = sup_norm(fn_, grid).estimate;
        let beta = (size / (2.0 * k * spec.omega.abs() * anchor_sup)).sqrt();
        let hm = normalized_monomial(beta, rho);
        let phase = phase_i64(sigma(p.m, p.m_prime, chosen.anchor, p.target));
        let product = hm.mul(&anchor);
        let divisor = FlatTerm { coeff: product.coeff * i_omega, ..product };
        let share = fn_.shift_osc(-phase).scale(Complex64::new(1.0 / (2.0 * k), 0.0));
        let hmp = share.div_by_monomial(&divisor)?.conj();
        place(&mut h, p.m, FlatFn::monomial(hm));
        place(&mut h, p.m_prime, hmp);
    }
    Ok(h)
}
