//! Running integrals `∫₀ᵗ f` of flat functions.
//!
//! Terms are grouped by oscillation rate. Slow groups are integrated along the
//! real line with adaptive Gauss–Kronrod panels; fast groups use either a
//! certified integration-by-parts expansion or a steepest-descent contour.

use num_complex::Complex64;

use super::{FlatFn, FlatTerm, Rate};
use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureOptions {
    /// Absolute tolerance per oscillation group.
    pub abs_tol: f64,
    /// Tolerance relative to the group's `∫|f|` bound, used when larger than `abs_tol`.
    pub rel_tol: f64,
    /// Panels start where the log-magnitude of the integrand first exceeds this value.
    pub log_floor: f64,
    pub max_depth: u32,
    /// Groups with `|θ|` up to this rate are integrated on the real line.
    pub real_line_osc: i64,
    pub max_series_order: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-12, rel_tol: 1e-14, log_floor: -40.0, max_depth: 40, real_line_osc: 64, max_series_order: 8 }
    }
}

#[derive(Clone, Copy)]
struct Piece {
    coeff: Complex64,
    t_pow: f64,
    rate: f64,
}

/// Terms sharing one oscillation rate, stored without the `e^{iθt}` factor.
struct Group {
    osc: i64,
    pieces: Vec<Piece>,
    envelope: FlatFn,
}

impl Group {
    fn new(osc: i64, terms: &[FlatTerm]) -> Self {
        let pieces = terms.iter().map(|t| Piece { coeff: t.coeff, t_pow: f64::from(t.t_pow), rate: t.rate() }).collect();
        let envelope = FlatFn::from_terms(terms.iter().map(|t| FlatTerm { osc: 0, ..*t }).collect());
        Self { osc, pieces, envelope }
    }

    #[inline]
    fn eval_real(&self, t: f64) -> Complex64 {
        if t <= 0.0 {
            return self.envelope.eval(0.0);
        }
        let (ln_t, inv_t) = (t.ln(), 1.0 / t);
        let mut acc = Complex64::new(0.0, 0.0);
        for p in &self.pieces {
            let lm = p.t_pow * ln_t - p.rate * inv_t;
            if lm > -745.0 {
                acc += p.coeff * lm.exp();
            }
        }
        acc
    }

    #[inline]
    fn eval_complex(&self, s: Complex64) -> Complex64 {
        let ln_s = s.ln();
        let inv_s = s.inv();
        let mut acc = Complex64::new(0.0, 0.0);
        for p in &self.pieces {
            let e = ln_s * p.t_pow - inv_s * p.rate;
            if e.re > -745.0 {
                acc += p.coeff * e.exp();
            }
        }
        acc
    }

    /// Bound on `∫₀¹ |φ|`.
    fn mass(&self) -> f64 {
        self.envelope.magnitude()
    }

    /// First point where some term's log-magnitude reaches `floor`; `None` if no term ever does.
    fn start_point(&self, floor: f64) -> Option<f64> {
        let mut best: Option<f64> = None;
        for p in &self.pieces {
            let lc = p.coeff.norm().ln();
            if p.rate == 0.0 {
                return Some(0.0);
            }
            let g = |t: f64| lc + p.t_pow * t.ln() - p.rate / t;
            let top = if p.t_pow < 0.0 { (p.rate / -p.t_pow).min(1.0) } else { 1.0 };
            if g(top) < floor {
                continue;
            }
            let (mut lo, mut hi) = (0.0f64, top);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= 0.0 || g(mid) < floor {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-15 * hi {
                    break;
                }
            }
            best = Some(best.map_or(lo, |b: f64| b.min(lo)));
        }
        best
    }
}

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        rk += s * WGK[j];
        if j % 2 == 1 {
            rg += s * WG[j / 2];
        }
    }
    (rk * h, ((rk - rg) * h).norm())
}

fn adapt<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64, tol: f64, depth: u32, osc: i64) -> Result<Complex64> {
    let (v, err) = gk15(f, a, b);
    if err <= tol || err <= 64.0 * f64::EPSILON * v.norm() || b - a <= 1e-14 * b.abs().max(1e-300) {
        return Ok(v);
    }
    if depth == 0 {
        return Err(Error::QuadratureNonConvergence { osc, a, b });
    }
    let m = 0.5 * (a + b);
    Ok(adapt(f, a, m, 0.5 * tol, depth - 1, osc)? + adapt(f, m, b, 0.5 * tol, depth - 1, osc)?)
}

fn real_line(g: &Group, a: f64, ts: &[f64], tol: f64, opts: &QuadratureOptions) -> Result<Vec<Complex64>> {
    let theta = g.osc as f64;
    let f = |s: f64| g.eval_real(s) * Complex64::from_polar(1.0, theta * s);
    let mut out = Vec::with_capacity(ts.len());
    let mut acc = Complex64::new(0.0, 0.0);
    let mut left = a;
    for &t in ts {
        if t > left {
            // Panels no wider than one oscillation period keep the local rule in its asymptotic regime.
            let width = (t - left).min(if theta == 0.0 { 1.0 } else { 2.0 / theta.abs() }).max(1e-300);
            let n = ((t - left) / width).ceil() as usize;
            for i in 0..n {
                let lo = left + (t - left) * i as f64 / n as f64;
                let hi = if i + 1 == n { t } else { left + (t - left) * (i + 1) as f64 / n as f64 };
                acc += adapt(&f, lo, hi, tol * (hi - lo), opts.max_depth, g.osc)?;
            }
            left = t;
        }
        out.push(acc);
    }
    Ok(out)
}

/// `∫_x^{x+i·sgn(θ)·∞} φ(s)e^{iθs} ds`, so that `∫_a^t = W(a) − W(t)`.
fn contour_tail(g: &Group, x: f64, tol: f64, opts: &QuadratureOptions) -> Result<Complex64> {
    let theta = g.osc as f64;
    let dir = theta.signum();
    let w = theta.abs();
    let f = |u: f64| g.eval_complex(Complex64::new(x, dir * u / w)) * (-u).exp();
    let breaks = [0.0, 1.0, 3.0, 8.0, 20.0, 45.0, 70.0];
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..breaks.len() - 1 {
        acc += adapt(&f, breaks[k], breaks[k + 1], tol * w / 6.0, opts.max_depth, g.osc)?;
    }
    Ok(Complex64::new(0.0, dir / w) * Complex64::from_polar(1.0, theta * x) * acc)
}

fn contour(g: &Group, a: f64, ts: &[f64], tol: f64, opts: &QuadratureOptions) -> Result<Vec<Complex64>> {
    let base = contour_tail(g, a, 0.5 * tol, opts)?;
    ts.iter()
        .map(|&t| if t <= a { Ok(Complex64::new(0.0, 0.0)) } else { Ok(base - contour_tail(g, t, 0.5 * tol, opts)?) })
        .collect()
}

/// Repeated integration by parts, `∫₀ᵗ φe^{iθs} = Σ_r (−1)ʳ[φ⁽ʳ⁾e^{iθs}]₀ᵗ/(iθ)^{r+1} + R`,
/// accepted only when the remainder bound `sup|φ⁽ᴿ⁾|/|θ|ᴿ` is within tolerance.
fn series(g: &Group, ts: &[f64], tol: f64, opts: &QuadratureOptions) -> Option<Vec<Complex64>> {
    let theta = g.osc as f64;
    let w = theta.abs();
    let mut derivs = vec![g.envelope.clone()];
    let mut order = None;
    for r in 1..=opts.max_series_order {
        let next = derivs[r - 1].derivative();
        let remainder = next.magnitude() / w.powi(r as i32);
        derivs.push(next);
        if !remainder.is_finite() {
            return None;
        }
        if remainder <= tol {
            order = Some(r);
            break;
        }
    }
    let order = order?;
    let i_theta = Complex64::new(0.0, theta);
    let mut factors = Vec::with_capacity(order);
    let mut pow = i_theta;
    for r in 0..order {
        let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
        factors.push(sign / pow);
        pow *= i_theta;
    }
    let at_zero: Complex64 = (0..order).map(|r| derivs[r].eval(0.0) * factors[r]).sum();
    Some(
        ts.iter()
            .map(|&t| {
                let s: Complex64 = (0..order).map(|r| derivs[r].eval(t) * factors[r]).sum();
                s * Complex64::from_polar(1.0, theta * t) - at_zero
            })
            .collect(),
    )
}

fn group_values(g: &Group, ts: &[f64], opts: &QuadratureOptions) -> Result<Vec<Complex64>> {
    let tol = opts.abs_tol.max(opts.rel_tol * g.mass());
    let zero_rate = g.envelope.terms().iter().any(|t| t.flat_rate == Rate::from_integer(0));
    let a = if zero_rate { Some(0.0) } else { g.start_point(opts.log_floor) };
    let Some(a) = a else {
        return Ok(vec![Complex64::new(0.0, 0.0); ts.len()]);
    };
    if g.osc.abs() <= opts.real_line_osc {
        return real_line(g, a, ts, tol, opts);
    }
    if let Some(v) = series(g, ts, tol, opts) {
        return Ok(v);
    }
    if a <= 0.0 {
        // Polynomial groups have no flat factor to exploit; their panels start at 0.
        return real_line(g, 0.0, ts, tol, opts);
    }
    contour(g, a, ts, tol, opts)
}

/// `∫₀ᵗ f` at each of the sorted points `ts ⊂ [0, 1]`.
pub fn antiderivative_values(f: &FlatFn, ts: &[f64], opts: &QuadratureOptions) -> Result<Vec<Complex64>> {
    debug_assert!(ts.windows(2).all(|w| w[0] <= w[1]));
    let mut out = vec![Complex64::new(0.0, 0.0); ts.len()];
    for (osc, terms) in f.phase_groups() {
        let g = Group::new(osc, &terms);
        let v = group_values(&g, ts, opts)?;
        for (o, x) in out.iter_mut().zip(v) {
            *o += x;
        }
    }
    Ok(out)
}
