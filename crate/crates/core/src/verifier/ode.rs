use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flatfn::antiderivative_values;
use crate::spectral::{nonlinearity, phase_i64, sigma, ModeFn, NonlinearitySpec, PairRule, Variant};

/// One monomial of the finite ODE right-hand side: `coeff·Π factors·e^{i·phase·t}` into `out`.
#[derive(Clone, Copy, Debug)]
struct Coupling {
    out: usize,
    /// Mode indices, with a flag marking conjugated factors.
    factors: [(usize, bool); 3],
    arity: usize,
    phase: f64,
}

fn couplings(modes: &[i64], spec: &NonlinearitySpec) -> Vec<Coupling> {
    let index: BTreeMap<i64, usize> = modes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let mut out = Vec::new();
    if spec.variant.is_cubic() {
        for (a, &j) in modes.iter().enumerate() {
            for (b, &k) in modes.iter().enumerate() {
                if k == j {
                    continue;
                }
                for (c, &l) in modes.iter().enumerate() {
                    if k == l {
                        continue;
                    }
                    if let Some(&o) = index.get(&(j - k + l)) {
                        out.push(Coupling {
                            out: o,
                            factors: [(a, false), (b, true), (c, false)],
                            arity: 3,
                            phase: phase_i64(sigma(j, k, l, j - k + l)) as f64,
                        });
                    }
                }
            }
        }
    } else {
        let rule = PairRule { variant: spec.variant };
        let (cj, cl) = match spec.variant {
            Variant::QuadSquare => (false, false),
            Variant::QuadConjSquare => (true, true),
            _ => (false, true),
        };
        for (a, &j) in modes.iter().enumerate() {
            for (b, &l) in modes.iter().enumerate() {
                if !rule.admits(j, l) {
                    continue;
                }
                if let Some(&o) = index.get(&rule.output(j, l)) {
                    out.push(Coupling {
                        out: o,
                        factors: [(a, cj), (b, cl), (0, false)],
                        arity: 2,
                        phase: phase_i64(rule.phase(j, l)) as f64,
                    });
                }
            }
        }
    }
    out
}

/// Largest angular frequency in the right-hand side for `(y, g)`, resonance phases included.
pub fn ode_max_frequency(y: &ModeFn, g: &ModeFn, spec: &NonlinearitySpec) -> f64 {
    let mut modes: Vec<i64> = y.support().into_iter().chain(g.support()).collect();
    modes.sort_unstable();
    modes.dedup();
    let phases = couplings(&modes, spec).iter().map(|c| c.phase.abs()).fold(0.0, f64::max);
    phases.max(y.max_abs_osc() as f64).max(g.max_abs_osc() as f64)
}

struct System<'a> {
    spec: NonlinearitySpec,
    couplings: Vec<Coupling>,
    forcing: Vec<Option<&'a crate::flatfn::FlatFn>>,
}

impl System<'_> {
    fn rhs(&self, t: f64, y: &[Complex64]) -> Vec<Complex64> {
        let i_omega = Complex64::new(0.0, self.spec.omega);
        let mut out: Vec<Complex64> = self.forcing.iter().map(|g| g.map_or(Complex64::new(0.0, 0.0), |g| g.eval(t))).collect();
        for c in &self.couplings {
            let mut prod = i_omega * Complex64::from_polar(1.0, c.phase * t);
            for &(idx, conj) in &c.factors[..c.arity] {
                prod *= if conj { y[idx].conj() } else { y[idx] };
            }
            out[c.out] += prod;
        }
        if self.spec.variant.is_cubic() {
            for (o, v) in out.iter_mut().zip(y) {
                *o -= i_omega * v.norm_sqr() * v;
            }
        }
        out
    }
}

fn axpy(y: &[Complex64], k: &[Complex64], h: f64) -> Vec<Complex64> {
    y.iter().zip(k).map(|(a, b)| a + b * h).collect()
}

/// Integrates `dy/dt = 𝒩(y) + g` on the joint support from zero data with classical RK4 and returns
/// `max |y_numeric − y(t)| / (1 + |y(t)|)` over about a hundred sample times and every mode.
pub fn ode_crosscheck(y: &ModeFn, g: &ModeFn, spec: &NonlinearitySpec, dt: f64) -> Result<f64> {
    if !(dt > 0.0 && dt <= 1e-3) {
        return Err(Error::InvalidConfig(format!("time step must lie in (0, 1e-3], got {dt}")));
    }
    let mut modes: Vec<i64> = y.support().into_iter().chain(g.support()).collect();
    modes.sort_unstable();
    modes.dedup();
    if modes.is_empty() {
        return Ok(0.0);
    }
    let system = System { spec: *spec, couplings: couplings(&modes, spec), forcing: modes.iter().map(|&n| g.get(n)).collect() };
    let exact: Vec<crate::flatfn::FlatFn> = modes.iter().map(|&n| y.entry(n)).collect();
    let steps = (1.0 / dt).round() as usize;
    let h = 1.0 / steps as f64;
    let stride = (steps / 100).max(1);
    let mut state = vec![Complex64::new(0.0, 0.0); modes.len()];
    let mut worst: f64 = 0.0;
    for i in 0..steps {
        let t = i as f64 * h;
        let k1 = system.rhs(t, &state);
        let k2 = system.rhs(t + 0.5 * h, &axpy(&state, &k1, 0.5 * h));
        let k3 = system.rhs(t + 0.5 * h, &axpy(&state, &k2, 0.5 * h));
        let k4 = system.rhs(t + h, &axpy(&state, &k3, h));
        for (j, s) in state.iter_mut().enumerate() {
            *s += (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) * (h / 6.0);
        }
        if (i + 1) % stride == 0 || i + 1 == steps {
            let t = (i + 1) as f64 * h;
            for (s, e) in state.iter().zip(&exact) {
                let v = e.eval(t);
                worst = worst.max((s - v).norm() / (1.0 + v.norm()));
            }
        }
    }
    Ok(worst)
}

/// `max_{n,t} |x_n(t) − ∫₀ᵗ 𝒩(x)_n − ∫₀ᵗ forcing_n|` with both integrals by quadrature.
pub fn integral_equation_check(x: &ModeFn, forcing: &ModeFn, spec: &NonlinearitySpec, ts: &[f64]) -> Result<f64> {
    if let Some(t) = ts.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::InvalidConfig(format!("sample time {t} outside [0, 1]")));
    }
    let drive = nonlinearity(x, spec);
    let mut modes: Vec<i64> = x.support().into_iter().chain(drive.support()).chain(forcing.support()).collect();
    modes.sort_unstable();
    modes.dedup();
    let quad = crate::flatfn::QuadratureOptions::default();
    let defects: Vec<f64> = modes
            .par_iter()
            .map(|&n| -> Result<f64> {
                let a = antiderivative_values(&drive.entry(n), ts, &quad)?;
                let b = antiderivative_values(&forcing.entry(n), ts, &quad)?;
                let xn = x.entry(n);
                Ok(ts.iter().enumerate().map(|(i, &t)| (xn.eval(t) - a[i] - b[i]).norm()).fold(0.0, f64::max))
            })
            .collect::<Result<_>>()?;
    Ok(defects.into_iter().fold(0.0, f64::max))
}
