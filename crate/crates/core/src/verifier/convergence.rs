use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::cutoff::{apply_cutoff, make_cutoff, Cutoff, CutoffFamily};
use crate::cascade::ConstructionState;
use crate::error::{Error, Result};
use crate::flatfn::{Grid, SupEstimate};
use crate::spectral::{mode_sups, nonlinearity, norm, phase_i64, sigma, ModeFn, NormSpace, Spatial, TimeMode};

/// Deviations must end below this at the largest tested cutoff.
pub const DEVIATION_TOL: f64 = 1e-3;
/// Largest allowed ratio between the fitted increment constants of two families.
pub const FIT_SPREAD: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceRow {
    pub family: String,
    pub cut: i64,
    pub stage: usize,
    /// `‖𝒩(𝒫_N x⁽ᵏ⁾) − 𝒩(x⁽ᵏ⁾)‖_{C⁻¹}`.
    pub deviation: SupEstimate,
    /// Trilinear bound on the deviation from `‖𝒫_N x − x‖_{C⁰ℓ¹}`.
    pub lipschitz_bound: f64,
    /// `‖𝒩(𝒫_N x⁽ᵏ⁺¹⁾) − 𝒩(𝒫_N x⁽ᵏ⁾)‖_{C⁻¹}`; absent on the last stage.
    pub increment: Option<SupEstimate>,
    /// `max |n|` over the support of `x⁽ᵏ⁾`.
    pub support_radius: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceReport {
    pub space: Spatial,
    /// Scope caveat: the families are a finite sample of all cutoff sequences.
    pub note: String,
    pub rows: Vec<ConvergenceRow>,
    /// `max_{N,k} 2ᵏ·increment` per family.
    pub fitted: BTreeMap<String, f64>,
}

impl ConvergenceReport {
    pub fn fitted_c(&self) -> f64 {
        self.fitted.values().copied().fold(0.0, f64::max)
    }

    /// Largest ratio between two families' fitted constants.
    pub fn fit_spread(&self) -> f64 {
        let lo = self.fitted.values().copied().fold(f64::INFINITY, f64::min);
        let hi = self.fitted_c();
        if hi == 0.0 {
            1.0
        } else {
            hi / lo
        }
    }

    /// Per (family, stage), the deviation at the largest tested cutoff.
    pub fn final_deviations(&self) -> Vec<(String, usize, i64, f64)> {
        let mut last: BTreeMap<(String, usize), (i64, f64)> = BTreeMap::new();
        for r in &self.rows {
            let e = last.entry((r.family.clone(), r.stage)).or_insert((r.cut, r.deviation.bound));
            if r.cut >= e.0 {
                *e = (r.cut, r.deviation.bound);
            }
        }
        last.into_iter().map(|((f, k), (n, d))| (f, k, n, d)).collect()
    }

    /// Eventual smallness and a uniform increment constant.
    pub fn check_limits(&self) -> Result<()> {
        if let Some((family, k, cut, d)) = self.final_deviations().into_iter().find(|r| r.3 > DEVIATION_TOL) {
            return Err(Error::AssertionFailure {
                check: "cutoff deviation".into(),
                detail: format!("family {family}, N = {cut}, k = {k}: deviation {d:.3e} > {DEVIATION_TOL:e}"),
            });
        }
        let spread = self.fit_spread();
        if spread > FIT_SPREAD {
            return Err(Error::AssertionFailure {
                check: "uniform increment constant".into(),
                detail: format!("fitted constants {:?} spread by {spread:.2}", self.fitted),
            });
        }
        Ok(())
    }

    /// What holds at every finite `N`: the trilinear deviation bound, and exact agreement
    /// of the sharp cutoff once it covers the support.
    pub fn check_finite(&self) -> Result<()> {
        for r in &self.rows {
            let cell = format!("family {}, N = {}, k = {}", r.family, r.cut, r.stage);
            if r.deviation.estimate > r.lipschitz_bound * (1.0 + 1e-9) + 1e-300 {
                return Err(Error::AssertionFailure {
                    check: "cutoff deviation bound".into(),
                    detail: format!("{cell}: {:.3e} above the bound {:.3e}", r.deviation.estimate, r.lipschitz_bound),
                });
            }
            if r.family == "sharp" && r.cut >= r.support_radius && r.deviation.bound != 0.0 {
                return Err(Error::AssertionFailure {
                    check: "sharp cutoff exactness".into(),
                    detail: format!("{cell}: deviation {:e} although N covers the support", r.deviation.bound),
                });
            }
        }
        Ok(())
    }

    /// CSV with columns `family,N,k,deviation,increment,fitted_C`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("family,N,k,deviation,increment,fitted_C\n");
        for r in &self.rows {
            let inc = r.increment.map(|i| format!("{:e}", i.bound)).unwrap_or_default();
            let c = self.fitted.get(&r.family).copied().unwrap_or(0.0);
            out.push_str(&format!("{},{},{},{:e},{},{:e}\n", r.family, r.cut, r.stage, r.deviation.bound, inc, c));
        }
        out
    }
}

/// `sup_n w_n^{1/2}` over modes up to `radius`, at least 1.
fn weight_factor(space: &Spatial, radius: i64) -> f64 {
    match *space {
        Spatial::L2s { s } if s > 0.0 => space.weight(radius).sqrt(),
        _ => 1.0,
    }
}

/// Deviation, bound and increment table over every (family, N, stage).
pub fn cutoff_convergence(
    state: &ConstructionState,
    families: &[CutoffFamily],
    cuts: &[i64],
    space: Spatial,
    grid: &Grid,
) -> Result<ConvergenceReport> {
    if state.stages.len() < 3 {
        return Err(Error::InvalidConfig("cutoff convergence needs at least three stages".into()));
    }
    if cuts.iter().any(|&n| n < 1) {
        return Err(Error::InvalidConfig("cutoff parameters must be positive".into()));
    }
    let spec = state.config.spec;
    let cm1 = NormSpace::new(space, TimeMode::Cminus1);
    let l1 = NormSpace::lp(1.0, TimeMode::C0);
    let full: Vec<ModeFn> = state.stages.iter().map(|st| nonlinearity(&st.x, &spec)).collect();
    let full_l1: Vec<f64> =
        state.stages.iter().map(|st| norm(&st.x, &l1, grid).map(|v| v.bound)).collect::<Result<_>>()?;
    let degree = if spec.variant.is_cubic() { 3 } else { 2 };
    let mut rows = Vec::new();
    let mut fitted = BTreeMap::new();
    for family in families {
        let mut c_fit: f64 = 0.0;
        for &cut in cuts {
            let cutoff = make_cutoff(*family, cut);
            let cut_x: Vec<ModeFn> = state.stages.iter().map(|st| apply_cutoff(&st.x, &cutoff)).collect();
            let cut_n: Vec<ModeFn> = cut_x.iter().map(|v| nonlinearity(v, &spec)).collect();
            for (i, st) in state.stages.iter().enumerate() {
                let k = i + 1;
                let deviation = norm(&cut_n[i].sub(&full[i]), &cm1, grid)?;
                let gap = norm(&cut_x[i].sub(&st.x), &l1, grid)?.bound;
                let radius = norm(&cut_x[i], &l1, grid)?.bound.max(full_l1[i]);
                let lipschitz_bound = match degree {
                    3 => 6.0 * spec.omega.abs() * gap * radius * radius,
                    _ => 2.0 * spec.omega.abs() * gap * radius,
                } * weight_factor(&space, degree * st.x.max_abs_mode());
                let increment = match cut_n.get(i + 1) {
                    Some(next) => Some(norm(&next.sub(&cut_n[i]), &cm1, grid)?),
                    None => None,
                };
                if let Some(inc) = increment {
                    c_fit = c_fit.max(inc.bound * 2f64.powi(k as i32));
                }
                rows.push(ConvergenceRow {
                    family: family.name().to_string(),
                    cut,
                    stage: k,
                    deviation,
                    lipschitz_bound,
                    increment,
                    support_radius: st.x.max_abs_mode(),
                });
            }
        }
        fitted.insert(family.name().to_string(), c_fit);
    }
    Ok(ConvergenceReport {
        space,
        note: "families sample the cutoff sequences; convergence for every sequence is not established by this table"
            .into(),
        rows,
        fitted,
    })
}

/// For every designated cubic triple, compares `‖contribution of 𝒫_N h‖_{C⁻¹}` with
/// `|m_N(m)²·m_N(m')|·‖f_n‖_{C⁻¹}`. Returns the worst relative discrepancy.
pub fn designated_scaling_gap(state: &ConstructionState, cutoff: &Cutoff, grid: &Grid) -> Result<f64> {
    let spec = state.config.spec;
    if !spec.variant.is_cubic() {
        return Err(Error::VariantMismatch("designated triples belong to the cubic step".into()));
    }
    let i_omega = Complex64::new(0.0, spec.omega);
    let mut worst: f64 = 0.0;
    for st in &state.stages {
        let Some(report) = &st.report else { continue };
        if report.anchor.is_some() {
            continue;
        }
        let cut_h = apply_cutoff(&st.h, cutoff);
        for p in &report.pairs {
            let Some(f_n) = st.f.get(p.target) else { continue };
            let scalar = cutoff.value(p.m).powi(2) * cutoff.value(p.m_prime);
            let (hm, hmp) = (cut_h.entry(p.m), cut_h.entry(p.m_prime));
            let phase = phase_i64(sigma(p.m, p.m_prime, p.m, p.target));
            let contribution = hm.mul(&hmp.conj()).mul(&hm).scale(i_omega).shift_osc(phase);
            let lhs = mode_sups(&ModeFn::single(p.target, contribution), TimeMode::Cminus1, grid)?;
            let rhs = mode_sups(&ModeFn::single(p.target, f_n.clone()), TimeMode::Cminus1, grid)?;
            let lhs = lhs.get(&p.target).map_or(0.0, |v| v.estimate);
            let rhs = scalar.abs() * rhs.get(&p.target).map_or(0.0, |v| v.estimate);
            let scale = rhs.max(lhs);
            if scale > 0.0 {
                worst = worst.max((lhs - rhs).abs() / scale);
            }
        }
    }
    Ok(worst)
}
