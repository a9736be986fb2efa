use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::sdagger::{choose_sdagger_avoiding, choose_sdagger_lp_avoiding, AnchoredPairs, ModePair};
use super::solve::{solve_h, solve_h_lp};
use crate::error::{Error, Result};
use crate::flatfn::{Grid, SupEstimate};
use crate::spectral::{
    mode_sups, n_diag, n_main_filtered, norm, q_filtered, residual, ModeFn, NonlinearitySpec, NormSpace, Spatial,
    TimeMode, Variant,
};

/// Tolerance of the two-route residual comparison, relative to each entry's magnitude.
pub const EXACTNESS_TOL: f64 = 1e-10;

/// Support cap for the ℓᵖ splitting escalation.
const LP_SUPPORT_CAP: usize = 512;

fn default_k_split() -> u32 {
    1
}

fn default_escalations() -> u32 {
    20
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepConfig {
    /// Frequency floor `M`; raised automatically above the current support.
    pub m_floor: i64,
    /// Target for both `‖y − x‖_{C⁰}` and `‖g‖_{C⁻¹}`.
    pub epsilon: f64,
    pub space: Spatial,
    pub spec: NonlinearitySpec,
    #[serde(default = "default_k_split")]
    pub k_split: u32,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default = "default_escalations")]
    pub max_escalations: u32,
    /// Share of `ε` that unaddressed residual modes may use; 0 addresses every mode.
    #[serde(default)]
    pub carry_fraction: f64,
}

impl StepConfig {
    pub fn new(spec: NonlinearitySpec, space: Spatial, m_floor: i64, epsilon: f64) -> Self {
        Self {
            m_floor,
            epsilon,
            space,
            spec,
            k_split: 1,
            grid: Grid::default(),
            max_escalations: default_escalations(),
            carry_fraction: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.m_floor < 1 {
            return bad(format!("frequency floor must be at least 1, got {}", self.m_floor));
        }
        if self.k_split < 1 {
            return bad("splitting count K must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.carry_fraction) {
            return bad(format!("carry_fraction must lie in [0, 1), got {}", self.carry_fraction));
        }
        if self.grid.uniform < 2 {
            return bad("grid needs at least two uniform points".into());
        }
        match self.space {
            Spatial::L2s { s } if !s.is_finite() => bad("Sobolev index must be finite".into()),
            Spatial::Lp { p } if !(p.is_finite() && p >= 1.0) => bad(format!("ℓᵖ exponent must be ≥ 1, got {p}")),
            _ => NonlinearitySpec::new(self.spec.omega, self.spec.variant).map(|_| ()),
        }
    }

    /// Divisor of the smallest residual rate assigned to each free factor.
    pub fn seed_rate_divisor(&self) -> u32 {
        if self.spec.variant.is_cubic() {
            3
        } else {
            2
        }
    }

    fn c0(&self) -> NormSpace {
        NormSpace::new(self.space, TimeMode::C0)
    }

    fn cminus1(&self) -> NormSpace {
        NormSpace::new(self.space, TimeMode::Cminus1)
    }
}

/// Measured norms of one successful step and of the pieces of `g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepNorms {
    /// `‖h‖_{C⁰}`.
    pub increment: SupEstimate,
    /// `‖g‖_{C⁻¹}`.
    pub residual: SupEstimate,
    /// `‖dh/dt‖_{C⁻¹}`.
    pub increment_rate: SupEstimate,
    /// `‖𝒩_diag(h)‖_{C⁰}`, zero for quadratic steps.
    pub diagonal: SupEstimate,
    /// `‖𝒩_main(h) − f_S‖_{C⁻¹}`.
    pub main_defect: SupEstimate,
    /// C⁻¹ norm of the terms mixing `x` and `h`.
    pub cross: SupEstimate,
    /// `‖f − f_S‖_{C⁻¹}`, the residual modes left unaddressed.
    pub carried: SupEstimate,
    /// `(Σ_{m≠m₀} sup|h_m|ᵖ)^{1/p}` for ℓᵖ steps.
    pub non_anchor_lp: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepReport {
    /// Addressed residual modes `S`.
    pub targets: Vec<i64>,
    /// Residual modes passed on to `g` unchanged.
    pub carried: Vec<i64>,
    /// `S†` as (target, m, m').
    pub pairs: Vec<ModePair>,
    /// `m₀` of the ℓᵖ step.
    pub anchor: Option<i64>,
    pub m_floor: i64,
    pub k_split: u32,
    pub epsilon: f64,
    pub norms: StepNorms,
    pub constraints_verified: bool,
    /// Worst relative coefficient gap between `residual(y)` and the assembled decomposition of `g`.
    pub exactness_gap: f64,
    pub retries: u32,
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub y: ModeFn,
    pub g: ModeFn,
    pub h: ModeFn,
    pub report: StepReport,
}

/// Fresh modes and the increment for one value of `(M, K)`, before any norm is checked.
#[derive(Clone, Debug)]
pub struct Proposal {
    pub targets: Vec<i64>,
    pub carried: Vec<i64>,
    pub pairs: Vec<ModePair>,
    pub anchor: Option<i64>,
    pub m_floor: i64,
    pub k_split: u32,
    pub h: ModeFn,
}

impl Proposal {
    /// `(Σ_{m≠m₀} sup|h_m|ᵖ)^{1/p}` from per-mode sup estimates.
    pub fn non_anchor_lp(&self, p: f64, grid: &Grid) -> Result<f64> {
        let sups = mode_sups(&self.h, TimeMode::C0, grid)?;
        let total: f64 = sups.iter().filter(|(n, _)| Some(**n) != self.anchor).map(|(_, s)| s.estimate.powf(p)).sum();
        Ok(total.powf(1.0 / p))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Scheme {
    Pairs,
    Anchored,
}

fn sup_abs(modes: impl IntoIterator<Item = i64>) -> i64 {
    modes.into_iter().map(|n| n.abs()).max().unwrap_or(0)
}

/// Addressed and carried residual modes. With a positive carry fraction, modes are addressed in
/// decreasing order of their weighted `C⁻¹` bound until the rest fits in `carry_fraction·ε`.
pub fn select_targets(f: &ModeFn, cfg: &StepConfig) -> Result<(Vec<i64>, Vec<i64>)> {
    let reachable = |n: i64| !(cfg.spec.variant == Variant::QuadModulusCentered && n == 0);
    let (mut targets, mut carried): (Vec<i64>, Vec<i64>) = f.support().into_iter().partition(|&n| reachable(n));
    if cfg.carry_fraction <= 0.0 || targets.is_empty() {
        return Ok((targets, carried));
    }
    let sups = mode_sups(&f.restrict(|n| reachable(n)), TimeMode::Cminus1, &cfg.grid)?;
    let q = cfg.space.exponent();
    let mut weighted: Vec<(i64, f64)> =
        sups.iter().map(|(&n, s)| (n, cfg.space.weight(n) * s.bound.powf(q))).collect();
    weighted.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let budget = (cfg.carry_fraction * cfg.epsilon).powf(q);
    let mut tail: f64 = weighted.iter().map(|w| w.1).sum();
    let mut keep = 0;
    while keep < weighted.len() && tail > budget {
        tail -= weighted[keep].1;
        keep += 1;
    }
    targets = weighted[..keep].iter().map(|w| w.0).collect();
    targets.sort_unstable();
    carried.extend(weighted[keep..].iter().map(|w| w.0));
    carried.sort_unstable();
    Ok((targets, carried))
}

fn propose_with(
    x: &ModeFn,
    f: &ModeFn,
    cfg: &StepConfig,
    scheme: Scheme,
    split: (Vec<i64>, Vec<i64>),
    floor: i64,
    k_split: u32,
) -> Result<Proposal> {
    let (targets, carried) = split;
    let x_support = x.support();
    let floor = floor.max(sup_abs(x_support.iter().chain(&targets).copied()) + 1);
    let (pairs, anchor, h) = match scheme {
        Scheme::Pairs => {
            let pairs = choose_sdagger_avoiding(&targets, &x_support, &carried, floor, cfg.spec.variant)?;
            let h = solve_h(f, &pairs, &cfg.spec, &cfg.grid)?;
            (pairs, None, h)
        }
        Scheme::Anchored => {
            let chosen: AnchoredPairs = choose_sdagger_lp_avoiding(&targets, &x_support, &carried, floor, k_split)?;
            let h = solve_h_lp(f, &chosen, k_split, cfg.epsilon, &cfg.spec, &cfg.grid)?;
            (chosen.pairs, Some(chosen.anchor), h)
        }
    };
    Ok(Proposal { targets, carried, pairs, anchor, m_floor: floor, k_split, h })
}

/// The increment a step would use at floor `M` (pair schemes) without checking any bound.
pub fn propose(x: &ModeFn, cfg: &StepConfig, floor: i64) -> Result<Proposal> {
    let f = residual(x, &cfg.spec);
    propose_with(x, &f, cfg, Scheme::Pairs, select_targets(&f, cfg)?, floor, 1)
}

/// The ℓᵖ increment at fixed `(M, K)` without checking any bound.
pub fn propose_lp(x: &ModeFn, cfg: &StepConfig, floor: i64, k_split: u32) -> Result<Proposal> {
    let f = residual(x, &cfg.spec);
    propose_with(x, &f, cfg, Scheme::Anchored, select_targets(&f, cfg)?, floor, k_split)
}

/// `(x+h)` split into the pieces of `g = (f − f_S) + dh/dt − (𝒩_main(h) − f_S) − 𝒩_diag(h) − cross`.
struct Decomposition {
    increment_rate: ModeFn,
    main_defect: ModeFn,
    diagonal: ModeFn,
    cross: ModeFn,
    carried: ModeFn,
}

impl Decomposition {
    fn new(x: &ModeFn, f: &ModeFn, h: &ModeFn, targets: &[i64], spec: &NonlinearitySpec) -> Result<Self> {
        let y = x.add(h);
        let fresh: HashSet<i64> = h.support().into_iter().collect();
        let count = |v: &[i64]| v.iter().filter(|m| fresh.contains(m)).count();
        let (main_h, diagonal, cross) = if spec.variant.is_cubic() {
            let main_h = n_main_filtered(h, spec, |_, _, _| true);
            let cross = n_main_filtered(&y, spec, |j, k, l| {
                let c = count(&[j, k, l]);
                c != 0 && c != 3
            });
            (main_h, n_diag(h, spec)?, cross)
        } else {
            let main_h = q_filtered(h, spec, |_, _| true)?;
            let cross = q_filtered(&y, spec, |j, l| count(&[j, l]) == 1)?;
            (main_h, ModeFn::zero(), cross)
        };
        let addressed: HashSet<i64> = targets.iter().copied().collect();
        let f_s = f.restrict(|n| addressed.contains(&n));
        Ok(Self {
            increment_rate: h.derivative(),
            main_defect: main_h.sub(&f_s),
            diagonal,
            cross,
            carried: f.restrict(|n| !addressed.contains(&n)),
        })
    }

    fn assemble(&self) -> ModeFn {
        self.carried.add(&self.increment_rate).sub(&self.main_defect).sub(&self.diagonal).sub(&self.cross)
    }
}

/// Entries below the floor that are not just rounding left over from an exact cancellation.
fn low_modes(v: &ModeFn, floor: i64, allowed: &HashSet<i64>, reference: &ModeFn) -> Vec<i64> {
    v.iter()
        .filter(|(n, e)| {
            n.abs() < floor && !allowed.contains(n) && {
                let scale = reference.get(*n).map_or(0.0, |r| r.magnitude()).max(1.0);
                e.magnitude() > 1e-12 * scale
            }
        })
        .map(|(n, _)| n)
        .collect()
}

fn finish(
    x: &ModeFn,
    f: &ModeFn,
    cfg: &StepConfig,
    prop: Proposal,
    y: ModeFn,
    g: ModeFn,
    increment: SupEstimate,
    residual_norm: SupEstimate,
    retries: u32,
) -> Result<StepOutcome> {
    let parts = Decomposition::new(x, f, &prop.h, &prop.targets, &cfg.spec)?;
    let (_, gap) = g.worst_gap(&parts.assemble()).unwrap_or((0, 0.0));
    if gap > EXACTNESS_TOL {
        return Err(Error::AssertionFailure {
            check: "residual exactness".into(),
            detail: format!("residual(y) and the assembled g differ by {gap:e} (relative)"),
        });
    }
    let floor = prop.m_floor;
    // the reversed |u|² pair leaves a partner at −n
    let partners: HashSet<i64> = if cfg.spec.variant == Variant::QuadModulusCentered {
        prop.targets.iter().map(|n| -n).collect()
    } else {
        HashSet::new()
    };
    let carried_set: HashSet<i64> = prop.carried.iter().copied().collect();
    let mut problems = Vec::new();
    let overlap: Vec<i64> = prop.h.support().into_iter().filter(|n| x.get(*n).is_some()).collect();
    if !overlap.is_empty() {
        problems.push(format!("increment overlaps x on {overlap:?}"));
    }
    let bad_main = low_modes(&parts.main_defect, floor, &partners, f);
    if !bad_main.is_empty() {
        problems.push(format!("main defect below the floor on {bad_main:?}"));
    }
    let bad_cross = low_modes(&parts.cross, floor, &HashSet::new(), f);
    if !bad_cross.is_empty() {
        problems.push(format!("cross terms below the floor on {bad_cross:?}"));
    }
    let allowed: HashSet<i64> = carried_set.union(&partners).copied().collect();
    let bad_g = low_modes(&g, floor, &allowed, f);
    if !bad_g.is_empty() {
        problems.push(format!("g below the floor on {bad_g:?}"));
    }
    if !problems.is_empty() {
        return Err(Error::AssertionFailure { check: "support constraints".into(), detail: problems.join("; ") });
    }
    let (c0, cm1) = (cfg.c0(), cfg.cminus1());
    let non_anchor_lp = match (prop.anchor, cfg.space) {
        (Some(_), Spatial::Lp { p }) => Some(prop.non_anchor_lp(p, &cfg.grid)?),
        _ => None,
    };
    let norms = StepNorms {
        increment,
        residual: residual_norm,
        increment_rate: norm(&parts.increment_rate, &cm1, &cfg.grid)?,
        diagonal: norm(&parts.diagonal, &c0, &cfg.grid)?,
        main_defect: norm(&parts.main_defect, &cm1, &cfg.grid)?,
        cross: norm(&parts.cross, &cm1, &cfg.grid)?,
        carried: norm(&parts.carried, &cm1, &cfg.grid)?,
        non_anchor_lp,
    };
    let mut h = prop.h;
    h.note = "increment".into();
    let report = StepReport {
        targets: prop.targets,
        carried: prop.carried,
        pairs: prop.pairs,
        anchor: prop.anchor,
        m_floor: floor,
        k_split: prop.k_split,
        epsilon: cfg.epsilon,
        norms,
        constraints_verified: true,
        exactness_gap: gap,
        retries,
    };
    Ok(StepOutcome { y, g, h, report })
}

fn run(x: &ModeFn, f: &ModeFn, cfg: &StepConfig, scheme: Scheme) -> Result<StepOutcome> {
    cfg.validate()?;
    if !x.is_flat() {
        return Err(Error::FlatnessViolation("x has an entry that is not flat at t = 0".into()));
    }
    let split = if f.is_zero() { (vec![], vec![]) } else { select_targets(f, cfg)? };
    if split.0.is_empty() {
        // nothing worth addressing: the residual already fits the budget and passes on unchanged
        let carried_norm = norm(f, &cfg.cminus1(), &cfg.grid)?;
        if carried_norm.bound > cfg.epsilon {
            return Err(Error::InfeasibleSupport("no residual mode can be addressed".into()));
        }
        let report = StepReport {
            targets: vec![],
            carried: split.1,
            pairs: vec![],
            anchor: None,
            m_floor: cfg.m_floor,
            k_split: cfg.k_split,
            epsilon: cfg.epsilon,
            norms: StepNorms {
                increment: SupEstimate::zero(),
                residual: carried_norm,
                increment_rate: SupEstimate::zero(),
                diagonal: SupEstimate::zero(),
                main_defect: SupEstimate::zero(),
                cross: SupEstimate::zero(),
                carried: carried_norm,
                non_anchor_lp: None,
            },
            constraints_verified: true,
            exactness_gap: 0.0,
            retries: 0,
        };
        return Ok(StepOutcome { y: x.clone(), g: f.clone(), h: ModeFn::zero(), report });
    }
    let (c0, cm1) = (cfg.c0(), cfg.cminus1());
    let mut floor = cfg.m_floor;
    let mut k_split = cfg.k_split;
    let mut last = String::new();
    for retries in 0..=cfg.max_escalations {
        let prop = match propose_with(x, f, cfg, scheme, split.clone(), floor, k_split) {
            Ok(p) => p,
            Err(Error::InfeasibleSupport(why)) if retries > 0 => {
                last = why;
                break;
            }
            Err(e) => return Err(e),
        };
        floor = prop.m_floor;
        let increment = norm(&prop.h, &c0, &cfg.grid)?;
        if increment.bound > cfg.epsilon {
            last = format!("‖h‖ bound {:.3e} > ε = {:.3e} at M = {floor}, K = {k_split}", increment.bound, cfg.epsilon);
            match scheme {
                Scheme::Pairs => floor *= 2,
                Scheme::Anchored => {
                    if 2 * prop.h.len() > LP_SUPPORT_CAP {
                        break;
                    }
                    k_split *= 2;
                }
            }
            continue;
        }
        let y = x.add(&prop.h);
        let mut g = residual(&y, &cfg.spec);
        g.note = "residual".into();
        let residual_norm = norm(&g, &cm1, &cfg.grid)?;
        if residual_norm.bound > cfg.epsilon {
            last = format!("‖g‖ bound {:.3e} > ε = {:.3e} at M = {floor}", residual_norm.bound, cfg.epsilon);
            floor *= 2;
            continue;
        }
        return finish(x, f, cfg, prop, y, g, increment, residual_norm, retries);
    }
    Err(Error::BoundUnreachable { escalations: cfg.max_escalations, detail: last })
}

fn run_fixed(x: &ModeFn, cfg: &StepConfig, scheme: Scheme, floor: i64, k_split: u32) -> Result<StepOutcome> {
    cfg.validate()?;
    let f = residual(x, &cfg.spec);
    let split = if f.is_zero() { (vec![], vec![]) } else { select_targets(&f, cfg)? };
    if split.0.is_empty() {
        return run(x, &f, cfg, scheme);
    }
    let prop = propose_with(x, &f, cfg, scheme, split, floor, k_split)?;
    let increment = norm(&prop.h, &cfg.c0(), &cfg.grid)?;
    let y = x.add(&prop.h);
    let mut g = residual(&y, &cfg.spec);
    g.note = "residual".into();
    let residual_norm = norm(&g, &cfg.cminus1(), &cfg.grid)?;
    finish(x, &f, cfg, prop, y, g, increment, residual_norm, 0)
}

/// A pair-scheme step at a fixed floor, with every check except the `ε` bounds.
pub fn step_at(x: &ModeFn, cfg: &StepConfig, floor: i64) -> Result<StepOutcome> {
    run_fixed(x, cfg, Scheme::Pairs, floor, 1)
}

/// An ℓᵖ step at fixed `(M, K)`, with every check except the `ε` bounds.
pub fn step_lp_at(x: &ModeFn, cfg: &StepConfig, floor: i64, k_split: u32) -> Result<StepOutcome> {
    if !cfg.spec.variant.is_cubic() {
        return Err(Error::VariantMismatch("the ℓᵖ step uses the cubic nonlinearity".into()));
    }
    run_fixed(x, cfg, Scheme::Anchored, floor, k_split)
}

/// One cascade step on `x` with the cubic or quadratic pair scheme, chosen by `cfg.spec.variant`.
pub fn step(x: &ModeFn, cfg: &StepConfig) -> Result<StepOutcome> {
    step_from_residual(x, &residual(x, &cfg.spec), cfg)
}

/// As [`step`] with the residual of `x` already known.
pub fn step_from_residual(x: &ModeFn, f: &ModeFn, cfg: &StepConfig) -> Result<StepOutcome> {
    run(x, f, cfg, Scheme::Pairs)
}

/// The ℓᵖ step: a shared anchor mode and `K` pair families per target.
pub fn step_lp(x: &ModeFn, cfg: &StepConfig) -> Result<StepOutcome> {
    step_lp_from_residual(x, &residual(x, &cfg.spec), cfg)
}

pub fn step_lp_from_residual(x: &ModeFn, f: &ModeFn, cfg: &StepConfig) -> Result<StepOutcome> {
    match cfg.space {
        Spatial::Lp { p } if p > 2.0 => {}
        other => return Err(Error::InvalidConfig(format!("the ℓᵖ step needs p > 2, got {}", other.label()))),
    }
    if !cfg.spec.variant.is_cubic() {
        return Err(Error::VariantMismatch("the ℓᵖ step uses the cubic nonlinearity".into()));
    }
    run(x, f, cfg, Scheme::Anchored)
}
