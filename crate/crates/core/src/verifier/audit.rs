use serde::{Deserialize, Serialize};

use super::convergence::cutoff_convergence;
use super::cutoff::CutoffFamily;
use super::ode::{integral_equation_check, ode_crosscheck, ode_max_frequency};
use crate::cascade::ConstructionState;
use crate::error::Result;
use crate::flatfn::Grid;
use crate::spectral::residual;

pub const RESIDUAL_TOL: f64 = 1e-10;
pub const INTEGRAL_TOL: f64 = 1e-9;
pub const ODE_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyOptions {
    pub ode_dt: f64,
    /// ODE checks are skipped when `frequency·dt` exceeds this (RK4 would need a finer step).
    pub ode_max_phase_step: f64,
    pub integral_samples: usize,
    pub cutoffs: Vec<i64>,
    pub perturbation_seed: u64,
    pub grid: Grid,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            ode_dt: 1e-4,
            ode_max_phase_step: 1.0,
            integral_samples: 33,
            cutoffs: (5..=12).map(|e| 1i64 << e).collect(),
            perturbation_seed: 7,
            grid: Grid::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub skipped: bool,
    pub value: f64,
    pub limit: f64,
    pub detail: String,
}

impl CheckOutcome {
    fn measured(name: String, value: f64, limit: f64) -> Self {
        Self { name, passed: value <= limit, skipped: false, value, limit, detail: String::new() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationReport {
    pub checks: Vec<CheckOutcome>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| !c.passed)
    }
}

/// Residual exactness, chaining and invariants, the integral equation, the ODE cross-check on
/// every stage whose frequencies RK4 can resolve, and the finite-N cutoff bounds.
pub fn verify_construction(state: &ConstructionState, opts: &VerifyOptions) -> Result<VerificationReport> {
    let mut report = VerificationReport::default();
    let spec = state.config.spec;
    let ts: Vec<f64> = (0..opts.integral_samples).map(|i| i as f64 / (opts.integral_samples - 1).max(1) as f64).collect();
    for st in &state.stages {
        let gap = residual(&st.x, &spec).worst_gap(&st.f).map_or(0.0, |g| g.1);
        report.checks.push(CheckOutcome::measured(format!("residual exactness, stage {}", st.index), gap, RESIDUAL_TOL));
    }
    for pair in state.stages.windows(2) {
        let gap = pair[1].x.worst_gap(&pair[0].x.add(&pair[0].h)).map_or(0.0, |g| g.1);
        let name = format!("increment chaining, stage {}", pair[0].index);
        report.checks.push(CheckOutcome::measured(name, gap, RESIDUAL_TOL));
    }
    let invariants = state.check_invariants();
    report.checks.push(CheckOutcome {
        name: "construction invariants".into(),
        passed: invariants.is_ok(),
        skipped: false,
        value: 0.0,
        limit: 0.0,
        detail: invariants.err().map(|e| e.to_string()).unwrap_or_default(),
    });
    if !report.passed() {
        return Ok(report);
    }
    for st in &state.stages {
        let defect = integral_equation_check(&st.x, &st.f, &spec, &ts)?;
        report.checks.push(CheckOutcome::measured(format!("integral equation, stage {}", st.index), defect, INTEGRAL_TOL));
        let name = format!("ode cross-check, stage {}", st.index);
        let freq = ode_max_frequency(&st.x, &st.f, &spec);
        if freq * opts.ode_dt > opts.ode_max_phase_step {
            report.checks.push(CheckOutcome {
                name,
                passed: true,
                skipped: true,
                value: 0.0,
                limit: ODE_TOL,
                detail: format!("frequency {freq:.3e} needs a step below {:.1e}", opts.ode_max_phase_step / freq),
            });
        } else {
            let err = ode_crosscheck(&st.x, &st.f, &spec, opts.ode_dt)?;
            report.checks.push(CheckOutcome::measured(name, err, ODE_TOL));
        }
    }
    if state.stages.len() >= 3 {
        let families = CutoffFamily::all(opts.perturbation_seed);
        let conv = cutoff_convergence(state, &families, &opts.cutoffs, state.config.space, &opts.grid)?;
        let finite = conv.check_finite();
        report.checks.push(CheckOutcome {
            name: "cutoff deviation bounds".into(),
            passed: finite.is_ok(),
            skipped: false,
            value: conv.fitted_c(),
            limit: 0.0,
            detail: finite.err().map(|e| e.to_string()).unwrap_or_default(),
        });
    }
    Ok(report)
}
