use serde::{Deserialize, Serialize};

use super::step::{step_from_residual, step_lp_from_residual, StepConfig, StepReport};
use super::seed_x1;
use crate::error::{Error, Result};
use crate::flatfn::Grid;
use crate::spectral::{residual, ModeFn, NonlinearitySpec, Spatial};

fn default_k_split() -> u32 {
    1
}

fn default_escalations() -> u32 {
    20
}

fn default_carry() -> f64 {
    0.25
}

/// Parameters shared by every stage of the induction; `ε` comes from the stage budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeConfig {
    pub spec: NonlinearitySpec,
    pub space: Spatial,
    pub m_floor: i64,
    #[serde(default = "default_k_split")]
    pub k_split: u32,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default = "default_escalations")]
    pub max_escalations: u32,
    #[serde(default = "default_carry")]
    pub carry_fraction: f64,
}

impl CascadeConfig {
    pub fn new(spec: NonlinearitySpec, space: Spatial, m_floor: i64) -> Self {
        Self {
            spec,
            space,
            m_floor,
            k_split: 1,
            grid: Grid::default(),
            max_escalations: default_escalations(),
            carry_fraction: default_carry(),
        }
    }

    pub fn step_config(&self, epsilon: f64, m_floor: i64) -> StepConfig {
        StepConfig {
            m_floor,
            epsilon,
            space: self.space,
            spec: self.spec,
            k_split: self.k_split,
            grid: self.grid,
            max_escalations: self.max_escalations,
            carry_fraction: self.carry_fraction,
        }
    }

    /// ℓᵖ spaces with `p > 2` use the anchored step.
    pub fn uses_anchor(&self) -> bool {
        matches!(self.space, Spatial::Lp { p } if p > 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        self.step_config(stage_budget(1), self.m_floor).validate()
    }
}

/// `δₙ = 2⁻ⁿ⁻¹`.
pub fn stage_budget(n: usize) -> f64 {
    0.5f64.powi(n as i32 + 1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage {
    pub index: usize,
    pub delta: f64,
    pub x: ModeFn,
    /// `residual(x)`.
    pub f: ModeFn,
    /// `x⁽ⁿ⁺¹⁾ − x⁽ⁿ⁾`; empty on the last stage.
    pub h: ModeFn,
    pub report: Option<StepReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructionState {
    pub config: CascadeConfig,
    pub stages: Vec<Stage>,
    pub target_deltas: Vec<f64>,
}

impl ConstructionState {
    /// The empty construction: no stages.
    pub fn empty(config: CascadeConfig) -> Self {
        Self { config, stages: vec![], target_deltas: vec![] }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("construction state serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(Error::from_json)
    }

    /// Stage chaining, increment budgets, zero initial data and flatness.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |detail: String| Err(Error::AssertionFailure { check: "construction invariants".into(), detail });
        for (i, st) in self.stages.iter().enumerate() {
            let n = i + 1;
            if st.index != n {
                return fail(format!("stage {i} carries index {}", st.index));
            }
            if st.delta > stage_budget(n) {
                return fail(format!("stage {n} budget {} exceeds 2^-{}", st.delta, n + 1));
            }
            if !st.x.is_zero_at_origin() || !st.x.is_flat() {
                return fail(format!("stage {n} does not vanish to infinite order at t = 0"));
            }
            if let Some(r) = &st.report {
                if !r.constraints_verified {
                    return fail(format!("stage {n} step reports unverified constraints"));
                }
                if r.norms.increment.bound > st.delta {
                    return fail(format!("stage {n} increment {} exceeds δ = {}", r.norms.increment.bound, st.delta));
                }
            }
            if let Some(next) = self.stages.get(i + 1) {
                if let Some((mode, gap)) = next.x.worst_gap(&st.x.add(&st.h)) {
                    if gap > 1e-12 {
                        return fail(format!("stage {} differs from stage {n} plus its increment at mode {mode}", n + 1));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Builds `x⁽¹⁾ … x⁽ⁿ⁾` from the seed, each step at `ε = δₙ` with a floor above the previous one.
pub fn iterate(config: &CascadeConfig, n_stages: usize) -> Result<ConstructionState> {
    iterate_with(config, n_stages, |_| {})
}

/// As [`iterate`], calling `progress` after every finished stage.
pub fn iterate_with(
    config: &CascadeConfig,
    n_stages: usize,
    mut progress: impl FnMut(&Stage),
) -> Result<ConstructionState> {
    if n_stages < 1 {
        return Err(Error::InvalidConfig("at least one stage is required".into()));
    }
    config.validate()?;
    let mut state = ConstructionState::empty(config.clone());
    state.target_deltas = (1..=n_stages).map(stage_budget).collect();
    let mut x = seed_x1();
    let mut f = residual(&x, &config.spec);
    let mut floor = config.m_floor;
    for n in 1..=n_stages {
        let delta = stage_budget(n);
        if n == n_stages {
            state.stages.push(Stage { index: n, delta, x, f, h: ModeFn::zero(), report: None });
            progress(state.stages.last().expect("just pushed"));
            break;
        }
        let cfg = config.step_config(delta, floor);
        let out = if config.uses_anchor() {
            step_lp_from_residual(&x, &f, &cfg)?
        } else {
            step_from_residual(&x, &f, &cfg)?
        };
        floor = 2 * out.report.m_floor;
        let mut y = out.y;
        y.note = format!("stage {}", n + 1);
        let mut g = out.g;
        g.note = format!("residual of stage {}", n + 1);
        state.stages.push(Stage { index: n, delta, x, f, h: out.h, report: Some(out.report) });
        progress(state.stages.last().expect("just pushed"));
        x = y;
        f = g;
    }
    state.check_invariants()?;
    Ok(state)
}
