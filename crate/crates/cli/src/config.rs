use std::path::Path;

use cascade_core::verifier::VerifyOptions;
use cascade_core::{CascadeConfig, ConstructionState, Grid, NonlinearitySpec, Spatial};
use serde::{Deserialize, Serialize};

use crate::failure::Failure;

fn default_stages() -> usize {
    4
}
fn default_k_split() -> u32 {
    1
}
fn default_escalations() -> u32 {
    20
}
fn default_carry() -> f64 {
    0.25
}
fn default_seed() -> u64 {
    7
}
fn default_export_samples() -> usize {
    65
}
fn default_integral_samples() -> usize {
    33
}
fn default_cutoffs() -> Vec<i64> {
    (5..=12).map(|e| 1i64 << e).collect()
}
fn default_sweep_epsilon() -> f64 {
    0.1
}

/// Everything a command needs, read from one JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub spec: NonlinearitySpec,
    pub space: Spatial,
    pub m_floor: i64,
    #[serde(default = "default_stages")]
    pub stages: usize,
    #[serde(default = "default_k_split")]
    pub k_split: u32,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default = "default_escalations")]
    pub max_escalations: u32,
    #[serde(default = "default_carry")]
    pub carry_fraction: f64,
    /// Seed of the perturbed cutoff family.
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Time samples per mode in `cascade_csv`.
    #[serde(default = "default_export_samples")]
    pub export_samples: usize,
    #[serde(default = "default_integral_samples")]
    pub integral_samples: usize,
    #[serde(default = "default_cutoffs")]
    pub cutoffs: Vec<i64>,
    #[serde(default)]
    pub sweep: Option<SweepGrid>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Increment norm of one step from the seed against the floor M.
    MFloor,
    /// Non-anchor ℓᵖ norm against the split K, at the configured floor.
    KSplit,
}

impl SweepParameter {
    pub fn label(self) -> &'static str {
        match self {
            SweepParameter::MFloor => "M",
            SweepParameter::KSplit => "K",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub parameter: SweepParameter,
    pub values: Vec<i64>,
    #[serde(default = "default_sweep_epsilon")]
    pub epsilon: f64,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::invalid(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| Failure::invalid(format!("config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn cascade(&self) -> CascadeConfig {
        CascadeConfig {
            spec: self.spec,
            space: self.space,
            m_floor: self.m_floor,
            k_split: self.k_split,
            grid: self.grid,
            max_escalations: self.max_escalations,
            carry_fraction: self.carry_fraction,
        }
    }

    pub fn verify_options(&self) -> VerifyOptions {
        VerifyOptions {
            integral_samples: self.integral_samples,
            cutoffs: self.cutoffs.clone(),
            perturbation_seed: self.seed,
            grid: self.grid,
            ..VerifyOptions::default()
        }
    }

    /// Structural checks. Unreachable bounds are left to the construction itself.
    pub fn validate(&self) -> Result<(), Failure> {
        NonlinearitySpec::new(self.spec.omega, self.spec.variant).map_err(Failure::from_core)?;
        let bad = |m: String| Err(Failure::invalid(m));
        if self.m_floor < 1 {
            return bad(format!("m_floor must be positive, got {}", self.m_floor));
        }
        if self.stages < 1 {
            return bad("stages must be at least 1".into());
        }
        if self.k_split < 1 {
            return bad("k_split must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.carry_fraction) {
            return bad(format!("carry_fraction must lie in [0, 1), got {}", self.carry_fraction));
        }
        if self.export_samples < 2 || self.integral_samples < 2 {
            return bad("export_samples and integral_samples must be at least 2".into());
        }
        if self.cutoffs.iter().any(|&n| n < 1) {
            return bad("cutoffs must be positive".into());
        }
        match self.space {
            Spatial::L2s { s } if !s.is_finite() => bad("s must be finite".into()),
            Spatial::Lp { p } if !(p >= 1.0 && p.is_finite()) => bad(format!("p must be ≥ 1, got {p}")),
            _ => Ok(()),
        }
    }
}

/// A construction together with the configuration that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub run: RunConfig,
    pub state: ConstructionState,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::invalid(format!("cannot read manifest {}: {e}", path.display())))?;
        let m: Manifest =
            serde_json::from_str(&text).map_err(|e| Failure::invalid(format!("manifest {}: {e}", path.display())))?;
        m.run.validate()?;
        Ok(m)
    }
}
