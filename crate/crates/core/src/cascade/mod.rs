//! The cascade step and the staged construction.

mod construct;
mod sdagger;
mod solve;
mod step;

pub use construct::{iterate, iterate_with, stage_budget, CascadeConfig, ConstructionState, Stage};
pub use sdagger::{
    choose_sdagger, choose_sdagger_avoiding, choose_sdagger_lp, choose_sdagger_lp_avoiding, AnchoredPairs, ModePair,
    MODE_LIMIT,
};
pub use solve::{solve_h, solve_h_lp};
pub use step::{
    propose, propose_lp, select_targets, step, step_at, step_from_residual, step_lp, step_lp_at, step_lp_from_residual,
    Proposal,
    StepConfig, StepNorms, StepOutcome, StepReport, EXACTNESS_TOL,
};

use num_complex::Complex64;

use crate::flatfn::{FlatFn, FlatTerm};
use crate::spectral::ModeFn;

/// `x₀(t) = e·e^{−1/t}` on mode 0, sup exactly 1 at `t = 1`.
pub fn seed_x1() -> ModeFn {
    let mut x = ModeFn::with_note("seed");
    x.set(0, FlatFn::monomial(FlatTerm::flat(Complex64::new(std::f64::consts::E, 0.0), 1, 1)));
    x
}

#[cfg(test)]
mod tests;
