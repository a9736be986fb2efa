//! Independent checks of constructed stages: Fourier cutoffs, the integral equation, and a
//! numerical integration of the finite ODE system.

mod audit;
mod convergence;
mod cutoff;
mod ode;

pub use audit::{
    verify_construction, CheckOutcome, VerificationReport, VerifyOptions, INTEGRAL_TOL, ODE_TOL, RESIDUAL_TOL,
};
pub use convergence::{
    cutoff_convergence, designated_scaling_gap, ConvergenceReport, ConvergenceRow, DEVIATION_TOL, FIT_SPREAD,
};
pub use cutoff::{apply_cutoff, make_cutoff, perturbation_amplitude, plateau, Cutoff, CutoffFamily};
pub use ode::{integral_equation_check, ode_crosscheck, ode_max_frequency};

#[cfg(test)]
mod tests;
