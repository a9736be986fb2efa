//! Fourier-side formulation: mode functions, resonance phases, the cubic and
//! quadratic nonlinearities, residuals and the space-time norms.

mod modefn;
mod nonlinearity;
mod norms;

pub use modefn::ModeFn;
pub use nonlinearity::{
    n_diag, n_main, n_main_filtered, nonlinearity, q_filtered, q_nonlinearity, residual, sigma, u_side, Direction,
    NonlinearitySpec, Variant,
};
pub(crate) use nonlinearity::{phase_i64, PairRule};
pub use norms::{mode_sups, norm, norm_with, NormSpace, Spatial, TimeMode};
