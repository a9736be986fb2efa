//! Desk-scale construction of nonzero solutions with zero initial data for the
//! periodic cubic Schrödinger equation (and quadratic and ℓᵖ variants), built
//! from an exact algebra of flat-at-zero mode trajectories.

pub mod error;
pub mod flatfn;

pub use error::{Error, Result};
pub use flatfn::{FlatFn, FlatTerm, Grid, Rate};
pub use num_complex::Complex64;
pub mod spectral;
pub mod cascade;
pub mod verifier;
pub use cascade::{CascadeConfig, ConstructionState, StepConfig, StepReport};

pub use spectral::{ModeFn, NonlinearitySpec, NormSpace, Spatial, TimeMode, Variant};
