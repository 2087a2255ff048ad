//! Damped Benjamin-Ono dynamics on the torus in Birkhoff coordinates, with a
//! pseudospectral PDE solver as an independent cross-check.

pub mod birkhoff;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod integrator;
pub mod io;
pub mod pde;
pub mod spectral;
pub mod types;

pub use birkhoff::{birkhoff_forward, build_lax_matrix, initial_state, LaxSpectrum};
pub use diagnostics::{diagnose, DiagnosticReport};
pub use error::{Error, Result};
pub use field::{vector_field, vector_field_gauge, FieldWorkspace};
pub use integrator::{evolve, evolve_config, Trajectory};
pub use pde::{cross_validate, pde_evolve};
pub use spectral::SpectralParams;
pub use types::{Actions, BirkhoffState, FourierFunction, InitialData, RunConfig};
