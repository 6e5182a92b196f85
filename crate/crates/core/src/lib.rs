//! Shifted-passivity and stability analysis for port-Hamiltonian systems.
//!
//! The crate is organised around the model trait [`PortHamiltonian`]:
//!
//! - [`model`]: general and quadratic-affine models, co-energy maps, the
//!   shifted Hamiltonian, and structural validation;
//! - [`equilibrium`]: forced equilibria via damped Newton;
//! - [`analyzer`]: the negative-semidefiniteness tests, stability margin,
//!   passivity shortage and proportional-gain design;
//! - [`simulator`]: fixed-step RK4 trajectories and discrete checks of the
//!   dissipation inequalities;
//! - [`case_studies`]: synchronous generator and controlled rigid body;
//! - [`io`] and [`cli`]: file formats and the command-line front end.

pub mod analyzer;
pub mod case_studies;
pub mod cli;
pub mod equilibrium;
pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod simulator;
mod tolerances;

pub use error::{PhError, Result};
pub use model::{EquilibriumPoint, PHModel, PortHamiltonian, QuadraticAffinePH};
pub use tolerances::Tolerances;

pub use nalgebra::{DMatrix, DVector};
