//! Discrete Yang–Mills–Higgs–Dirac laboratory on a flat two-dimensional torus.
//!
//! The crate is organised bottom-up:
//!
//! * [`lie`]: structure groups U(1) and SU(2), their algebras, and the
//!   isometric action on the fiber S².
//! * [`geometry`]: the periodic grid, central-difference operators, gamma
//!   matrices and quadrature.
//! * [`fields`]: field containers, gauge transformations, curvature, the
//!   vertical differential and Coulomb gauge fixing.
//! * [`action`]: the coupled action, energy densities and the twisted Dirac
//!   operator.
//! * [`euler_lagrange`]: exact gradients of the discrete action and the
//!   coupling tensors.
//! * [`gradcheck`]: finite-difference oracle for the gradients.
//! * [`solver`]: gradient flows, the Dirac eigensolver and the alternating
//!   search.
//! * [`blowup`]: ball energies, concentration scans, rescaling and bubble
//!   extraction.
//! * [`synthetic`]: analytic test fields and bubble fixtures.
//! * [`io`]: run configuration, snapshots and CSV output.
//! * [`checks`]: the invariant battery driven by `ymhd check-invariants`.

pub mod action;
pub mod blowup;
pub mod checks;
pub mod error;
pub mod euler_lagrange;
pub mod fields;
pub mod geometry;
pub mod gradcheck;
pub mod io;
pub mod lie;
pub mod solver;
pub mod synthetic;

pub use error::{Result, YmhdError};
pub use fields::FieldState;
pub use geometry::Domain;
pub use lie::{Group, Model};
