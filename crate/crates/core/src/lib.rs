//! Robust output regulation of boundary-controlled port-Hamiltonian systems
//! on a 1D interval.
//!
//! The pipeline runs from a continuous model ([`phs::PhsModel`]) through a
//! passive discretization ([`discretize::discretize`]) to an internal-model
//! controller ([`controller::InternalModelController`]), the closed loop,
//! its simulation and a quadratic stability certificate
//! ([`closedloop`]). [`timoshenko`] packages the beam demo and [`io`] the
//! text formats used by the command-line tool.

pub mod closedloop;
pub mod controller;
pub mod discretize;
pub mod error;
pub mod io;
pub mod linalg;
pub mod phs;
pub mod timoshenko;

pub use error::{Error, Result};
