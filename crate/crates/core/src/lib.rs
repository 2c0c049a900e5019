//! Bayesian optimisation over mixed, constrained and multi-fidelity domains.

pub mod acquisition;
pub mod config;
pub mod domain;
pub mod error;
pub mod expr;
pub mod fidelity;
pub mod gp;
pub mod hyper;
pub mod kernel;
pub mod linalg;
pub mod optimize;
pub mod orchestrator;

pub use domain::{Coord, Domain, FidelitySpace, Point, VariableKind, VariableSpec};
pub use error::{Error, Result};
