//! Thin-plate bending by discontinuous Galerkin discretization and discrete gradient flows.
//!
//! The crate covers three plate models: prestrained plates with a metric
//! constraint, preasymptotic plates with a penalized stretching energy, and
//! bilayer plates with an isometry constraint. Deformations live in a broken
//! `Q_k` space; second derivatives are reconstructed with lifting operators.

pub mod dgspace;
pub mod discretization;
pub mod energy;
pub mod error;
pub mod flow;
pub mod hessian;
pub mod linalg;
pub mod mesh;
pub mod quadrature;
pub mod registry;
pub mod sparse;

pub use discretization::Discretization;
pub use error::{Error, Result};
