//! Adaptive multiresolution discontinuous Galerkin solver built on orthonormal
//! multiwavelets, with a Vlasov-Poisson layer.

pub mod basis;
pub mod domain;
pub mod element;
pub mod error;
pub mod operator;
pub mod poisson;
pub mod problems;
pub mod projection;
pub mod quadrature;
pub mod runner;
pub mod stepper;
pub mod transform;
pub mod vlasov;

pub use error::{Error, Result};
