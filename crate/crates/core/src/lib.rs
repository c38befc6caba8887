//! Variable-exponent Lebesgue/Sobolev norms on grids, Sobolev constant
//! estimation and concentration diagnostics.

pub mod domain;
pub mod error;
pub mod exponents;
pub mod expr;
pub mod luxemburg;
pub mod run;
mod p1;
pub mod concentration;
pub mod experiments;
pub mod sobolev;

pub use error::{Error, Result};
