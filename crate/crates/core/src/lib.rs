//! Numerical laboratory for Reeb flows on explicit contact 3-manifolds.

// `!(x > 0.0)` style checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blowup;
pub mod dynamics;
pub mod entropy;
pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod liftaxiom;
pub mod measures;
pub mod ode;
pub mod sfs;
pub mod util;

pub use error::{Error, Result};
