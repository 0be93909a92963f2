//! Simulation of the unit boundary length quantum disk.
//!
//! Two constructions are implemented and compared: the field with three
//! boundary log singularities reweighted by its boundary length, and the
//! Bessel-excursion encoding on the strip. A shared half-disk limiting
//! procedure links the two.

pub mod bessel;
pub mod constructions;
pub mod error;
pub mod geometry;
pub mod gff;
pub mod gmc;
pub mod green;
pub mod harness;
pub mod linalg;
pub mod quad;
pub mod rng;

pub use error::{LqgError, Result};
