//! SLOCC classification of `2 x m x n` tripartite pure states.
//!
//! States are mapped to matrix pencils, whose Kronecker canonical form
//! determines the SLOCC orbit.  On top of that the crate decides the
//! invariant-theoretic type of an orbit (null cone, strictly semistable,
//! strictly polystable, stable), constructs explicit one-parameter families
//! that witness the decision, solves the balancing problem that produces
//! critical representatives, runs an operator-scaling normal form, and
//! enumerates all orbit families for given dimensions.

pub mod classifier;
pub mod dsl;
pub mod enumerate;
pub mod error;
pub mod exact;
pub mod geometry;
pub mod linalg;
pub mod normalform;
pub mod pencil;
pub mod tensor;
pub mod witness;

pub use error::{Error, Result};
