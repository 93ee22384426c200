//! Convex dynamic programming via discrete Legendre-Fenchel transforms.
//!
//! The crate solves finite-horizon convex control problems in the dual:
//! a value function is conjugated on a gradient (dual) grid, the stage
//! cost conjugates are added, and a second conjugation brings the result
//! back. All computational routines are deterministic.

pub mod conditioning;
pub mod dp_det;
pub mod dp_stoch;
pub mod error;
pub mod grid;
pub mod instances;
pub mod lft;
pub mod model;
pub mod qlft_sim;

pub use error::{Error, Result};
