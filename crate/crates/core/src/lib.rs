//! Random interlacements on `Z^d`: exact trajectory-soup sampling, lattice
//! potential theory, chain distances between trajectories and the Monte Carlo
//! checks built on them.

pub mod analysis;
pub mod error;
pub mod generations;
pub mod harness;
pub mod lattice;
pub mod potential;
pub mod relations;
pub mod soup;
pub mod stream;
pub mod walk;

pub use error::{Error, Result};
