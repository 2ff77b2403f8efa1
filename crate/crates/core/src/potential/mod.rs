//! Discrete potential theory: the lattice Green function (two independent
//! methods), equilibrium measures, capacities and hitting probabilities.

mod absorbing_box;
pub mod bessel;
mod cg;
mod equilibrium;
mod green;
mod time_integral;

pub use absorbing_box::{box_green, BoxConfig, BoxEstimate, BoxSolve};
pub use equilibrium::{
    capacity, equilibrium, hit_prob, inner_boundary, PotentialTable, Solver, CLIP_TOLERANCE, DENSE_LIMIT,
    MAX_SET_SIZE,
};
pub use green::{BoxDiagnostics, GreenMethod, GreenOracle};
pub use time_integral::{green_values, TimeIntegralConfig};
