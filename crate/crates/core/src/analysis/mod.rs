//! Statistics: Poisson shift distances, goodness-of-fit tests, exponent
//! regression, nested-count checks and density estimates.

mod density;
mod hypothesis;
mod intervals;
mod nested;
mod poisson;
mod regression;

pub use density::{line_density, occupation, one_point_density, DensityReport};
pub use hypothesis::{chi_square_gof, chi_square_table, correlation, poisson_gof, Correlation, TestResult, ALPHA};
pub use intervals::{wilson, Estimate, Z95};
pub use nested::{nested_count_check, nested_counts, NestedReport, ShiftRow, MIN_EVENTS, MIN_REPLICAS};
pub use poisson::{ln_poisson_pmf, poisson_shift_distance, PoissonPair, ShiftDistance};
pub use regression::{fit_decay_exponent, weighted_fit, DecaySample, RegressionResult, MIN_SUCCESSES};
