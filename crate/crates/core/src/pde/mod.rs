//! Space-time grids, grid fields, the implicit Euler period map and
//! time-periodic boundary value problems.

mod bvp;
mod field;
mod grid;
pub(crate) mod linalg;
mod stepper;

pub use bvp::{solve_periodic_bvp, BvpSolution, BvpStrategy};
pub use field::GridField;
pub use grid::{Grid, TimeScheme, ZDomain, MIN_NZ};
pub(crate) use stepper::{add_boundary_terms, assemble};
pub use stepper::{apply_operator, evolve_period, spectral_dt, Boundary, PeriodMap};
