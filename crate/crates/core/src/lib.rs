// `!(x > 0.0)` is the NaN-rejecting form used throughout, and index loops
// read closer to the stencils they implement.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod ad;
pub mod coupler;
pub mod diagnostics;
pub mod error;
pub mod fluid;
pub mod fokker_planck;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod number_density;
pub mod polymer_model;
pub mod quad;
pub mod shell_dynamics;
pub mod spectral;
pub mod stress;
