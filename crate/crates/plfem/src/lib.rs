//! Finite-element laboratory for quasilinear Dirichlet problems whose
//! reaction competes a concave term lambda k(x) u^q against a convex term
//! h(x) u^sigma, with 0 < q < p-1 < sigma and strictly positive bounded
//! weights.
//!
//! The crate solves the plus and minus sign variants of
//!
//!   -div(|grad u|^{p-2} grad u) = lambda k(x) u^q +/- h(x) u^sigma,
//!   u = 0 on the boundary,
//!
//! on 1-D intervals and the 2-D unit square, builds the explicit
//! sub/super-solution machinery with its parameter bounds, traces the
//! minimal solution branch, brackets the extremal parameter of each sign,
//! and checks the structural identities the constructions rely on.

pub mod branch;
pub mod eigen;
pub mod error;
pub mod field;
pub mod linalg;
pub mod mesh;
pub mod operator;
pub mod problem;
pub mod solve;
pub mod subsuper;
pub mod varmin;
pub mod verify;
pub mod weight;

pub use error::{Error, Result, SolveFailure};
pub use field::{integrate_weighted_power, GridFunction};
pub use mesh::Mesh;
pub use problem::{ProblemSpec, Sign, SolverOptions};
pub use weight::{WeightField, WeightKind};
