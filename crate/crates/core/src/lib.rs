//! Solvers for a size-exclusion Poisson–Nernst–Planck model of ion transport.
//!
//! Two discretizations share one mesh representation:
//!
//! * [`fem`]: implicit Euler, P1 finite elements in entropy variables
//!   `w_i = log(u_i / u_0) + beta z_i Phi`. Concentrations are recovered through
//!   a softmax-type transform, so they stay inside the simplex by construction.
//! * [`fvm`]: implicit Euler, two-point flux finite volumes with a double
//!   upwinding of the drift terms, on admissible (orthogonal) meshes.
//!
//! [`scenarios`] builds the calcium-selective and bipolar channel set-ups,
//! [`diagnostics`] computes entropies, norms, currents and convergence orders,
//! and [`studies`] chains them into the experiment drivers used by the CLI.

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod fem;
pub mod fvm;
pub mod linsys;
pub mod mesh;
pub mod model;
pub mod newton;
pub mod output;
pub mod scenarios;
pub mod studies;

pub use error::{Error, Result};
