//! Numerical laboratory for diffusions with form-bounded drift.
//!
//! Modules: drift fields and their form-bound certificates ([`fields`]), the δ-preserving
//! mollification sequence ([`mollify`]), a finite-difference Kolmogorov solver ([`pde`]),
//! an Euler–Maruyama Monte Carlo simulator with path functionals ([`sde`]), and the experiment
//! harness ([`harness`]).

pub mod error;
pub mod fields;
pub mod harness;
pub mod io;
pub mod mollify;
pub mod pde;
pub mod sde;
pub mod special;

pub use error::{LabError, Result};
