//! Numerical laboratory for the self-similar collapse of the isothermal
//! Euler-Poisson system with density-dependent viscosity `mu(rho) = t rho`.
//!
//! Layers, bottom-up:
//! - [`selfsim`]: similarity variables, the ODE right-hand side and the maps
//!   back to physical fields;
//! - [`ode`]: adaptive Dormand-Prince integration with event location;
//! - [`invariants`]: monitors for the monotonicity and bound results;
//! - [`shadow`]: the singular core at the origin and its residual scalings;
//! - [`inviscid`]: the `mu = 0` system and sonic-point classification;
//! - [`pde`]: the radial system in similarity coordinates, used to test
//!   that integrated profiles are stationary;
//! - [`cli`]: configuration, runs, reports, CSV and SVG output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod invariants;
pub mod inviscid;
pub mod numeric;
pub mod ode;
pub mod par;
pub mod pde;
pub mod selfsim;
pub mod shadow;
pub mod trace;

pub use error::{Error, Result};
pub use selfsim::{PhysicalInit, PressureFlag, SimilarityState};
pub use trace::{EventKind, SolutionTrace, Termination};
