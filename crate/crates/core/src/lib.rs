//! Simulation of two Brownian particles with rank-based drift and
//! dispersion, reflected at zero.
//!
//! The gap and the laggard form a reflected Brownian motion in a wedge. Paths
//! are built by solving the coupled regulator problem on a grid
//! ([`skorokhod`]), then unfolding the gap into named particles with fair
//! excursion signs ([`pathgen`]). On top of that sit local-time estimators
//! ([`localtime`]), closed-form invariant densities ([`stationary`]), the
//! noiseless-laggard case ([`degenerate`]) and a seeded Monte Carlo driver
//! ([`mc`]).
//!
//! ```
//! use rankwedge::{pathgen::simulate_path, rng::SeedRecord, ModelParams};
//!
//! let p = ModelParams::with_sigma_sq(0.5, 1.0, 0.5, 1.0, 0.5)?;
//! let b = simulate_path(&p, 1.0, 1e-3, &SeedRecord::new(1, 0))?;
//! assert!(b.m.min() >= 0.0);
//! # Ok::<(), rankwedge::Error>(())
//! ```
//!
//! The guide in `book/` walks through each part; its listings run as
//! doc-tests of this crate.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod degenerate;
pub mod error;
pub mod export;
pub mod localtime;
pub mod mc;
pub mod model;
pub mod path;
pub mod pathgen;
pub mod rng;
pub mod run;
pub mod scenario;
pub mod skorokhod;
pub mod stationary;

pub use error::{Error, Result};
pub use model::ModelParams;
pub use path::SampledPath;

// Compiles and runs the guide's code listings with the doc-tests, one module
// per chapter so a failure names its chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/regulators.md")]
    mod regulators {}
    #[doc = include_str!("../../../book/src/paths.md")]
    mod paths {}
    #[doc = include_str!("../../../book/src/local-time.md")]
    mod local_time {}
    #[doc = include_str!("../../../book/src/invariant.md")]
    mod invariant {}
    #[doc = include_str!("../../../book/src/degenerate.md")]
    mod degenerate {}
    #[doc = include_str!("../../../book/src/monte-carlo.md")]
    mod monte_carlo {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
