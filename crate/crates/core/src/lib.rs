//! Simulation and analysis of the Wright-Fisher model with efficiency.
//!
//! The crate covers the exact discrete model under both stopping rules,
//! the limiting diffusions, fixation analytics, the ancestral
//! selection/efficiency graph and its count process, and Monte Carlo checks
//! of the moment duality between them.

pub mod analytics;
pub mod aseg;
pub mod csv_out;
pub mod diffusion;
pub mod discrete;
pub mod duality;
pub mod error;
pub mod mc;
pub mod quadrature;
pub mod rational;
pub mod rng;
pub mod summary;

pub use error::{Error, Result};
pub use quadrature::{adaptive_quadrature, QuadratureSpec};
pub use rational::{reduce_rational, Rational};
pub use rng::{derive_rng_stream, RngSpec, Stream, StreamFamily};
pub use summary::{mc_merge, McSummary};

/// Crate version recorded in output headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
