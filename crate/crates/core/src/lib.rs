//! Distributed service networks on the line.
//!
//! Users and servers are placed on `[0, ∞)` by renewal processes. This crate
//! simulates unidirectional and bidirectional allocation policies, evaluates
//! the expected request distance through queueing mappings, solves the
//! optimal assignment by dynamic programming and approximates planar
//! assignment through a one-dimensional embedding.
//!
//! ```
//! use linenet::analytic::mm1_bulk;
//!
//! let r = mm1_bulk(0.5, 1.0, 1).unwrap();
//! assert!((r.expected_distance - 2.0).abs() < 1e-9);
//! ```

pub mod analytic;
pub mod assign;
pub mod distributions;
pub mod embed;
mod error;
pub mod experiment;
pub mod hetcap;
pub mod hungarian;
pub mod io;
pub mod quad;
pub mod spatial;

pub use distributions::{exceptional_dist, h2_from_cv2, DistributionSpec, ExceptionalDist};
pub use error::{Error, Result};

/// Version string stamped on every result row.
pub const VERSION: &str = concat!("linenet-", env!("CARGO_PKG_VERSION"));
