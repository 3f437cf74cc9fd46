//! Privacy–distortion analysis over finite database universes.
//!
//! A database is one of `m^n` states (`n` rows over an alphabet of size `m`),
//! a mechanism is a row-stochastic `N x N` channel, and distortion is the
//! expected number of rows the mechanism changes. The crate measures
//! identifiability, differential privacy and mutual-information privacy
//! exactly, constructs the exponential mechanisms that attain the optimal
//! tradeoffs, and checks those optima against independent LP,
//! Blahut–Arimoto and KKT computations.
//!
//! ```
//! use privdist::{curves, mechanisms, metrics, Prior, UniverseSpec};
//!
//! let spec = UniverseSpec::new(4, 2).unwrap();
//! let prior = Prior::uniform(spec);
//! let eps = 3f64.ln();
//! let mech = mechanisms::build_exp_dp(spec, eps).unwrap();
//! let report = metrics::report(&prior, &mech).unwrap();
//! assert!((report.dp_level - eps).abs() < 1e-12);
//! assert!((report.distortion - curves::h(&spec, eps).unwrap()).abs() < 1e-12);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod curves;
pub mod error;
pub mod fixtures;
pub mod mechanisms;
pub mod metrics;
pub mod model;
pub mod optimize;
pub mod oracle;
pub mod universe;
pub mod verify;

pub use error::{Error, Result};
pub use model::{Mechanism, PosteriorTable, Prior};
pub use universe::{DbIndex, UniverseSpec};
