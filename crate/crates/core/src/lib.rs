//! Simulation and exact-computation toolkit for the frog model on `Z^d`
//! with Bernoulli initial configurations.
//!
//! The crate is organised around a small pipeline:
//!
//! * [`lattice`] — integer-lattice geometry (`l1` norm, balls, spheres,
//!   orthant shells, signed coordinate permutations),
//! * [`field`] — reproducible randomness: per-site uniform marks (monotone
//!   coupling across the Bernoulli parameter) and per-site random-walk
//!   streams derived from a master seed,
//! * [`passage`] — exact first-passage computation on one realized,
//!   window/horizon-truncated instance (hitting times, passage times,
//!   forced and truncated variants, geodesic extraction),
//! * [`oracle`] — exact rational probabilities of small-time events by
//!   exhaustive enumeration of joint walk prefixes,
//! * [`estimators`] — Monte Carlo estimation (time constants, coupled
//!   differences, influence sums, delay censuses, decay curves, tail fits),
//! * [`shape`] — visited-set extraction and Hausdorff comparison of
//!   rescaled shapes.

pub mod error;
pub mod estimators;
pub mod field;
pub mod lattice;
pub mod oracle;
pub mod passage;
pub mod shape;
pub mod stats;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;
