//! EPTAS machinery for stochastic probing problems.
//!
//! The core is a multi-dimensional Santa Claus solver (type guessing, a
//! strengthened LP relaxation and dependent rounding). Free-order prophets,
//! non-adaptive and adaptive ProbeMax, Pandora's box with commitment and top-r
//! ProbeMax are reduced to it, and each reduction can be checked against an
//! exhaustive oracle on small instances.

pub mod adaptive;
pub mod distributions;
pub mod error;
pub mod generate;
pub mod lp;
pub mod oracle;
pub mod pandora;
pub mod probemax;
pub mod prophets;
pub mod rng;
pub mod rounding;
pub mod santa_claus;

pub use distributions::{DiscreteRV, SupportGrid};
pub use error::{Error, Result};

/// How the hyper-parameter guesses of a reduction are produced.
#[derive(Clone, Debug, PartialEq)]
pub enum Mode<R> {
    /// Enumerate the guess grid, stopping after `budget` guesses.
    Enumerate { budget: usize },
    /// Derive the single guess consistent with a reference solution.
    OracleGuided(R),
}
