//! Exact and asymptotic random-coding error probabilities for discrete
//! memoryless channels.
//!
//! Given a channel `W(y|x)`, an input distribution `Px`, and a rate `R`,
//! this crate computes the average error probability of a random code under
//! maximum-likelihood decoding with uniform tie breaking, three ways:
//!
//! * **exactly**, by enumerating joint types of `(xⁿ, yⁿ)` and evaluating the
//!   per-type error probability in closed form ([`exact`]);
//! * by **saddlepoint approximation** of the pairwise-error tail and point
//!   mass ([`saddlepoint`]);
//! * by **closed-form asymptotics** with explicit sub-exponential prefactors,
//!   together with the classical exponent-only and union-bound reference
//!   curves ([`bounds`]).
//!
//! Supporting machinery: channel ingestion and validation ([`channel`]),
//! the tilted-cumulant exponent solver ([`tilting`]), lattice/nonlattice
//! classification of the log-likelihood ratio ([`lattice`]), and the
//! smoothing function `g_h` with its companion constants ([`gfun`]).
//!
//! All probabilities are carried in natural-log domain; rates are in nats.

pub mod bounds;
pub mod channel;
pub mod cli;
pub mod exact;
pub mod gfun;
pub mod lattice;
pub mod num;
pub mod saddlepoint;
pub mod tilting;

use std::fmt;

/// Error type for the whole crate.
#[derive(Debug, Clone, PartialEq)]
#[non_exhaustive]
pub enum Error {
    /// Malformed channel description (shape, negativity, normalization).
    InvalidChannel(String),
    /// Arguments outside the mathematical domain of an operation.
    Domain(String),
    /// A configurable resource cap (type count, atom count) was exceeded.
    Resource(String),
    /// A saddlepoint target at or beyond the essential supremum.
    Saturated(String),
    /// The requested quantity is undefined for this channel/regime.
    NotApplicable(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidChannel(s) => write!(f, "invalid channel: {s}"),
            Error::Domain(s) => write!(f, "domain error: {s}"),
            Error::Resource(s) => write!(f, "resource limit: {s}"),
            Error::Saturated(s) => write!(f, "saturated: {s}"),
            Error::NotApplicable(s) => write!(f, "not applicable: {s}"),
        }
    }
}

impl std::error::Error for Error {}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
