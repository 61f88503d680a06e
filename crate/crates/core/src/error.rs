use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A table lookup fell outside the range that was computed.
    #[error("index ({w}, {b}, {f}) is not covered by the table")]
    OutOfRange { w: usize, b: usize, f: usize },

    /// The exhaustive enumerator refuses instances above its size bound.
    #[error("instance with w + b + f = {size} exceeds the enumeration bound {bound}")]
    TooLarge { size: usize, bound: usize },

    /// An urn with no balls cannot be drawn from.
    #[error("cannot draw {draws} times from an empty urn")]
    DegenerateUrn { draws: usize },

    /// A season produced no reproduction at all, so the egg ratio is 0/0.
    #[error("season produced no reproductions (w = {w}, b = {b}, f = {f})")]
    NoReproduction { w: usize, b: usize, f: usize },

    /// A population size requested for a sweep is too large for the DP.
    #[error("population size {n} is not feasible (limit {limit})")]
    InfeasibleN { n: usize, limit: usize },

    /// A region contains no lattice point at the requested size.
    #[error("region {region} contains no lattice point for N = {n}")]
    EmptyRegion { region: String, n: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
