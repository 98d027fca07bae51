//! Critical site percolation on the triangular lattice.
//!
//! Exact enumeration on tiny domains and deterministic parallel Monte Carlo on large ones,
//! for crossing events, separation fields, interfaces and arm events.

pub mod analytic;
pub mod cli;
pub mod connectivity;
pub mod estimators;
pub mod interface;
pub mod lattice;
pub mod oracle;
pub mod report;
pub mod sampler;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("enumeration of {sites} sites exceeds the limit of {limit}")]
    TooLarge { sites: usize, limit: usize },
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
