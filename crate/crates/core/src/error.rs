use thiserror::Error;

/// Errors surfaced by model construction and estimators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("separation must be nonnegative, got {0}")]
    NegativeSeparation(f64),

    #[error("point lies outside the box")]
    OutsideBox,

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("box too small: {0}")]
    BoxTooSmall(String),

    #[error("{what}: order {requested} exceeds cap {cap}{hint}")]
    OverCap {
        what: &'static str,
        requested: usize,
        cap: usize,
        hint: &'static str,
    },

    #[error("invalid boundary configuration: {0}")]
    InvalidBoundary(String),

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn over_cap(what: &'static str, requested: usize, cap: usize) -> Self {
        Error::OverCap {
            what,
            requested,
            cap,
            hint: "",
        }
    }

    pub fn over_cap_hint(
        what: &'static str,
        requested: usize,
        cap: usize,
        hint: &'static str,
    ) -> Self {
        Error::OverCap {
            what,
            requested,
            cap,
            hint,
        }
    }
}
