use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("zero-forcing infeasible: coordination set size {set_size} needs more than {antennas} antennas")]
    ZeroForcingInfeasible { set_size: usize, antennas: usize },

    #[error("coordination set of size {requested} requested but only {available} interfering base stations exist")]
    NotEnoughBaseStations { requested: usize, available: usize },

    #[error("{0} bits exceed the explicit codebook guard (b <= 20); use the shortcut COS gain instead")]
    CodebookTooLarge(u32),

    #[error("Gamma(1 - alpha/2) has a pole at alpha = {alpha}; the upper bound is undefined for even-integer path-loss exponents")]
    GammaPole { alpha: f64 },

    #[error("series did not converge within {terms} terms")]
    SeriesDivergence { terms: usize },

    #[error("time fraction is zero on the whole window range [{lo}, {hi}] ms")]
    ObjectiveUndefined { lo: f64, hi: f64 },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("CCDF is not nonincreasing near x = {at}")]
    NonMonotoneCcdf { at: f64 },

    #[error("CCDF tail is not integrable: {0}")]
    TailNotIntegrable(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
