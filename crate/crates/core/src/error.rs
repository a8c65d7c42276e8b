use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("unknown preset `{0}` (expected one of ch, dp, novikov, forq, ab, gkbch, bfam)")]
    UnknownPreset(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: expected {expected} samples, found {found}")]
    GridMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite values at t = {time}")]
    NonFinite { time: f64 },

    #[error("params are outside the g-kbCH class (need a = 0 and c = (3k - b)/2)")]
    NotGkbch,

    #[error("particle stretch changed sign at t = {time} (seed {seed})")]
    WaveBreaking { seed: f64, time: f64 },

    #[error("ambiguous crest at t = {time}")]
    AmbiguousCrest { time: f64 },

    #[error("reference quantity vanishes: {0}")]
    Degenerate(String),

    #[error("malformed snapshot: {0}")]
    Malformed(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
