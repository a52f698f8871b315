use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("grid of {n_grid} points cannot resolve {n_modes} modes (need a power of two >= {min})")]
    Resolution { n_grid: usize, n_modes: usize, min: usize },

    #[error("invalid forcing: {0}")]
    Forcing(String),

    #[error("interval [{t0}, {t1}] is not aligned to the noise grid of step {cell}")]
    Alignment { t0: f64, t1: f64, cell: f64 },

    #[error("numerical blow-up at t = {t}: {reason}")]
    BlowUp { t: f64, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("mismatched inputs: {0}")]
    Mismatch(String),

    #[error("bracket window [{t_start}, {t_end}] is not covered by the samples")]
    WindowNotCovered { t_start: f64, t_end: f64 },

    #[error("power-law fit needs at least {needed} points in range, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("non-positive data at x = {x}: {y}")]
    NonPositive { x: f64, y: f64 },

    #[error("layer |n| <= {max_mode} exceeds the cutoff {cutoff}")]
    LayerExceedsCutoff { max_mode: usize, cutoff: usize },

    #[error("not resolved: {0}")]
    NotResolved(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("path {path}: {source}")]
    InPath {
        path: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
