use thiserror::Error;

/// Crate-wide error type. Domain failures (divergence, infeasible setups)
/// are distinguished from caller mistakes (bad arguments, malformed input)
/// so the CLI can map them to different exit codes.
#[derive(Error, Debug)]
pub enum Error {
    /// A caller-supplied value is outside the operation's domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A landscape does not meet a structural precondition (wrong dimension,
    /// non-periodic where a torus is required, unbounded sublevel set, ...).
    #[error("landscape error: {0}")]
    Landscape(String),

    /// The state left the representable range during integration.
    #[error("trajectory diverged at t = {t}: {detail}")]
    Diverged { t: f64, detail: String },

    /// A spectral certificate could not be produced (non-Hurwitz matrix,
    /// indefinite solution, degenerate search).
    #[error("certificate error: {0}")]
    Certificate(String),

    /// A sampler or search failed to make progress within its budget.
    #[error("efficiency error: {0}")]
    Efficiency(String),

    /// Configuration file problems: syntax, unknown keys, semantic violations.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
