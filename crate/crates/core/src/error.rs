use thiserror::Error;

/// Errors produced by the detection library and the simulation harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters, dimensions or configuration values.
    #[error("configuration error: {0}")]
    Config(String),

    /// A symbol that is not a point of the PAM alphabet in use.
    #[error("symbol {value} is not a point of the {m}-PAM alphabet")]
    NotInAlphabet { value: i32, m: usize },

    /// Exhaustive ML search requested beyond the oracle-scale cap.
    #[error("exhaustive search over {candidates} candidates exceeds the cap of {cap}")]
    OracleScale { candidates: u128, cap: u128 },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::OracleScale { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
