use thiserror::Error;

/// Errors produced anywhere in the expansion pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// An API was called with arguments outside its contract.
    #[error("usage error: {0}")]
    Usage(String),

    /// The model violates a structural condition (parabolicity, parameter domain).
    #[error("model error: {0}")]
    Model(String),

    /// The request is outside what the method supports.
    #[error("capability error: {0}")]
    Capability(String),

    /// A numerical evaluation broke down.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// An input value lies outside the domain of a mapping (e.g. arbitrage bounds).
    #[error("domain error: {0}")]
    Domain(String),

    /// User-supplied functions or data could not be used.
    #[error("input error: {0}")]
    Input(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Highest correction order for which the operators are built.
pub const MAX_ORDER: usize = 4;

pub(crate) fn order_cap_error(n: usize) -> Error {
    Error::Capability(format!(
        "expansion order {n} requested, but correction operators grow too long to be \
         practical beyond order {MAX_ORDER}; use order <= {MAX_ORDER}"
    ))
}
