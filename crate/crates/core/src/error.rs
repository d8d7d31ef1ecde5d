use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A structured input (partition, kernel, parameters) is malformed.
    #[error("invalid input: {0}")]
    Validation(String),

    /// A numerical procedure did not reach its tolerance.
    #[error("numerical failure in {what}: {detail}")]
    Numerical { what: &'static str, detail: String },

    /// Option price at or below intrinsic value; no implied volatility exists.
    #[error("price {price} is not above the intrinsic value {intrinsic}")]
    BelowIntrinsic { price: f64, intrinsic: f64 },

    /// Option price at or above the spot; no implied volatility exists.
    #[error("price {price} is not below the spot {spot}")]
    AboveSpot { price: f64, spot: f64 },

    /// Invalid run configuration.
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}
