use thiserror::Error;

/// Errors raised by the simulation, diagnostics and certificate layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{what}: value {value} is outside the admissible domain ({expected})")]
    InputDomain {
        what: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("{x} lies outside the tabulated range [{lo}, {hi}]")]
    OutOfRange { x: f64, lo: f64, hi: f64 },

    #[error("tail integral of {model} diverges (a must be integrable at infinity)")]
    DivergentTail { model: String },

    #[error("non-finite value in field `{field}` at cell {index}")]
    NumericState { field: &'static str, index: usize },

    #[error("grid under-resolves {what}: {detail}")]
    Resolution { what: &'static str, detail: String },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("tridiagonal solver failed at row {row}: pivot {pivot}")]
    Solver { row: usize, pivot: f64 },

    #[error("quadrature did not converge on [{a}, {b}]: estimated error {error:e}")]
    Quadrature { a: f64, b: f64, error: f64 },

    #[error("cannot certify blowup: {0}")]
    CannotCertify(String),

    #[error("malformed diffusion table: {0}")]
    Table(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(values: &[f64], field: &'static str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NumericState { field, index }),
        None => Ok(()),
    }
}
