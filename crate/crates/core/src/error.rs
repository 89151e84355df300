use thiserror::Error;

/// Errors produced by the shot-noise numerics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A standardized value at or below the lower support edge `-d3 * rho`.
    #[error("y = {y} lies outside the support (lower edge {lower_edge})")]
    OutsideSupport { y: f64, lower_edge: f64 },

    #[error("no closed form for d = {d}, gamma = {gamma}")]
    NoClosedForm { d: u32, gamma: f64 },

    #[error("value out of representable range: {0}")]
    Range(String),

    #[error("{what} failed to converge: {detail}")]
    Convergence { what: &'static str, detail: String },

    #[error("quadrature did not reach tolerance: estimate {estimate:e}, error {error:e} after {panels} panels")]
    Quadrature {
        estimate: f64,
        error: f64,
        panels: usize,
    },
}

impl Error {
    /// True for errors caused by caller input rather than numerical failure.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_) | Error::OutsideSupport { .. } | Error::NoClosedForm { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
