use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid too coarse: {points} points for degree {n} (need at least {required})")]
    GridTooSmall { n: usize, points: usize, required: usize },

    #[error("numerical domain error at t = {t}: {detail}")]
    NumericalDomain { t: f64, detail: String },

    #[error("quadrature did not converge: value {value}, error estimate {error} > tolerance {tolerance}")]
    QuadratureNonConvergence {
        value: f64,
        error: f64,
        tolerance: f64,
    },

    #[error("Monte Carlo resolution too low: expected {expected_hits:.2} hits, need {required_trials} trials")]
    Infeasible {
        expected_hits: f64,
        required_trials: u64,
    },

    #[error("degenerate polynomial: all coefficients are zero")]
    DegeneratePolynomial,
}

pub type Result<T> = std::result::Result<T, Error>;
