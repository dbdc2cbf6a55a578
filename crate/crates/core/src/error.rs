use thiserror::Error;

/// Failures reported by the numerical core.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[non_exhaustive]
pub enum Error {
    #[error("domain error: {what} (got {value})")]
    Domain { what: &'static str, value: f64 },

    #[error("series not converged after {terms} terms (last term magnitude {last_term:e})")]
    Truncation { terms: usize, last_term: f64 },

    /// Range Δ = h − ℓ small enough that the reflection series would need
    /// an impractical number of terms.
    #[error("series truncation: range {range} is below {min_ratio} x sigma ({sigma})")]
    RangeTooSmall { range: f64, sigma: f64, min_ratio: f64 },

    #[error("quadrature did not converge: estimated error {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("conditioning density {value:e} underflows; statistic too extreme")]
    Underflow { value: f64 },

    #[error("no interior likelihood maximum in bracket (log-likelihood {lower} at lower end, {upper} at upper end)")]
    Bracket { lower: f64, upper: f64 },

    #[error("empty input")]
    EmptyInput,

    #[error("degenerate bar: volatility estimate {estimate} is not positive")]
    DegenerateBar { estimate: f64 },

    #[error("score undefined: zero denominator")]
    UndefinedScore,

    #[error("missing value at day {day}, slot {slot}")]
    Gap { day: usize, slot: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    Shape { expected: usize, found: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn domain(what: &'static str, value: f64) -> Error {
    Error::Domain { what, value }
}
