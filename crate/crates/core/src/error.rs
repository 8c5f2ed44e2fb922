use thiserror::Error;

/// Errors raised by the key-rate engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A scalar argument fell outside its admissible range.
    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    /// A linear or ordering constraint between several quantities is violated.
    #[error("constraint violated: {0}")]
    Constraint(String),

    /// The C3 series did not reach the requested tolerance before the iteration cap.
    #[error("series did not converge after {terms} terms (last relative term {last_ratio:e})")]
    Convergence { terms: usize, last_ratio: f64 },

    /// Gain is exactly zero, so the error rate is undefined.
    #[error("detection statistics are undefined: zero gain")]
    UndefinedStatistics,

    /// The phase-error bound divides by the dark-count probability.
    #[error("phase-error bound is singular for d = 0")]
    SingularDarkCount,

    /// Channel statistics cannot be produced by any Pauli channel.
    #[error("channel statistics are infeasible: {0}")]
    InfeasibleStatistics(String),

    /// No positive key rate at the shortest distance.
    #[error("no positive key rate at {distance_km} km")]
    NoKey { distance_km: f64 },

    /// An internal numerical invariant failed.
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::Domain {
            name,
            value,
            domain: "[0, 1]",
        })
    }
}
