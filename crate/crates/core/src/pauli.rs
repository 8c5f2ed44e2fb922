//! Bell-diagonal (Pauli) channel weights.
//!
//! Index convention: `lambda0` is the identity, `lambda1` a phase flip,
//! `lambda2` a bit flip and `lambda3` both. Hence the X-basis (phase) error
//! rate is `lambda1 + lambda3` and the Z-basis (bit) error rate is
//! `lambda2 + lambda3`.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};

/// Normalization tolerance for the four weights.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// The four Bell-diagonal weights of a collective attack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PauliCoefficients {
    lambda: [f64; 4],
}

impl PauliCoefficients {
    pub const IDENTITY: Self = Self {
        lambda: [1.0, 0.0, 0.0, 0.0],
    };

    /// Validates nonnegativity and normalization. Components within
    /// `NORMALIZATION_TOL` below zero are clamped to zero.
    pub fn new(lambda0: f64, lambda1: f64, lambda2: f64, lambda3: f64) -> Result<Self> {
        let mut lambda = [lambda0, lambda1, lambda2, lambda3];
        for (i, l) in lambda.iter_mut().enumerate() {
            if !(l.is_finite() && *l >= -NORMALIZATION_TOL) {
                return Err(Error::Constraint(format!("lambda{i} = {l} is negative")));
            }
            *l = l.max(0.0);
        }
        let sum: f64 = lambda.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Constraint(format!(
                "Pauli weights sum to {sum}, expected 1"
            )));
        }
        Ok(Self { lambda })
    }

    pub fn from_array(lambda: [f64; 4]) -> Result<Self> {
        Self::new(lambda[0], lambda[1], lambda[2], lambda[3])
    }

    pub(crate) fn from_array_unchecked(lambda: [f64; 4]) -> Self {
        Self { lambda }
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.lambda
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda[0]
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda[1]
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda[2]
    }

    pub fn lambda3(&self) -> f64 {
        self.lambda[3]
    }

    /// `lambda1 + lambda3`.
    pub fn phase_error(&self) -> f64 {
        self.lambda[1] + self.lambda[3]
    }

    /// `lambda2 + lambda3`.
    pub fn bit_error(&self) -> f64 {
        self.lambda[2] + self.lambda[3]
    }

    /// Rescales so the weights sum to exactly one.
    pub fn renormalized(&self) -> Self {
        let sum: f64 = self.lambda.iter().sum();
        Self {
            lambda: self.lambda.map(|l| l / sum),
        }
    }
}

/// A closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedInterval {
    pub lo: f64,
    pub hi: f64,
}

impl ClosedInterval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        x >= self.lo - tol && x <= self.hi + tol
    }
}

/// Range of `lambda3` for which all four weights fixed by the error rates are
/// nonnegative: `[max(0, e_xx + e_zz - 1), min(e_xx, e_zz)]`.
pub fn feasible_lambda3_interval(e_xx: f64, e_zz: f64) -> Result<ClosedInterval> {
    check_probability("e_xx", e_xx)?;
    check_probability("e_zz", e_zz)?;
    Ok(ClosedInterval {
        lo: (e_xx + e_zz - 1.0).max(0.0),
        hi: e_xx.min(e_zz),
    })
}

/// Solves `lambda1 + lambda3 = e_xx`, `lambda2 + lambda3 = e_zz` and
/// normalization for the given free parameter `lambda3`.
pub fn pauli_from_error_rates(e_xx: f64, e_zz: f64, lambda3: f64) -> Result<PauliCoefficients> {
    let interval = feasible_lambda3_interval(e_xx, e_zz)?;
    if !interval.contains(lambda3, NORMALIZATION_TOL) {
        let bound = if lambda3 < 0.0 {
            "lambda3 >= 0"
        } else if lambda3 < interval.lo {
            "lambda0 = 1 - e_xx - e_zz + lambda3 >= 0"
        } else if lambda3 > e_xx {
            "lambda1 = e_xx - lambda3 >= 0"
        } else {
            "lambda2 = e_zz - lambda3 >= 0"
        };
        return Err(Error::Constraint(format!(
            "lambda3 = {lambda3} violates {bound} (e_xx = {e_xx}, e_zz = {e_zz})"
        )));
    }
    Ok(pauli_from_error_rates_unchecked(e_xx, e_zz, lambda3))
}

#[inline]
pub(crate) fn pauli_from_error_rates_unchecked(
    e_xx: f64,
    e_zz: f64,
    lambda3: f64,
) -> PauliCoefficients {
    PauliCoefficients {
        lambda: [
            (1.0 - e_xx - e_zz + lambda3).max(0.0),
            (e_xx - lambda3).max(0.0),
            (e_zz - lambda3).max(0.0),
            lambda3.max(0.0),
        ],
    }
}
