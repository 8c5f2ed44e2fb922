//! Device and source parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Detector, fiber and post-processing parameters of the symmetric link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParameters {
    /// Detector efficiency.
    pub eta_d: f64,
    /// Dark-count probability per detector per window.
    pub p_d: f64,
    /// Loss-independent misalignment error.
    pub e_d: f64,
    /// Fiber attenuation in dB/km.
    pub alpha: f64,
    /// Error-correction efficiency.
    pub f: f64,
}

impl Default for SystemParameters {
    fn default() -> Self {
        Self {
            eta_d: 0.3,
            p_d: 1e-8,
            e_d: 0.03,
            alpha: 0.2,
            f: 1.1,
        }
    }
}

impl SystemParameters {
    pub fn new(eta_d: f64, p_d: f64, e_d: f64, alpha: f64, f: f64) -> Result<Self> {
        let params = Self {
            eta_d,
            p_d,
            e_d,
            alpha,
            f,
        };
        params.validate()?;
        Ok(params)
    }

    /// Default parameters with a different misalignment error.
    pub fn with_misalignment(e_d: f64) -> Result<Self> {
        let params = Self {
            e_d,
            ..Self::default()
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta_d > 0.0 && self.eta_d <= 1.0) {
            return Err(Error::Domain {
                name: "eta_d",
                value: self.eta_d,
                domain: "(0, 1]",
            });
        }
        if !(self.p_d >= 0.0 && self.p_d < 1.0) {
            return Err(Error::Domain {
                name: "p_d",
                value: self.p_d,
                domain: "[0, 1)",
            });
        }
        if !(0.0..=0.5).contains(&self.e_d) {
            return Err(Error::Domain {
                name: "e_d",
                value: self.e_d,
                domain: "[0, 0.5]",
            });
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Domain {
                name: "alpha",
                value: self.alpha,
                domain: "(0, inf)",
            });
        }
        if !(self.f >= 1.0 && self.f.is_finite()) {
            return Err(Error::Domain {
                name: "f",
                value: self.f,
                domain: "[1, inf)",
            });
        }
        Ok(())
    }
}

/// Signal intensity `mu` and the two phase-randomized test intensities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseIntensities {
    pub mu: f64,
    pub nu1: f64,
    pub nu2: f64,
}

impl PulseIntensities {
    /// Requires all intensities positive and `max(mu, nu2) < nu1`.
    pub fn new(mu: f64, nu1: f64, nu2: f64) -> Result<Self> {
        let intensities = Self { mu, nu1, nu2 };
        intensities.validate()?;
        Ok(intensities)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("mu", self.mu), ("nu1", self.nu1), ("nu2", self.nu2)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Domain {
                    name,
                    value,
                    domain: "(0, inf)",
                });
            }
        }
        if self.mu.max(self.nu2) >= self.nu1 {
            return Err(Error::Constraint(format!(
                "max(mu, nu2) < nu1 required, got mu = {}, nu1 = {}, nu2 = {}",
                self.mu, self.nu1, self.nu2
            )));
        }
        Ok(())
    }
}
