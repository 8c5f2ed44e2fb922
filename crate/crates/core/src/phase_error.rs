//! Upper bound on the X-basis (phase) error rate of the signal states,
//! estimated from phase-randomized test states of intensities `nu1`, `nu2`
//! and vacuum.
//!
//! The bound is assembled from four terms,
//!
//! ```text
//! E_xx = C1 (1 + sqrt((C2 + C4) C3))^2
//! C1   = e^{-2mu} d / Q(mu)
//! C2   = e^{-2nu1} (nu1 - nu2) / nu2
//! C3   = 1/(nu1 e^{-2nu1}) sum_{k>=1} mu^{2k} (k+1) / (nu1^{2k-1} - nu2^{2k-1})
//! C4   = [Q(nu1) - nu1 e^{-2nu1} / (nu2 e^{-2nu2}) Q(nu2)] / d
//! ```
//!
//! where `Q(x) = 1 - e^{-2x eta} + e^{-2x eta} d` is the relay gain.

use crate::channel::gain_unchecked;
use crate::error::{check_probability, Error, Result};
use crate::params::PulseIntensities;

/// Default relative truncation tolerance of the C3 series.
pub const DEFAULT_REL_TOL: f64 = 1e-12;

/// Hard cap on the number of C3 terms.
pub const MAX_SERIES_TERMS: usize = 10_000;

/// The intermediate terms and the assembled phase-error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseErrorTerms {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub e_xx: f64,
    /// Set when `C2 + C4 < 0` was clamped to zero.
    pub clamped: bool,
}

/// A truncated evaluation of the C3 series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesEvaluation {
    pub value: f64,
    pub terms: usize,
}

/// Evaluates C3 with certified relative truncation error below `rel_tol`.
pub fn series_c3(mu: f64, nu1: f64, nu2: f64, rel_tol: f64) -> Result<f64> {
    series_c3_detailed(mu, nu1, nu2, rel_tol).map(|s| s.value)
}

fn check_series_args(mu: f64, nu1: f64, nu2: f64) -> Result<f64> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::Domain {
            name: "mu",
            value: mu,
            domain: "[0, inf)",
        });
    }
    if !(nu2 >= 0.0 && nu1 > nu2 && nu1.is_finite()) {
        return Err(Error::Constraint(format!(
            "nu1 > nu2 >= 0 required, got nu1 = {nu1}, nu2 = {nu2}"
        )));
    }
    let ratio = (mu / nu1).powi(2);
    if ratio >= 1.0 {
        return Err(Error::Constraint(format!(
            "series ratio mu^2/nu1^2 = {ratio} must be below 1"
        )));
    }
    Ok(ratio)
}

/// Like [`series_c3`], also reporting how many terms were summed.
///
/// Term `k` is written as `nu1 (k+1) r^k / (1 - s^{2k-1})` with
/// `r = mu^2/nu1^2` and `s = nu2/nu1`, which stays finite for any `nu1`.
/// Successive term ratios are bounded by `r (k+2)/(k+1)`, so once that bound
/// drops below one the remaining tail is at most a geometric series.
pub fn series_c3_detailed(mu: f64, nu1: f64, nu2: f64, rel_tol: f64) -> Result<SeriesEvaluation> {
    let ratio = check_series_args(mu, nu1, nu2)?;
    if !(rel_tol > 0.0 && rel_tol <= 1e-10) {
        return Err(Error::Domain {
            name: "rel_tol",
            value: rel_tol,
            domain: "(0, 1e-10]",
        });
    }
    let prefactor = (2.0 * nu1).exp();
    if ratio == 0.0 {
        return Ok(SeriesEvaluation { value: 0.0, terms: 0 });
    }
    let s = nu2 / nu1;
    let s2 = s * s;
    let mut r_pow = 1.0;
    // s^{2k-1}, starting from k = 1.
    let mut s_pow = s;
    let mut sum = 0.0;
    let mut last_ratio = f64::INFINITY;
    for k in 1..=MAX_SERIES_TERMS {
        r_pow *= ratio;
        let kf = k as f64;
        let term = (kf + 1.0) * r_pow / (1.0 - s_pow);
        s_pow *= s2;
        sum += term;
        if sum == 0.0 {
            // Underflow: every remaining term is smaller still.
            return Ok(SeriesEvaluation { value: 0.0, terms: k });
        }
        last_ratio = term / sum;
        let rho = ratio * (kf + 2.0) / (kf + 1.0);
        if rho < 1.0 && last_ratio < rel_tol / 10.0 {
            let tail = term * rho / (1.0 - rho);
            if tail < rel_tol * sum {
                return Ok(SeriesEvaluation {
                    value: prefactor * sum,
                    terms: k,
                });
            }
        }
    }
    Err(Error::Convergence {
        terms: MAX_SERIES_TERMS,
        last_ratio,
    })
}

/// Partial sum of C3 over exactly `depth` terms. Used to probe truncation
/// stability.
pub fn series_c3_partial(mu: f64, nu1: f64, nu2: f64, depth: usize) -> Result<f64> {
    let ratio = check_series_args(mu, nu1, nu2)?;
    let s = nu2 / nu1;
    let mut r_pow = 1.0;
    let mut s_pow = s;
    let mut sum = 0.0;
    for k in 1..=depth {
        r_pow *= ratio;
        sum += (k as f64 + 1.0) * r_pow / (1.0 - s_pow);
        s_pow *= s * s;
    }
    Ok((2.0 * nu1).exp() * sum)
}

/// Denominator of C2, taken as the weaker decoy intensity.
#[inline]
fn c2_denominator(intensities: &PulseIntensities) -> f64 {
    intensities.nu2
}

/// Phase-error bound with the default series tolerance.
pub fn error_xx_bound(intensities: &PulseIntensities, eta: f64, d: f64) -> Result<PhaseErrorTerms> {
    error_xx_bound_with_tol(intensities, eta, d, DEFAULT_REL_TOL)
}

pub fn error_xx_bound_with_tol(
    intensities: &PulseIntensities,
    eta: f64,
    d: f64,
    rel_tol: f64,
) -> Result<PhaseErrorTerms> {
    intensities.validate()?;
    check_probability("eta", eta)?;
    if d == 0.0 {
        return Err(Error::SingularDarkCount);
    }
    if !(d > 0.0 && d < 1.0) {
        return Err(Error::Domain {
            name: "d",
            value: d,
            domain: "(0, 1)",
        });
    }
    let PulseIntensities { mu, nu1, nu2 } = *intensities;

    let c1 = (-2.0 * mu).exp() * d / gain_unchecked(mu, eta, d);
    let c2 = (-2.0 * nu1).exp() * (nu1 - nu2) / c2_denominator(intensities);
    let c3 = series_c3(mu, nu1, nu2, rel_tol)?;
    let weight = (nu1 / nu2) * (-2.0 * (nu1 - nu2)).exp();
    let c4 = (gain_unchecked(nu1, eta, d) - weight * gain_unchecked(nu2, eta, d)) / d;

    let mut radicand = c2 + c4;
    let clamped = radicand < 0.0;
    if clamped {
        radicand = 0.0;
    }
    let root = (radicand * c3).sqrt();
    Ok(PhaseErrorTerms {
        c1,
        c2,
        c3,
        c4,
        e_xx: c1 * (1.0 + root) * (1.0 + root),
        clamped,
    })
}

/// Even/odd photon-number weights of the signal state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvenPhotonStats {
    /// `e^{-mu} cosh mu`
    pub c_plus: f64,
    /// `e^{-mu} sinh mu`
    pub c_minus: f64,
    /// `c_plus^2 + c_minus^2 = e^{-2mu} cosh 2mu`
    pub p_even: f64,
}

pub fn even_photon_stats(mu: f64) -> Result<EvenPhotonStats> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::Domain {
            name: "mu",
            value: mu,
            domain: "[0, inf)",
        });
    }
    // e^{-mu} cosh mu = (1 + e^{-2mu}) / 2 and e^{-mu} sinh mu = (1 - e^{-2mu}) / 2.
    let e2 = (-2.0 * mu).exp();
    let c_plus = (1.0 + e2) / 2.0;
    let c_minus = -(-2.0 * mu).exp_m1() / 2.0;
    Ok(EvenPhotonStats {
        c_plus,
        c_minus,
        p_even: c_plus * c_plus + c_minus * c_minus,
    })
}
