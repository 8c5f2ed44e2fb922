//! Detection statistics of the symmetric fiber link with a midpoint relay.

use crate::error::{check_probability, Error, Result};
use crate::params::SystemParameters;

/// Per-arm transmissivity and effective dark count at one link length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelPoint {
    pub distance_km: f64,
    pub eta: f64,
    pub d: f64,
}

impl ChannelPoint {
    pub fn new(params: &SystemParameters, distance_km: f64) -> Result<Self> {
        Ok(Self {
            distance_km,
            eta: transmissivity(params, distance_km)?,
            d: dark_count_effective(params.p_d)?,
        })
    }
}

fn check_distance(distance_km: f64) -> Result<()> {
    if distance_km >= 0.0 && distance_km.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "distance_km",
            value: distance_km,
            domain: "[0, inf)",
        })
    }
}

/// Transmissivity from one sender to the relay detector, including detector
/// efficiency. Each arm spans half the total distance.
pub fn transmissivity(params: &SystemParameters, distance_km: f64) -> Result<f64> {
    check_distance(distance_km)?;
    Ok(params.eta_d * 10f64.powf(-params.alpha * distance_km / 20.0))
}

/// Probability that at least one of the two detectors dark-counts.
pub fn dark_count_effective(p_d: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p_d) {
        return Err(Error::Domain {
            name: "p_d",
            value: p_d,
            domain: "[0, 1)",
        });
    }
    Ok(2.0 * p_d - p_d * p_d)
}

/// `1 - exp(-x)` without cancellation for small `x`.
#[inline]
pub(crate) fn one_minus_exp_neg(x: f64) -> f64 {
    -(-x).exp_m1()
}

/// Click probability of the relay for a pair of pulses of intensity
/// `intensity` each: `1 - e^{-2 mu eta} + e^{-2 mu eta} d`.
#[inline]
pub(crate) fn gain_unchecked(intensity: f64, eta: f64, d: f64) -> f64 {
    let x = 2.0 * intensity * eta;
    one_minus_exp_neg(x) + (-x).exp() * d
}

fn check_gain_args(mu: f64, eta: f64, d: f64) -> Result<()> {
    if !(mu > 0.0) {
        return Err(Error::Domain {
            name: "mu",
            value: mu,
            domain: "(0, inf)",
        });
    }
    check_probability("eta", eta)?;
    if !(0.0..1.0).contains(&d) {
        return Err(Error::Domain {
            name: "d",
            value: d,
            domain: "[0, 1)",
        });
    }
    Ok(())
}

/// Signal-state gain `Q^ZZ`.
pub fn gain_zz(mu: f64, eta: f64, d: f64) -> Result<f64> {
    if mu == f64::INFINITY {
        check_probability("eta", eta)?;
        return Ok(if eta > 0.0 { 1.0 } else { d });
    }
    check_gain_args(mu, eta, d)?;
    Ok(gain_unchecked(mu, eta, d))
}

/// Z-basis error rate `E^ZZ`: misaligned signal clicks plus half the dark
/// counts, normalized by the gain.
pub fn error_zz(mu: f64, eta: f64, d: f64, e_d: f64) -> Result<f64> {
    check_gain_args(mu, eta, d)?;
    if !(0.0..=0.5).contains(&e_d) {
        return Err(Error::Domain {
            name: "e_d",
            value: e_d,
            domain: "[0, 0.5]",
        });
    }
    let q = gain_unchecked(mu, eta, d);
    if q == 0.0 {
        return Err(Error::UndefinedStatistics);
    }
    Ok(error_numerator(mu, eta, d, e_d) / q)
}

#[inline]
fn error_numerator(mu: f64, eta: f64, d: f64, e_d: f64) -> f64 {
    let x = 2.0 * mu * eta;
    e_d * one_minus_exp_neg(x) + (-x).exp() * d / 2.0
}

/// Repeaterless capacity benchmark `-log2(1 - eta_d 10^{-alpha L / 10})`.
///
/// Returns `f64::INFINITY` when the argument of the logarithm vanishes
/// (unit detector efficiency at zero length).
pub fn plob_bound(params: &SystemParameters, distance_km: f64) -> Result<f64> {
    check_distance(distance_km)?;
    let eta = params.eta_d * 10f64.powf(-params.alpha * distance_km / 10.0);
    if eta >= 1.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-(-eta).ln_1p() / std::f64::consts::LN_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(eta_d: f64) -> SystemParameters {
        SystemParameters {
            eta_d,
            ..SystemParameters::default()
        }
    }

    #[test]
    fn transmissivity_decades() {
        let p = params(0.3);
        assert!((transmissivity(&p, 0.0).unwrap() - 0.3).abs() < 1e-16);
        assert!((transmissivity(&p, 100.0).unwrap() - 0.03).abs() < 1e-16);
        assert!((transmissivity(&params(1.0), 200.0).unwrap() - 0.01).abs() < 1e-17);
        assert!(transmissivity(&p, -1.0).is_err());
        for l in [0.0, 37.5, 250.0, 611.0] {
            let eta = transmissivity(&p, l).unwrap();
            let expected = 0.3 * 10f64.powf(-0.01 * l);
            assert!((eta - expected).abs() <= 1e-15 * expected);
        }
    }

    #[test]
    fn dark_counts() {
        assert_eq!(dark_count_effective(0.0).unwrap(), 0.0);
        assert_eq!(dark_count_effective(1e-8).unwrap(), 2e-8 - 1e-16);
        assert_eq!(dark_count_effective(0.5).unwrap(), 0.75);
        assert!(dark_count_effective(1.0).is_err());
        assert!(dark_count_effective(-0.1).is_err());
    }

    #[test]
    fn gain_examples() {
        assert_eq!(gain_zz(0.1, 0.0, 2e-8).unwrap(), 2e-8);
        assert_eq!(gain_zz(f64::INFINITY, 0.3, 0.0).unwrap(), 1.0);
        assert!((gain_zz(1e3, 0.3, 0.0).unwrap() - 1.0).abs() < 1e-15);
        // 1 - e^{-0.003} + e^{-0.003} 2e-8, evaluated from the Taylor series of e^{-x}.
        let x: f64 = 0.003;
        let e = 1.0 - x + x * x / 2.0 - x.powi(3) / 6.0 + x.powi(4) / 24.0 - x.powi(5) / 120.0;
        let expected = 1.0 - e + e * 2e-8;
        let q = gain_zz(0.05, 0.03, 2e-8).unwrap();
        assert!((q - expected).abs() < 1e-15);
        assert!((q - 2.99553e-3).abs() < 1e-8);
        assert!(gain_zz(0.0, 0.3, 0.0).is_err());
        assert!(gain_zz(0.1, 1.2, 0.0).is_err());
    }

    #[test]
    fn error_examples() {
        assert!((error_zz(0.05, 0.03, 0.0, 0.03).unwrap() - 0.03).abs() < 1e-15);
        assert_eq!(error_zz(0.05, 0.0, 2e-8, 0.03).unwrap(), 0.5);
        let e = error_zz(0.05, 0.03, 2e-8, 0.03).unwrap();
        let q = gain_zz(0.05, 0.03, 2e-8).unwrap();
        let x = 0.003f64;
        let expected = (0.03 * (1.0 - (-x).exp()) + (-x).exp() * 1e-8) / q;
        assert!((e - expected).abs() < 1e-12);
        assert!((e - 0.030003).abs() < 1e-6, "{e}");
        assert_eq!(error_zz(0.05, 0.0, 0.0, 0.03), Err(Error::UndefinedStatistics));
        assert!(error_zz(0.05, 0.03, 2e-8, 0.6).is_err());
    }

    #[test]
    fn plob_values() {
        let p = params(0.3);
        let at0 = plob_bound(&p, 0.0).unwrap();
        assert!((at0 - 0.514573172829758).abs() < 1e-12, "{at0}");
        assert!(plob_bound(&p, 5000.0).unwrap() < 1e-90);
        for l in [300.0, 450.0, 600.0] {
            let x = 0.3 * 10f64.powf(-0.02 * l);
            let expected = -(-x).ln_1p() / std::f64::consts::LN_2;
            let got = plob_bound(&p, l).unwrap();
            assert!((got - x / std::f64::consts::LN_2).abs() < 0.01 * got);
            assert!((got - expected).abs() <= 1e-12 * expected);
        }
        assert_eq!(plob_bound(&params(1.0), 0.0).unwrap(), f64::INFINITY);
        assert!(plob_bound(&p, -3.0).is_err());
    }

    proptest! {
        #[test]
        fn gain_error_consistency(
            mu in 1e-4f64..1.0,
            eta in 0.0f64..=1.0,
            d in 1e-10f64..0.1,
            e_d in 0.0f64..=0.5,
        ) {
            let q = gain_zz(mu, eta, d).unwrap();
            let e = error_zz(mu, eta, d, e_d).unwrap();
            let x = 2.0 * mu * eta;
            let rhs = e_d * (1.0 - (-x).exp()) + (-x).exp() * d / 2.0;
            prop_assert!((q * e - rhs).abs() <= 1e-12 * rhs.max(1e-300) + 1e-18);
            prop_assert!(e <= e_d.max(0.5) + 1e-15);
            prop_assert!(e >= e_d.min(0.5) - 1e-15);
            prop_assert!(q > 0.0 && q <= 1.0);
        }

        #[test]
        fn monotone_in_distance(l in 0.0f64..900.0, dl in 0.1f64..50.0) {
            let p = SystemParameters::default();
            prop_assert!(transmissivity(&p, l + dl).unwrap() < transmissivity(&p, l).unwrap());
            prop_assert!(plob_bound(&p, l + dl).unwrap() < plob_bound(&p, l).unwrap());
        }
    }
}
