//! Binary Shannon entropy in bits.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};

/// Drift tolerated around the ends of `[0, 1]` before an argument is rejected.
const DRIFT: f64 = 1e-12;

/// `h(x) = -x log2 x - (1-x) log2 (1-x)`, with `0 log 0 = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(-DRIFT..=1.0 + DRIFT).contains(&x) {
        return Err(Error::Domain {
            name: "x",
            value: x,
            domain: "[0, 1]",
        });
    }
    Ok(h2(x.clamp(0.0, 1.0)))
}

/// Unchecked binary entropy for hot loops. Arguments are clamped to `[0, 1]`.
#[inline]
pub(crate) fn h2(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    // Evaluate on the smaller branch so that 1 - x keeps full precision.
    let p = x.min(1.0 - x);
    -(p * p.ln() + (1.0 - p) * (-p).ln_1p()) / LN_2
}

/// `1 - h((1 + t) / 2)` for `t` in `[-1, 1]`, accurate for small `|t|`.
///
/// This is the information retained by a pair whose parity bias is `t`.
#[inline]
pub(crate) fn entropy_deficit(t: f64) -> f64 {
    let t = t.abs().min(1.0);
    if t == 1.0 {
        return 1.0;
    }
    if t < 1e-4 {
        // Series: (t^2/2 + t^4/12 + t^6/30) / ln 2
        let t2 = t * t;
        return t2 * (0.5 + t2 * (1.0 / 12.0 + t2 / 30.0)) / LN_2;
    }
    ((1.0 + t) * t.ln_1p() + (1.0 - t) * (-t).ln_1p()) / (2.0 * LN_2)
}
