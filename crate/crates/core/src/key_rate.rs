//! Asymptotic secret key rate with repetition-code advantage distillation.
//!
//! For block size `b` the rate per signal pulse pair is
//!
//! ```text
//! R_b = (1/b) q_succ Q [ min_{lambda3} P_b(lambda3) - f h(E~) ]
//! ```
//!
//! where `P_b` is the privacy term of the distilled Bell-diagonal channel and
//! `lambda3` is the single degree of freedom left to the adversary once the
//! two error rates are fixed.

use crate::channel::{error_zz, gain_zz, ChannelPoint};
use crate::distillation::{ad_transform, check_block_size, group_weights, post_ad_error_unchecked};
use crate::entropy::{entropy_deficit, h2};
use crate::error::{check_probability, Error, Result};
use crate::params::{PulseIntensities, SystemParameters};
use crate::pauli::{feasible_lambda3_interval, pauli_from_error_rates, PauliCoefficients};
use crate::phase_error::{error_xx_bound, PhaseErrorTerms};

/// Default upper limit of the block-size search.
pub const DEFAULT_B_MAX: u32 = 2_000;

/// Uniform probes of the feasible `lambda3` interval before refinement.
pub const LAMBDA3_SCAN_POINTS: usize = 1_000;

/// Width at which the local refinement of the `lambda3` minimum stops.
pub const LAMBDA3_REFINE_WIDTH: f64 = 1e-9;

/// Consecutive non-improving block sizes tolerated once `q_succ < 1e-12`.
const B_STALL_LIMIT: u32 = 50;

/// Gain and error rates of the signal states at one distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelStatistics {
    pub q_zz: f64,
    pub e_zz: f64,
    pub e_xx: f64,
    pub distance_km: f64,
}

impl ChannelStatistics {
    pub fn new(q_zz: f64, e_zz: f64, e_xx: f64, distance_km: f64) -> Result<Self> {
        let stats = Self {
            q_zz,
            e_zz,
            e_xx,
            distance_km,
        };
        stats.validate()?;
        Ok(stats)
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("q_zz", self.q_zz)?;
        check_probability("e_xx", self.e_xx)?;
        if !(0.0..=0.5).contains(&self.e_zz) {
            return Err(Error::Domain {
                name: "e_zz",
                value: self.e_zz,
                domain: "[0, 0.5]",
            });
        }
        Ok(())
    }

    /// Simulated statistics of the link for the given intensities.
    ///
    /// Fails with [`Error::InfeasibleStatistics`] when the phase-error bound
    /// exceeds one.
    pub fn simulate(
        params: &SystemParameters,
        intensities: &PulseIntensities,
        distance_km: f64,
    ) -> Result<(Self, PhaseErrorTerms)> {
        let point = ChannelPoint::new(params, distance_km)?;
        let q_zz = gain_zz(intensities.mu, point.eta, point.d)?;
        let e_zz = error_zz(intensities.mu, point.eta, point.d, params.e_d)?;
        let terms = error_xx_bound(intensities, point.eta, point.d)?;
        if terms.e_xx > 1.0 {
            return Err(Error::InfeasibleStatistics(format!(
                "phase-error bound {} exceeds 1",
                terms.e_xx
            )));
        }
        let stats = Self {
            q_zz,
            e_zz: e_zz.min(0.5),
            e_xx: terms.e_xx,
            distance_km,
        };
        Ok((stats, terms))
    }
}

/// Privacy term `1 - (l0+l1) h(l0/(l0+l1)) - (l2+l3) h(l2/(l2+l3))`.
pub fn holevo_privacy_term(lambdas: &PauliCoefficients) -> f64 {
    let [l0, l1, l2, l3] = lambdas.as_array();
    let group = |a: f64, b: f64| {
        let s = a + b;
        if s <= 0.0 {
            0.0
        } else {
            s * h2(a / s)
        }
    };
    1.0 - group(l0, l1) - group(l2, l3)
}

/// Rate at a single block size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockRate {
    pub b: u32,
    /// Un-floored value; negative when no key can be distilled.
    pub raw: f64,
    /// The minimizing `lambda3`.
    pub lambda3: f64,
    /// Privacy term at the minimizer.
    pub privacy: f64,
    pub e_tilde: f64,
    pub q_succ: f64,
}

impl BlockRate {
    pub fn rate(&self) -> f64 {
        self.raw.max(0.0)
    }
}

/// Privacy term of the distilled channel as a function of `lambda3`, for
/// fixed error rates and block size.
///
/// With `A = (l0+l1)^b/p` and `C = (l2+l3)^b/p` fixed by the Z error rate,
/// `P(lambda3) = A g(u^b) + C g(v^b)` where `g(t) = 1 - h((1+t)/2)`,
/// `u = (l0-l1)/(l0+l1)` and `v = (l2-l3)/(l2+l3)` are affine in `lambda3`.
#[derive(Debug, Clone, Copy)]
struct PrivacyProfile {
    e_xx: f64,
    e_zz: f64,
    weight_keep: f64,
    weight_flip: f64,
    b: u32,
}

impl PrivacyProfile {
    fn new(e_xx: f64, e_zz: f64, b: u32) -> Self {
        let (weight_keep, weight_flip, _) = group_weights(1.0 - e_zz, e_zz, b);
        Self {
            e_xx,
            e_zz,
            weight_keep,
            weight_flip,
            b,
        }
    }

    #[inline]
    fn eval(&self, lambda3: f64) -> f64 {
        let b = self.b as i32;
        let mut p = 0.0;
        let keep = 1.0 - self.e_zz;
        if self.weight_keep > 0.0 && keep > 0.0 {
            let u = ((1.0 - 2.0 * self.e_xx - self.e_zz + 2.0 * lambda3) / keep).clamp(-1.0, 1.0);
            p += self.weight_keep * entropy_deficit(u.powi(b));
        }
        if self.weight_flip > 0.0 && self.e_zz > 0.0 {
            let v = ((self.e_zz - 2.0 * lambda3) / self.e_zz).clamp(-1.0, 1.0);
            p += self.weight_flip * entropy_deficit(v.powi(b));
        }
        p
    }
}

/// Minimum of `profile` over `[lo, hi]`: uniform scan, then golden-section
/// refinement around the best probe. `extra` is always included as a probe.
fn minimize_privacy(profile: &PrivacyProfile, lo: f64, hi: f64, extra: f64) -> (f64, f64) {
    let mut best = (extra, profile.eval(extra));
    if hi - lo <= 0.0 {
        let v = profile.eval(lo);
        return if v < best.1 { (lo, v) } else { best };
    }
    let n = LAMBDA3_SCAN_POINTS;
    let step = (hi - lo) / (n - 1) as f64;
    let mut best_i = 0;
    let mut best_scan = f64::INFINITY;
    for i in 0..n {
        let x = if i == n - 1 { hi } else { lo + step * i as f64 };
        let v = profile.eval(x);
        if v < best_scan {
            best_scan = v;
            best_i = i;
        }
    }
    let x_scan = if best_i == n - 1 { hi } else { lo + step * best_i as f64 };
    if best_scan < best.1 {
        best = (x_scan, best_scan);
    }
    let a = (x_scan - step).max(lo);
    let c = (x_scan + step).min(hi);
    let refined = golden_section_min(|x| profile.eval(x), a, c, LAMBDA3_REFINE_WIDTH);
    if refined.1 < best.1 {
        best = refined;
    }
    best
}

/// Golden-section search for a minimum of `f` on `[a, b]`.
pub(crate) fn golden_section_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, width: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > width {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// The phase-error figure is an upper bound; the adversary may realize any
/// phase error up to it, and beyond one half the worst case is one half.
#[inline]
fn worst_case(stats: &ChannelStatistics) -> ChannelStatistics {
    ChannelStatistics {
        e_xx: stats.e_xx.min(0.5),
        ..*stats
    }
}

fn check_stats(stats: &ChannelStatistics) -> Result<()> {
    if stats.e_xx > 1.0 {
        return Err(Error::InfeasibleStatistics(format!(
            "e_xx = {} exceeds 1",
            stats.e_xx
        )));
    }
    stats.validate()
}

fn check_efficiency(f: f64) -> Result<()> {
    if f >= 1.0 && f.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "f",
            value: f,
            domain: "[1, inf)",
        })
    }
}

/// Pre-factor `(1/b) q_succ Q` evaluated in the log domain.
#[inline]
fn throughput(ln_q_succ: f64, q_zz: f64, b: u32) -> f64 {
    (ln_q_succ - (b as f64).ln()).exp() * q_zz
}

/// The adversary's channel when bit and phase errors are independent. Lies
/// in the feasible interval and minimizes the rate exactly at `b = 1`.
#[inline]
fn product_lambda3(e_xx: f64, e_zz: f64) -> f64 {
    e_xx * e_zz
}

fn block_rate_unchecked(stats: &ChannelStatistics, b: u32, f: f64) -> BlockRate {
    let (e_xx, e_zz) = (stats.e_xx, stats.e_zz);
    let lo = (e_xx + e_zz - 1.0).max(0.0);
    let hi = e_xx.min(e_zz);
    let profile = PrivacyProfile::new(e_xx, e_zz, b);
    let (lambda3, privacy) = minimize_privacy(&profile, lo, hi, product_lambda3(e_xx, e_zz));
    let post = post_ad_error_unchecked(e_zz, b);
    let raw = throughput(post.ln_q_succ, stats.q_zz, b) * (privacy - f * h2(post.e_tilde));
    BlockRate {
        b,
        raw,
        lambda3,
        privacy,
        e_tilde: post.e_tilde,
        q_succ: post.q_succ,
    }
}

/// Upper bound on `raw` at block size `b`: the privacy term at the product
/// channel, which is one of the probes of the full minimization.
fn block_rate_upper(stats: &ChannelStatistics, b: u32, f: f64) -> f64 {
    let profile = PrivacyProfile::new(stats.e_xx, stats.e_zz, b);
    let post = post_ad_error_unchecked(stats.e_zz, b);
    let privacy = profile.eval(product_lambda3(stats.e_xx, stats.e_zz));
    throughput(post.ln_q_succ, stats.q_zz, b) * (privacy - f * h2(post.e_tilde))
}

/// Full rate breakdown at block size `b`, including the un-floored value.
pub fn rate_fixed_b_detail(stats: &ChannelStatistics, b: u32, f: f64) -> Result<BlockRate> {
    check_stats(stats)?;
    check_block_size(b)?;
    check_efficiency(f)?;
    Ok(block_rate_unchecked(&worst_case(stats), b, f))
}

/// Key rate at block size `b`, floored at zero.
pub fn rate_fixed_b(stats: &ChannelStatistics, b: u32, f: f64) -> Result<f64> {
    rate_fixed_b_detail(stats, b, f).map(|r| r.rate())
}

/// Result of the block-size search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizedRate {
    pub rate: f64,
    /// Smallest maximizing block size; 1 when no block size gives key.
    pub b_opt: u32,
    pub q_succ: f64,
    /// Largest un-floored value seen: the rate itself when positive,
    /// otherwise the best (negative) estimate over all block sizes. Used to
    /// steer searches through regions without key.
    pub surrogate: f64,
}

/// Maximizes [`rate_fixed_b`] over `b` in `[1, b_max]`.
///
/// Block sizes whose product-channel upper bound cannot beat the incumbent
/// skip the full minimization. The search stops early once `(1/b) q_succ Q`
/// falls to the incumbent, which bounds every larger block size, or when the
/// incumbent has not improved for 50 block sizes with `q_succ < 1e-12`.
pub fn rate_optimized_b(stats: &ChannelStatistics, f: f64, b_max: u32) -> Result<OptimizedRate> {
    check_stats(stats)?;
    check_block_size(b_max)?;
    check_efficiency(f)?;
    Ok(rate_optimized_b_unchecked(stats, f, b_max))
}

pub(crate) fn rate_optimized_b_unchecked(stats: &ChannelStatistics, f: f64, b_max: u32) -> OptimizedRate {
    let stats = &worst_case(stats);
    let mut best = OptimizedRate {
        rate: 0.0,
        b_opt: 1,
        q_succ: 1.0,
        surrogate: f64::NEG_INFINITY,
    };
    let mut stall = 0u32;
    for b in 1..=b_max {
        let post = post_ad_error_unchecked(stats.e_zz, b);
        let ceiling = throughput(post.ln_q_succ, stats.q_zz, b);
        if best.rate > 0.0 && ceiling <= best.rate {
            break;
        }
        let upper = block_rate_upper(stats, b, f);
        let improved = if upper <= best.rate {
            best.surrogate = best.surrogate.max(upper);
            false
        } else {
            let full = block_rate_unchecked(stats, b, f);
            best.surrogate = best.surrogate.max(full.raw);
            if full.raw > best.rate {
                best.rate = full.raw;
                best.b_opt = b;
                best.q_succ = full.q_succ;
                true
            } else {
                false
            }
        };
        stall = if improved { 0 } else { stall + 1 };
        if best.rate > 0.0 && stall >= B_STALL_LIMIT && post.q_succ < 1e-12 {
            break;
        }
    }
    if best.rate > 0.0 {
        best.surrogate = best.rate;
    }
    best
}

/// Rate without distillation: `Q [1 - h(E_xx) - f h(E_zz)]`, floored at zero.
pub fn rate_no_ad_baseline(stats: &ChannelStatistics, f: f64) -> Result<f64> {
    check_stats(stats)?;
    check_efficiency(f)?;
    Ok(baseline_raw(stats, f).max(0.0))
}

pub(crate) fn baseline_raw(stats: &ChannelStatistics, f: f64) -> f64 {
    let privacy = entropy_deficit(1.0 - 2.0 * stats.e_xx.min(0.5));
    stats.q_zz * (privacy - f * h2(stats.e_zz))
}

/// Privacy term of the distilled channel built from the error rates through
/// the public Pauli and distillation routines. Slow; used for checking.
pub fn privacy_via_channel(e_xx: f64, e_zz: f64, lambda3: f64, b: u32) -> Result<f64> {
    let lambdas = pauli_from_error_rates(e_xx, e_zz, lambda3)?;
    let distilled = ad_transform(&lambdas, b)?;
    Ok(holevo_privacy_term(&distilled.coefficients))
}

/// Feasible `lambda3` range for the given statistics.
pub fn lambda3_range(stats: &ChannelStatistics) -> Result<(f64, f64)> {
    let i = feasible_lambda3_interval(stats.e_xx, stats.e_zz)?;
    Ok((i.lo, i.hi))
}
