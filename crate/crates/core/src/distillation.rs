//! Repetition-code advantage distillation.
//!
//! Blocks of `b` raw-key pairs are kept only when every position has the same
//! bit-error status. On the Bell-diagonal weights this maps
//!
//! ```text
//! l0' = [(l0+l1)^b + (l0-l1)^b] / 2p     l2' = [(l2+l3)^b + (l2-l3)^b] / 2p
//! l1' = [(l0+l1)^b - (l0-l1)^b] / 2p     l3' = [(l2+l3)^b - (l2-l3)^b] / 2p
//! p   = (l0+l1)^b + (l2+l3)^b
//! ```
//!
//! Powers are evaluated as ratios against the dominant group so that block
//! sizes in the thousands neither underflow nor lose the sign of `(l0-l1)^b`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{check_probability, Error, Result};
use crate::pauli::{PauliCoefficients, NORMALIZATION_TOL};

/// Largest block size accepted by the public interfaces.
pub const MAX_BLOCK_SIZE: u32 = 10_000;

/// Minimum number of simulated blocks for [`mc_verify`].
pub const MIN_MC_BLOCKS: u64 = 10_000;

/// Blocks per independently seeded random substream in [`mc_verify`].
pub const MC_CHUNK_BLOCKS: u64 = 1 << 16;

/// Post-distillation channel and acceptance probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdResult {
    pub coefficients: PauliCoefficients,
    /// May underflow to zero for very large `b`; see `ln_p_succ`.
    pub p_succ: f64,
    pub ln_p_succ: f64,
    pub b: u32,
}

pub(crate) fn check_block_size(b: u32) -> Result<()> {
    if b == 0 || b > MAX_BLOCK_SIZE {
        return Err(Error::Domain {
            name: "b",
            value: b as f64,
            domain: "[1, 10000]",
        });
    }
    Ok(())
}

/// `x^b` split as sign and natural log of the magnitude.
#[inline]
fn ln_pow(x: f64, b: u32) -> f64 {
    b as f64 * x.ln()
}

pub fn ad_transform(lambdas: &PauliCoefficients, b: u32) -> Result<AdResult> {
    check_block_size(b)?;
    if b == 1 {
        return Ok(AdResult {
            coefficients: *lambdas,
            p_succ: 1.0,
            ln_p_succ: 0.0,
            b,
        });
    }
    let [l0, l1, l2, l3] = lambdas.as_array();
    let keep = l0 + l1;
    let flip = l2 + l3;
    if keep <= 0.0 && flip <= 0.0 {
        return Err(Error::Invariant(
            "acceptance probability is zero for a normalized channel".into(),
        ));
    }
    // Weights of the two groups after acceptance: keep^b / p and flip^b / p.
    let (w_keep, w_flip, ln_p) = group_weights(keep, flip, b);

    let split = |weight: f64, sum: f64, diff: f64| -> (f64, f64) {
        if weight == 0.0 || sum <= 0.0 {
            return (0.0, 0.0);
        }
        let bias = (diff / sum).clamp(-1.0, 1.0).powi(b as i32);
        (weight * (1.0 + bias) / 2.0, weight * (1.0 - bias) / 2.0)
    };
    let (t0, t1) = split(w_keep, keep, l0 - l1);
    let (t2, t3) = split(w_flip, flip, l2 - l3);
    let coefficients = PauliCoefficients::from_array_unchecked([t0, t1, t2, t3]);
    let sum: f64 = coefficients.as_array().iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::Invariant(format!(
            "distilled weights sum to {sum}"
        )));
    }
    Ok(AdResult {
        coefficients,
        p_succ: ln_p.exp(),
        ln_p_succ: ln_p,
        b,
    })
}

/// Normalized group weights `(x^b / p, y^b / p)` and `ln p` for
/// `p = x^b + y^b`, with `x, y >= 0` not both zero.
#[inline]
pub(crate) fn group_weights(x: f64, y: f64, b: u32) -> (f64, f64, f64) {
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    // (lo/hi)^b in [0, 1]
    let rel = if lo <= 0.0 {
        0.0
    } else {
        (ln_pow(lo, b) - ln_pow(hi, b)).exp()
    };
    let w_hi = 1.0 / (1.0 + rel);
    let w_lo = rel / (1.0 + rel);
    let ln_p = ln_pow(hi, b) + rel.ln_1p();
    if x >= y {
        (w_hi, w_lo, ln_p)
    } else {
        (w_lo, w_hi, ln_p)
    }
}

/// Error rate after distillation and the acceptance probability, for a
/// binary symmetric error of rate `e_zz`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostAdError {
    pub e_tilde: f64,
    pub q_succ: f64,
    pub ln_q_succ: f64,
}

pub fn post_ad_error(e_zz: f64, b: u32) -> Result<PostAdError> {
    check_probability("e_zz", e_zz)?;
    check_block_size(b)?;
    Ok(post_ad_error_unchecked(e_zz, b))
}

#[inline]
pub(crate) fn post_ad_error_unchecked(e_zz: f64, b: u32) -> PostAdError {
    if b == 1 {
        return PostAdError {
            e_tilde: e_zz,
            q_succ: 1.0,
            ln_q_succ: 0.0,
        };
    }
    let (_, w_err, ln_q) = group_weights(1.0 - e_zz, e_zz, b);
    PostAdError {
        e_tilde: w_err,
        q_succ: ln_q.exp(),
        ln_q_succ: ln_q,
    }
}

/// An empirical frequency and its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
}

/// Outcome of simulating the block protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct McReport {
    pub b: u32,
    pub n_blocks: u64,
    pub accepted: u64,
    /// Label counts of the surviving pairs.
    pub label_counts: [u64; 4],
    pub p_succ: Estimate,
    pub labels: [Estimate; 4],
}

/// Comparison of a simulation against the closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct McComparison {
    pub analytic: AdResult,
    pub empirical: McReport,
    /// `|empirical - analytic|` in units of the analytic standard error, in
    /// the order `p_succ, lambda0..lambda3`.
    pub deviations: [f64; 5],
    pub passed: bool,
}

impl McComparison {
    pub fn max_deviation(&self) -> f64 {
        self.deviations.iter().cloned().fold(0.0, f64::max)
    }
}

/// Simulates `n_blocks` blocks of the repetition-code protocol.
///
/// Each position draws a Pauli label with probability `lambda_i`. A block
/// survives when all labels lie in `{0, 1}` or all lie in `{2, 3}`; the
/// surviving pair carries the group's base label plus the parity of phase
/// flips (labels 1 and 3) across the block.
///
/// Blocks are processed in fixed chunks, each drawing from its own ChaCha
/// stream keyed by `(seed, chunk index)`, so the result depends only on
/// `(seed, n_blocks)` and not on how chunks are scheduled across threads.
pub fn mc_verify(lambdas: &PauliCoefficients, b: u32, n_blocks: u64, seed: u64) -> Result<McReport> {
    check_block_size(b)?;
    if n_blocks < MIN_MC_BLOCKS {
        return Err(Error::Domain {
            name: "n_blocks",
            value: n_blocks as f64,
            domain: "[10000, inf)",
        });
    }
    let [l0, l1, l2, _] = lambdas.as_array();
    let cumulative = [l0, l0 + l1, l0 + l1 + l2];

    let n_chunks = n_blocks.div_ceil(MC_CHUNK_BLOCKS);
    let counts = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let start = chunk * MC_CHUNK_BLOCKS;
            let len = MC_CHUNK_BLOCKS.min(n_blocks - start);
            simulate_chunk(&cumulative, b, len, seed, chunk)
        })
        .collect::<Vec<_>>();
    let mut label_counts = [0u64; 4];
    for c in &counts {
        for (total, n) in label_counts.iter_mut().zip(c) {
            *total += n;
        }
    }
    let accepted: u64 = label_counts.iter().sum();

    let p = accepted as f64 / n_blocks as f64;
    let p_succ = Estimate {
        value: p,
        std_err: (p * (1.0 - p) / n_blocks as f64).sqrt(),
    };
    let labels = label_counts.map(|n| {
        if accepted == 0 {
            return Estimate {
                value: 0.0,
                std_err: 0.0,
            };
        }
        let f = n as f64 / accepted as f64;
        Estimate {
            value: f,
            std_err: (f * (1.0 - f) / accepted as f64).sqrt(),
        }
    });
    Ok(McReport {
        b,
        n_blocks,
        accepted,
        label_counts,
        p_succ,
        labels,
    })
}

fn simulate_chunk(cumulative: &[f64; 3], b: u32, len: u64, seed: u64, chunk: u64) -> [u64; 4] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    let mut counts = [0u64; 4];
    for _ in 0..len {
        let mut bit_errors = 0u32;
        let mut phase_flips = 0u32;
        for _ in 0..b {
            let u: f64 = rng.gen();
            let label = if u < cumulative[0] {
                0
            } else if u < cumulative[1] {
                1
            } else if u < cumulative[2] {
                2
            } else {
                3
            };
            bit_errors += (label >= 2) as u32;
            phase_flips += (label & 1) as u32;
        }
        if bit_errors == 0 || bit_errors == b {
            let base = if bit_errors == 0 { 0 } else { 2 };
            counts[base + (phase_flips & 1) as usize] += 1;
        }
    }
    counts
}

/// Runs [`mc_verify`] and checks every statistic against [`ad_transform`]
/// within `sigmas` analytic standard errors.
pub fn mc_compare(
    lambdas: &PauliCoefficients,
    b: u32,
    n_blocks: u64,
    seed: u64,
    sigmas: f64,
) -> Result<McComparison> {
    let analytic = ad_transform(lambdas, b)?;
    let empirical = mc_verify(lambdas, b, n_blocks, seed)?;
    let n = n_blocks as f64;
    let p = analytic.p_succ;
    // Exactly-determined statistics have zero spread; allow only rounding.
    let deviation = |observed: f64, expected: f64, sigma: f64| {
        let diff = (observed - expected).abs();
        if diff <= 1e-12 {
            0.0
        } else if sigma == 0.0 {
            f64::INFINITY
        } else {
            diff / sigma
        }
    };
    let mut deviations = [0.0; 5];
    deviations[0] = deviation(empirical.p_succ.value, p, (p * (1.0 - p) / n).sqrt());
    let expected_accepted = (p * n).max(1.0);
    for (i, &l) in analytic.coefficients.as_array().iter().enumerate() {
        let sigma = (l * (1.0 - l) / expected_accepted).sqrt();
        deviations[i + 1] = deviation(empirical.labels[i].value, l, sigma);
    }
    let passed = deviations.iter().all(|&d| d <= sigmas);
    Ok(McComparison {
        analytic,
        empirical,
        deviations,
        passed,
    })
}
