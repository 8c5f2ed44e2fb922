//! Secure key rates of twin-field quantum key distribution with
//! repetition-code advantage distillation.
//!
//! The crate computes, for a symmetric fiber link with a midpoint relay, the
//! asymptotic key rate under collective attacks as a function of distance,
//! optimizing the distillation block size and the source intensities, and
//! compares it with the repeaterless capacity bound.

pub mod channel;
pub mod cli;
pub mod distillation;
pub mod entropy;
pub mod error;
pub mod key_rate;
pub mod optimizer;
pub mod params;
pub mod pauli;
pub mod phase_error;

pub use channel::{dark_count_effective, error_zz, gain_zz, plob_bound, transmissivity, ChannelPoint};
pub use distillation::{ad_transform, mc_compare, mc_verify, post_ad_error, AdResult, McComparison, McReport};
pub use entropy::binary_entropy;
pub use error::{Error, Result};
pub use key_rate::{
    holevo_privacy_term, rate_fixed_b, rate_fixed_b_detail, rate_no_ad_baseline, rate_optimized_b,
    ChannelStatistics, OptimizedRate,
};
pub use optimizer::{
    max_distance, optimize_intensities, sweep_distance, IntensityMode, RatePoint, SweepRequest,
};
pub use params::{PulseIntensities, SystemParameters};
pub use pauli::{feasible_lambda3_interval, pauli_from_error_rates, PauliCoefficients};
pub use phase_error::{error_xx_bound, even_photon_stats, series_c3, PhaseErrorTerms};
