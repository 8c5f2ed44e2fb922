//! Intensity optimization, distance sweeps and maximum-distance search.
//!
//! The source intensities are chosen per distance by a multi-start search:
//! a coarse grid of seeds, followed by coordinate-wise golden-section passes
//! in log-intensity from the best seeds (and from the optimum of the previous
//! distance when sweeping). Where no intensities give key, the search
//! follows the largest un-floored rate so it can still climb towards the
//! region that does.
//!
//! Work inside one distance runs in parallel; distances are processed in
//! order so that warm starts, and hence results, do not depend on the number
//! of worker threads.

use rayon::prelude::*;

use crate::channel::{dark_count_effective, error_zz, gain_zz, plob_bound, transmissivity};
use crate::error::{Error, Result};
use crate::key_rate::{
    baseline_raw, golden_section_min, rate_optimized_b_unchecked, ChannelStatistics, DEFAULT_B_MAX,
};
use crate::params::{PulseIntensities, SystemParameters};
use crate::phase_error::error_xx_bound;

/// Largest distance accepted by the optimizer, in km.
pub const MAX_DISTANCE_KM: f64 = 1_000.0;

const SEED_MU: [f64; 8] = [0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5];
const SEED_NU1_STEPS: usize = 4;
const SEED_NU1_MAX: f64 = 2.0;
const SEED_NU2_FRACTIONS: [f64; 4] = [0.1, 0.3, 0.5, 0.8];

/// Number of best grid seeds refined by local descent.
const DESCENT_STARTS: usize = 3;
const MAX_PASSES: usize = 40;
const PASS_REL_IMPROVEMENT: f64 = 1e-4;
/// Golden-section bracket is `[x / BRACKET, x * BRACKET]` in each coordinate.
const BRACKET: f64 = 4.0;
const LOG_TOL: f64 = 1e-3;

const MU_MIN: f64 = 1e-4;
const NU1_MAX: f64 = 5.0;
const NU2_MIN: f64 = 1e-5;
/// Relative gap kept between `nu1` and `max(mu, nu2)`.
const ORDER_GAP: f64 = 1e-6;

/// Which key rate an optimization maximizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateObjective {
    /// Advantage distillation with block sizes up to `b_max`.
    Distilled { b_max: u32 },
    /// One-way post-processing only.
    Baseline,
}

/// How intensities are chosen along a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntensityMode {
    Fixed(PulseIntensities),
    Optimized,
}

/// One row of a rate-versus-distance curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub distance_km: f64,
    /// Bits per signal pulse pair.
    pub rate: f64,
    /// Rate without distillation, when requested.
    pub rate_baseline: Option<f64>,
    pub b_opt: u32,
    pub intensities: PulseIntensities,
    pub q_zz: f64,
    pub e_zz: f64,
    /// Phase-error bound; may exceed one for intensities that give no key.
    pub e_xx: f64,
    pub q_succ: f64,
    pub plob: f64,
}

impl RatePoint {
    pub fn validate(&self) -> Result<()> {
        let fail = |what: &str| Err(Error::Invariant(format!("rate point at {} km: {what}", self.distance_km)));
        if !(self.distance_km >= 0.0 && self.distance_km.is_finite()) {
            return fail("distance");
        }
        if !(self.rate >= 0.0 && self.rate.is_finite()) {
            return fail("rate");
        }
        if let Some(r) = self.rate_baseline {
            if !(r >= 0.0 && r.is_finite()) {
                return fail("baseline rate");
            }
        }
        if self.b_opt == 0 {
            return fail("b_opt");
        }
        if self.rate == 0.0 && self.b_opt != 1 {
            return fail("b_opt without key");
        }
        self.intensities.validate()?;
        for (name, v) in [("q_zz", self.q_zz), ("q_succ", self.q_succ)] {
            if !(0.0..=1.0).contains(&v) {
                return fail(name);
            }
        }
        if !(0.0..=0.5).contains(&self.e_zz) {
            return fail("e_zz");
        }
        if !(self.e_xx >= 0.0) {
            return fail("e_xx");
        }
        if !(self.plob >= 0.0) {
            return fail("plob");
        }
        Ok(())
    }

    pub fn is_above_plob(&self) -> bool {
        self.rate > self.plob
    }
}

/// A rate evaluation at fixed intensities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub intensities: PulseIntensities,
    pub rate: f64,
    /// Equal to `rate` when positive, otherwise a negative figure that
    /// increases towards the region with key.
    pub score: f64,
    pub b_opt: u32,
    pub q_succ: f64,
    pub q_zz: f64,
    pub e_zz: f64,
    pub e_xx: f64,
}

/// Evaluates the objective at the given intensities.
pub fn evaluate(
    params: &SystemParameters,
    distance_km: f64,
    intensities: &PulseIntensities,
    objective: RateObjective,
) -> Result<Evaluation> {
    let eta = transmissivity(params, distance_km)?;
    let d = dark_count_effective(params.p_d)?;
    let q_zz = gain_zz(intensities.mu, eta, d)?;
    let e_zz = error_zz(intensities.mu, eta, d, params.e_d)?.min(0.5);
    let terms = error_xx_bound(intensities, eta, d)?;
    let mut eval = Evaluation {
        intensities: *intensities,
        rate: 0.0,
        score: 0.0,
        b_opt: 1,
        q_succ: 1.0,
        q_zz,
        e_zz,
        e_xx: terms.e_xx,
    };
    if terms.e_xx > 1.0 {
        // No Pauli channel matches these statistics. Rank by how far off.
        eval.score = -10.0 - terms.e_xx.min(1e6);
        return Ok(eval);
    }
    let stats = ChannelStatistics {
        q_zz,
        e_zz,
        e_xx: terms.e_xx,
        distance_km,
    };
    match objective {
        RateObjective::Distilled { b_max } => {
            let opt = rate_optimized_b_unchecked(&stats, params.f, b_max);
            eval.rate = opt.rate;
            eval.score = opt.surrogate;
            eval.b_opt = opt.b_opt;
            eval.q_succ = opt.q_succ;
        }
        RateObjective::Baseline => {
            let raw = baseline_raw(&stats, params.f);
            eval.rate = raw.max(0.0);
            eval.score = raw;
        }
    }
    Ok(eval)
}

fn score_at(params: &SystemParameters, distance_km: f64, objective: RateObjective, x: [f64; 3]) -> Option<Evaluation> {
    let intensities = PulseIntensities::new(x[0], x[1], x[2]).ok()?;
    evaluate(params, distance_km, &intensities, objective).ok()
}

/// Picks the higher score; ties keep `a`.
fn better(a: Evaluation, b: Evaluation) -> Evaluation {
    if b.score > a.score {
        b
    } else {
        a
    }
}

fn seed_grid() -> Vec<[f64; 3]> {
    let mut seeds = Vec::new();
    for &mu in &SEED_MU {
        let lo = 1.25 * mu;
        if lo >= SEED_NU1_MAX {
            continue;
        }
        for i in 0..SEED_NU1_STEPS {
            let t = i as f64 / (SEED_NU1_STEPS - 1) as f64;
            let nu1 = lo * (SEED_NU1_MAX / lo).powf(t);
            for &frac in &SEED_NU2_FRACTIONS {
                seeds.push([mu, nu1, frac * nu1]);
            }
        }
    }
    seeds
}

/// Admissible range of coordinate `axis` with the other two held fixed.
fn axis_bounds(x: &[f64; 3], axis: usize) -> (f64, f64) {
    let [mu, nu1, nu2] = *x;
    match axis {
        0 => (MU_MIN, nu1 * (1.0 - ORDER_GAP)),
        1 => (mu.max(nu2) * (1.0 + ORDER_GAP), NU1_MAX),
        _ => (NU2_MIN, nu1 * (1.0 - ORDER_GAP)),
    }
}

/// Coordinate-wise golden-section ascent from `start`.
fn local_descent(
    params: &SystemParameters,
    distance_km: f64,
    objective: RateObjective,
    start: Evaluation,
) -> Evaluation {
    let mut best = start;
    for _ in 0..MAX_PASSES {
        let before = best.score;
        for axis in 0..3 {
            let x = [best.intensities.mu, best.intensities.nu1, best.intensities.nu2];
            let (lo, hi) = axis_bounds(&x, axis);
            if !(lo < hi) {
                continue;
            }
            let a = (x[axis] / BRACKET).max(lo).ln();
            let b = (x[axis] * BRACKET).min(hi).ln();
            if !(a < b) {
                continue;
            }
            let probe = |t: f64| {
                let mut y = x;
                y[axis] = t.exp();
                score_at(params, distance_km, objective, y)
            };
            let (t, _) = golden_section_min(
                |t| probe(t).map_or(f64::INFINITY, |e| -e.score),
                a,
                b,
                LOG_TOL,
            );
            if let Some(candidate) = probe(t) {
                best = better(best, candidate);
            }
        }
        let gain = best.score - before;
        if gain <= PASS_REL_IMPROVEMENT * before.abs() {
            break;
        }
    }
    best
}

/// Maximizes the objective over intensities at one distance.
///
/// `warm_start`, typically the optimum at a neighbouring distance, is refined
/// alongside the best grid seeds. The result is never worse than any seed.
pub fn optimize_with(
    params: &SystemParameters,
    distance_km: f64,
    objective: RateObjective,
    warm_start: Option<PulseIntensities>,
) -> Result<Evaluation> {
    params.validate()?;
    if !(0.0..=MAX_DISTANCE_KM).contains(&distance_km) {
        return Err(Error::Domain {
            name: "distance_km",
            value: distance_km,
            domain: "[0, 1000]",
        });
    }
    let seeds: Vec<Evaluation> = seed_grid()
        .into_par_iter()
        .filter_map(|x| score_at(params, distance_km, objective, x))
        .collect();
    let mut order: Vec<usize> = (0..seeds.len()).collect();
    // Stable sort: equal scores keep grid order.
    order.sort_by(|&i, &j| seeds[j].score.total_cmp(&seeds[i].score));
    let mut starts: Vec<Evaluation> = order.iter().take(DESCENT_STARTS).map(|&i| seeds[i]).collect();
    if let Some(w) = warm_start {
        if let Ok(e) = evaluate(params, distance_km, &w, objective) {
            starts.push(e);
        }
    }
    let refined: Vec<Evaluation> = starts
        .into_par_iter()
        .map(|s| local_descent(params, distance_km, objective, s))
        .collect();
    let best = refined
        .into_iter()
        .chain(order.first().map(|&i| seeds[i]))
        .reduce(better)
        .ok_or_else(|| Error::Invariant("no admissible intensity seed".into()))?;
    Ok(best)
}

fn rate_point(params: &SystemParameters, eval: &Evaluation, distance_km: f64) -> Result<RatePoint> {
    Ok(RatePoint {
        distance_km,
        rate: eval.rate,
        rate_baseline: None,
        b_opt: eval.b_opt,
        intensities: eval.intensities,
        q_zz: eval.q_zz,
        e_zz: eval.e_zz,
        e_xx: eval.e_xx,
        q_succ: eval.q_succ,
        plob: plob_bound(params, distance_km)?,
    })
}

/// Optimal intensities for the distilled rate at one distance.
pub fn optimize_intensities(
    params: &SystemParameters,
    distance_km: f64,
    b_max: u32,
) -> Result<(PulseIntensities, RatePoint)> {
    let eval = optimize_with(params, distance_km, RateObjective::Distilled { b_max }, None)?;
    let point = rate_point(params, &eval, distance_km)?;
    Ok((eval.intensities, point))
}

/// Parameters of a rate-versus-distance sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRequest {
    pub params: SystemParameters,
    pub l_min: f64,
    pub l_max: f64,
    pub l_step: f64,
    pub b_max: u32,
    pub intensity_mode: IntensityMode,
    /// Also compute the rate without distillation.
    pub baseline: bool,
}

impl SweepRequest {
    pub fn new(params: SystemParameters, l_min: f64, l_max: f64, l_step: f64) -> Self {
        Self {
            params,
            l_min,
            l_max,
            l_step,
            b_max: DEFAULT_B_MAX,
            intensity_mode: IntensityMode::Optimized,
            baseline: false,
        }
    }

    /// Grid distances `l_min, l_min + l_step, ...` up to `l_max`. Empty when
    /// `l_min > l_max`.
    pub fn distances(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut i = 0u64;
        loop {
            let l = self.l_min + self.l_step * i as f64;
            if l > self.l_max + 1e-9 * self.l_step {
                break;
            }
            out.push(l);
            i += 1;
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.l_min >= 0.0 && self.l_min.is_finite()) {
            return Err(Error::Domain {
                name: "l_min",
                value: self.l_min,
                domain: "[0, inf)",
            });
        }
        if !(self.l_max.is_finite() && self.l_max <= MAX_DISTANCE_KM) {
            return Err(Error::Domain {
                name: "l_max",
                value: self.l_max,
                domain: "(-inf, 1000]",
            });
        }
        if !(self.l_step > 0.0 && self.l_step.is_finite()) {
            return Err(Error::Domain {
                name: "l_step",
                value: self.l_step,
                domain: "(0, inf)",
            });
        }
        crate::distillation::check_block_size(self.b_max)?;
        if let IntensityMode::Fixed(i) = self.intensity_mode {
            i.validate()?;
        }
        Ok(())
    }
}

/// Rate-versus-distance curve, one point per grid distance in order.
pub fn sweep_distance(request: &SweepRequest) -> Result<Vec<RatePoint>> {
    request.validate()?;
    let params = &request.params;
    let objective = RateObjective::Distilled { b_max: request.b_max };
    let mut points = Vec::new();
    let mut warm: Option<PulseIntensities> = None;
    let mut warm_baseline: Option<PulseIntensities> = None;
    for l in request.distances() {
        let (eval, baseline) = match request.intensity_mode {
            IntensityMode::Fixed(i) => {
                let eval = evaluate(params, l, &i, objective)?;
                let baseline = if request.baseline {
                    Some(evaluate(params, l, &i, RateObjective::Baseline)?.rate)
                } else {
                    None
                };
                (eval, baseline)
            }
            IntensityMode::Optimized => {
                let eval = optimize_with(params, l, objective, warm)?;
                warm = Some(eval.intensities);
                let baseline = if request.baseline {
                    let b = optimize_with(params, l, RateObjective::Baseline, warm_baseline)?;
                    warm_baseline = Some(b.intensities);
                    Some(b.rate)
                } else {
                    None
                };
                (eval, baseline)
            }
        };
        let mut point = rate_point(params, &eval, l)?;
        point.rate_baseline = baseline;
        points.push(point);
    }
    Ok(points)
}

/// Coarse step of the maximum-distance scan, in km.
pub const COARSE_STEP_KM: f64 = 10.0;
/// Final bracket width of the maximum-distance bisection, in km.
pub const BISECTION_WIDTH_KM: f64 = 0.5;

/// Largest distance with positive key, with or without distillation.
///
/// Scans in 10 km steps with warm-started optimization until the rate
/// vanishes, then bisects the last bracket down to 0.5 km. The returned
/// distance has positive rate; the bracket's upper end, at most 0.5 km
/// further, does not.
pub fn max_distance(params: &SystemParameters, b_max: u32, use_ad: bool) -> Result<f64> {
    let objective = if use_ad {
        RateObjective::Distilled { b_max }
    } else {
        RateObjective::Baseline
    };
    let first = optimize_with(params, 0.0, objective, None)?;
    if first.rate <= 0.0 {
        return Err(Error::NoKey { distance_km: 0.0 });
    }
    let mut lo = (0.0, first);
    let mut hi = None;
    let mut l = COARSE_STEP_KM;
    while l <= MAX_DISTANCE_KM {
        let eval = optimize_with(params, l, objective, Some(lo.1.intensities))?;
        if eval.rate > 0.0 {
            lo = (l, eval);
        } else {
            hi = Some(l);
            break;
        }
        l += COARSE_STEP_KM;
    }
    let Some(mut hi) = hi else {
        return Ok(lo.0);
    };
    while hi - lo.0 > BISECTION_WIDTH_KM {
        let mid = 0.5 * (lo.0 + hi);
        let eval = optimize_with(params, mid, objective, Some(lo.1.intensities))?;
        if eval.rate > 0.0 {
            lo = (mid, eval);
        } else {
            hi = mid;
        }
    }
    Ok(lo.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_respect_ordering() {
        let seeds = seed_grid();
        assert!(!seeds.is_empty());
        for s in seeds {
            assert!(PulseIntensities::new(s[0], s[1], s[2]).is_ok(), "{s:?}");
        }
    }

    #[test]
    fn sweep_grid() {
        let r = SweepRequest::new(SystemParameters::default(), 0.0, 1.0, 0.25);
        assert_eq!(r.distances(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let r = SweepRequest::new(SystemParameters::default(), 0.0, 0.0, 1.0);
        assert_eq!(r.distances(), vec![0.0]);
        let r = SweepRequest::new(SystemParameters::default(), 5.0, 1.0, 1.0);
        assert!(r.distances().is_empty());
    }

    #[test]
    fn bounds_keep_constraint() {
        let x = [0.05, 0.2, 0.04];
        for axis in 0..3 {
            let (lo, hi) = axis_bounds(&x, axis);
            for v in [lo, hi] {
                let mut y = x;
                y[axis] = v;
                assert!(PulseIntensities::new(y[0], y[1], y[2]).is_ok(), "{axis} {y:?}");
            }
        }
    }

    #[test]
    fn optimized_beats_probe() {
        let params = SystemParameters::default();
        let probe = PulseIntensities::new(0.05, 0.2, 0.04).unwrap();
        let objective = RateObjective::Distilled { b_max: 64 };
        let at_probe = evaluate(&params, 150.0, &probe, objective).unwrap();
        let best = optimize_with(&params, 150.0, objective, None).unwrap();
        assert!(best.rate >= at_probe.rate);
        assert!(best.rate > 0.0);
    }

    #[test]
    fn rejects_far_distances() {
        let params = SystemParameters::default();
        assert!(optimize_intensities(&params, 1200.0, 10).is_err());
    }
}
