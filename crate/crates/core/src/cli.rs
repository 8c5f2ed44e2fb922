//! Command-line front end.
//!
//! Configuration comes from flags, optionally layered over a JSON file
//! (`--config`); flags win. Exit codes: 0 success, 2 invalid configuration,
//! 3 I/O failure, 4 Monte Carlo verification failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use thiserror::Error;

use crate::distillation::mc_compare;
use crate::error::Error;
use crate::key_rate::DEFAULT_B_MAX;
use crate::optimizer::{max_distance, sweep_distance, IntensityMode, RatePoint, SweepRequest};
use crate::params::{PulseIntensities, SystemParameters};
use crate::pauli::PauliCoefficients;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

/// CSV header of sweep output.
pub const CSV_HEADER: &str = "distance_km,rate,rate_baseline,b_opt,mu,nu1,nu2,q_zz,e_zz,e_xx,q_succ,plob";

/// Default number of simulated blocks for `mc-verify`.
pub const DEFAULT_MC_BLOCKS: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {field}: {message}")]
    Config { field: String, message: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error(transparent)]
    Engine(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => EXIT_CONFIG,
            CliError::Io(_) => EXIT_IO,
            CliError::Verification(_) => EXIT_VERIFY,
            CliError::Engine(_) => EXIT_CONFIG,
        }
    }

    fn config(field: &str, message: impl Into<String>) -> Self {
        CliError::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain { name, .. } => CliError::config(name, e.to_string()),
            Error::Constraint(ref m) if m.contains("nu1") => CliError::config("intensities", e.to_string()),
            other => CliError::Engine(other),
        }
    }
}

/// How the sweep picks intensities: `opt` or `fixed:MU,NU1,NU2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntensitySpec {
    Optimized,
    Fixed { mu: f64, nu1: f64, nu2: f64 },
}

impl FromStr for IntensitySpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "opt" {
            return Ok(IntensitySpec::Optimized);
        }
        let Some(rest) = s.strip_prefix("fixed:") else {
            return Err(format!("expected `opt` or `fixed:MU,NU1,NU2`, got `{s}`"));
        };
        let values: Vec<f64> = rest
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}")))
            .collect::<Result<_, _>>()?;
        match values.as_slice() {
            &[mu, nu1, nu2] => Ok(IntensitySpec::Fixed { mu, nu1, nu2 }),
            _ => Err(format!("expected three intensities, got {}", values.len())),
        }
    }
}

impl<'de> Deserialize<'de> for IntensitySpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: SystemParameters,
    pub l_min: f64,
    pub l_max: f64,
    pub l_step: f64,
    pub b_max: u32,
    pub intensities: IntensitySpec,
    pub baseline: bool,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: SystemParameters::default(),
            l_min: 0.0,
            l_max: 500.0,
            l_step: 1.0,
            b_max: DEFAULT_B_MAX,
            intensities: IntensitySpec::Optimized,
            baseline: false,
            out: None,
            seed: 0,
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.params.validate()?;
        self.sweep_request()?.validate()?;
        if self.threads == Some(0) {
            return Err(CliError::config("threads", "must be at least 1"));
        }
        Ok(())
    }

    pub fn intensity_mode(&self) -> Result<IntensityMode, CliError> {
        match self.intensities {
            IntensitySpec::Optimized => Ok(IntensityMode::Optimized),
            IntensitySpec::Fixed { mu, nu1, nu2 } => PulseIntensities::new(mu, nu1, nu2)
                .map(IntensityMode::Fixed)
                .map_err(|e| CliError::config("intensities", e.to_string())),
        }
    }

    pub fn sweep_request(&self) -> Result<SweepRequest, CliError> {
        Ok(SweepRequest {
            params: self.params,
            l_min: self.l_min,
            l_max: self.l_max,
            l_step: self.l_step,
            b_max: self.b_max,
            intensity_mode: self.intensity_mode()?,
            baseline: self.baseline,
        })
    }

    /// Runs `f` on a pool with the configured number of worker threads.
    fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.threads {
            builder = builder.num_threads(n);
        }
        let pool = builder
            .build()
            .map_err(|e| CliError::config("threads", e.to_string()))?;
        Ok(pool.install(f))
    }
}

/// Optional overrides read from a JSON file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub e_d: Option<f64>,
    pub alpha: Option<f64>,
    pub eta_d: Option<f64>,
    pub p_d: Option<f64>,
    pub f: Option<f64>,
    pub l_min: Option<f64>,
    pub l_max: Option<f64>,
    pub l_step: Option<f64>,
    pub b_max: Option<u32>,
    pub intensities: Option<IntensitySpec>,
    pub baseline: Option<bool>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct ConfigArgs {
    /// JSON file with default values for any of the flags below.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Loss-independent misalignment error.
    #[arg(long = "ed", global = true)]
    pub e_d: Option<f64>,
    /// Fiber attenuation, dB/km.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Detector efficiency.
    #[arg(long = "eta-d", global = true)]
    pub eta_d: Option<f64>,
    /// Dark-count probability per detector.
    #[arg(long = "pd", global = true)]
    pub p_d: Option<f64>,
    /// Error-correction efficiency.
    #[arg(long = "f", global = true)]
    pub f: Option<f64>,
    #[arg(long = "lmin", global = true)]
    pub l_min: Option<f64>,
    #[arg(long = "lmax", global = true)]
    pub l_max: Option<f64>,
    #[arg(long = "lstep", global = true)]
    pub l_step: Option<f64>,
    /// Largest distillation block size searched.
    #[arg(long = "bmax", global = true)]
    pub b_max: Option<u32>,
    /// `opt` or `fixed:MU,NU1,NU2`.
    #[arg(long, global = true)]
    pub intensities: Option<IntensitySpec>,
    /// Also compute the rate without distillation.
    #[arg(long, global = true)]
    pub baseline: bool,
    /// Output path; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

impl ConfigArgs {
    /// Layers defaults, then the JSON file, then flags.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                serde_json::from_str::<ConfigFile>(&text)
                    .map_err(|e| CliError::config("config", e.to_string()))?
            }
            None => ConfigFile::default(),
        };
        let mut c = RunConfig::default();
        let p = &mut c.params;
        p.e_d = self.e_d.or(file.e_d).unwrap_or(p.e_d);
        p.alpha = self.alpha.or(file.alpha).unwrap_or(p.alpha);
        p.eta_d = self.eta_d.or(file.eta_d).unwrap_or(p.eta_d);
        p.p_d = self.p_d.or(file.p_d).unwrap_or(p.p_d);
        p.f = self.f.or(file.f).unwrap_or(p.f);
        c.l_min = self.l_min.or(file.l_min).unwrap_or(c.l_min);
        c.l_max = self.l_max.or(file.l_max).unwrap_or(c.l_max);
        c.l_step = self.l_step.or(file.l_step).unwrap_or(c.l_step);
        c.b_max = self.b_max.or(file.b_max).unwrap_or(c.b_max);
        c.intensities = self.intensities.or(file.intensities).unwrap_or(c.intensities);
        c.baseline = self.baseline || file.baseline.unwrap_or(false);
        c.out = self.out.clone().or(file.out);
        c.seed = self.seed.or(file.seed).unwrap_or(c.seed);
        c.threads = self.threads.or(file.threads);
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Parser)]
#[command(name = "tfqkd", version, about = "Twin-field QKD key rates with advantage distillation")]
pub struct Cli {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Key rate at a single distance.
    Rate {
        /// Total Alice-Bob distance in km.
        #[arg(long)]
        distance: f64,
    },
    /// Rate-versus-distance curve as CSV.
    Sweep,
    /// Simulate the block protocol and compare with the closed form.
    McVerify {
        /// Comma-separated Pauli weights `l0,l1,l2,l3`.
        #[arg(long, value_delimiter = ',', required = true)]
        lambdas: Vec<f64>,
        /// Block size.
        #[arg(long = "b")]
        block: u32,
        /// Number of simulated blocks.
        #[arg(long, default_value_t = DEFAULT_MC_BLOCKS)]
        blocks: u64,
    },
    /// Largest distance with positive key.
    MaxDistance {
        /// Use the rate without distillation.
        #[arg(long)]
        no_ad: bool,
    },
}

/// Formats a float with 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes one CSV row per point after re-validating it.
pub fn write_csv(points: &[RatePoint], out: &mut dyn Write) -> Result<(), CliError> {
    writeln!(out, "{CSV_HEADER}")?;
    for p in points {
        p.validate()?;
        let baseline = p.rate_baseline.map(fmt_float).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_float(p.distance_km),
            fmt_float(p.rate),
            baseline,
            p.b_opt,
            fmt_float(p.intensities.mu),
            fmt_float(p.intensities.nu1),
            fmt_float(p.intensities.nu2),
            fmt_float(p.q_zz),
            fmt_float(p.e_zz),
            fmt_float(p.e_xx),
            fmt_float(p.q_succ),
            fmt_float(p.plob),
        )?;
    }
    Ok(())
}

/// Rate point at one distance.
pub fn cmd_rate(config: &RunConfig, distance_km: f64) -> Result<RatePoint, CliError> {
    let request = SweepRequest {
        l_min: distance_km,
        l_max: distance_km,
        l_step: 1.0,
        ..config.sweep_request()?
    };
    let points = config.install(|| sweep_distance(&request))??;
    let point = points
        .into_iter()
        .next()
        .ok_or_else(|| CliError::config("distance", "no distance evaluated"))?;
    point.validate()?;
    Ok(point)
}

pub fn render_rate(point: &RatePoint, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "distance_km: {}", point.distance_km)?;
    writeln!(out, "rate: {:e}", point.rate)?;
    if let Some(b) = point.rate_baseline {
        writeln!(out, "rate_baseline: {b:e}")?;
    }
    writeln!(out, "b_opt: {}", point.b_opt)?;
    writeln!(out, "mu: {}", point.intensities.mu)?;
    writeln!(out, "nu1: {}", point.intensities.nu1)?;
    writeln!(out, "nu2: {}", point.intensities.nu2)?;
    writeln!(out, "q_zz: {:e}", point.q_zz)?;
    writeln!(out, "e_zz: {}", point.e_zz)?;
    writeln!(out, "e_xx: {}", point.e_xx)?;
    writeln!(out, "q_succ: {}", point.q_succ)?;
    writeln!(out, "plob: {:e}", point.plob)?;
    writeln!(out, "above_plob: {}", point.is_above_plob())?;
    writeln!(out, "rate_zero: {}", point.rate == 0.0)?;
    Ok(())
}

/// Runs a sweep and writes CSV to the configured output, or `stdout`.
pub fn cmd_sweep(config: &RunConfig, stdout: &mut dyn Write) -> Result<Vec<RatePoint>, CliError> {
    // Open the output first so an unwritable path fails before the work.
    let mut file = match &config.out {
        Some(path) => Some(BufWriter::new(File::create(path)?)),
        None => None,
    };
    let request = config.sweep_request()?;
    let points = config.install(|| sweep_distance(&request))??;
    match file.as_mut() {
        Some(f) => {
            write_csv(&points, f)?;
            f.flush()?;
        }
        None => write_csv(&points, stdout)?,
    }
    Ok(points)
}

/// Simulates the block protocol and compares it with the closed form at
/// five standard errors.
pub fn cmd_mc_verify(
    config: &RunConfig,
    lambdas: &PauliCoefficients,
    b: u32,
    n_blocks: u64,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let cmp = config.install(|| mc_compare(lambdas, b, n_blocks, config.seed, 5.0))??;
    let names = ["p_succ", "lambda0", "lambda1", "lambda2", "lambda3"];
    let analytic = [
        cmp.analytic.p_succ,
        cmp.analytic.coefficients.lambda0(),
        cmp.analytic.coefficients.lambda1(),
        cmp.analytic.coefficients.lambda2(),
        cmp.analytic.coefficients.lambda3(),
    ];
    let empirical = [
        cmp.empirical.p_succ,
        cmp.empirical.labels[0],
        cmp.empirical.labels[1],
        cmp.empirical.labels[2],
        cmp.empirical.labels[3],
    ];
    writeln!(
        out,
        "b = {b}, blocks = {n_blocks}, accepted = {}, seed = {}",
        cmp.empirical.accepted, config.seed
    )?;
    writeln!(out, "{:<8} {:>12} {:>12} {:>10} {:>8}", "stat", "analytic", "empirical", "std_err", "sigmas")?;
    for i in 0..5 {
        writeln!(
            out,
            "{:<8} {:>12.6} {:>12.6} {:>10.2e} {:>8.2}",
            names[i], analytic[i], empirical[i].value, empirical[i].std_err, cmp.deviations[i]
        )?;
    }
    if cmp.passed {
        writeln!(out, "PASS (max deviation {:.2} sigma)", cmp.max_deviation())?;
        Ok(())
    } else {
        writeln!(out, "FAIL (max deviation {:.2} sigma)", cmp.max_deviation())?;
        Err(CliError::Verification(format!(
            "deviation of {:.2} sigma exceeds 5",
            cmp.max_deviation()
        )))
    }
}

fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let config = cli.config.resolve()?;
    match &cli.command {
        Command::Rate { distance } => {
            let point = cmd_rate(&config, *distance)?;
            match &config.out {
                Some(path) => render_rate(&point, &mut File::create(path)?)?,
                None => render_rate(&point, stdout)?,
            }
        }
        Command::Sweep => {
            cmd_sweep(&config, stdout)?;
        }
        Command::McVerify {
            lambdas,
            block,
            blocks,
        } => {
            let &[l0, l1, l2, l3] = lambdas.as_slice() else {
                return Err(CliError::config("lambdas", format!("expected 4 values, got {}", lambdas.len())));
            };
            let lambdas = PauliCoefficients::new(l0, l1, l2, l3)
                .map_err(|e| CliError::config("lambdas", e.to_string()))?;
            cmd_mc_verify(&config, &lambdas, *block, *blocks, stdout)?;
        }
        Command::MaxDistance { no_ad } => {
            let km = config.install(|| max_distance(&config.params, config.b_max, !no_ad))??;
            writeln!(stdout, "{km}")?;
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
