//! Command-line flags and their merge with config files.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use serde::Serialize;

use crate::config::read_config;
use crate::error::CliError;

/// Largest admissible collar length, `8/√5`.
const DELTA_MAX: f64 = 3.577_708_763_999_664;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Counterexample ratios and density at the reference point for each delta.
    DensityScan,
    /// The three counterexample sections and their rate envelopes.
    Counterexample,
    /// Splits random boundary data into holomorphic pieces and checks the sum.
    Decompose,
    /// Certificate constants of a weight.
    WeightsCert,
    /// Convergence of the dbar solver under two grid refinements.
    DbarCheck,
    /// A section peaked at a point, built from a weighted dbar solve.
    PeakSection,
    /// Decomposes a random section against the collar generators.
    Corona,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightKind {
    Zero,
    CollarPeak,
    ThickLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

/// Numerics on hyperbolic collars: density scans, weight certificates,
/// dbar solves and corona decompositions.
///
/// Options not given on the command line are taken from `--config`, then
/// from the command's defaults. Log verbosity is read from COLLAR_LOG.
#[derive(Debug, Parser)]
#[command(name = "collar", version)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Config file of `key = value` lines; `#` starts a comment.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated collar lengths [default: depends on command].
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub deltas: Option<Vec<f64>>,
    /// Power of the canonical bundle [default: 2; 16 for peak-section; 6 for corona].
    #[arg(long, allow_negative_numbers = true)]
    pub m: Option<i32>,
    /// Power carried by the corona generators [default: 2].
    #[arg(long, allow_negative_numbers = true)]
    pub m0: Option<i32>,
    /// Largest retained mode |k| [default: 8; 16 decompose; 2 dbar-check; 64 corona].
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Grid intervals across the collar [default: 512 dbar-check; 2048 peak-section; 8192 corona].
    #[arg(long)]
    pub n_y: Option<usize>,
    /// Samples around the collar [default: 64 peak-section; 128 corona].
    #[arg(long)]
    pub n_theta: Option<usize>,
    /// Distance of the marked point from the core geodesic [default: 0; reference point for peak-section].
    #[arg(long, allow_negative_numbers = true)]
    pub rho0: Option<f64>,
    /// Width of the band cut from each end in decompose [default: 1].
    #[arg(long, allow_negative_numbers = true)]
    pub band: Option<f64>,
    /// Seed for random test data [default: 1].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Extra pure-mode corona generators [default: 1,-1].
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub extra_modes: Option<Vec<i32>>,
    /// Smallest admissible sum of generator norms [default: 1e-10].
    #[arg(long, allow_negative_numbers = true)]
    pub floor: Option<f64>,
    /// Relative tolerance of the corona residual checks [default: 1e-6].
    #[arg(long, allow_negative_numbers = true)]
    pub tolerance: Option<f64>,
    /// Weight for weights-cert and dbar-check [default: collar-peak; zero for dbar-check].
    #[arg(long, value_enum)]
    pub weight: Option<WeightKind>,
    /// Output file; data go to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format [default: json for a .json --out, csv otherwise].
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

/// A validated run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub deltas: Vec<f64>,
    pub m: i32,
    pub m0: i32,
    pub k_max: usize,
    pub n_y: usize,
    pub n_theta: usize,
    pub rho0: Option<f64>,
    pub band: f64,
    pub seed: u64,
    pub extra_modes: Vec<i32>,
    pub floor: f64,
    pub tolerance: f64,
    pub weight: WeightKind,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl RunConfig {
    pub fn defaults(command: Command) -> RunConfig {
        use Command::*;
        RunConfig {
            command,
            deltas: match command {
                DensityScan => vec![0.1, 0.05, 0.02, 0.01],
                DbarCheck => vec![0.5],
                Corona => vec![0.05],
                _ => vec![0.1],
            },
            m: match command {
                PeakSection => 16,
                Corona => 6,
                _ => 2,
            },
            m0: 2,
            k_max: match command {
                Decompose => 16,
                DbarCheck => 2,
                Corona => 64,
                _ => 8,
            },
            n_y: match command {
                DbarCheck => 512,
                Corona => 8192,
                _ => 2048,
            },
            n_theta: match command {
                Corona => 128,
                _ => 64,
            },
            rho0: match command {
                PeakSection => None,
                _ => Some(0.0),
            },
            band: 1.0,
            seed: 1,
            extra_modes: vec![1, -1],
            floor: 1e-10,
            tolerance: 1e-6,
            weight: match command {
                DbarCheck => WeightKind::Zero,
                _ => WeightKind::CollarPeak,
            },
            out: None,
            format: Format::Csv,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T, CliError> {
    raw.trim()
        .parse()
        .map_err(|_| CliError::input(format!("invalid value `{raw}` for {key}")))
}

fn parse_list<T: FromStr>(key: &str, raw: &str) -> Result<Vec<T>, CliError> {
    raw.split(',').map(|s| parse_value(key, s)).collect()
}

fn parse_enum<T: ValueEnum>(key: &str, raw: &str) -> Result<T, CliError> {
    T::from_str(raw.trim(), true).map_err(|_| CliError::input(format!("invalid value `{raw}` for {key}")))
}

/// Parses `argv` (including the program name) into a validated config.
/// Help and version requests come back as errors with exit code 0.
pub fn parse_args<I, T>(argv: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| CliError {
        code: if e.use_stderr() { 2 } else { 0 },
        message: e.render().to_string(),
    })?;
    let file = match &cli.config {
        Some(p) => read_config(p)?,
        None => BTreeMap::new(),
    };
    merge(cli, &file)
}

fn merge(cli: Cli, file: &BTreeMap<String, String>) -> Result<RunConfig, CliError> {
    let mut c = RunConfig::defaults(cli.command);
    let get = |k: &str| file.get(k).map(String::as_str);
    macro_rules! pick {
        ($field:ident, $key:literal, $flag:expr, $parse:ident) => {
            if let Some(v) = $flag {
                c.$field = v;
            } else if let Some(raw) = get($key) {
                c.$field = $parse($key, raw)?;
            }
        };
    }
    pick!(deltas, "deltas", cli.deltas, parse_list);
    pick!(m, "m", cli.m, parse_value);
    pick!(m0, "m0", cli.m0, parse_value);
    pick!(k_max, "k-max", cli.k_max, parse_value);
    pick!(n_y, "n-y", cli.n_y, parse_value);
    pick!(n_theta, "n-theta", cli.n_theta, parse_value);
    pick!(band, "band", cli.band, parse_value);
    pick!(seed, "seed", cli.seed, parse_value);
    pick!(extra_modes, "extra-modes", cli.extra_modes, parse_list);
    pick!(floor, "floor", cli.floor, parse_value);
    pick!(tolerance, "tolerance", cli.tolerance, parse_value);
    pick!(weight, "weight", cli.weight, parse_enum);
    if let Some(v) = cli.rho0 {
        c.rho0 = Some(v);
    } else if let Some(raw) = get("rho0") {
        c.rho0 = Some(parse_value("rho0", raw)?);
    }
    c.out = cli.out.or_else(|| get("out").map(PathBuf::from));
    let format = match cli.format {
        Some(f) => Some(f),
        None => get("format").map(|raw| parse_enum("format", raw)).transpose()?,
    };
    c.format = format.unwrap_or(match &c.out {
        Some(p) if p.extension().is_some_and(|e| e == "json") => Format::Json,
        _ => Format::Csv,
    });
    validate(&c)?;
    Ok(c)
}

fn validate(c: &RunConfig) -> Result<(), CliError> {
    let bad = |msg: String| Err(CliError::input(msg));
    if c.deltas.is_empty() {
        return bad("--deltas needs at least one value".into());
    }
    for &d in &c.deltas {
        if !(d > 0.0 && d < DELTA_MAX) {
            return bad(format!("delta {d} outside (0, {DELTA_MAX:.6})"));
        }
    }
    if c.m < 1 || c.m0 < 1 {
        return bad(format!("m and m0 must be at least 1, got m = {}, m0 = {}", c.m, c.m0));
    }
    if c.n_y < 16 || c.n_theta < 16 {
        return bad(format!("grid sizes must be at least 16, got n-y = {}, n-theta = {}", c.n_y, c.n_theta));
    }
    if let Some(r) = c.rho0 {
        if !r.is_finite() {
            return bad(format!("rho0 must be finite, got {r}"));
        }
    }
    if !(c.band >= 0.0 && c.band.is_finite()) {
        return bad(format!("band must be nonnegative, got {}", c.band));
    }
    if !(c.floor > 0.0 && c.floor.is_finite()) {
        return bad(format!("floor must be positive, got {}", c.floor));
    }
    if !(c.tolerance > 0.0 && c.tolerance < 1.0) {
        return bad(format!("tolerance must lie in (0, 1), got {}", c.tolerance));
    }
    if c.extra_modes.contains(&0) {
        return bad("extra-modes must be nonzero".into());
    }
    Ok(())
}
