//! Command-line driver for the `kcum` statistics: two-sample and
//! independence permutation tests, power studies, timing benchmarks and an
//! oracle self-check.
//!
//! Exit codes are a stable contract: see [`ExitCode`].

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kcum::{DependenceKind, TwoSampleKind};

pub mod commands;
pub mod oracle_check;
pub mod report;
pub mod sources;

pub use report::{BenchReport, BenchRow, RunReport, SingleTest, SCHEMA_VERSION};

/// Environment variable that overrides the worker thread count.
pub const THREADS_ENV: &str = "KCUM_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    OracleFailure = 1,
    Usage = 2,
    Data = 3,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    OracleFailure(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::Usage,
            CliError::Data(_) => ExitCode::Data,
            CliError::OracleFailure(_) => ExitCode::OracleFailure,
        }
    }

    /// Classifies a library error; `context` names the flag or file involved.
    pub fn from_kcum(context: &str, e: kcum::Error) -> Self {
        use kcum::Error as E;
        let msg = format!("{context}: {e}");
        match e {
            E::InvalidBandwidth(_)
            | E::OutOfRange { .. }
            | E::InvalidConfig(_)
            | E::NoPositiveRoot { .. }
            | E::BudgetExceeded { .. } => CliError::Usage(msg),
            _ => CliError::Data(msg),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "kcum", version, about = "Kernelized cumulant two-sample and independence tests")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Two-sample tests with MMD, d2 or d3.
    TwoSample(TwoSampleArgs),
    /// Independence tests with HSIC or CSIC.
    Independence(IndependenceArgs),
    /// Median wall time of statistic evaluation per sample size.
    Bench(BenchArgs),
    /// Compare every closed-form estimator against the partition oracle.
    OracleCheck(OracleCheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelFamily {
    Rbf,
    Linear,
}

/// `grid` or a comma-separated list of positive bandwidths.
#[derive(Debug, Clone, PartialEq)]
pub enum BandwidthArg {
    Grid,
    Values(Vec<f64>),
}

fn parse_bandwidth(s: &str) -> Result<BandwidthArg, String> {
    if s.eq_ignore_ascii_case("grid") {
        return Ok(BandwidthArg::Grid);
    }
    let values = s
        .split(',')
        .map(|v| {
            let b: f64 = v.trim().parse().map_err(|_| format!("{v:?} is not a number"))?;
            if b > 0.0 && b.is_finite() {
                Ok(b)
            } else {
                Err(format!("bandwidth {b} must be positive and finite"))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BandwidthArg::Values(values))
}

/// Zero-based column indices: `3`, `0,2,5` or ranges such as `0-15`.
pub fn parse_columns(s: &str) -> Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let num = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("{t:?} is not a column index"));
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b)?);
                if a > b {
                    return Err(format!("empty column range {part}"));
                }
                out.extend(a..=b);
            }
            None => out.push(num(part)?),
        }
    }
    if out.is_empty() {
        return Err("no columns given".into());
    }
    Ok(out)
}

/// A parsed column selection. A newtype, so clap treats it as one value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Columns(pub Vec<usize>);

impl std::ops::Deref for Columns {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.0
    }
}

fn parse_column_list(s: &str) -> Result<Columns, String> {
    parse_columns(s).map(Columns)
}

/// Flags shared by the two-sample and independence commands.
#[derive(Debug, Clone, Args)]
pub struct ProtocolArgs {
    #[arg(long, value_enum, default_value = "rbf")]
    pub kernel: KernelFamily,
    /// `grid` for the default 24-point grid, or comma-separated values.
    #[arg(long, default_value = "grid", value_parser = parse_bandwidth)]
    pub bandwidth: BandwidthArg,
    /// Sample sizes (comma-separated). With `--single` and file input the
    /// whole file is used when omitted.
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    pub perms: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Repetitions per power estimate.
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    /// Independent power estimates per grid point.
    #[arg(long, default_value_t = 5)]
    pub replicates: usize,
    /// Run one test per size instead of a power study.
    #[arg(long)]
    pub single: bool,
    /// JSON report path; a flat CSV table is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Record wall time per sample size. Makes reports non-reproducible.
    #[arg(long)]
    pub timing: bool,
    /// CSV files have a header row.
    #[arg(long)]
    pub header: bool,
    /// Zero-based column holding group labels in CSV files.
    #[arg(long)]
    pub label_col: Option<usize>,
    /// Keep raw CSV values instead of min-max scaling each column to [0, 1].
    #[arg(long)]
    pub no_standardize: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TwoSampleArgs {
    #[arg(long, value_delimiter = ',', default_value = "mmd,d2")]
    pub stat: Vec<TwoSampleKind>,
    /// First sample: a CSV path or a generator such as `gen:uniform`.
    #[arg(long)]
    pub x: String,
    /// Second sample: a CSV path or a generator such as `gen:mixture`.
    #[arg(long)]
    pub y: String,
    /// Second-sample sizes; defaults to `--n`.
    #[arg(long, value_delimiter = ',')]
    pub m: Vec<usize>,
    /// Feature columns read from CSV files.
    #[arg(long, value_parser = parse_column_list)]
    pub cols: Option<Columns>,
    /// Label of the first group when `--label-col` is set.
    #[arg(long)]
    pub x_group: Option<String>,
    /// Label of the second group when `--label-col` is set.
    #[arg(long)]
    pub y_group: Option<String>,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
}

#[derive(Debug, Clone, Args)]
pub struct IndependenceArgs {
    #[arg(long, value_delimiter = ',', default_value = "hsic,csic12")]
    pub stat: Vec<DependenceKind>,
    /// Paired sample: a CSV path or `gen:chi2:p=<p>`.
    #[arg(long)]
    pub pairs: String,
    /// Columns of the first variable in the CSV file.
    #[arg(long, value_parser = parse_column_list)]
    pub x_cols: Option<Columns>,
    /// Columns of the second variable in the CSV file.
    #[arg(long, value_parser = parse_column_list)]
    pub y_cols: Option<Columns>,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Any of mmd, d2, d3, hsic, csic, csic12, csic21.
    #[arg(long, value_delimiter = ',', default_value = "d2,csic")]
    pub stat: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "500,1000")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[arg(long, default_value_t = 1.0)]
    pub bandwidth: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct OracleCheckArgs {
    /// Highest cumulant degree checked, at most 4.
    #[arg(long, default_value_t = 3)]
    pub degree: usize,
    /// Sample size per trial, at most 8.
    #[arg(long, default_value_t = 6)]
    pub n: usize,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Human-readable output goes to `out`, diagnostics to
/// `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { ExitCode::Usage as i32 } else { ExitCode::Success as i32 };
        }
    };
    let echo: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let result = match &cli.command {
        Command::TwoSample(a) => commands::two_sample(a, &echo, out),
        Command::Independence(a) => commands::independence(a, &echo, out),
        Command::Bench(a) => commands::bench(a, &echo, out),
        Command::OracleCheck(a) => oracle_check::run(a, out),
    };
    match result {
        Ok(()) => ExitCode::Success as i32,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code() as i32
        }
    }
}

/// Applies the thread-count override from [`THREADS_ENV`], if set.
pub fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV}={v:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("{THREADS_ENV}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_lists_and_ranges() {
        assert_eq!(parse_columns("0-3,7").unwrap(), vec![0, 1, 2, 3, 7]);
        assert_eq!(parse_columns("16").unwrap(), vec![16]);
        assert!(parse_columns("3-1").is_err());
        assert!(parse_columns("a").is_err());
        assert!(parse_columns("").is_err());
    }

    #[test]
    fn bandwidth_flag() {
        assert_eq!(parse_bandwidth("grid").unwrap(), BandwidthArg::Grid);
        assert_eq!(parse_bandwidth("0.5,1").unwrap(), BandwidthArg::Values(vec![0.5, 1.0]));
        assert!(parse_bandwidth("0").is_err());
        assert!(parse_bandwidth("x").is_err());
    }

    #[test]
    fn unknown_statistic_is_a_usage_error() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            ["kcum", "two-sample", "--stat", "bogus", "--x", "gen:uniform", "--y", "gen:uniform", "--n", "5"],
            &mut out,
            &mut err,
        );
        assert_eq!(code, 2);
        assert!(String::from_utf8(err).unwrap().contains("--stat"));
    }
}
