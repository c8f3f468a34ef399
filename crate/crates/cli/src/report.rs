//! Report types and atomic output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use kcum::testing::PowerCurve;
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

/// How the reported best bandwidth is chosen.
pub const SELECTION_RULE: &str =
    "best bandwidth maximizes mean power over the replicates; ties go to the smaller bandwidth";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub mode: String,
    pub statistics: Vec<String>,
    pub kernel: String,
    pub bandwidth_grid: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    /// Second-sample sizes of two-sample runs; empty otherwise.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub second_sample_sizes: Vec<usize>,
    pub n_permutations: usize,
    pub alpha: f64,
    pub seed: u64,
    pub repetitions: usize,
    pub replicates: usize,
    pub standardized: bool,
    pub p_value_convention: String,
    pub selection_rule: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceEcho {
    pub role: String,
    pub description: String,
}

/// One permutation test of `--single` mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleTest {
    pub statistic: String,
    pub n: usize,
    pub m: usize,
    pub bandwidth: Option<f64>,
    pub value: f64,
    pub p_value: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeTiming {
    pub n: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: String,
    pub argv: Vec<String>,
    pub config: ReportConfig,
    pub sources: Vec<SourceEcho>,
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub power_curves: Vec<PowerCurve>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub single_tests: Vec<SingleTest>,
    /// Present only with `--timing`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub timings: Vec<SizeTiming>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports contain only serializable data");
        s.push('\n');
        s
    }

    /// Long-format table: one row per replicate at the best bandwidth, or
    /// one row per test in single mode.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if self.single_tests.is_empty() {
            out.push_str("statistic,n,bandwidth,replicate,power,mean_power\n");
            for curve in &self.power_curves {
                for point in &curve.points {
                    for (r, power) in point.best.replicates.iter().enumerate() {
                        out.push_str(&format!(
                            "{},{},{},{},{},{}\n",
                            curve.statistic,
                            point.sample_size,
                            fmt_bandwidth(point.best_bandwidth),
                            r + 1,
                            power,
                            point.best.mean
                        ));
                    }
                }
            }
        } else {
            out.push_str("statistic,n,m,bandwidth,value,p_value,reject\n");
            for t in &self.single_tests {
                out.push_str(&format!(
                    "{},{},{},{},{:e},{},{}\n",
                    t.statistic,
                    t.n,
                    t.m,
                    fmt_bandwidth(t.bandwidth),
                    t.value,
                    t.p_value,
                    t.reject
                ));
            }
        }
        out
    }

    /// Writes the JSON report to `path` and the table next to it.
    pub fn write(&self, path: &Path) -> CliResult<PathBuf> {
        write_atomic(path, self.to_json().as_bytes())?;
        let table = table_path(path);
        write_atomic(&table, self.to_csv().as_bytes())?;
        Ok(table)
    }
}

fn fmt_bandwidth(b: Option<f64>) -> String {
    b.map_or_else(|| "none".to_owned(), |b| b.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub statistic: String,
    pub n: usize,
    pub median_seconds: f64,
    pub samples_seconds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub command: String,
    pub argv: Vec<String>,
    pub bandwidth: f64,
    pub seed: u64,
    pub reps: usize,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports contain only serializable data");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("statistic,n,median_seconds\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{:e}\n", r.statistic, r.n, r.median_seconds));
        }
        out
    }

    pub fn write(&self, path: &Path) -> CliResult<PathBuf> {
        write_atomic(path, self.to_json().as_bytes())?;
        let table = table_path(path);
        write_atomic(&table, self.to_csv().as_bytes())?;
        Ok(table)
    }

    /// Median time of `statistic` at `n`.
    pub fn median(&self, statistic: &str, n: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.statistic == statistic && r.n == n)
            .map(|r| r.median_seconds)
    }
}

/// The CSV table belonging to a JSON report path.
pub fn table_path(json: &Path) -> PathBuf {
    let table = json.with_extension("csv");
    if table == json {
        let mut s = json.as_os_str().to_owned();
        s.push(".table.csv");
        PathBuf::from(s)
    } else {
        table
    }
}

/// Writes to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let io_err = |e: std::io::Error| CliError::Data(format!("--out {}: {e}", path.display()));
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Usage(format!("--out {} names no file", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let mut f = fs::File::create(&tmp).map_err(io_err)?;
    f.write_all(bytes).map_err(io_err)?;
    f.sync_all().map_err(io_err)?;
    drop(f);
    fs::rename(&tmp, path).map_err(io_err)
}
