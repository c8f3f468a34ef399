//! Datasets, synthetic generators, min-max standardization and CSV ingestion.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, RngCore};
use rand_distr::{Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `N × D` matrix of finite reals, one sample point per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    column_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                context: "dataset",
                left: (rows, cols),
                right: (values.len(), 1),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Dataset {
            rows,
            cols,
            values,
            column_names: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Dataset::new(rows.len(), cols, values)
    }

    /// A one-dimensional sample.
    pub fn from_column(values: &[f64]) -> Result<Self> {
        Dataset::new(values.len(), 1, values.to_vec())
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: names.len(),
            });
        }
        self.column_names = Some(names);
        Ok(self)
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    /// Number of points `N`.
    #[inline]
    pub fn len(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    /// Feature dimension `D`.
    #[inline]
    pub fn dim(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.values[i * self.cols + j]).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn select_rows(&self, indices: &[usize]) -> Dataset {
        let mut values = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Dataset {
            rows: indices.len(),
            cols: self.cols,
            values,
            column_names: self.column_names.clone(),
        }
    }

    pub fn select_columns(&self, columns: &[usize]) -> Result<Dataset> {
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.cols) {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: bad + 1,
            });
        }
        let mut values = Vec::with_capacity(self.rows * columns.len());
        for i in 0..self.rows {
            let row = self.row(i);
            values.extend(columns.iter().map(|&c| row[c]));
        }
        Ok(Dataset {
            rows: self.rows,
            cols: columns.len(),
            values,
            column_names: self
                .column_names
                .as_ref()
                .map(|n| columns.iter().map(|&c| n[c].clone()).collect()),
        })
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &Dataset) -> Result<Dataset> {
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: other.cols,
            });
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Ok(Dataset {
            rows: self.rows + other.rows,
            cols: self.cols,
            values,
            column_names: self.column_names.clone(),
        })
    }
}

/// An equal mixture of `U[a, b]` and `U[-b, -a]` whose first three moments
/// match those of `U[-c, c]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl MixtureSpec {
    /// Builds the spec from the inner endpoint and reference half-width,
    /// solving for the outer endpoint.
    pub fn matching(a: f64, c: f64) -> Result<Self> {
        if a <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "mixture inner endpoint must be positive, got {a}"
            )));
        }
        let b = solve_mixture_endpoint(a, c)?;
        let spec = MixtureSpec { a, b, c };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let MixtureSpec { a, b, c } = *self;
        if !(a > 0.0 && a < b && c > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "mixture requires 0 < a < b and c > 0, got a={a}, b={b}, c={c}"
            )));
        }
        let residual = (b * b + b * a + a * a - c * c).abs();
        if residual > 1e-9 * c * c {
            return Err(Error::InvalidConfig(format!(
                "mixture endpoints violate b² + ab + a² = c² (residual {residual:e})"
            )));
        }
        Ok(())
    }

    /// Population variance `(b² + ab + a²) / 3`, which equals `c² / 3`.
    pub fn variance(&self) -> f64 {
        (self.b * self.b + self.a * self.b + self.a * self.a) / 3.0
    }
}

impl Default for MixtureSpec {
    fn default() -> Self {
        MixtureSpec::matching(0.35, 1.0).expect("default mixture is valid")
    }
}

/// Positive root of `b² + ab + a² = c²`.
pub fn solve_mixture_endpoint(a: f64, c: f64) -> Result<f64> {
    let disc = 4.0 * c * c - 3.0 * a * a;
    if !(a >= 0.0 && c > 0.0 && a < c && disc > 0.0) || !a.is_finite() || !c.is_finite() {
        return Err(Error::NoPositiveRoot { a, c });
    }
    Ok((-a + disc.sqrt()) / 2.0)
}

pub fn sample_uniform<R: Rng + ?Sized>(low: f64, high: f64, n: usize, rng: &mut R) -> Dataset {
    let values = (0..n)
        .map(|_| low + (high - low) * rng.random::<f64>())
        .collect();
    Dataset::new(n, 1, values).expect("finite uniform draws")
}

pub fn sample_normal<R: Rng + ?Sized>(mean: f64, sd: f64, n: usize, rng: &mut R) -> Dataset {
    let values = (0..n)
        .map(|_| mean + sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Dataset::new(n, 1, values).expect("finite normal draws")
}

/// Draws `n` points: a fair coin picks the sign, then a uniform draw on
/// `[a, b]` gives the magnitude.
pub fn sample_uniform_mixture<R: Rng + ?Sized>(
    spec: &MixtureSpec,
    n: usize,
    rng: &mut R,
) -> Dataset {
    let values = (0..n)
        .map(|_| {
            let positive: bool = rng.random();
            let magnitude = spec.a + (spec.b - spec.a) * rng.random::<f64>();
            if positive {
                magnitude
            } else {
                -magnitude
            }
        })
        .collect();
    Dataset::new(n, 1, values).expect("finite mixture draws")
}

/// Paired draws `(X, Y_p²)` with `X ~ U(0,1)`, and `Y_p` equal to `Φ⁻¹(X)`
/// with probability `p`, otherwise an independent standard normal.
pub fn sample_chi2_dependence<R: Rng + ?Sized>(
    p: f64,
    n: usize,
    rng: &mut R,
) -> Result<(Dataset, Dataset)> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidConfig(format!(
            "mixing weight p must lie in [0, 1], got {p}"
        )));
    }
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x: f64 = rng.sample(Open01);
        let pick_quantile = rng.random::<f64>() < p;
        // Always consume the normal draw so streams stay aligned across p.
        let z: f64 = rng.sample(StandardNormal);
        let y = if pick_quantile { normal_quantile(x) } else { z };
        xs.push(x);
        ys.push(y * y);
    }
    Ok((Dataset::new(n, 1, xs)?, Dataset::new(n, 1, ys)?))
}

/// Standard normal quantile `Φ⁻¹(p)` by Wichura's algorithm AS 241
/// (PPND16), accurate to about 1e-16 relative.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = (((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_813e4) * r
            + 6.726_577_092_700_87e4)
            * r
            + 4.592_195_393_154_987e4)
            * r
            + 1.373_169_376_550_946e4)
            * r
            + 1.971_590_950_306_551_4e3)
            * r
            + 1.331_416_678_917_843_8e2)
            * r
            + 3.387_132_872_796_366_5)
            * q;
        let den = ((((((5.226_495_278_852_545e3 * r + 2.872_908_573_572_194_3e4) * r
            + 3.930_789_580_009_271e4)
            * r
            + 2.121_379_430_158_659_7e4)
            * r
            + 5.394_196_021_424_751e3)
            * r
            + 6.871_870_074_920_579e2)
            * r
            + 4.231_333_070_160_091e1)
            * r
            + 1.0;
        return num / den;
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let value = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r
            + 2.417_807_251_774_506e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_545)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
            + 1.519_866_656_361_645_7e-2)
            * r
            + 1.481_039_764_274_800_8e-1)
            * r
            + 6.897_673_349_851e-1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_759)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 2.965_605_718_285_048_7e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 1.487_536_129_085_061_5e-2)
            * r
            + 1.369_298_809_227_358e-1)
            * r
            + 5.998_322_065_558_88e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -value
    } else {
        value
    }
}

/// Rescales every column to `[0, 1]` via `(x - min) / (max - min)`;
/// constant columns become all zeros.
pub fn standardize_minmax(data: &Dataset) -> Dataset {
    let mut out = data.clone();
    for j in 0..data.cols {
        let col = data.column(j);
        let (lo, hi) = col
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let range = hi - lo;
        for (i, v) in col.iter().enumerate() {
            out.values[i * data.cols + j] = if range > 0.0 { (v - lo) / range } else { 0.0 };
        }
    }
    out
}

/// Which columns of a CSV file to read.
#[derive(Debug, Clone, Default)]
pub struct CsvSchema {
    pub has_header: bool,
    /// Zero-based numeric columns; `None` selects every column except the
    /// label column.
    pub columns: Option<Vec<usize>>,
    /// Zero-based column holding group labels (kept as text).
    pub label_column: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct LoadedCsv {
    pub data: Dataset,
    pub labels: Option<Vec<String>>,
}

impl LoadedCsv {
    /// Rows whose label equals `label`.
    pub fn group(&self, label: &str) -> Option<Dataset> {
        let labels = self.labels.as_ref()?;
        let idx: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.as_str() == label)
            .map(|(i, _)| i)
            .collect();
        Some(self.data.select_rows(&idx))
    }
}

/// Reads a comma-separated numeric file.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<LoadedCsv> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(schema.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let header: Option<Vec<String>> = if schema.has_header {
        let h = reader.headers().map_err(|e| csv_error(e, 1))?;
        Some(h.iter().map(str::to_owned).collect())
    } else {
        None
    };

    let mut columns: Option<Vec<usize>> = schema.columns.clone();
    let mut values = Vec::new();
    let mut labels = schema.label_column.map(|_| Vec::new());
    let mut rows = 0usize;

    for record in reader.records() {
        let record = record.map_err(|e| csv_error(e, 0))?;
        let line = record.position().map_or(rows as u64 + 1, |p| p.line());
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        let cols = columns.get_or_insert_with(|| {
            (0..record.len())
                .filter(|&c| Some(c) != schema.label_column)
                .collect()
        });
        if let Some(w) = cols.iter().chain(&schema.label_column).find(|&&c| c >= record.len()) {
            return Err(Error::MissingColumn {
                row: line,
                column: *w,
                width: record.len(),
            });
        }
        for &c in cols.iter() {
            let cell = &record[c];
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(Error::NonNumeric {
                        row: line,
                        column: c,
                        value: cell.to_owned(),
                    })
                }
            }
        }
        if let (Some(l), Some(c)) = (labels.as_mut(), schema.label_column) {
            l.push(record[c].to_owned());
        }
        rows += 1;
    }

    let cols = columns.unwrap_or_default();
    let mut data = Dataset::new(rows, cols.len(), values)?;
    if let Some(h) = header {
        let names = cols
            .iter()
            .map(|&c| h.get(c).cloned().unwrap_or_else(|| format!("col{c}")))
            .collect();
        data = data.with_column_names(names)?;
    }
    Ok(LoadedCsv { data, labels })
}

fn csv_error(e: csv::Error, fallback_line: u64) -> Error {
    let row = e.position().map_or(fallback_line, |p| p.line());
    Error::MalformedRow {
        row,
        message: e.to_string(),
    }
}

/// A source of one-group samples of a requested size.
pub trait SampleSource: Send + Sync {
    fn draw(&self, n: usize, rng: &mut dyn RngCore) -> Result<Dataset>;
}

/// A source of paired samples `(X, Y)` of a requested size.
pub trait PairedSource: Send + Sync {
    fn draw_pairs(&self, n: usize, rng: &mut dyn RngCore) -> Result<(Dataset, Dataset)>;
}

/// Synthetic data generators, addressed as `gen:<name>[:key=value,...]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "lowercase")]
pub enum Generator {
    Uniform { low: f64, high: f64 },
    Normal { mean: f64, sd: f64 },
    Mixture(MixtureSpec),
    Chi2 { p: f64 },
}

impl Generator {
    pub fn is_paired(&self) -> bool {
        matches!(self, Generator::Chi2 { .. })
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::Uniform { low, high } => write!(f, "gen:uniform:low={low},high={high}"),
            Generator::Normal { mean, sd } => write!(f, "gen:normal:mean={mean},sd={sd}"),
            Generator::Mixture(m) => write!(f, "gen:mixture:a={},c={}", m.a, m.c),
            Generator::Chi2 { p } => write!(f, "gen:chi2:p={p}"),
        }
    }
}

impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidConfig(format!("generator {s:?}: {msg}"));
        let rest = s
            .strip_prefix("gen:")
            .ok_or_else(|| bad("expected a gen: prefix".into()))?;
        let (name, params) = rest.split_once(':').unwrap_or((rest, ""));
        let mut kv = Vec::new();
        for part in params.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| bad(format!("parameter {part:?} is not key=value")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| bad(format!("parameter {k} is not a number")))?;
            kv.push((k.trim().to_owned(), v));
        }
        let take = |key: &str, default: f64| {
            kv.iter()
                .find(|(k, _)| k == key)
                .map_or(default, |(_, v)| *v)
        };
        let allow = |keys: &[&str]| -> Result<()> {
            match kv.iter().find(|(k, _)| !keys.contains(&k.as_str())) {
                Some((k, _)) => Err(bad(format!("unknown parameter {k}"))),
                None => Ok(()),
            }
        };
        match name {
            "uniform" => {
                allow(&["low", "high"])?;
                let (low, high) = (take("low", -1.0), take("high", 1.0));
                if !(low < high) {
                    return Err(bad("need low < high".into()));
                }
                Ok(Generator::Uniform { low, high })
            }
            "normal" => {
                allow(&["mean", "sd"])?;
                let sd = take("sd", 1.0);
                if !(sd > 0.0) {
                    return Err(bad("need sd > 0".into()));
                }
                Ok(Generator::Normal {
                    mean: take("mean", 0.0),
                    sd,
                })
            }
            "mixture" => {
                allow(&["a", "c"])?;
                MixtureSpec::matching(take("a", 0.35), take("c", 1.0)).map(Generator::Mixture)
            }
            "chi2" => {
                allow(&["p"])?;
                let p = take("p", 0.5);
                if !(0.0..=1.0).contains(&p) {
                    return Err(bad("need 0 <= p <= 1".into()));
                }
                Ok(Generator::Chi2 { p })
            }
            other => Err(bad(format!("unknown generator {other:?}"))),
        }
    }
}

impl SampleSource for Generator {
    fn draw(&self, n: usize, rng: &mut dyn RngCore) -> Result<Dataset> {
        match self {
            Generator::Uniform { low, high } => Ok(sample_uniform(*low, *high, n, rng)),
            Generator::Normal { mean, sd } => Ok(sample_normal(*mean, *sd, n, rng)),
            Generator::Mixture(spec) => Ok(sample_uniform_mixture(spec, n, rng)),
            Generator::Chi2 { .. } => Err(Error::InvalidConfig(
                "gen:chi2 produces paired data; use it as a paired source".into(),
            )),
        }
    }
}

impl PairedSource for Generator {
    fn draw_pairs(&self, n: usize, rng: &mut dyn RngCore) -> Result<(Dataset, Dataset)> {
        match self {
            Generator::Chi2 { p } => sample_chi2_dependence(*p, n, rng),
            other => Err(Error::InvalidConfig(format!(
                "{other} is not a paired generator"
            ))),
        }
    }
}

/// Draws `n` rows uniformly without replacement from a fixed dataset.
#[derive(Debug, Clone)]
pub struct Subsample(pub Dataset);

impl SampleSource for Subsample {
    fn draw(&self, n: usize, rng: &mut dyn RngCore) -> Result<Dataset> {
        if n > self.0.len() {
            return Err(Error::InvalidConfig(format!(
                "requested {n} rows but the file holds {}",
                self.0.len()
            )));
        }
        let idx = index::sample(rng, self.0.len(), n).into_vec();
        Ok(self.0.select_rows(&idx))
    }
}

/// Draws `n` rows jointly (pairing preserved) without replacement.
#[derive(Debug, Clone)]
pub struct PairedSubsample {
    pub x: Dataset,
    pub y: Dataset,
}

impl PairedSubsample {
    pub fn new(x: Dataset, y: Dataset) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::UnequalSampleSizes {
                left: x.len(),
                right: y.len(),
            });
        }
        Ok(PairedSubsample { x, y })
    }
}

impl PairedSource for PairedSubsample {
    fn draw_pairs(&self, n: usize, rng: &mut dyn RngCore) -> Result<(Dataset, Dataset)> {
        if n > self.x.len() {
            return Err(Error::InvalidConfig(format!(
                "requested {n} rows but the file holds {}",
                self.x.len()
            )));
        }
        let idx = index::sample(rng, self.x.len(), n).into_vec();
        Ok((self.x.select_rows(&idx), self.y.select_rows(&idx)))
    }
}
