//! `oracle-check`: every closed-form estimator against the partition oracle
//! on random small samples.

use std::io::Write;

use kcum::data::Dataset;
use kcum::estimators::{csic_v, d2_v, d3_v, hsic_v, mmd2_v, CsicOrientation, DependenceStat, TwoSampleStat};
use kcum::kernels::gram;
use kcum::oracle::{cumulant_distance_v, cumulant_inner_v, JointSample, MAX_ORACLE_DEGREE};
use kcum::testing::stream_rng;
use kcum::{KernelSpec, MultiIndex};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::{CliError, CliResult, OracleCheckArgs};

/// Relative agreement required of every pair.
pub const REL_TOL: f64 = 1e-10;
/// Largest sample size accepted by `--n`.
pub const MAX_N: usize = 8;
/// Sample size range of the degree-four checks. Their oracle sums grow as
/// `N⁸`, and a single point has no nonzero cumulant to compare.
pub const DEGREE_FOUR_N: (usize, usize) = (2, 4);

/// Worst relative discrepancy seen for one statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckSummary {
    pub statistic: &'static str,
    pub comparisons: usize,
    pub max_discrepancy: f64,
}

/// Fraction of the closed form's summand scale below which a value counts
/// as cancelled to rounding level. Only values that are exactly zero in
/// exact arithmetic (e.g. the third cumulant of two points) reach it at the
/// sizes checked; there the test allows `REL_TOL · SCALE_FRACTION · scale`,
/// about 45 ε · scale.
pub const SCALE_FRACTION: f64 = 1e-4;

/// `|a - b| / max(|a|, |b|, SCALE_FRACTION · scale)`, where `scale` bounds
/// the rounding error of the closed form `a`.
pub fn discrepancy(a: f64, b: f64, scale: f64) -> f64 {
    let denom = a.abs().max(b.abs()).max(SCALE_FRACTION * scale);
    if denom == 0.0 {
        0.0
    } else {
        (a - b).abs() / denom
    }
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, dim: usize, low: f64, high: f64) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(low..high)).collect())
        .collect();
    Dataset::from_rows(&rows).expect("rows have equal length")
}

fn dependent(rng: &mut ChaCha8Rng, n: usize) -> (Dataset, Dataset) {
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y: Vec<f64> = x.iter().map(|v| v * v + 0.3 * rng.random_range(-1.0..1.0)).collect();
    (
        Dataset::from_column(&x).expect("nonempty"),
        Dataset::from_column(&y).expect("nonempty"),
    )
}

fn central(v: &[f64]) -> Vec<f64> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| x - mean).collect()
}

fn moment(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    v.sum::<f64>() / n as f64
}

/// Classical fourth cumulant `m₄ - 3m₂²` of a scalar sample.
fn classical_k4(v: &[f64]) -> f64 {
    let c = central(v);
    let m2 = moment(c.iter().map(|x| x * x), c.len());
    let m4 = moment(c.iter().map(|x| x.powi(4)), c.len());
    m4 - 3.0 * m2 * m2
}

/// Classical joint cumulant `cum(X, X, Y, Y)`.
fn classical_k22(x: &[f64], y: &[f64]) -> f64 {
    let (cx, cy) = (central(x), central(y));
    let n = x.len();
    let xxyy = moment(cx.iter().zip(&cy).map(|(a, b)| a * a * b * b), n);
    let xx = moment(cx.iter().map(|a| a * a), n);
    let yy = moment(cy.iter().map(|b| b * b), n);
    let xy = moment(cx.iter().zip(&cy).map(|(a, b)| a * b), n);
    xxyy - xx * yy - 2.0 * xy * xy
}

fn mi(v: &[usize]) -> MultiIndex {
    MultiIndex::new(v.to_vec()).expect("valid multi-index")
}

/// `(statistic, closed form, closed-form scale, oracle)` for one trial and every statistic of
/// degree at most `degree`.
fn trial_pairs(degree: usize, n: usize, seed: u64, trial: usize) -> kcum::Result<Vec<(&'static str, f64, f64, f64)>> {
    let mut rng = stream_rng(seed, trial as u64);
    let dim = 1 + trial % 2;
    let x = uniform(&mut rng, n, dim, -1.0, 1.0);
    let y = uniform(&mut rng, n, dim, -0.5, 1.5);
    let k = KernelSpec::rbf(rng.random_range(0.4..2.0))?;
    let (kx, ky, kxy) = (gram(&k, &x, &x)?, gram(&k, &y, &y)?, gram(&k, &x, &y)?);
    let (sx, sy) = (JointSample::single(x)?, JointSample::single(y)?);

    let (px, py) = dependent(&mut rng, n);
    let kk = KernelSpec::rbf(rng.random_range(0.4..2.0))?;
    let kl = KernelSpec::rbf(rng.random_range(0.4..2.0))?;
    let (gk, gl) = (gram(&kk, &px, &px)?, gram(&kl, &py, &py)?);
    let joint = JointSample::new(vec![px, py])?;
    let dep = |i: &[usize]| cumulant_inner_v(&mi(i), &joint, &joint, &[kk, kl]);
    let two = |name, s: TwoSampleStat, oracle| (name, s.value, s.scale, oracle);
    let dep_pair = |name, s: DependenceStat, oracle| (name, s.value, s.scale, oracle);

    let mut out = vec![two("mmd", mmd2_v(&kx, &ky, &kxy)?, cumulant_distance_v(&mi(&[1]), &sx, &sy, &[k])?)];
    if degree >= 2 {
        out.push(two("d2", d2_v(&kx, &ky, &kxy)?, cumulant_distance_v(&mi(&[2]), &sx, &sy, &[k])?));
        out.push(dep_pair("hsic", hsic_v(&gk, &gl)?, dep(&[1, 1])?));
    }
    if degree >= 3 {
        out.push(two("d3", d3_v(&kx, &ky, &kxy)?, cumulant_distance_v(&mi(&[3]), &sx, &sy, &[k])?));
        out.push(dep_pair("csic12", csic_v(&gk, &gl, CsicOrientation::I12)?, dep(&[1, 2])?));
        out.push(dep_pair("csic21", csic_v(&gk, &gl, CsicOrientation::I21)?, dep(&[2, 1])?));
    }
    if degree >= 4 {
        // With the linear kernel the cumulant norms reduce to products of
        // classical scalar cumulants. The oracle sees rounded products
        // `xᵢxⱼ`, so its rounding scale is that of the raw moments.
        let m = n.clamp(DEGREE_FOUR_N.0, DEGREE_FOUR_N.1);
        let lin = KernelSpec::linear();
        let a = uniform(&mut rng, m, 1, -1.0, 1.0);
        let b = uniform(&mut rng, m, 1, 0.0, 2.0);
        let (ac, bc) = (a.column(0), b.column(0));
        let classical = classical_k4(&ac) * classical_k4(&bc);
        let raw = moment(ac.iter().map(|v| v.powi(4)), m) * moment(bc.iter().map(|v| v.powi(4)), m);
        let oracle = cumulant_inner_v(&mi(&[4]), &JointSample::single(a)?, &JointSample::single(b)?, &[lin])?;
        out.push(("linear-k4", classical, raw, oracle));

        let (qx, qy) = dependent(&mut rng, m);
        let (xc, yc) = (qx.column(0), qy.column(0));
        let classical = classical_k22(&xc, &yc).powi(2);
        let raw = moment(xc.iter().zip(&yc).map(|(u, v)| u * u * v * v), m).powi(2);
        let s = JointSample::new(vec![qx, qy])?;
        out.push(("linear-k22", classical, raw, cumulant_inner_v(&mi(&[2, 2]), &s, &s, &[lin, lin])?));
    }
    Ok(out)
}

/// Runs every check and returns per-statistic summaries, or the first
/// failing `(statistic, trial, discrepancy)`.
pub fn check(args: &OracleCheckArgs) -> CliResult<Vec<CheckSummary>> {
    if !(1..=MAX_ORACLE_DEGREE).contains(&args.degree) {
        return Err(CliError::Usage(format!(
            "--degree {} exceeds the degree cap: the oracle handles degrees 1 to {MAX_ORACLE_DEGREE}",
            args.degree
        )));
    }
    if !(1..=MAX_N).contains(&args.n) {
        return Err(CliError::Usage(format!("--n {} must lie in [1, {MAX_N}]", args.n)));
    }
    if args.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let mut summaries: Vec<CheckSummary> = Vec::new();
    for trial in 0..args.trials {
        let pairs = trial_pairs(args.degree, args.n, args.seed, trial).map_err(|e| CliError::from_kcum("oracle-check", e))?;
        for (statistic, closed, scale, oracle) in pairs {
            let d = discrepancy(closed, oracle, scale);
            if !(d <= REL_TOL) {
                return Err(CliError::OracleFailure(format!(
                    "oracle mismatch: statistic {statistic}, trial {trial}, discrepancy {d:e} \
                     (closed form {closed:e}, oracle {oracle:e})"
                )));
            }
            match summaries.iter_mut().find(|s| s.statistic == statistic) {
                Some(s) => {
                    s.comparisons += 1;
                    s.max_discrepancy = s.max_discrepancy.max(d);
                }
                None => summaries.push(CheckSummary {
                    statistic,
                    comparisons: 1,
                    max_discrepancy: d,
                }),
            }
        }
    }
    Ok(summaries)
}

/// Runs [`check`] and prints the discrepancy table.
pub fn run(args: &OracleCheckArgs, out: &mut dyn Write) -> CliResult<()> {
    let summaries = check(args)?;
    let io = |e: std::io::Error| CliError::Data(format!("stdout: {e}"));
    for s in &summaries {
        writeln!(
            out,
            "{:<11} comparisons={:<3} max_discrepancy={:.3e}",
            s.statistic, s.comparisons, s.max_discrepancy
        )
        .map_err(io)?;
    }
    let worst = summaries.iter().map(|s| s.max_discrepancy).fold(0.0, f64::max);
    writeln!(out, "max observed discrepancy {worst:.3e} (tolerance {REL_TOL:e})").map_err(io)?;
    Ok(())
}
