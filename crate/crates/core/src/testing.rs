//! Permutation tests, power estimation over seeded repetitions and bandwidth
//! grid search.
//!
//! Every repetition owns an independent ChaCha stream keyed by
//! `(seed, stream id)`, so repetitions run in parallel and results do not
//! depend on scheduling. Within a repetition the Gram matrix is built once
//! on the pooled data and each permutation is an index gather.
//!
//! Bandwidth selection here maximizes power on the alternative itself. That
//! is a benchmark protocol for comparing statistics, not a selection rule
//! for deployment.

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, PairedSource, SampleSource};
use crate::error::{Error, Result};
use crate::estimators::{dependence_statistic, two_sample_statistic, DependenceKind, TwoSampleKind};
use crate::kernels::{gram, squared_distances, GramMatrix, KernelSpec, Matrix};

/// Description of the p-value rule, embedded in reports.
pub const P_VALUE_CONVENTION: &str =
    "p = (1 + #{null >= observed}) / (B + 1); ties count as >=; reject iff p <= alpha";

/// `{a·10^b : a ∈ {1, 2.5, 5, 7.5}, b ∈ {-5..0}}`, ascending.
pub fn default_bandwidth_grid() -> Vec<f64> {
    let mut grid = Vec::with_capacity(24);
    for b in -5..=0 {
        for a in [1.0, 2.5, 5.0, 7.5] {
            grid.push(a * 10f64.powi(b));
        }
    }
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub n_permutations: usize,
    pub alpha: f64,
    pub seed: u64,
    pub bandwidth_grid: Vec<f64>,
}

impl Default for TestConfig {
    fn default() -> Self {
        TestConfig {
            n_permutations: 100,
            alpha: 0.05,
            seed: 0,
            bandwidth_grid: default_bandwidth_grid(),
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_permutations == 0 {
            return Err(Error::InvalidConfig("n_permutations must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.bandwidth_grid.is_empty() {
            return Err(Error::InvalidConfig("bandwidth grid is empty".into()));
        }
        if let Some(&bw) = self
            .bandwidth_grid
            .iter()
            .find(|b| !(**b > 0.0 && b.is_finite()))
        {
            return Err(Error::InvalidBandwidth(bw));
        }
        Ok(())
    }

    /// RBF kernels for every grid bandwidth, in grid order.
    pub fn rbf_kernels(&self) -> Result<Vec<KernelSpec>> {
        self.bandwidth_grid.iter().map(|&b| KernelSpec::rbf(b)).collect()
    }
}

/// Number of repetitions per power estimate and of independent power
/// estimates per grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PowerProtocol {
    pub repetitions: usize,
    pub replicates: usize,
}

impl Default for PowerProtocol {
    fn default() -> Self {
        PowerProtocol {
            repetitions: 100,
            replicates: 5,
        }
    }
}

impl PowerProtocol {
    pub fn validate(&self) -> Result<()> {
        for (what, value) in [("repetitions", self.repetitions), ("replicates", self.replicates)] {
            if !(1..MAX_REPETITIONS).contains(&value) {
                return Err(Error::OutOfRange {
                    what,
                    value,
                    min: 1,
                    max: MAX_REPETITIONS - 1,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub null_samples: Vec<f64>,
    pub p_value: f64,
    pub reject: bool,
}

impl TestOutcome {
    pub fn new(statistic: f64, null_samples: Vec<f64>, alpha: f64) -> Self {
        let p = p_value(statistic, &null_samples);
        TestOutcome {
            statistic,
            null_samples,
            p_value: p,
            reject: p <= alpha,
        }
    }
}

/// `(1 + #{null ≥ statistic}) / (B + 1)`.
pub fn p_value(statistic: f64, null_samples: &[f64]) -> f64 {
    let exceed = null_samples.iter().filter(|&&s| s >= statistic).count();
    (1 + exceed) as f64 / (null_samples.len() + 1) as f64
}

/// The generator for stream `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Gram matrices of `data` with itself for each kernel. Squared distances
/// are computed once and shared by all RBF kernels.
pub fn gram_family(kernels: &[KernelSpec], data: &Dataset) -> Result<Vec<GramMatrix>> {
    let mut sq: Option<Matrix> = None;
    kernels
        .iter()
        .map(|k| match k {
            KernelSpec::Rbf { bandwidth } => {
                if sq.is_none() {
                    sq = Some(squared_distances(data, data)?);
                }
                sq.as_ref().expect("computed above").rbf_from_sq_dists(*bandwidth)
            }
            KernelSpec::Linear => gram(k, data, data),
        })
        .collect()
}

/// Random permutations of `0..len`, drawn in sequence from `rng`.
pub fn draw_permutations(len: usize, count: usize, rng: &mut dyn RngCore) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..len).collect();
    (0..count)
        .map(|_| {
            idx.shuffle(rng);
            idx.clone()
        })
        .collect()
}

fn split_two_sample(
    kind: TwoSampleKind,
    pooled: &GramMatrix,
    xs: &[usize],
    ys: &[usize],
) -> Result<f64> {
    let kx = pooled.select(xs, xs);
    let ky = pooled.select(ys, ys);
    let kxy = pooled.select(xs, ys);
    Ok(two_sample_statistic(kind, &kx, &ky, &kxy)?.value)
}

/// Permutation outcomes for each kind, given the Gram matrix of the pooled
/// sample `(x₁..x_N, y₁..y_M)` and a shared list of pooled permutations.
pub fn two_sample_outcomes_pooled(
    pooled: &GramMatrix,
    n: usize,
    kinds: &[TwoSampleKind],
    permutations: &[Vec<usize>],
    alpha: f64,
) -> Result<Vec<TestOutcome>> {
    let total = pooled.rows();
    if n == 0 || n >= total || !pooled.is_square() {
        return Err(Error::InvalidConfig(format!(
            "pooled Gram {:?} cannot be split at {n}",
            pooled.shape()
        )));
    }
    if kinds.contains(&TwoSampleKind::D3) && 2 * n != total {
        return Err(Error::UnequalSampleSizes {
            left: n,
            right: total - n,
        });
    }
    let identity: Vec<usize> = (0..total).collect();
    kinds
        .iter()
        .map(|&kind| {
            let observed = split_two_sample(kind, pooled, &identity[..n], &identity[n..])?;
            let null = permutations
                .iter()
                .map(|p| split_two_sample(kind, pooled, &p[..n], &p[n..]))
                .collect::<Result<Vec<_>>>()?;
            Ok(TestOutcome::new(observed, null, alpha))
        })
        .collect()
}

/// Permutation outcomes for each kind; the second variable's Gram matrix is
/// permuted in rows and columns jointly, which breaks the pairing and keeps
/// both marginals.
pub fn independence_outcomes(
    k: &GramMatrix,
    l: &GramMatrix,
    kinds: &[DependenceKind],
    permutations: &[Vec<usize>],
    alpha: f64,
) -> Result<Vec<TestOutcome>> {
    let permuted: Vec<GramMatrix> = permutations.iter().map(|p| l.select(p, p)).collect();
    kinds
        .iter()
        .map(|&kind| {
            let observed = dependence_statistic(kind, k, l)?.value;
            let null = permuted
                .iter()
                .map(|lp| dependence_statistic(kind, k, lp).map(|s| s.value))
                .collect::<Result<Vec<_>>>()?;
            Ok(TestOutcome::new(observed, null, alpha))
        })
        .collect()
}

fn check_same_dim(x: &Dataset, y: &Dataset) -> Result<()> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptySample);
    }
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    Ok(())
}

/// Two-sample permutation test on stream 0 of `cfg.seed`.
pub fn permutation_test_two_sample(
    x: &Dataset,
    y: &Dataset,
    kind: TwoSampleKind,
    spec: &KernelSpec,
    cfg: &TestConfig,
) -> Result<TestOutcome> {
    cfg.validate()?;
    check_same_dim(x, y)?;
    let pooled_data = x.vstack(y)?;
    let pooled = gram(spec, &pooled_data, &pooled_data)?;
    let mut rng = stream_rng(cfg.seed, 0);
    let perms = draw_permutations(pooled.rows(), cfg.n_permutations, &mut rng);
    let mut out = two_sample_outcomes_pooled(&pooled, x.len(), &[kind], &perms, cfg.alpha)?;
    Ok(out.remove(0))
}

/// Independence permutation test on stream 0 of `cfg.seed`.
pub fn permutation_test_independence(
    x: &Dataset,
    y: &Dataset,
    kind: DependenceKind,
    spec_k: &KernelSpec,
    spec_l: &KernelSpec,
    cfg: &TestConfig,
) -> Result<TestOutcome> {
    cfg.validate()?;
    if x.len() != y.len() {
        return Err(Error::UnequalSampleSizes {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InvalidConfig(
            "an independence test needs at least 2 pairs".into(),
        ));
    }
    let k = gram(spec_k, x, x)?;
    let l = gram(spec_l, y, y)?;
    let mut rng = stream_rng(cfg.seed, 0);
    let perms = draw_permutations(x.len(), cfg.n_permutations, &mut rng);
    let mut out = independence_outcomes(&k, &l, &[kind], &perms, cfg.alpha)?;
    Ok(out.remove(0))
}

/// Fraction of `n_repetitions` seeded repetitions whose test rejects.
/// Repetition `r` draws its data and runs its test on stream `r` of
/// `cfg.seed`.
pub fn estimate_power<S, G, T>(generator: G, test: T, n_repetitions: usize, cfg: &TestConfig) -> Result<f64>
where
    G: Fn(&mut ChaCha8Rng) -> Result<S> + Sync,
    T: Fn(&S, &mut ChaCha8Rng) -> Result<TestOutcome> + Sync,
{
    if n_repetitions == 0 {
        return Err(Error::InvalidConfig("n_repetitions must be at least 1".into()));
    }
    let rejections = (0..n_repetitions as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(cfg.seed, r);
            let sample = generator(&mut rng)?;
            Ok(test(&sample, &mut rng)?.reject)
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(rejections.iter().filter(|&&r| r).count() as f64 / n_repetitions as f64)
}

/// Power estimates of one kernel at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthPower {
    /// `None` for kernels without a bandwidth.
    pub bandwidth: Option<f64>,
    pub replicates: Vec<f64>,
    pub mean: f64,
}

impl BandwidthPower {
    fn from_replicates(bandwidth: Option<f64>, replicates: Vec<f64>) -> Self {
        let mean = replicates.iter().sum::<f64>() / replicates.len() as f64;
        BandwidthPower {
            bandwidth,
            replicates,
            mean,
        }
    }
}

/// Index of the maximal mean power; ties go to the smaller bandwidth.
pub fn select_best(curve: &[BandwidthPower]) -> Option<usize> {
    let key = |p: &BandwidthPower| p.bandwidth.unwrap_or(f64::INFINITY);
    (0..curve.len()).reduce(|best, i| {
        let (a, b) = (&curve[best], &curve[i]);
        if b.mean > a.mean || (b.mean == a.mean && key(b) < key(a)) {
            i
        } else {
            best
        }
    })
}

/// Grid search outcome for one statistic at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub sample_size: usize,
    pub best_bandwidth: Option<f64>,
    pub best: BandwidthPower,
    pub grid: Vec<BandwidthPower>,
}

impl GridSearchResult {
    fn from_grid(sample_size: usize, grid: Vec<BandwidthPower>) -> Self {
        let best = grid[select_best(&grid).expect("grid is nonempty")].clone();
        GridSearchResult {
            sample_size,
            best_bandwidth: best.bandwidth,
            best,
            grid,
        }
    }
}

/// Power against sample size for one statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub statistic: String,
    pub sample_sizes: Vec<usize>,
    pub points: Vec<GridSearchResult>,
}

/// Largest repetition or replicate count a stream id can encode.
pub const MAX_REPETITIONS: usize = 1 << 20;
/// Largest sample size a stream id can encode.
pub const MAX_STREAM_SAMPLE_SIZE: usize = 1 << 24;

/// Stream id of repetition `rep` of replicate `replicate` at sample size
/// `n`: `n·2⁴⁰ + replicate·2²⁰ + rep`. Keyed by the size itself, so a size
/// yields the same draws whatever other sizes are studied alongside it.
pub fn stream_id(n: usize, replicate: usize, rep: usize) -> u64 {
    debug_assert!(n < MAX_STREAM_SAMPLE_SIZE && replicate < MAX_REPETITIONS && rep < MAX_REPETITIONS);
    ((n as u64) << 40) | ((replicate as u64) << 20) | rep as u64
}

// rejections[kind][kernel] for every repetition, then folded into powers.
fn aggregate(
    per_rep: Vec<Vec<Vec<bool>>>,
    n_kinds: usize,
    kernels: &[KernelSpec],
    protocol: &PowerProtocol,
    sample_size: usize,
) -> Vec<GridSearchResult> {
    (0..n_kinds)
        .map(|s| {
            let grid = kernels
                .iter()
                .enumerate()
                .map(|(b, spec)| {
                    let replicates = (0..protocol.replicates)
                        .map(|r| {
                            let reps = &per_rep[r * protocol.repetitions..(r + 1) * protocol.repetitions];
                            reps.iter().filter(|rep| rep[s][b]).count() as f64 / protocol.repetitions as f64
                        })
                        .collect();
                    BandwidthPower::from_replicates(spec.bandwidth(), replicates)
                })
                .collect();
            GridSearchResult::from_grid(sample_size, grid)
        })
        .collect()
}

fn check_study(kernels: &[KernelSpec], cfg: &TestConfig, protocol: &PowerProtocol, sizes: &[usize]) -> Result<()> {
    cfg.validate()?;
    protocol.validate()?;
    if kernels.is_empty() {
        return Err(Error::InvalidConfig("no kernels to evaluate".into()));
    }
    if let Some(&n) = sizes.iter().find(|&&n| !(1..MAX_STREAM_SAMPLE_SIZE).contains(&n)) {
        return Err(Error::OutOfRange {
            what: "sample size",
            value: n,
            min: 1,
            max: MAX_STREAM_SAMPLE_SIZE - 1,
        });
    }
    Ok(())
}

/// Two-sample power at every kernel for each `(N, M)` in `sizes` and every
/// kind. All kinds and kernels of one repetition share its data and its
/// permutations. Returns one curve per kind.
pub fn two_sample_power_study(
    x_source: &dyn SampleSource,
    y_source: &dyn SampleSource,
    sizes: &[(usize, usize)],
    kinds: &[TwoSampleKind],
    kernels: &[KernelSpec],
    cfg: &TestConfig,
    protocol: &PowerProtocol,
) -> Result<Vec<PowerCurve>> {
    let firsts: Vec<usize> = sizes.iter().map(|s| s.0).collect();
    check_study(kernels, cfg, protocol, &firsts)?;
    let mut points: Vec<Vec<GridSearchResult>> = vec![Vec::new(); kinds.len()];
    for &(n, m) in sizes {
        let total = protocol.replicates * protocol.repetitions;
        let per_rep = (0..total)
            .into_par_iter()
            .map(|t| {
                let (replicate, rep) = (t / protocol.repetitions, t % protocol.repetitions);
                let mut rng = stream_rng(cfg.seed, stream_id(n, replicate, rep));
                let x = x_source.draw(n, &mut rng)?;
                let y = y_source.draw(m, &mut rng)?;
                check_same_dim(&x, &y)?;
                let pooled = x.vstack(&y)?;
                let perms = draw_permutations(n + m, cfg.n_permutations, &mut rng);
                let mut by_kind = vec![Vec::with_capacity(kernels.len()); kinds.len()];
                for g in gram_family(kernels, &pooled)? {
                    let outcomes = two_sample_outcomes_pooled(&g, n, kinds, &perms, cfg.alpha)?;
                    for (s, o) in outcomes.iter().enumerate() {
                        by_kind[s].push(o.reject);
                    }
                }
                Ok(by_kind)
            })
            .collect::<Result<Vec<_>>>()?;
        for (s, point) in aggregate(per_rep, kinds.len(), kernels, protocol, n)
            .into_iter()
            .enumerate()
        {
            points[s].push(point);
        }
    }
    Ok(kinds
        .iter()
        .zip(points)
        .map(|(kind, points)| PowerCurve {
            statistic: kind.name().to_owned(),
            sample_sizes: sizes.iter().map(|s| s.0).collect(),
            points,
        })
        .collect())
}

/// Independence power at every kernel for each `N` in `sizes` and every
/// kind. The same kernel is used on both variables. All kinds and kernels
/// of one repetition share its data and its permutations.
pub fn independence_power_study(
    source: &dyn PairedSource,
    sizes: &[usize],
    kinds: &[DependenceKind],
    kernels: &[KernelSpec],
    cfg: &TestConfig,
    protocol: &PowerProtocol,
) -> Result<Vec<PowerCurve>> {
    check_study(kernels, cfg, protocol, sizes)?;
    let mut points: Vec<Vec<GridSearchResult>> = vec![Vec::new(); kinds.len()];
    for &n in sizes {
        if n < 2 {
            return Err(Error::InvalidConfig(
                "an independence test needs at least 2 pairs".into(),
            ));
        }
        let total = protocol.replicates * protocol.repetitions;
        let per_rep = (0..total)
            .into_par_iter()
            .map(|t| {
                let (replicate, rep) = (t / protocol.repetitions, t % protocol.repetitions);
                let mut rng = stream_rng(cfg.seed, stream_id(n, replicate, rep));
                let (x, y) = source.draw_pairs(n, &mut rng)?;
                let perms = draw_permutations(n, cfg.n_permutations, &mut rng);
                let ks = gram_family(kernels, &x)?;
                let ls = gram_family(kernels, &y)?;
                let mut by_kind = vec![Vec::with_capacity(kernels.len()); kinds.len()];
                for (k, l) in ks.iter().zip(&ls) {
                    let outcomes = independence_outcomes(k, l, kinds, &perms, cfg.alpha)?;
                    for (s, o) in outcomes.iter().enumerate() {
                        by_kind[s].push(o.reject);
                    }
                }
                Ok(by_kind)
            })
            .collect::<Result<Vec<_>>>()?;
        for (s, point) in aggregate(per_rep, kinds.len(), kernels, protocol, n)
            .into_iter()
            .enumerate()
        {
            points[s].push(point);
        }
    }
    Ok(kinds
        .iter()
        .zip(points)
        .map(|(kind, points)| PowerCurve {
            statistic: kind.name().to_owned(),
            sample_sizes: sizes.to_vec(),
            points,
        })
        .collect())
}

/// Best RBF bandwidth from `cfg.bandwidth_grid` for one two-sample statistic
/// at `N = M = n`, with the curve over the grid.
pub fn grid_search_power(
    x_source: &dyn SampleSource,
    y_source: &dyn SampleSource,
    n: usize,
    kind: TwoSampleKind,
    cfg: &TestConfig,
    protocol: &PowerProtocol,
) -> Result<(f64, GridSearchResult)> {
    let kernels = cfg.rbf_kernels()?;
    let mut curves = two_sample_power_study(x_source, y_source, &[(n, n)], &[kind], &kernels, cfg, protocol)?;
    let point = curves.remove(0).points.remove(0);
    let best = point.best_bandwidth.expect("RBF kernels carry a bandwidth");
    Ok((best, point))
}
