//! The two-sample, independence and bench commands.

use std::hint::black_box;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use kcum::data::{sample_chi2_dependence, sample_uniform, sample_uniform_mixture, SampleSource, Subsample};
use kcum::estimators::{dependence_statistic, two_sample_statistic};
use kcum::kernels::gram;
use kcum::testing::{
    default_bandwidth_grid, draw_permutations, gram_family, independence_outcomes, independence_power_study,
    stream_id, stream_rng, two_sample_outcomes_pooled, two_sample_power_study, PowerCurve, MAX_STREAM_SAMPLE_SIZE,
    P_VALUE_CONVENTION,
};
use kcum::{Dataset, DependenceKind, KernelSpec, MixtureSpec, PowerProtocol, TestConfig, TwoSampleKind};

use crate::report::{
    BenchReport, BenchRow, ReportConfig, RunReport, SingleTest, SizeTiming, SourceEcho, SCHEMA_VERSION,
    SELECTION_RULE,
};
use crate::sources::{self, FileOptions, Paired, Sample};
use crate::{
    BandwidthArg, BenchArgs, CliError, CliResult, IndependenceArgs, KernelFamily, ProtocolArgs, TwoSampleArgs,
};

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn dedup<T: PartialEq + Copy>(items: &[T]) -> Vec<T> {
    let mut out = Vec::new();
    for &i in items {
        if !out.contains(&i) {
            out.push(i);
        }
    }
    out
}

/// Test configuration, kernels and protocol from the shared flags.
struct Resolved {
    cfg: TestConfig,
    kernels: Vec<KernelSpec>,
    protocol: PowerProtocol,
}

fn resolve(p: &ProtocolArgs) -> CliResult<Resolved> {
    if p.perms == 0 {
        return Err(usage("--perms must be at least 1"));
    }
    if !(p.alpha > 0.0 && p.alpha < 1.0) {
        return Err(usage(format!("--alpha {} must lie in (0, 1)", p.alpha)));
    }
    let grid = match (&p.kernel, &p.bandwidth) {
        (KernelFamily::Linear, BandwidthArg::Values(_)) => {
            return Err(usage("--bandwidth does not apply to --kernel linear"));
        }
        (_, BandwidthArg::Grid) => default_bandwidth_grid(),
        (_, BandwidthArg::Values(v)) => v.clone(),
    };
    let cfg = TestConfig {
        n_permutations: p.perms,
        alpha: p.alpha,
        seed: p.seed,
        bandwidth_grid: grid,
    };
    cfg.validate().map_err(|e| CliError::from_kcum("--bandwidth", e))?;
    let kernels = match p.kernel {
        KernelFamily::Rbf => cfg.rbf_kernels().map_err(|e| CliError::from_kcum("--bandwidth", e))?,
        KernelFamily::Linear => vec![KernelSpec::linear()],
    };
    let protocol = PowerProtocol {
        repetitions: p.reps,
        replicates: p.replicates,
    };
    protocol.validate().map_err(|e| CliError::from_kcum("--reps/--replicates", e))?;
    Ok(Resolved { cfg, kernels, protocol })
}

fn file_options(p: &ProtocolArgs) -> FileOptions {
    FileOptions {
        header: p.header,
        label_col: p.label_col,
        standardize: !p.no_standardize,
    }
}

fn base_config(p: &ProtocolArgs, r: &Resolved, statistics: Vec<String>, sizes: Vec<usize>) -> ReportConfig {
    ReportConfig {
        mode: if p.single { "single" } else { "power" }.into(),
        statistics,
        kernel: match p.kernel {
            KernelFamily::Rbf => "rbf".into(),
            KernelFamily::Linear => "linear".into(),
        },
        bandwidth_grid: r.kernels.iter().filter_map(KernelSpec::bandwidth).collect(),
        sample_sizes: sizes,
        second_sample_sizes: Vec::new(),
        n_permutations: r.cfg.n_permutations,
        alpha: r.cfg.alpha,
        seed: r.cfg.seed,
        repetitions: r.protocol.repetitions,
        replicates: r.protocol.replicates,
        standardized: !p.no_standardize,
        p_value_convention: P_VALUE_CONVENTION.into(),
        selection_rule: SELECTION_RULE.into(),
    }
}

fn check_size(flag: &str, n: usize, min: usize) -> CliResult<()> {
    if n < min || n >= MAX_STREAM_SAMPLE_SIZE {
        return Err(usage(format!("{flag} {n} must lie in [{min}, {}]", MAX_STREAM_SAMPLE_SIZE - 1)));
    }
    Ok(())
}

/// Pairs `--n` with `--m`: `--m` may be empty, a single value or one value
/// per `--n` entry.
fn size_pairs(n: &[usize], m: &[usize]) -> CliResult<Vec<(usize, usize)>> {
    let pairs: Vec<(usize, usize)> = match m.len() {
        0 => n.iter().map(|&a| (a, a)).collect(),
        1 => n.iter().map(|&a| (a, m[0])).collect(),
        k if k == n.len() => n.iter().copied().zip(m.iter().copied()).collect(),
        _ => return Err(usage("--m must hold one value or as many values as --n")),
    };
    for &(a, b) in &pairs {
        check_size("--n", a, 1)?;
        check_size("--m", b, 1)?;
    }
    Ok(pairs)
}

fn emit(report: &RunReport, out_path: Option<&Path>, out: &mut dyn Write) -> CliResult<()> {
    let io = |e: std::io::Error| CliError::Data(format!("stdout: {e}"));
    match out_path {
        Some(path) => {
            for line in summary(report) {
                writeln!(out, "{line}").map_err(io)?;
            }
            let table = report.write(path)?;
            writeln!(out, "report: {}", path.display()).map_err(io)?;
            writeln!(out, "table: {}", table.display()).map_err(io)?;
        }
        None => out.write_all(report.to_json().as_bytes()).map_err(io)?,
    }
    Ok(())
}

fn summary(report: &RunReport) -> Vec<String> {
    let mut lines: Vec<String> = report.notes.iter().map(|n| format!("note: {n}")).collect();
    for curve in &report.power_curves {
        for p in &curve.points {
            let reps: Vec<String> = p.best.replicates.iter().map(|r| format!("{r:.2}")).collect();
            lines.push(format!(
                "{:<7} n={:<5} best_bandwidth={:<8} mean_power={:.3} replicates=[{}]",
                curve.statistic,
                p.sample_size,
                p.best_bandwidth.map_or("none".into(), |b| b.to_string()),
                p.best.mean,
                reps.join(", ")
            ));
        }
    }
    for t in &report.single_tests {
        lines.push(format!(
            "{:<7} n={:<5} m={:<5} bandwidth={:<8} value={:.6e} p={:.4} reject={}",
            t.statistic,
            t.n,
            t.m,
            t.bandwidth.map_or("none".into(), |b| b.to_string()),
            t.value,
            t.p_value,
            t.reject
        ));
    }
    lines
}

/// Appends each single-size study to the per-kind curves.
fn merge_curves(curves: &mut Vec<PowerCurve>, step: Vec<PowerCurve>) {
    if curves.is_empty() {
        *curves = step;
        return;
    }
    for (c, s) in curves.iter_mut().zip(step) {
        c.sample_sizes.extend(s.sample_sizes);
        c.points.extend(s.points);
    }
}

/// Runs `two-sample` and prints or writes its report.
pub fn two_sample(args: &TwoSampleArgs, argv: &[String], out: &mut dyn Write) -> CliResult<()> {
    let report = two_sample_report(args, argv)?;
    emit(&report, args.protocol.out.as_deref(), out)
}

pub fn two_sample_report(args: &TwoSampleArgs, argv: &[String]) -> CliResult<RunReport> {
    let p = &args.protocol;
    let kinds = dedup(&args.stat);
    if kinds.is_empty() {
        return Err(usage("--stat names no statistic"));
    }
    let r = resolve(p)?;
    let opts = file_options(p);
    let x = sources::sample("--x", &args.x, args.cols.as_deref(), args.x_group.as_deref(), &opts)?;
    let y = sources::sample("--y", &args.y, args.cols.as_deref(), args.y_group.as_deref(), &opts)?;
    let mut notes = Vec::new();
    if opts.standardize && (x.dataset().is_some() || y.dataset().is_some()) {
        notes.push("CSV columns were min-max scaled to [0, 1] over each whole file before group selection".into());
    }

    let pairs = if p.n.is_empty() {
        match (p.single, x.dataset(), y.dataset()) {
            (true, Some(a), Some(b)) => vec![(a.len(), b.len())],
            _ => return Err(usage("--n is required unless --single is run on two files")),
        }
    } else {
        size_pairs(&p.n, &args.m)?
    };
    let d3_unequal = kinds.contains(&TwoSampleKind::D3) && pairs.iter().any(|&(a, b)| a != b);
    if d3_unequal {
        notes.push(
            "d3 needs equal sample sizes; where they differ, d3 used min(n, m) rows of each group, \
             subsampling the larger group"
                .into(),
        );
        eprintln!("warning: d3 with unequal group sizes; the larger group is subsampled");
    }

    let names: Vec<String> = kinds.iter().map(|k| k.name().to_owned()).collect();
    let mut config = base_config(p, &r, names, pairs.iter().map(|s| s.0).collect());
    config.second_sample_sizes = pairs.iter().map(|s| s.1).collect();
    let mut report = RunReport {
        schema_version: SCHEMA_VERSION,
        command: "two-sample".into(),
        argv: argv.to_vec(),
        config,
        sources: vec![
            SourceEcho {
                role: "x".into(),
                description: x.describe(),
            },
            SourceEcho {
                role: "y".into(),
                description: y.describe(),
            },
        ],
        notes,
        power_curves: Vec::new(),
        single_tests: Vec::new(),
        timings: Vec::new(),
    };

    if p.single {
        report.single_tests = two_sample_single(&x, &y, &pairs, p.n.is_empty(), &kinds, &r)?;
        return Ok(report);
    }

    if x.dataset().is_some() || y.dataset().is_some() {
        report
            .notes
            .push("each repetition draws its rows from the files without replacement".into());
    }
    let shared: Vec<TwoSampleKind> = if d3_unequal {
        kinds.iter().copied().filter(|k| *k != TwoSampleKind::D3).collect()
    } else {
        kinds.clone()
    };
    let mut curves: Vec<PowerCurve> = Vec::new();
    let mut d3_curve: Vec<PowerCurve> = Vec::new();
    for &(n, m) in &pairs {
        let start = Instant::now();
        if !shared.is_empty() {
            let step = two_sample_power_study(x.source(), y.source(), &[(n, m)], &shared, &r.kernels, &r.cfg, &r.protocol)
                .map_err(|e| CliError::from_kcum("two-sample study", e))?;
            merge_curves(&mut curves, step);
        }
        if d3_unequal {
            let k = n.min(m);
            let step = two_sample_power_study(
                x.source(),
                y.source(),
                &[(k, k)],
                &[TwoSampleKind::D3],
                &r.kernels,
                &r.cfg,
                &r.protocol,
            )
            .map_err(|e| CliError::from_kcum("two-sample study", e))?;
            merge_curves(&mut d3_curve, step);
        }
        if p.timing {
            report.timings.push(SizeTiming {
                n,
                seconds: start.elapsed().as_secs_f64(),
            });
        }
    }
    let mut shared_iter = curves.into_iter();
    let mut d3_iter = d3_curve.into_iter();
    report.power_curves = kinds
        .iter()
        .map(|k| {
            if d3_unequal && *k == TwoSampleKind::D3 {
                d3_iter.next()
            } else {
                shared_iter.next()
            }
            .expect("one curve per requested kind")
        })
        .collect();
    Ok(report)
}

fn two_sample_single(
    x: &Sample,
    y: &Sample,
    pairs: &[(usize, usize)],
    whole_files: bool,
    kinds: &[TwoSampleKind],
    r: &Resolved,
) -> CliResult<Vec<SingleTest>> {
    let data_err = |e| CliError::from_kcum("two-sample test", e);
    let mut tests = Vec::new();
    for &(n, m) in pairs {
        check_size("sample size", n.max(m), 1)?;
        let mut rng = stream_rng(r.cfg.seed, stream_id(n, 0, 0));
        let (xs, ys) = if whole_files {
            let full = |s: &Sample| s.dataset().expect("whole-file mode has files").clone();
            (full(x), full(y))
        } else {
            (
                x.source().draw(n, &mut rng).map_err(|e| CliError::from_kcum("--x", e))?,
                y.source().draw(m, &mut rng).map_err(|e| CliError::from_kcum("--y", e))?,
            )
        };
        if xs.dim() != ys.dim() {
            return Err(CliError::Data(format!(
                "--x has {} columns but --y has {}",
                xs.dim(),
                ys.dim()
            )));
        }
        let equal = xs.len() == ys.len();
        let main: Vec<TwoSampleKind> = kinds
            .iter()
            .copied()
            .filter(|k| equal || *k != TwoSampleKind::D3)
            .collect();
        let mut per_kind: Vec<Vec<SingleTest>> = vec![Vec::new(); kinds.len()];
        let mut push = |kind: TwoSampleKind, bw: Option<f64>, o: &kcum::TestOutcome, a: usize, b: usize| {
            let idx = kinds.iter().position(|k| *k == kind).expect("requested kind");
            per_kind[idx].push(SingleTest {
                statistic: kind.name().into(),
                n: a,
                m: b,
                bandwidth: bw,
                value: o.statistic,
                p_value: o.p_value,
                reject: o.reject,
            });
        };
        if !main.is_empty() {
            let pooled = xs.vstack(&ys).map_err(data_err)?;
            let perms = draw_permutations(pooled.len(), r.cfg.n_permutations, &mut rng);
            for (spec, g) in r.kernels.iter().zip(gram_family(&r.kernels, &pooled).map_err(data_err)?) {
                let outcomes =
                    two_sample_outcomes_pooled(&g, xs.len(), &main, &perms, r.cfg.alpha).map_err(data_err)?;
                for (kind, o) in main.iter().zip(&outcomes) {
                    push(*kind, spec.bandwidth(), o, xs.len(), ys.len());
                }
            }
        }
        if !equal && kinds.contains(&TwoSampleKind::D3) {
            let k = xs.len().min(ys.len());
            let shrink = |d: &Dataset, rng: &mut rand_chacha::ChaCha8Rng| -> CliResult<Dataset> {
                if d.len() == k {
                    Ok(d.clone())
                } else {
                    Subsample(d.clone()).draw(k, rng).map_err(data_err)
                }
            };
            let (a, b) = (shrink(&xs, &mut rng)?, shrink(&ys, &mut rng)?);
            let pooled = a.vstack(&b).map_err(data_err)?;
            let perms = draw_permutations(pooled.len(), r.cfg.n_permutations, &mut rng);
            for (spec, g) in r.kernels.iter().zip(gram_family(&r.kernels, &pooled).map_err(data_err)?) {
                let outcomes = two_sample_outcomes_pooled(&g, k, &[TwoSampleKind::D3], &perms, r.cfg.alpha)
                    .map_err(data_err)?;
                push(TwoSampleKind::D3, spec.bandwidth(), &outcomes[0], k, k);
            }
        }
        tests.extend(per_kind.into_iter().flatten());
    }
    Ok(tests)
}

/// Runs `independence` and prints or writes its report.
pub fn independence(args: &IndependenceArgs, argv: &[String], out: &mut dyn Write) -> CliResult<()> {
    let report = independence_report(args, argv)?;
    emit(&report, args.protocol.out.as_deref(), out)
}

pub fn independence_report(args: &IndependenceArgs, argv: &[String]) -> CliResult<RunReport> {
    let p = &args.protocol;
    let kinds = dedup(&args.stat);
    if kinds.is_empty() {
        return Err(usage("--stat names no statistic"));
    }
    let r = resolve(p)?;
    let opts = file_options(p);
    let pairs = sources::paired(&args.pairs, args.x_cols.as_deref(), args.y_cols.as_deref(), &opts)?;
    let mut notes = vec!["the same kernel and bandwidth are applied to both variables".to_owned()];
    if kinds.iter().any(|k| *k != DependenceKind::Hsic) {
        notes.push(
            "csic12 measures the cross cumulant of degree one in the first variable and two in the second; \
             csic21 the reverse"
                .into(),
        );
    }
    if opts.standardize && pairs.datasets().is_some() {
        notes.push("CSV columns were min-max scaled to [0, 1]".into());
    }
    let sizes: Vec<usize> = if p.n.is_empty() {
        match (p.single, pairs.datasets()) {
            (true, Some((x, _))) => vec![x.len()],
            _ => return Err(usage("--n is required unless --single is run on a file")),
        }
    } else {
        p.n.clone()
    };
    for &n in &sizes {
        check_size("--n", n, 2)?;
    }

    let names: Vec<String> = kinds.iter().map(|k| k.name().to_owned()).collect();
    let mut report = RunReport {
        schema_version: SCHEMA_VERSION,
        command: "independence".into(),
        argv: argv.to_vec(),
        config: base_config(p, &r, names, sizes.clone()),
        sources: vec![SourceEcho {
            role: "pairs".into(),
            description: pairs.describe(),
        }],
        notes,
        power_curves: Vec::new(),
        single_tests: Vec::new(),
        timings: Vec::new(),
    };

    if p.single {
        report.single_tests = independence_single(&pairs, &sizes, p.n.is_empty(), &kinds, &r)?;
        return Ok(report);
    }
    if pairs.datasets().is_some() {
        report
            .notes
            .push("each repetition draws its rows from the file without replacement".into());
    }
    let mut curves = Vec::new();
    for &n in &sizes {
        let start = Instant::now();
        let step = independence_power_study(pairs.source(), &[n], &kinds, &r.kernels, &r.cfg, &r.protocol)
            .map_err(|e| CliError::from_kcum("independence study", e))?;
        merge_curves(&mut curves, step);
        if p.timing {
            report.timings.push(SizeTiming {
                n,
                seconds: start.elapsed().as_secs_f64(),
            });
        }
    }
    report.power_curves = curves;
    Ok(report)
}

fn independence_single(
    pairs: &Paired,
    sizes: &[usize],
    whole_file: bool,
    kinds: &[DependenceKind],
    r: &Resolved,
) -> CliResult<Vec<SingleTest>> {
    let data_err = |e| CliError::from_kcum("independence test", e);
    let mut tests = Vec::new();
    for &n in sizes {
        let mut rng = stream_rng(r.cfg.seed, stream_id(n, 0, 0));
        let (x, y) = if whole_file {
            let (a, b) = pairs.datasets().expect("whole-file mode has a file");
            (a.clone(), b.clone())
        } else {
            pairs.source().draw_pairs(n, &mut rng).map_err(|e| CliError::from_kcum("--pairs", e))?
        };
        let perms = draw_permutations(n, r.cfg.n_permutations, &mut rng);
        let ks = gram_family(&r.kernels, &x).map_err(data_err)?;
        let ls = gram_family(&r.kernels, &y).map_err(data_err)?;
        let mut per_kind: Vec<Vec<SingleTest>> = vec![Vec::new(); kinds.len()];
        for ((spec, k), l) in r.kernels.iter().zip(&ks).zip(&ls) {
            let outcomes = independence_outcomes(k, l, kinds, &perms, r.cfg.alpha).map_err(data_err)?;
            for (s, o) in outcomes.iter().enumerate() {
                per_kind[s].push(SingleTest {
                    statistic: kinds[s].name().into(),
                    n,
                    m: n,
                    bandwidth: spec.bandwidth(),
                    value: o.statistic,
                    p_value: o.p_value,
                    reject: o.reject,
                });
            }
        }
        tests.extend(per_kind.into_iter().flatten());
    }
    Ok(tests)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum BenchStat {
    TwoSample(TwoSampleKind),
    Dependence(DependenceKind),
}

impl BenchStat {
    fn parse(s: &str) -> CliResult<Self> {
        if let Ok(k) = s.parse::<TwoSampleKind>() {
            return Ok(BenchStat::TwoSample(k));
        }
        s.parse::<DependenceKind>()
            .map(BenchStat::Dependence)
            .map_err(|_| usage(format!("--stat: unknown statistic {s:?}")))
    }

    fn name(&self) -> &'static str {
        match self {
            BenchStat::TwoSample(k) => k.name(),
            BenchStat::Dependence(k) => k.name(),
        }
    }
}

/// Middle value; the mean of the two middle values for even lengths.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = v.len() / 2;
    if v.len() % 2 == 1 {
        v[h]
    } else {
        0.5 * (v[h - 1] + v[h])
    }
}

/// Times Gram construction plus evaluation, `reps` times per size.
/// Wall times of `reps` calls of `f`, after one untimed warm-up call that
/// settles the allocator and caches.
fn timed(reps: usize, mut f: impl FnMut() -> kcum::Result<()>) -> kcum::Result<Vec<f64>> {
    f()?;
    (0..reps)
        .map(|_| {
            let start = Instant::now();
            f()?;
            Ok(start.elapsed().as_secs_f64())
        })
        .collect()
}

pub fn bench_report(args: &BenchArgs, argv: &[String]) -> CliResult<BenchReport> {
    if args.reps == 0 {
        return Err(usage("--reps must be at least 1"));
    }
    if args.sizes.is_empty() {
        return Err(usage("--sizes names no size"));
    }
    for &n in &args.sizes {
        check_size("--sizes", n, 2)?;
    }
    let stats = dedup(&args.stat.iter().map(|s| BenchStat::parse(s)).collect::<CliResult<Vec<_>>>()?);
    if stats.is_empty() {
        return Err(usage("--stat names no statistic"));
    }
    let kernel = KernelSpec::rbf(args.bandwidth).map_err(|e| CliError::from_kcum("--bandwidth", e))?;
    let err = |e| CliError::from_kcum("bench", e);
    let mut rows = Vec::new();
    for stat in &stats {
        for &n in &args.sizes {
            let mut rng = stream_rng(args.seed, stream_id(n, 0, 0));
            let samples = match *stat {
                BenchStat::TwoSample(kind) => {
                    let x = sample_uniform(-1.0, 1.0, n, &mut rng);
                    let y = sample_uniform_mixture(&MixtureSpec::default(), n, &mut rng);
                    timed(args.reps, || {
                        let kx = gram(&kernel, &x, &x)?;
                        let ky = gram(&kernel, &y, &y)?;
                        let kxy = gram(&kernel, &x, &y)?;
                        black_box(two_sample_statistic(kind, &kx, &ky, &kxy)?);
                        Ok(())
                    })
                    .map_err(err)?
                }
                BenchStat::Dependence(kind) => {
                    let (x, y) = sample_chi2_dependence(0.5, n, &mut rng).map_err(err)?;
                    timed(args.reps, || {
                        let k = gram(&kernel, &x, &x)?;
                        let l = gram(&kernel, &y, &y)?;
                        black_box(dependence_statistic(kind, &k, &l)?);
                        Ok(())
                    })
                    .map_err(err)?
                }
            };
            rows.push(BenchRow {
                statistic: stat.name().into(),
                n,
                median_seconds: median(&samples),
                samples_seconds: samples,
            });
        }
    }
    Ok(BenchReport {
        schema_version: SCHEMA_VERSION,
        command: "bench".into(),
        argv: argv.to_vec(),
        bandwidth: args.bandwidth,
        seed: args.seed,
        reps: args.reps,
        rows,
    })
}

/// Runs `bench` and prints its table.
pub fn bench(args: &BenchArgs, argv: &[String], out: &mut dyn Write) -> CliResult<()> {
    let report = bench_report(args, argv)?;
    let io = |e: std::io::Error| CliError::Data(format!("stdout: {e}"));
    writeln!(out, "{:<8} {:>7} {:>14}", "stat", "n", "median_s").map_err(io)?;
    for r in &report.rows {
        writeln!(out, "{:<8} {:>7} {:>14.6e}", r.statistic, r.n, r.median_seconds).map_err(io)?;
    }
    if let Some(path) = &args.out {
        report.write(path)?;
        writeln!(out, "report: {}", path.display()).map_err(io)?;
    }
    Ok(())
}
