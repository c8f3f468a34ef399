//! Quadratic-time V-statistics for MMD², the kernel variance and skewness
//! discrepancies d⁽²⁾/d⁽³⁾, HSIC and the cross skewness criterion CSIC.
//!
//! All products with `H = (1/N) 1 1ᵀ` or `J = I - H` are realized as row or
//! column means; no general matrix product appears here. For a Gram matrix
//! `K`, `KH` has entries `rᵢ` (row means), `HK` has entries `cⱼ` (column
//! means) and `⟨K/N²⟩` is the grand mean `g`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{center, center_columns, double_center, hadamard_sum, GramMatrix};

/// Rounding slack allowed below zero, relative to the magnitude of the
/// summed terms, before a statistic is clamped.
pub const NONNEGATIVITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TwoSampleKind {
    #[serde(rename = "mmd")]
    Mmd2,
    D2,
    D3,
}

impl TwoSampleKind {
    pub const ALL: [TwoSampleKind; 3] = [TwoSampleKind::Mmd2, TwoSampleKind::D2, TwoSampleKind::D3];

    pub fn name(&self) -> &'static str {
        match self {
            TwoSampleKind::Mmd2 => "mmd",
            TwoSampleKind::D2 => "d2",
            TwoSampleKind::D3 => "d3",
        }
    }

    /// Cumulant degree the statistic compares.
    pub fn degree(&self) -> usize {
        match self {
            TwoSampleKind::Mmd2 => 1,
            TwoSampleKind::D2 => 2,
            TwoSampleKind::D3 => 3,
        }
    }
}

impl fmt::Display for TwoSampleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TwoSampleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mmd" | "mmd2" => Ok(TwoSampleKind::Mmd2),
            "d2" => Ok(TwoSampleKind::D2),
            "d3" => Ok(TwoSampleKind::D3),
            other => Err(Error::InvalidConfig(format!(
                "unknown two-sample statistic {other:?} (expected mmd, d2 or d3)"
            ))),
        }
    }
}

/// Which degree-(1,2) cross cumulant CSIC measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CsicOrientation {
    /// `κ^(1,2)`: degree one in the first variable, two in the second.
    #[default]
    I12,
    /// `κ^(2,1)`: degree two in the first variable, one in the second.
    I21,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DependenceKind {
    Hsic,
    Csic12,
    Csic21,
}

impl DependenceKind {
    pub const ALL: [DependenceKind; 3] =
        [DependenceKind::Hsic, DependenceKind::Csic12, DependenceKind::Csic21];

    pub fn name(&self) -> &'static str {
        match self {
            DependenceKind::Hsic => "hsic",
            DependenceKind::Csic12 => "csic12",
            DependenceKind::Csic21 => "csic21",
        }
    }

    /// The multi-index `(i₁, i₂)` of the cumulant whose norm is estimated.
    pub fn multi_index(&self) -> [usize; 2] {
        match self {
            DependenceKind::Hsic => [1, 1],
            DependenceKind::Csic12 => [1, 2],
            DependenceKind::Csic21 => [2, 1],
        }
    }
}

impl fmt::Display for DependenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DependenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hsic" => Ok(DependenceKind::Hsic),
            "csic" | "csic12" => Ok(DependenceKind::Csic12),
            "csic21" => Ok(DependenceKind::Csic21),
            other => Err(Error::InvalidConfig(format!(
                "unknown dependence statistic {other:?} (expected hsic, csic12 or csic21)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoSampleStat {
    pub kind: TwoSampleKind,
    pub value: f64,
    /// Magnitude of the summands behind `value`; rounding error is a small
    /// multiple of `ε · scale`.
    pub scale: f64,
}

impl TwoSampleStat {
    fn new(kind: TwoSampleKind, value: f64, scale: f64) -> Self {
        TwoSampleStat {
            kind,
            value: clamp_residue(value, scale),
            scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DependenceStat {
    pub kind: DependenceKind,
    pub value: f64,
    /// As for [`TwoSampleStat::scale`].
    pub scale: f64,
}

impl DependenceStat {
    fn new(kind: DependenceKind, value: f64, scale: f64) -> Self {
        DependenceStat {
            kind,
            value: clamp_residue(value, scale),
            scale,
        }
    }
}

fn shape_err(context: &'static str, left: &GramMatrix, right: &GramMatrix) -> Error {
    Error::ShapeMismatch {
        context,
        left: left.shape(),
        right: right.shape(),
    }
}

fn check_two_sample(kx: &GramMatrix, ky: &GramMatrix, kxy: &GramMatrix) -> Result<(usize, usize)> {
    if !kx.is_square() || kx.rows() == 0 {
        return Err(shape_err("Kx must be square and nonempty", kx, kx));
    }
    if !ky.is_square() || ky.rows() == 0 {
        return Err(shape_err("Ky must be square and nonempty", ky, ky));
    }
    if kxy.shape() != (kx.rows(), ky.rows()) {
        return Err(shape_err("Kxy must be N x M", kxy, &GramMatrix::zeros(kx.rows(), ky.rows())));
    }
    Ok((kx.rows(), ky.rows()))
}

fn check_paired(k: &GramMatrix, l: &GramMatrix) -> Result<usize> {
    if !k.is_square() || k.rows() == 0 {
        return Err(shape_err("K must be square and nonempty", k, k));
    }
    if l.shape() != k.shape() {
        return Err(shape_err("K and L must have equal shapes", k, l));
    }
    Ok(k.rows())
}

/// Rows of `JKJ`, computed as `J(K - mean K)J` one row at a time. Entries
/// near the grand mean are subtracted exactly, so the centered entries keep
/// their relative accuracy even when the raw entries are close to one
/// another. Only row-sized buffers are allocated.
struct CenteredRows<'a> {
    k: &'a GramMatrix,
    grand_mean: f64,
    col_means: Vec<f64>,
    row: Vec<f64>,
}

impl<'a> CenteredRows<'a> {
    fn new(k: &'a GramMatrix) -> Self {
        let grand_mean = k.mean();
        let mut col_means = vec![0.0; k.cols()];
        for i in 0..k.rows() {
            for (s, v) in col_means.iter_mut().zip(k.row(i)) {
                *s += v - grand_mean;
            }
        }
        let n = k.rows() as f64;
        col_means.iter_mut().for_each(|s| *s /= n);
        CenteredRows {
            k,
            grand_mean,
            col_means,
            row: vec![0.0; k.cols()],
        }
    }

    fn row(&mut self, i: usize) -> &[f64] {
        let g = self.grand_mean;
        for ((out, v), m) in self.row.iter_mut().zip(self.k.row(i)).zip(&self.col_means) {
            *out = (v - g) - m;
        }
        let mean = self.row.iter().sum::<f64>() / self.row.len() as f64;
        self.row.iter_mut().for_each(|v| *v -= mean);
        &self.row
    }
}

/// Asserts the value is nonnegative up to rounding, then clamps the residue.
fn clamp_residue(value: f64, scale: f64) -> f64 {
    debug_assert!(
        value >= -NONNEGATIVITY_SLACK * scale.max(1.0),
        "squared-norm statistic {value:e} is negative beyond rounding (scale {scale:e})"
    );
    value.max(0.0)
}

/// `mean(Kx) + mean(Ky) - 2 mean(Kxy)`.
pub fn mmd2_v(kx: &GramMatrix, ky: &GramMatrix, kxy: &GramMatrix) -> Result<TwoSampleStat> {
    check_two_sample(kx, ky, kxy)?;
    let (a, b, c) = (kx.mean(), ky.mean(), kxy.mean());
    Ok(TwoSampleStat::new(TwoSampleKind::Mmd2, a + b - 2.0 * c, a.abs() + b.abs() + 2.0 * c.abs()))
}

/// `(1/N²) Tr[(Kx J)²] + (1/M²) Tr[(Ky J)²] - (2/NM) Tr[Kxy J Kxyᵀ J]`.
///
/// Each trace is a Hadamard sum of centered matrices:
/// `Tr[(KJ)²] = ⟨(KJ)ᵀ ∘ KJ⟩` and `Tr[Kxy J Kxyᵀ J] = ⟨Kxy J ∘ J Kxy⟩`.
pub fn d2_v(kx: &GramMatrix, ky: &GramMatrix, kxy: &GramMatrix) -> Result<TwoSampleStat> {
    let (n, m) = check_two_sample(kx, ky, kxy)?;
    let (n, m) = (n as f64, m as f64);
    let self_term = |k: &GramMatrix| -> Result<f64> {
        let kj = center(k);
        hadamard_sum(&kj.transpose(), &kj)
    };
    let x = self_term(kx)? / (n * n);
    let y = self_term(ky)? / (m * m);
    let cross = hadamard_sum(&center(kxy), &center_columns(kxy))? / (n * m);
    Ok(TwoSampleStat::new(TwoSampleKind::D2, x + y - 2.0 * cross, x.abs() + y.abs() + 2.0 * cross.abs()))
}

/// `(1/N²) Σᵢⱼ (JKJ)ᵢⱼ³` with its absolute scale. For a Gram matrix of one
/// sample this is `‖κ³(γ̂)‖²`; for a cross Gram matrix it is
/// `⟨κ³(γ̂), κ³(η̂)⟩`. It equals the seven-term (self) and ten-term (cross)
/// Hadamard expansions, without their cancellation between terms.
fn centered_cube_sum(k: &GramMatrix) -> (f64, f64) {
    let mut rows = CenteredRows::new(k);
    let (mut sum, mut abs) = (0.0, 0.0);
    for i in 0..k.rows() {
        for v in rows.row(i) {
            let c = v * v * v;
            sum += c;
            abs += c.abs();
        }
    }
    let nn = (k.rows() * k.cols()) as f64;
    (sum / nn, abs / nn)
}

/// `‖κ³(γ̂)‖² + ‖κ³(η̂)‖² - 2⟨κ³(γ̂), κ³(η̂)⟩`; requires `N = M`.
pub fn d3_v(kx: &GramMatrix, ky: &GramMatrix, kxy: &GramMatrix) -> Result<TwoSampleStat> {
    let (n, m) = check_two_sample(kx, ky, kxy)?;
    if n != m {
        return Err(Error::UnequalSampleSizes { left: n, right: m });
    }
    let (sx, ax) = centered_cube_sum(kx);
    let (sy, ay) = centered_cube_sum(ky);
    let (cross, ac) = centered_cube_sum(kxy);
    Ok(TwoSampleStat::new(TwoSampleKind::D3, sx + sy - 2.0 * cross, ax + ay + 2.0 * ac))
}

/// `(1/N²) Tr(KJLJ) = (1/N²)⟨JKJ ∘ L⟩`.
pub fn hsic_v(k: &GramMatrix, l: &GramMatrix) -> Result<DependenceStat> {
    let n = check_paired(k, l)? as f64;
    let kc = double_center(k);
    let value = hadamard_sum(&kc, l)? / (n * n);
    let scale = hadamard_sum(&kc, &kc)?.sqrt() * hadamard_sum(l, l)?.sqrt() / (n * n);
    Ok(DependenceStat::new(DependenceKind::Hsic, value, scale))
}

/// `(1/N²) Σᵢⱼ Ãᵢⱼ² B̃ᵢⱼ` with `Ã = JAJ`, `B̃ = JBJ`, and its absolute
/// scale: the V-statistic of the squared norm of the cross cumulant that is
/// degree two in the variable behind `A` and degree one in the variable
/// behind `B`. It equals the eleven-term Hadamard expansion
///
/// `(1/N²)⟨A∘A∘B - 4 A∘AH∘B - 2 A∘A∘BH + 4 AH∘A∘BH + 2 A∘B gA
///        + 2 AH∘HA∘B + 4 A∘HA∘BH + A∘A gB - 8 A∘BH gA
///        - 4 A∘HA gB + 4 gA² B⟩`
///
/// term by term after centering, where every term but the first vanishes.
fn cross_skewness(a: &GramMatrix, b: &GramMatrix) -> (f64, f64) {
    let (mut ra, mut rb) = (CenteredRows::new(a), CenteredRows::new(b));
    let (mut sum, mut abs) = (0.0, 0.0);
    for i in 0..a.rows() {
        for (x, y) in ra.row(i).iter().zip(rb.row(i)) {
            let v = x * x * y;
            sum += v;
            abs += v.abs();
        }
    }
    let nn = (a.rows() * a.cols()) as f64;
    (sum / nn, abs / nn)
}

/// Cross skewness independence criterion for paired Gram matrices `K`
/// (first variable) and `L` (second variable).
pub fn csic_v(k: &GramMatrix, l: &GramMatrix, orientation: CsicOrientation) -> Result<DependenceStat> {
    check_paired(k, l)?;
    let ((value, scale), kind) = match orientation {
        CsicOrientation::I12 => (cross_skewness(l, k), DependenceKind::Csic12),
        CsicOrientation::I21 => (cross_skewness(k, l), DependenceKind::Csic21),
    };
    Ok(DependenceStat::new(kind, value, scale))
}

/// Dispatches to the two-sample estimator for `kind`.
pub fn two_sample_statistic(
    kind: TwoSampleKind,
    kx: &GramMatrix,
    ky: &GramMatrix,
    kxy: &GramMatrix,
) -> Result<TwoSampleStat> {
    match kind {
        TwoSampleKind::Mmd2 => mmd2_v(kx, ky, kxy),
        TwoSampleKind::D2 => d2_v(kx, ky, kxy),
        TwoSampleKind::D3 => d3_v(kx, ky, kxy),
    }
}

/// Dispatches to the dependence estimator for `kind`.
pub fn dependence_statistic(
    kind: DependenceKind,
    k: &GramMatrix,
    l: &GramMatrix,
) -> Result<DependenceStat> {
    match kind {
        DependenceKind::Hsic => hsic_v(k, l),
        DependenceKind::Csic12 => csic_v(k, l, CsicOrientation::I12),
        DependenceKind::Csic21 => csic_v(k, l, CsicOrientation::I21),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::kernels::{gram, KernelSpec, Matrix};

    fn scalar(v: &[f64]) -> Dataset {
        Dataset::from_column(v).unwrap()
    }

    fn grams(x: &Dataset, y: &Dataset, k: &KernelSpec) -> (Matrix, Matrix, Matrix) {
        (
            gram(k, x, x).unwrap(),
            gram(k, y, y).unwrap(),
            gram(k, x, y).unwrap(),
        )
    }

    // Verbatim expansions, kept as references for the centered forms.

    fn shift(k: &GramMatrix) -> GramMatrix {
        let g = k.mean();
        GramMatrix::from_vec(k.rows(), k.cols(), k.as_slice().iter().map(|v| v - g).collect()).unwrap()
    }

    /// V-statistic of `‖κ³(γ)‖²` for a symmetric Gram matrix, in the seven-term
    /// Hadamard form:
    ///
    /// `(1/N²)⟨K∘K∘K - 6 K∘KH∘K + 4 KH∘K∘KH + 3 K∘K g + 6 KH∘HK∘K
    ///        - 12 K∘HK g + 4 g² K⟩`.
    ///
    /// Returns `(value, Σ|terms|)`.
    fn skewness_self_norm(k: &GramMatrix) -> (f64, f64) {
        let n = k.rows();
        let r = k.row_means();
        let c = k.col_means();
        let g = k.mean();
        let (mut kkk, mut kkr, mut krr, mut kk, mut krc, mut kc, mut sk) =
            (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let ri = r[i];
            for (&kij, &cj) in k.row(i).iter().zip(&c) {
                let k2 = kij * kij;
                kkk += k2 * kij;
                kkr += k2 * ri;
                krr += kij * ri * ri;
                kk += k2;
                krc += kij * ri * cj;
                kc += kij * cj;
                sk += kij;
            }
        }
        let terms = [
            kkk,
            -6.0 * kkr,
            4.0 * krr,
            3.0 * g * kk,
            6.0 * krc,
            -12.0 * g * kc,
            4.0 * g * g * sk,
        ];
        let nn = (n * n) as f64;
        (
            terms.iter().sum::<f64>() / nn,
            terms.iter().map(|t| t.abs()).sum::<f64>() / nn,
        )
    }

    /// V-statistic of `⟨κ³(γ), κ³(η)⟩` from the `N × N` cross Gram matrix, in
    /// the ten-term Hadamard form:
    ///
    /// `(1/N²)⟨K∘K∘K - 3 K∘K∘HK - 3 K∘K∘KH + 6 K∘KH∘HK + 3 K∘K g
    ///        + 2 K∘HK∘HK + 2 K∘KH∘KH - 6 K∘KH g - 6 K∘HK g + 4 g² K⟩`.
    fn skewness_cross_inner(kxy: &GramMatrix) -> (f64, f64) {
        let n = kxy.rows();
        let r = kxy.row_means();
        let c = kxy.col_means();
        let g = kxy.mean();
        let (mut kkk, mut kkc, mut kkr, mut krc, mut kk, mut kcc, mut krr, mut kr, mut kc, mut sk) =
            (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let ri = r[i];
            for (&kij, &cj) in kxy.row(i).iter().zip(&c) {
                let k2 = kij * kij;
                kkk += k2 * kij;
                kkc += k2 * cj;
                kkr += k2 * ri;
                krc += kij * ri * cj;
                kk += k2;
                kcc += kij * cj * cj;
                krr += kij * ri * ri;
                kr += kij * ri;
                kc += kij * cj;
                sk += kij;
            }
        }
        let terms = [
            kkk,
            -3.0 * kkc,
            -3.0 * kkr,
            6.0 * krc,
            3.0 * g * kk,
            2.0 * kcc,
            2.0 * krr,
            -6.0 * g * kr,
            -6.0 * g * kc,
            4.0 * g * g * sk,
        ];
        let nn = (n * n) as f64;
        (
            terms.iter().sum::<f64>() / nn,
            terms.iter().map(|t| t.abs()).sum::<f64>() / nn,
        )
    }

    /// The eleven-term Hadamard expression
    ///
    /// `(1/N²)⟨A∘A∘B - 4 A∘AH∘B - 2 A∘A∘BH + 4 AH∘A∘BH + 2 A∘B gA
    ///        + 2 AH∘HA∘B + 4 A∘HA∘BH + A∘A gB - 8 A∘BH gA
    ///        - 4 A∘HA gB + 4 gA² B⟩`
    ///
    /// which equals the V-statistic of the squared norm of the cross cumulant
    /// that is degree two in the variable behind `A` and degree one in the
    /// variable behind `B`.
    fn cross_skewness_form(a: &GramMatrix, b: &GramMatrix) -> (f64, f64) {
        let n = a.rows();
        let ra = a.row_means();
        let ca = a.col_means();
        let rb = b.row_means();
        let ga = a.mean();
        let gb = b.mean();
        let mut acc = [0.0f64; 11];
        for i in 0..n {
            let (rai, rbi) = (ra[i], rb[i]);
            for ((&aij, &bij), &caj) in a.row(i).iter().zip(b.row(i)).zip(&ca) {
                let a2 = aij * aij;
                acc[0] += a2 * bij;
                acc[1] += aij * rai * bij;
                acc[2] += a2 * rbi;
                acc[3] += rai * aij * rbi;
                acc[4] += aij * bij;
                acc[5] += rai * caj * bij;
                acc[6] += aij * caj * rbi;
                acc[7] += a2;
                acc[8] += aij * rbi;
                acc[9] += aij * caj;
                acc[10] += bij;
            }
        }
        let terms = [
            acc[0],
            -4.0 * acc[1],
            -2.0 * acc[2],
            4.0 * acc[3],
            2.0 * ga * acc[4],
            2.0 * acc[5],
            4.0 * acc[6],
            gb * acc[7],
            -8.0 * ga * acc[8],
            -4.0 * gb * acc[9],
            4.0 * ga * ga * acc[10],
        ];
        let nn = (n * n) as f64;
        (
            terms.iter().sum::<f64>() / nn,
            terms.iter().map(|t| t.abs()).sum::<f64>() / nn,
        )
    }

    const XS: [f64; 5] = [0.3, -1.2, 0.8, 2.1, -0.4];
    const YS: [f64; 5] = [1.1, 0.2, -0.7, 0.5, 1.9];

    #[test]
    fn centered_forms_equal_the_verbatim_expansions() {
        let (x, y) = (scalar(&XS), scalar(&YS));
        let k = KernelSpec::rbf(0.9).unwrap();
        let (kx, ky, kxy) = grams(&x, &y, &k);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
        assert!(close(centered_cube_sum(&kx).0, skewness_self_norm(&shift(&kx)).0));
        assert!(close(centered_cube_sum(&kxy).0, skewness_cross_inner(&shift(&kxy)).0));
        for (a, b) in [(&kx, &ky), (&ky, &kx)] {
            let verbatim = cross_skewness_form(&shift(a), &shift(b)).0;
            assert!(close(cross_skewness(a, b).0, verbatim), "{} vs {verbatim}", cross_skewness(a, b).0);
        }
    }

    #[test]
    fn identical_samples_give_zero() {
        let x = scalar(&XS);
        let (kx, ky, kxy) = grams(&x, &x, &KernelSpec::rbf(1.0).unwrap());
        for kind in TwoSampleKind::ALL {
            let v = two_sample_statistic(kind, &kx, &ky, &kxy).unwrap().value;
            assert!(v.abs() < 1e-14, "{kind}: {v}");
        }
    }

    #[test]
    fn all_ones_grams_give_zero() {
        let one = Matrix::constant(4, 4, 1.0);
        for kind in TwoSampleKind::ALL {
            assert_eq!(two_sample_statistic(kind, &one, &one, &one).unwrap().value, 0.0);
        }
    }

    #[test]
    fn constant_second_variable_gives_zero_dependence() {
        let x = scalar(&XS);
        let k = gram(&KernelSpec::rbf(0.8).unwrap(), &x, &x).unwrap();
        let l = Matrix::constant(5, 5, 1.0);
        for kind in DependenceKind::ALL {
            let v = dependence_statistic(kind, &k, &l).unwrap().value;
            assert!(v.abs() < 1e-15, "{kind}: {v}");
        }
    }

    #[test]
    fn hsic_of_k_with_itself_is_frobenius_norm() {
        let x = scalar(&XS);
        let k = gram(&KernelSpec::rbf(1.3).unwrap(), &x, &x).unwrap();
        let jkj = double_center(&k);
        let frob = hadamard_sum(&jkj, &jkj).unwrap() / 25.0;
        let h = hsic_v(&k, &k).unwrap().value;
        assert!((h - frob).abs() <= 1e-14 * frob);
    }

    #[test]
    fn linear_hsic_is_squared_covariance() {
        let (x, y) = (scalar(&XS), scalar(&YS));
        let k = gram(&KernelSpec::Linear, &x, &x).unwrap();
        let l = gram(&KernelSpec::Linear, &y, &y).unwrap();
        let n = XS.len() as f64;
        let mx = XS.iter().sum::<f64>() / n;
        let my = YS.iter().sum::<f64>() / n;
        let cov = XS.iter().zip(&YS).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n;
        let h = hsic_v(&k, &l).unwrap().value;
        assert!((h - cov * cov).abs() <= 1e-10 * cov * cov);
    }

    #[test]
    fn d3_rejects_unequal_sizes() {
        let x = scalar(&XS);
        let y = scalar(&YS[..4]);
        let (kx, ky, kxy) = grams(&x, &y, &KernelSpec::rbf(1.0).unwrap());
        assert!(matches!(
            d3_v(&kx, &ky, &kxy),
            Err(Error::UnequalSampleSizes { left: 5, right: 4 })
        ));
        // d2 and MMD accept N != M.
        assert!(d2_v(&kx, &ky, &kxy).is_ok());
        assert!(mmd2_v(&kx, &ky, &kxy).is_ok());
    }

    #[test]
    fn shape_errors() {
        let a = Matrix::zeros(3, 3);
        let b = Matrix::zeros(2, 2);
        assert!(mmd2_v(&a, &b, &Matrix::zeros(2, 3)).is_err());
        assert!(d2_v(&Matrix::zeros(3, 2), &b, &Matrix::zeros(3, 2)).is_err());
        assert!(hsic_v(&a, &b).is_err());
        assert!(csic_v(&a, &b, CsicOrientation::I12).is_err());
    }

    #[test]
    fn csic_orientations_swap_roles() {
        let (x, y) = (scalar(&XS), scalar(&YS));
        let k = gram(&KernelSpec::rbf(1.0).unwrap(), &x, &x).unwrap();
        let l = gram(&KernelSpec::rbf(0.6).unwrap(), &y, &y).unwrap();
        let a = csic_v(&k, &l, CsicOrientation::I12).unwrap().value;
        let b = csic_v(&l, &k, CsicOrientation::I21).unwrap().value;
        assert_eq!(a, b);
    }

    /// Independent route: degree-3 cumulants of an empirical measure are its
    /// third central moments, so the V-statistics reduce to sums of cubes and
    /// products of double-centered Gram matrices.
    #[test]
    fn skewness_forms_match_double_centered_sums() {
        let (x, y) = (scalar(&XS), scalar(&YS));
        let spec = KernelSpec::rbf(0.9).unwrap();
        let (kx, ky, kxy) = grams(&x, &y, &spec);
        let n2 = 25.0;
        let cube = |m: &Matrix| m.as_slice().iter().map(|v| v * v * v).sum::<f64>() / n2;
        let expected = cube(&double_center(&kx)) + cube(&double_center(&ky))
            - 2.0 * cube(&double_center(&kxy));
        let got = d3_v(&kx, &ky, &kxy).unwrap().value;
        assert!((got - expected).abs() <= 1e-12 * expected.abs(), "{got} vs {expected}");

        let kt = double_center(&kx);
        let lt = double_center(&ky);
        let k_l2: f64 = kt
            .as_slice()
            .iter()
            .zip(lt.as_slice())
            .map(|(a, b)| a * b * b)
            .sum::<f64>()
            / n2;
        let csic = csic_v(&kx, &ky, CsicOrientation::I12).unwrap().value;
        assert!((csic - k_l2).abs() <= 1e-12 * k_l2);
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("mmd".parse::<TwoSampleKind>().unwrap(), TwoSampleKind::Mmd2);
        assert_eq!("D2".parse::<TwoSampleKind>().unwrap(), TwoSampleKind::D2);
        assert_eq!("csic".parse::<DependenceKind>().unwrap(), DependenceKind::Csic12);
        assert!("d4".parse::<TwoSampleKind>().is_err());
        assert!("mmd".parse::<DependenceKind>().is_err());
    }
}
