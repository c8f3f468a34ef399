//! Kernel evaluation, Gram matrices and the centering/Hadamard primitives.
//!
//! Every estimator in this crate depends on the data only through Gram
//! matrices, so this module is the single place where feature vectors are
//! touched. Centering by `J = I - (1/n) 1 1ᵀ` is never materialized: right
//! multiplication by `J` is a row-mean subtraction and left multiplication a
//! column-mean subtraction, both `O(n²)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// A positive-definite kernel on feature vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum KernelSpec {
    /// `exp(-‖x - y‖² / (2σ²))`
    Rbf { bandwidth: f64 },
    /// `⟨x, y⟩`
    Linear,
}

impl KernelSpec {
    pub fn rbf(bandwidth: f64) -> Result<Self> {
        if bandwidth > 0.0 && bandwidth.is_finite() {
            Ok(KernelSpec::Rbf { bandwidth })
        } else {
            Err(Error::InvalidBandwidth(bandwidth))
        }
    }

    pub fn linear() -> Self {
        KernelSpec::Linear
    }

    pub fn bandwidth(&self) -> Option<f64> {
        match self {
            KernelSpec::Rbf { bandwidth } => Some(*bandwidth),
            KernelSpec::Linear => None,
        }
    }

    /// Evaluates the kernel with validation of dimensions and finiteness.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: y.len(),
            });
        }
        if let Some(index) = x.iter().chain(y).position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if let KernelSpec::Rbf { bandwidth } = self {
            if !(*bandwidth > 0.0 && bandwidth.is_finite()) {
                return Err(Error::InvalidBandwidth(*bandwidth));
            }
        }
        Ok(self.eval_unchecked(x, y))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            KernelSpec::Rbf { bandwidth } => rbf_from_sq_dist(sq_dist(x, y), *bandwidth),
            KernelSpec::Linear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
        }
    }
}

#[inline]
fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

// Shared by `eval_unchecked` and `Matrix::rbf_from_sq_dists` so that both
// routes produce bit-identical Gram entries.
#[inline]
fn rbf_from_sq_dist(sq: f64, bandwidth: f64) -> f64 {
    (-sq / (2.0 * bandwidth * bandwidth)).exp()
}

/// Free-function form of [`KernelSpec::eval`].
pub fn eval_kernel(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    spec.eval(x, y)
}

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Matrix of pairwise kernel evaluations, entry `(i, j) = k(xᵢ, yⱼ)`.
pub type GramMatrix = Matrix;

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                context: "matrix from_vec",
                left: (rows, cols),
                right: (data.len(), 1),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn constant(rows: usize, cols: usize, value: f64) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Average over all entries; `0` for an empty matrix.
    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            0.0
        } else {
            self.sum() / self.data.len() as f64
        }
    }

    pub fn row_means(&self) -> Vec<f64> {
        let n = self.cols as f64;
        (0..self.rows)
            .map(|i| self.row(i).iter().sum::<f64>() / n)
            .collect()
    }

    pub fn col_means(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (s, v) in sums.iter_mut().zip(self.row(i)) {
                *s += v;
            }
        }
        let n = self.rows as f64;
        sums.iter_mut().for_each(|s| *s /= n);
        sums
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Gathers the submatrix with the given row and column indices.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * cols.len());
        for &i in rows {
            let row = self.row(i);
            data.extend(cols.iter().map(|&j| row[j]));
        }
        Matrix {
            rows: rows.len(),
            cols: cols.len(),
            data,
        }
    }

    /// Elementwise `exp(-d / (2σ²))` of a squared-distance matrix.
    pub fn rbf_from_sq_dists(&self, bandwidth: f64) -> Result<Matrix> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidBandwidth(bandwidth));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .map(|&d| rbf_from_sq_dist(d, bandwidth))
                .collect(),
        })
    }

    /// Naive dense product, used as an independent reference in tests.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch {
                context: "matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(Matrix::from_fn(self.rows, other.cols, |i, j| {
            (0..self.cols).map(|k| self.get(i, k) * other.get(k, j)).sum()
        }))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }
}

fn check_sample(x: &Dataset) -> Result<()> {
    if x.is_empty() {
        Err(Error::EmptySample)
    } else {
        Ok(())
    }
}

/// Builds the Gram matrix `[k(xᵢ, yⱼ)]`.
///
/// Rows are filled in parallel; each entry is a single kernel evaluation, so
/// the result does not depend on the thread count.
pub fn gram(spec: &KernelSpec, x: &Dataset, y: &Dataset) -> Result<GramMatrix> {
    check_sample(x)?;
    check_sample(y)?;
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    if let KernelSpec::Rbf { bandwidth } = spec {
        KernelSpec::rbf(*bandwidth)?;
    }
    let cols = y.len();
    let mut data = vec![0.0; x.len() * cols];
    data.par_chunks_mut(cols).enumerate().for_each(|(i, out)| {
        let xi = x.row(i);
        for (j, o) in out.iter_mut().enumerate() {
            *o = spec.eval_unchecked(xi, y.row(j));
        }
    });
    Matrix::from_vec(x.len(), cols, data)
}

/// Pairwise squared Euclidean distances; `rbf_from_sq_dists` on the result
/// reproduces `gram` with an RBF kernel bit for bit.
pub fn squared_distances(x: &Dataset, y: &Dataset) -> Result<Matrix> {
    check_sample(x)?;
    check_sample(y)?;
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    let cols = y.len();
    let mut data = vec![0.0; x.len() * cols];
    data.par_chunks_mut(cols).enumerate().for_each(|(i, out)| {
        let xi = x.row(i);
        for (j, o) in out.iter_mut().enumerate() {
            *o = sq_dist(xi, y.row(j));
        }
    });
    Matrix::from_vec(x.len(), cols, data)
}

/// Right-multiplies by the centering matrix: `G·J`, i.e. subtracts each
/// row's mean from that row.
pub fn center(g: &GramMatrix) -> GramMatrix {
    let means = g.row_means();
    let mut out = g.clone();
    for (i, m) in means.iter().enumerate() {
        let start = i * out.cols;
        out.data[start..start + out.cols]
            .iter_mut()
            .for_each(|v| *v -= m);
    }
    out
}

/// Left-multiplies by the centering matrix: `J·G`, i.e. subtracts each
/// column's mean from that column.
pub fn center_columns(g: &GramMatrix) -> GramMatrix {
    let means = g.col_means();
    let mut out = g.clone();
    for i in 0..out.rows {
        let start = i * out.cols;
        out.data[start..start + out.cols]
            .iter_mut()
            .zip(&means)
            .for_each(|(v, m)| *v -= m);
    }
    out
}

/// `J·G·J`.
pub fn double_center(g: &GramMatrix) -> GramMatrix {
    center(&center_columns(g))
}

/// `Σᵢⱼ AᵢⱼBᵢⱼ`, which equals `Tr(AᵀB)` without forming the product.
pub fn hadamard_sum(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            context: "hadamard_sum",
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| x * y).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(rows: &[&[f64]]) -> Dataset {
        Dataset::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn rbf_identical_points_is_one() {
        for bw in [1e-5, 0.3, 1.0, 40.0] {
            let k = KernelSpec::rbf(bw).unwrap();
            assert_eq!(k.eval(&[0.4, -2.0], &[0.4, -2.0]).unwrap(), 1.0);
        }
    }

    #[test]
    fn rbf_unit_bandwidth_at_sqrt_two() {
        let k = KernelSpec::rbf(1.0).unwrap();
        let v = k.eval(&[0.0], &[2f64.sqrt()]).unwrap();
        assert!((v - (-1f64).exp()).abs() < 1e-15);
        assert!((v - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn linear_is_dot_product() {
        assert_eq!(KernelSpec::linear().eval(&[1.0, 2.0], &[3.0, -1.0]).unwrap(), 1.0);
    }

    #[test]
    fn eval_rejects_bad_input() {
        let k = KernelSpec::rbf(1.0).unwrap();
        assert!(matches!(
            k.eval(&[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            k.eval(&[f64::NAN], &[1.0]),
            Err(Error::NonFinite { .. })
        ));
        assert!(KernelSpec::rbf(0.0).is_err());
        assert!(KernelSpec::rbf(-1.0).is_err());
        assert!(KernelSpec::rbf(f64::INFINITY).is_err());
    }

    #[test]
    fn gram_rbf_self_is_symmetric_unit_diagonal() {
        let x = ds(&[&[0.0], &[1.5], &[-0.3]]);
        let g = gram(&KernelSpec::rbf(0.7).unwrap(), &x, &x).unwrap();
        assert_eq!(g.shape(), (3, 3));
        assert!(g.is_symmetric(0.0));
        for i in 0..3 {
            assert_eq!(g.get(i, i), 1.0);
        }
    }

    #[test]
    fn gram_linear_on_standard_basis_is_identity() {
        let e = ds(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(gram(&KernelSpec::Linear, &e, &e).unwrap(), Matrix::identity(2));
    }

    #[test]
    fn gram_off_diagonal_hand_value() {
        let x = ds(&[&[0.0], &[2f64.sqrt()]]);
        let g = gram(&KernelSpec::rbf(1.0).unwrap(), &x, &x).unwrap();
        let e = (-1f64).exp();
        assert!((g.get(0, 1) - e).abs() < 1e-15);
        assert!((g.get(1, 0) - e).abs() < 1e-15);
    }

    #[test]
    fn gram_errors() {
        let x = ds(&[&[0.0]]);
        let y = ds(&[&[0.0, 1.0]]);
        let k = KernelSpec::rbf(1.0).unwrap();
        assert!(matches!(gram(&k, &x, &y), Err(Error::DimensionMismatch { .. })));
        let empty = Dataset::new(0, 1, vec![]).unwrap();
        assert!(matches!(gram(&k, &empty, &x), Err(Error::EmptySample)));
    }

    #[test]
    fn sq_dist_route_matches_direct_gram() {
        let x = ds(&[&[0.1, 0.2], &[1.0, -1.0], &[3.0, 0.5]]);
        let y = ds(&[&[0.0, 0.0], &[2.0, 2.0]]);
        let direct = gram(&KernelSpec::rbf(0.9).unwrap(), &x, &y).unwrap();
        let via = squared_distances(&x, &y).unwrap().rbf_from_sq_dists(0.9).unwrap();
        assert_eq!(direct, via);
    }

    #[test]
    fn center_examples() {
        let ones = Matrix::constant(3, 4, 1.0);
        assert_eq!(center(&ones), Matrix::zeros(3, 4));

        let g = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 5.0]]).unwrap();
        let c = center(&g);
        assert_eq!(c, Matrix::from_rows(&[vec![-0.5, 0.5], vec![-1.0, 1.0]]).unwrap());
        assert_eq!(center(&c), c);
    }

    #[test]
    fn hadamard_sum_examples() {
        let i2 = Matrix::identity(2);
        assert_eq!(hadamard_sum(&i2, &i2).unwrap(), 2.0);
        let a = Matrix::from_fn(3, 3, |i, j| (i * 3 + j) as f64);
        assert_eq!(hadamard_sum(&a, &Matrix::zeros(3, 3)).unwrap(), 0.0);
        assert!(hadamard_sum(&a, &Matrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn hadamard_sum_matches_trace_of_product_4x4() {
        let a = Matrix::from_fn(4, 4, |i, j| ((i * 7 + j * 3) % 5) as f64 - 1.7);
        let b = Matrix::from_fn(4, 4, |i, j| (i as f64 - 0.5 * j as f64).sin());
        let tr = a.transpose().matmul(&b).unwrap().trace();
        let hs = hadamard_sum(&a, &b).unwrap();
        assert!((tr - hs).abs() <= 1e-12 * tr.abs().max(1.0));
    }
}
