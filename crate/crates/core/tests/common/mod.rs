//! Independent reference computations shared by the integration and
//! acceptance tests. Everything here is written from the expectation
//! formulas as explicit index loops; none of it calls the estimators.

#![allow(dead_code)]

use kcum::data::Dataset;
use kcum::kernels::GramMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// `|a - b| <= rel * max(|a|, |b|)`.
pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

pub fn uniform_sample(rng: &mut ChaCha8Rng, n: usize, dim: usize, low: f64, high: f64) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(low..high)).collect())
        .collect();
    Dataset::from_rows(&rows).unwrap()
}

/// Scalar pairs with `y = x² + noise`, so the two components are dependent.
pub fn dependent_pairs(rng: &mut ChaCha8Rng, n: usize) -> (Dataset, Dataset) {
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y: Vec<f64> = x.iter().map(|v| v * v + 0.3 * rng.random_range(-1.0..1.0)).collect();
    (Dataset::from_column(&x).unwrap(), Dataset::from_column(&y).unwrap())
}

/// Double-double accumulator, so the loop sums are reference-accurate even
/// when their terms cancel to a small value.
#[derive(Debug, Clone, Copy, Default)]
pub struct Acc {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn renorm(a: f64, b: f64) -> Acc {
    let s = a + b;
    Acc { hi: s, lo: b - (s - a) }
}

impl std::ops::AddAssign<f64> for Acc {
    fn add_assign(&mut self, x: f64) {
        let (s, e) = two_sum(self.hi, x);
        *self = renorm(s, e + self.lo);
    }
}

impl Acc {
    fn div(self, d: f64) -> Acc {
        let q = self.hi / d;
        let r = (-q).mul_add(d, self.hi);
        renorm(q, (r + self.lo) / d)
    }

    fn scale(self, c: f64) -> Acc {
        let p = self.hi * c;
        renorm(p, c.mul_add(self.hi, -p) + c * self.lo)
    }

    fn add(self, o: Acc) -> Acc {
        let (s, e) = two_sum(self.hi, o.hi);
        renorm(s, e + self.lo + o.lo)
    }
}

/// `Σ coef · sum / denom`, combined in double-double.
fn combine(parts: &[(f64, Acc, f64)]) -> f64 {
    let total = parts
        .iter()
        .fold(Acc::default(), |acc, &(c, s, d)| acc.add(s.div(d).scale(c)));
    total.hi + total.lo
}

/// The ten-term quartic loop sum for the kernel variance discrepancy.
pub fn d2_loop_sum(kx: &GramMatrix, ky: &GramMatrix, kxy: &GramMatrix) -> f64 {
    let n = kx.rows();
    let m = ky.rows();
    let (nf, mf) = (n as f64, m as f64);
    let x = |i: usize, j: usize| kx.get(i, j);
    let y = |i: usize, j: usize| ky.get(i, j);
    let xy = |i: usize, j: usize| kxy.get(i, j);

    let mut t1 = Acc::default();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    t1 += x(i, j) * x(k, l);
                }
            }
        }
    }
    let mut t2 = Acc::default();
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for l in 0..m {
                    t2 += y(i, j) * y(k, l);
                }
            }
        }
    }
    let mut t3 = Acc::default();
    for i in 0..n {
        for j in 0..n {
            t3 += x(i, j) * x(i, j);
        }
    }
    let mut t4 = Acc::default();
    for i in 0..m {
        for j in 0..m {
            t4 += y(i, j) * y(i, j);
        }
    }
    let mut t5 = Acc::default();
    for i in 0..n {
        for k in 0..n {
            for j in 0..m {
                t5 += xy(i, j) * xy(k, j);
            }
        }
    }
    let mut t6 = Acc::default();
    for i in 0..n {
        for j in 0..m {
            for k in 0..m {
                t6 += xy(i, j) * xy(i, k);
            }
        }
    }
    // x_i pairs with y_j and x_k with y_l.
    let mut t7 = Acc::default();
    for i in 0..n {
        for k in 0..n {
            for j in 0..m {
                for l in 0..m {
                    t7 += xy(i, j) * xy(k, l);
                }
            }
        }
    }
    let mut t8 = Acc::default();
    for i in 0..n {
        for j in 0..m {
            t8 += xy(i, j) * xy(i, j);
        }
    }
    let mut t9 = Acc::default();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                t9 += x(i, j) * x(i, k);
            }
        }
    }
    let mut t10 = Acc::default();
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                t10 += y(i, j) * y(i, k);
            }
        }
    }
    combine(&[
        (1.0, t1, nf.powi(4)),
        (1.0, t2, mf.powi(4)),
        (1.0, t3, nf.powi(2)),
        (1.0, t4, mf.powi(2)),
        (2.0, t5, nf * nf * mf),
        (2.0, t6, nf * mf * mf),
        (-2.0, t7, nf * nf * mf * mf),
        (-2.0, t8, nf * mf),
        (-2.0, t9, nf.powi(3)),
        (-2.0, t10, mf.powi(3)),
    ])
}

/// The eleven-term sextic loop sum in which the kernel `k` of the first
/// variable appears twice and `l` once.
pub fn csic_loop_sum(kk: &GramMatrix, ll: &GramMatrix) -> f64 {
    let n = kk.rows();
    let nf = n as f64;
    let k = |i: usize, j: usize| kk.get(i, j);
    let l = |i: usize, j: usize| ll.get(i, j);
    let mut s = [Acc::default(); 11];
    for i in 0..n {
        for j in 0..n {
            s[0] += k(i, j) * k(i, j) * l(i, j);
            for a in 0..n {
                s[1] += k(i, j) * k(i, a) * l(i, j);
                s[2] += k(i, j) * k(i, j) * l(i, a);
                for b in 0..n {
                    s[3] += k(i, j) * k(i, a) * l(i, b);
                    s[4] += k(i, j) * k(a, b) * l(i, j);
                    s[5] += k(i, j) * k(a, b) * l(i, b);
                    s[6] += k(i, j) * k(a, j) * l(i, b);
                    s[7] += k(i, j) * k(i, j) * l(a, b);
                    for c in 0..n {
                        s[8] += k(i, j) * k(a, b) * l(c, j);
                        s[9] += k(i, j) * k(a, j) * l(c, b);
                        for d in 0..n {
                            s[10] += k(i, j) * k(a, b) * l(c, d);
                        }
                    }
                }
            }
        }
    }
    let coef = [1.0, -4.0, -2.0, 4.0, 2.0, 2.0, 4.0, 1.0, -8.0, -4.0, 4.0];
    let power = [2, 3, 3, 4, 4, 4, 4, 4, 5, 5, 6];
    let parts: Vec<(f64, Acc, f64)> = (0..11).map(|t| (coef[t], s[t], nf.powi(power[t]))).collect();
    combine(&parts)
}

fn central(v: &[f64]) -> Vec<f64> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| x - mean).collect()
}

fn mean(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    v.sum::<f64>() / n as f64
}

/// Empirical third cumulant of a scalar sample.
pub fn kappa3(v: &[f64]) -> f64 {
    let c = central(v);
    mean(c.iter().map(|x| x.powi(3)), c.len())
}

/// Empirical fourth cumulant `m₄ - 3m₂²` of a scalar sample.
pub fn kappa4(v: &[f64]) -> f64 {
    let c = central(v);
    let m2 = mean(c.iter().map(|x| x * x), c.len());
    let m4 = mean(c.iter().map(|x| x.powi(4)), c.len());
    m4 - 3.0 * m2 * m2
}

/// Empirical joint cumulant `cum(X, X, Y, Y)` of paired scalars.
pub fn kappa22(x: &[f64], y: &[f64]) -> f64 {
    let (cx, cy) = (central(x), central(y));
    let n = x.len();
    let xxyy = mean(cx.iter().zip(&cy).map(|(a, b)| a * a * b * b), n);
    let xx = mean(cx.iter().map(|a| a * a), n);
    let yy = mean(cy.iter().map(|b| b * b), n);
    let xy = mean(cx.iter().zip(&cy).map(|(a, b)| a * b), n);
    xxyy - xx * yy - 2.0 * xy * xy
}

/// Empirical joint cumulant `cum(X, Y, Y)` of paired scalars.
pub fn kappa12(x: &[f64], y: &[f64]) -> f64 {
    let (cx, cy) = (central(x), central(y));
    mean(cx.iter().zip(&cy).map(|(a, b)| a * b * b), x.len())
}
