//! Brute-force evaluation of kernelized cumulant inner products from their
//! partition expansion.
//!
//! For a multi-index `i` of degree `m`,
//!
//! ```text
//! ⟨κ^i(γ), κ^i(η)⟩ = Σ_{π,τ ∈ P(m)} c_π c_τ E_{γ^i_π ⊗ η^i_τ} k^{⊗i}((X₁..X_m), (Y₁..Y_m))
//! ```
//!
//! where position `n` of the diagonal measure carries component `comp(n)`
//! (the first `i₁` positions are component 1, the next `i₂` component 2,
//! ...), and under `γ_π` positions in the same block of `π` share one draw.
//! With empirical measures every expectation becomes an average over one
//! sample index per block, which is exactly the V-statistic. Nothing here is
//! clever: the sums are enumerated index tuple by index tuple, which is what
//! makes this module a useful reference for the closed forms.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernels::{gram, GramMatrix, KernelSpec};
use crate::partitions::{enumerate_partitions, MultiIndex, SetPartition};

/// Largest multi-index degree the oracle evaluates.
pub const MAX_ORACLE_DEGREE: usize = 4;
/// Default cap on the number of summands per `(π, τ)` term.
pub const DEFAULT_BUDGET: u128 = 100_000_000;

/// Maps each position `n ∈ {0..m}` of the diagonal measure to its component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoordinateMap {
    comp: Vec<usize>,
}

impl CoordinateMap {
    pub fn new(i: &MultiIndex) -> Self {
        let comp = i
            .entries()
            .iter()
            .enumerate()
            .flat_map(|(j, &count)| std::iter::repeat_n(j, count))
            .collect();
        CoordinateMap { comp }
    }

    pub fn degree(&self) -> usize {
        self.comp.len()
    }

    #[inline]
    pub fn component(&self, n: usize) -> usize {
        self.comp[n]
    }

    /// Number of positions mapped to component `j`.
    pub fn multiplicity(&self, j: usize) -> usize {
        self.comp.iter().filter(|&&c| c == j).count()
    }
}

/// A sample of `N` joint observations split into `d` components, each a
/// dataset with `N` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSample {
    components: Vec<Dataset>,
}

impl JointSample {
    pub fn new(components: Vec<Dataset>) -> Result<Self> {
        let n = components.first().ok_or(Error::EmptySample)?.len();
        if n == 0 {
            return Err(Error::EmptySample);
        }
        if let Some(bad) = components.iter().find(|c| c.len() != n) {
            return Err(Error::UnequalSampleSizes {
                left: n,
                right: bad.len(),
            });
        }
        Ok(JointSample { components })
    }

    pub fn single(data: Dataset) -> Result<Self> {
        JointSample::new(vec![data])
    }

    pub fn len(&self) -> usize {
        self.components[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, j: usize) -> &Dataset {
        &self.components[j]
    }
}

/// An inner product together with the number of `(π, τ)` terms summed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerProduct {
    pub value: f64,
    pub terms: usize,
}

/// Partition-expansion evaluator with a guard on the number of summands.
#[derive(Debug, Clone, Copy)]
pub struct Oracle {
    budget: u128,
}

impl Default for Oracle {
    fn default() -> Self {
        Oracle {
            budget: DEFAULT_BUDGET,
        }
    }
}

// Per-component cross Gram matrices between the two samples.
struct Prepared {
    map: CoordinateMap,
    grams: Vec<GramMatrix>,
    n: usize,
    m: usize,
}

impl Oracle {
    pub fn with_budget(budget: u128) -> Self {
        Oracle { budget }
    }

    fn prepare(
        &self,
        i: &MultiIndex,
        x: &JointSample,
        y: &JointSample,
        kernels: &[KernelSpec],
    ) -> Result<Prepared> {
        let d = i.components();
        for found in [x.num_components(), y.num_components(), kernels.len()] {
            if found != d {
                return Err(Error::ComponentMismatch { expected: d, found });
            }
        }
        let m = i.degree();
        if !(1..=MAX_ORACLE_DEGREE).contains(&m) {
            return Err(Error::OutOfRange {
                what: "multi-index degree",
                value: m,
                min: 1,
                max: MAX_ORACLE_DEGREE,
            });
        }
        let grams = (0..d)
            .map(|j| gram(&kernels[j], x.component(j), y.component(j)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Prepared {
            map: CoordinateMap::new(i),
            grams,
            n: x.len(),
            m: y.len(),
        })
    }

    fn check_budget(&self, p: &Prepared, pi: &SetPartition, tau: &SetPartition) -> Result<()> {
        let summands = (p.n as u128)
            .checked_pow(pi.num_blocks() as u32)
            .and_then(|a| (p.m as u128).checked_pow(tau.num_blocks() as u32).and_then(|b| a.checked_mul(b)))
            .unwrap_or(u128::MAX);
        if summands > self.budget {
            return Err(Error::BudgetExceeded {
                summands,
                budget: self.budget,
            });
        }
        Ok(())
    }

    fn term(&self, p: &Prepared, pi: &SetPartition, tau: &SetPartition) -> Result<DoubleDouble> {
        let degree = p.map.degree();
        if pi.ground_size() != degree || tau.ground_size() != degree {
            return Err(Error::InvalidConfig(format!(
                "partitions {pi} and {tau} must both cover {degree} positions"
            )));
        }
        self.check_budget(p, pi, tau)?;

        let factors: Vec<(&GramMatrix, usize, usize)> = (0..degree)
            .map(|n| (&p.grams[p.map.component(n)], pi.block_of(n), tau.block_of(n)))
            .collect();
        let mut a = vec![0usize; pi.num_blocks()];
        let mut b = vec![0usize; tau.num_blocks()];
        let mut total = DoubleDouble::default();
        loop {
            loop {
                let product = factors
                    .iter()
                    .fold(DoubleDouble::from(1.0), |acc, (g, pb, tb)| acc.scale(g.get(a[*pb], b[*tb])));
                total = total.add_dd(product);
                if !advance(&mut b, p.m) {
                    break;
                }
            }
            if !advance(&mut a, p.n) {
                break;
            }
        }
        let count = (p.n as f64).powi(pi.num_blocks() as i32) * (p.m as f64).powi(tau.num_blocks() as i32);
        Ok(total.div(count))
    }

    /// V-statistic of `E_{γ^i_π ⊗ η^i_τ} k^{⊗i}` for the empirical measures of
    /// `x` and `y`.
    pub fn expected_kernel_v(
        &self,
        i: &MultiIndex,
        pi: &SetPartition,
        tau: &SetPartition,
        x: &JointSample,
        y: &JointSample,
        kernels: &[KernelSpec],
    ) -> Result<f64> {
        let p = self.prepare(i, x, y, kernels)?;
        self.term(&p, pi, tau).map(DoubleDouble::value)
    }

    /// `Σ_{π,τ} c_π c_τ E_{γ^i_π ⊗ η^i_τ} k^{⊗i}`, summed in canonical
    /// partition order.
    pub fn cumulant_inner_v(
        &self,
        i: &MultiIndex,
        x: &JointSample,
        y: &JointSample,
        kernels: &[KernelSpec],
    ) -> Result<InnerProduct> {
        let p = self.prepare(i, x, y, kernels)?;
        let parts = enumerate_partitions(i.degree())?;
        let mut value = DoubleDouble::default();
        let mut terms = 0;
        for pi in &parts {
            for tau in &parts {
                let c = (pi.coefficient() * tau.coefficient()) as f64;
                value = value.add_dd(self.term(&p, pi, tau)?.scale(c));
                terms += 1;
            }
        }
        Ok(InnerProduct {
            value: value.value(),
            terms,
        })
    }

    /// `⟨κ(x), κ(x)⟩ + ⟨κ(y), κ(y)⟩ - 2⟨κ(x), κ(y)⟩`.
    pub fn cumulant_distance_v(
        &self,
        i: &MultiIndex,
        x: &JointSample,
        y: &JointSample,
        kernels: &[KernelSpec],
    ) -> Result<f64> {
        let xx = self.cumulant_inner_v(i, x, x, kernels)?.value;
        let yy = self.cumulant_inner_v(i, y, y, kernels)?.value;
        let xy = self.cumulant_inner_v(i, x, y, kernels)?.value;
        Ok(xx + yy - 2.0 * xy)
    }
}

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`, about 32 significant
/// digits. Products of kernel values and their sums are both carried at this
/// precision, so the reference stays accurate when the cumulant is small
/// against the individual summands.
#[derive(Debug, Clone, Copy, Default)]
struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl From<f64> for DoubleDouble {
    fn from(hi: f64) -> Self {
        DoubleDouble { hi, lo: 0.0 }
    }
}

impl DoubleDouble {
    fn add_dd(self, other: Self) -> Self {
        let (s, e) = two_sum(self.hi, other.hi);
        fast_two_sum(s, e + self.lo + other.lo)
    }

    fn scale(self, c: f64) -> Self {
        let p = self.hi * c;
        let e = c.mul_add(self.hi, -p);
        fast_two_sum(p, e + c * self.lo)
    }

    fn div(self, d: f64) -> Self {
        let q = self.hi / d;
        let r = (-q).mul_add(d, self.hi);
        fast_two_sum(q, (r + self.lo) / d)
    }

    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

/// `(s, e)` with `s + e = a + b` exactly.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Renormalizes; requires `|a| >= |b|` or `a = 0`.
fn fast_two_sum(a: f64, b: f64) -> DoubleDouble {
    let s = a + b;
    DoubleDouble {
        hi: s,
        lo: b - (s - a),
    }
}

/// Odometer step over `[0, base)^len`; returns false after the last tuple.
fn advance(digits: &mut [usize], base: usize) -> bool {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

pub fn expected_kernel_v(
    i: &MultiIndex,
    pi: &SetPartition,
    tau: &SetPartition,
    x: &JointSample,
    y: &JointSample,
    kernels: &[KernelSpec],
) -> Result<f64> {
    Oracle::default().expected_kernel_v(i, pi, tau, x, y, kernels)
}

pub fn cumulant_inner_v(
    i: &MultiIndex,
    x: &JointSample,
    y: &JointSample,
    kernels: &[KernelSpec],
) -> Result<f64> {
    Oracle::default().cumulant_inner_v(i, x, y, kernels).map(|p| p.value)
}

pub fn cumulant_distance_v(
    i: &MultiIndex,
    x: &JointSample,
    y: &JointSample,
    kernels: &[KernelSpec],
) -> Result<f64> {
    Oracle::default().cumulant_distance_v(i, x, y, kernels)
}
