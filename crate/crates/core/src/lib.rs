//! Kernelized cumulants: quadratic-time V-statistic estimators for MMD²,
//! the kernel variance and skewness discrepancies, HSIC and CSIC, a
//! brute-force partition oracle that checks them, and a permutation-testing
//! harness.
//!
//! ```
//! use kcum::data::Dataset;
//! use kcum::estimators::d2_v;
//! use kcum::kernels::{gram, KernelSpec};
//!
//! let x = Dataset::from_column(&[0.1, 0.5, 0.9]).unwrap();
//! let y = Dataset::from_column(&[-0.4, 0.0, 0.3]).unwrap();
//! let k = KernelSpec::rbf(1.0).unwrap();
//! let d2 = d2_v(&gram(&k, &x, &x).unwrap(), &gram(&k, &y, &y).unwrap(), &gram(&k, &x, &y).unwrap())
//!     .unwrap();
//! assert!(d2.value >= 0.0);
//! ```

pub mod data;
pub mod error;
pub mod estimators;
pub mod kernels;
pub mod oracle;
pub mod partitions;
pub mod testing;

pub use data::{Dataset, Generator, MixtureSpec};
pub use error::{Error, Result};
pub use estimators::{DependenceKind, TwoSampleKind};
pub use kernels::{GramMatrix, KernelSpec, Matrix};
pub use partitions::{MultiIndex, SetPartition};
pub use testing::{PowerProtocol, TestConfig, TestOutcome};
