//! Active multiple kernel learning with domain adaptation.
//!
//! A source-trained classifier is adapted to a shifted target domain by
//! learning a convex combination of base kernels that balances SVM margin
//! against the maximum mean discrepancy between domains, while margin
//! sampling acquires a small number of target labels.
//!
//! * [`kernels`]: base kernels, bandwidth heuristic and kernel banks.
//! * [`svm`]: SMO solver for the precomputed-kernel SVM dual.
//! * [`mkl_da`]: discrepancy vector, weight update and alternating training.
//! * [`active`]: margin scoring, query selection, oracles and the loop.
//! * [`data`]: datasets, file format, sampling and synthetic shifts.
//! * [`eval`]: accuracy, kappa and learning-curve statistics.
//! * [`harness`]: configuration, experiment runs and CSV output.

pub mod active;
pub mod data;
pub mod error;
pub mod eval;
pub mod harness;
pub mod kernels;
pub mod mkl_da;
pub mod par;
pub mod rng;
pub mod svm;

pub use error::{Error, Result};
