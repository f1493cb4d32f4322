//! Exact partition numbers, Hardy–Ramanujan style estimators of `p(n)`, the
//! least-squares machinery used to fit their coefficients, and error analysis
//! of estimators against exact values.
//!
//! All non-integer arithmetic runs on [`Real`], a fixed 192-bit binary float.

pub mod analysis;
pub mod error;
pub mod estimators;
pub mod exact;
pub mod exec;
pub mod fitting;
pub mod real;

pub use error::{Error, Result};
pub use estimators::{CoefficientSet, Estimator, EstimatorKind, Provenance, Registry};
pub use exact::PartitionTable;
pub use exec::Execution;
pub use real::Real;
