//! Quasi-independence testing for left-truncated, right-censored data.
//!
//! Each subject contributes an entry time `X`, an observed time
//! `T = min(Y, C)` and an event indicator. Subjects are only seen when
//! `X < T`. The kernel test measures departure from factorisation of the
//! observable density on the region `x <= y`; the baselines in
//! [`baselines`] cover the usual rank-based alternatives.

pub mod baselines;
pub mod bootstrap;
pub mod data;
pub mod harness;
pub mod kernels;
pub mod kqic;
pub mod rng;
pub mod selection;
pub mod simgen;

pub use bootstrap::{run_test, TestOutcome};
pub use data::{load_csv, SurvivalSample, TruncatedDataset};
pub use kernels::{KernelFamily, KernelSpec};
