//! Wild-bootstrap calibration of the KQIC statistic.
//!
//! Replicate `b` is `w_b' M w_b` where `w_b` is a Rademacher vector drawn
//! from stream `b` of the generator keyed by the test seed, so the replicate
//! sequence is the same whether computed serially or in parallel.
//!
//! The rejection threshold is the ascending order statistic at
//! `ceil((1 - alpha) B)` (1-based). The p-value is
//! `(1 + #{b : rep_b >= stat}) / (B + 1)`; this p-value is a convention of
//! this crate layered on the threshold test.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::TruncatedDataset;
use crate::kernels::KernelSpec;
use crate::kqic::{build_m, BootstrapMatrix};
use crate::rng::stream_rng;

pub const DEFAULT_DRAWS: usize = 500;

#[derive(Debug, Error, PartialEq)]
pub enum TestError {
    #[error("test needs at least 2 subjects, got {0}")]
    TooFewSamples(usize),
    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("at least one bootstrap draw is required")]
    NoDraws,
}

/// `n` independent signs from stream `stream_id`. Each 64-bit word supplies
/// 64 signs, least significant bit first.
pub fn rademacher_weights(seed: u64, stream_id: u64, n: usize) -> Vec<f64> {
    let mut rng = stream_rng(seed, stream_id);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let word = rng.next_u64();
        let take = (n - out.len()).min(64);
        out.extend((0..take).map(|bit| if (word >> bit) & 1 == 1 { 1.0 } else { -1.0 }));
    }
    out
}

pub fn bootstrap_distribution(m: &BootstrapMatrix, draws: usize, seed: u64) -> Vec<f64> {
    let n = m.n();
    (0..draws as u64)
        .into_par_iter()
        .map(|b| m.quadratic_form(&rademacher_weights(seed, b, n)))
        .collect()
}

/// Result of calibrating one statistic against its replicate sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub threshold: f64,
    pub p_value: f64,
    pub reject: bool,
}

/// 0-based index of the `ceil((1 - alpha) B)`-th smallest replicate.
pub fn threshold_index(draws: usize, alpha: f64) -> usize {
    // The small offset keeps e.g. 0.95 * 500 = 474.99999999999994 from
    // ceiling to 476.
    let rank = ((1.0 - alpha) * draws as f64 - 1e-9).ceil() as usize;
    rank.clamp(1, draws) - 1
}

pub fn calibrate(statistic: f64, replicates: &[f64], alpha: f64) -> Calibration {
    assert!(!replicates.is_empty());
    let mut sorted = replicates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let threshold = sorted[threshold_index(sorted.len(), alpha)];
    let exceed = replicates.iter().filter(|&&r| r >= statistic).count();
    Calibration {
        threshold,
        p_value: (1 + exceed) as f64 / (replicates.len() + 1) as f64,
        reject: statistic > threshold,
    }
}

/// Complete record of one KQIC test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub replicates: Vec<f64>,
    pub p_value: f64,
    pub threshold: f64,
    pub reject: bool,
    pub alpha: f64,
    pub seed: u64,
    pub n: usize,
    pub kernel_x: KernelSpec,
    pub kernel_y: KernelSpec,
}

pub fn run_test(
    dataset: &TruncatedDataset,
    kx: &KernelSpec,
    ky: &KernelSpec,
    draws: usize,
    alpha: f64,
    seed: u64,
) -> Result<TestOutcome, TestError> {
    if dataset.len() < 2 {
        return Err(TestError::TooFewSamples(dataset.len()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(TestError::InvalidAlpha(alpha));
    }
    if draws == 0 {
        return Err(TestError::NoDraws);
    }
    let m = build_m(dataset, kx, ky);
    let statistic = m.total();
    let replicates = bootstrap_distribution(&m, draws, seed);
    let cal = calibrate(statistic, &replicates, alpha);
    Ok(TestOutcome {
        statistic,
        replicates,
        p_value: cal.p_value,
        threshold: cal.threshold,
        reject: cal.reject,
        alpha,
        seed,
        n: dataset.len(),
        kernel_x: *kx,
        kernel_y: *ky,
    })
}
