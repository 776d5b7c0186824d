//! Conditional Kendall's tau over comparable pairs.
//!
//! Pair `(i, j)` is comparable when `max(X_i, X_j) <= min(T_i, T_j)` and the
//! order of the observed times is known: both are events, or the subject
//! with the smaller observed time is an event.
//!
//! ```text
//! tau_b = sum_{i<j} 1{comparable} sign((X_i - X_j)(T_i - T_j))
//! ```
//!
//! The normalised statistic `tau_b / #comparable` is referred to a normal
//! distribution with a delete-one jackknife variance.

use serde::{Deserialize, Serialize};

use super::{
    check_alpha, normal_two_sided, BaselineError, BaselineMethod, BaselineOutcome, CalibrationKind,
};
use crate::data::TruncatedDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MbStatistic {
    pub tau_b: i64,
    pub comparable: usize,
}

fn comparable(xi: f64, ti: f64, di: bool, xj: f64, tj: f64, dj: bool) -> bool {
    if xi.max(xj) > ti.min(tj) {
        return false;
    }
    (di && dj) || (ti < tj && di) || (tj < ti && dj)
}

fn sign(v: f64) -> i64 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Per-subject sums `(sum_j 1{B_ij} sign_ij, #{j : B_ij})`.
fn subject_sums(dataset: &TruncatedDataset) -> Vec<(i64, usize)> {
    let s = dataset.samples();
    let n = s.len();
    let mut out = vec![(0i64, 0usize); n];
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (&s[i], &s[j]);
            if comparable(a.entry, a.observed, a.event, b.entry, b.observed, b.event) {
                let sg = sign((a.entry - b.entry) * (a.observed - b.observed));
                out[i].0 += sg;
                out[i].1 += 1;
                out[j].0 += sg;
                out[j].1 += 1;
            }
        }
    }
    out
}

pub fn mb_statistic(dataset: &TruncatedDataset) -> MbStatistic {
    let sums = subject_sums(dataset);
    // every pair is counted from both ends
    MbStatistic {
        tau_b: sums.iter().map(|s| s.0).sum::<i64>() / 2,
        comparable: sums.iter().map(|s| s.1).sum::<usize>() / 2,
    }
}

/// Jackknife variance of `tau_b / #comparable`.
pub fn jackknife_variance(dataset: &TruncatedDataset) -> f64 {
    let sums = subject_sums(dataset);
    let n = sums.len();
    let tau: i64 = sums.iter().map(|s| s.0).sum::<i64>() / 2;
    let pairs: usize = sums.iter().map(|s| s.1).sum::<usize>() / 2;
    let loo: Vec<f64> = sums
        .iter()
        .map(|&(si, ci)| {
            let rest = pairs - ci;
            if rest == 0 {
                0.0
            } else {
                (tau - si) as f64 / rest as f64
            }
        })
        .collect();
    let mean = loo.iter().sum::<f64>() / n as f64;
    (n as f64 - 1.0) / n as f64 * loo.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
}

pub fn mb_test(
    dataset: &TruncatedDataset,
    alpha: f64,
    seed: u64,
) -> Result<BaselineOutcome, BaselineError> {
    let n = dataset.len();
    if n < 2 {
        return Err(BaselineError::TooFewSamples(n));
    }
    check_alpha(alpha)?;
    let stat = mb_statistic(dataset);
    let (p_value, diagnostic) = if stat.comparable == 0 {
        (1.0, Some("no comparable pairs".to_string()))
    } else {
        let var = jackknife_variance(dataset);
        if var > 0.0 {
            let theta = stat.tau_b as f64 / stat.comparable as f64;
            (normal_two_sided(theta / var.sqrt()), None)
        } else {
            (1.0, Some("zero jackknife variance".to_string()))
        }
    };
    Ok(BaselineOutcome {
        method: BaselineMethod::Mb,
        statistic: stat.tau_b as f64,
        p_value,
        reject: p_value <= alpha,
        alpha,
        calibration: CalibrationKind::NormalJackknife,
        seed,
        diagnostic,
    })
}
