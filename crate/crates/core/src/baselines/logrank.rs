//! Two-sample log-rank test with delayed entry.
//!
//! Subject `i` is at risk at `t` iff `X_i <= t <= T_i`. At each distinct
//! event time `t_j` with `d_j` events among `n_j` at risk, of which `n_Aj`
//! are in group A:
//!
//! ```text
//! U = sum_j (d_Aj - d_j n_Aj / n_j)
//! V = sum_j d_j (n_Aj / n_j)(1 - n_Aj / n_j)(n_j - d_j) / (n_j - 1)
//! ```
//!
//! with the `n_j = 1` term of `V` taken as 0.

use serde::{Deserialize, Serialize};

use super::{normal_two_sided, BaselineError};
use crate::data::TruncatedDataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRank {
    pub u: f64,
    pub v: f64,
    pub z: f64,
    pub p_value: f64,
}

impl LogRank {
    fn from_uv(u: f64, v: f64) -> Self {
        if v > 0.0 {
            let z = u / v.sqrt();
            Self {
                u,
                v,
                z,
                p_value: normal_two_sided(z),
            }
        } else {
            Self {
                u,
                v,
                z: 0.0,
                p_value: 1.0,
            }
        }
    }
}

/// Risk-set bookkeeping over a fixed pooled sample, reused across many
/// splits of the same subjects.
#[derive(Debug, Clone)]
pub(crate) struct LogRankPlan {
    /// Distinct event times, ascending.
    times: Vec<f64>,
    deaths: Vec<f64>,
    at_risk: Vec<f64>,
    /// Subject `i` is at risk at event-time indices `lo[i]..hi[i]`.
    lo: Vec<usize>,
    hi: Vec<usize>,
    /// Event-time index of subject `i`'s event, if any.
    event_slot: Vec<Option<usize>>,
}

impl LogRankPlan {
    pub(crate) fn new(entry: &[f64], observed: &[f64], event: &[bool]) -> Self {
        let mut times: Vec<f64> = observed
            .iter()
            .zip(event)
            .filter(|(_, &d)| d)
            .map(|(&t, _)| t)
            .collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let j = times.len();
        let lo: Vec<usize> = entry
            .iter()
            .map(|&x| times.partition_point(|&s| s < x))
            .collect();
        let hi: Vec<usize> = observed
            .iter()
            .map(|&t| times.partition_point(|&s| s <= t))
            .collect();
        let event_slot: Vec<Option<usize>> = observed
            .iter()
            .zip(event)
            .map(|(&t, &d)| d.then(|| times.partition_point(|&s| s < t)))
            .collect();
        let mut deaths = vec![0.0; j];
        for s in event_slot.iter().flatten() {
            deaths[*s] += 1.0;
        }
        let at_risk = risk_counts(j, &lo, &hi, |_| true);
        Self {
            times,
            deaths,
            at_risk,
            lo,
            hi,
            event_slot,
        }
    }

    pub(crate) fn event_times(&self) -> &[f64] {
        &self.times
    }

    /// Log-rank of the subjects flagged in `in_a` against the rest.
    pub(crate) fn test(&self, in_a: &[bool]) -> LogRank {
        let j = self.times.len();
        let n_a = risk_counts(j, &self.lo, &self.hi, |i| in_a[i]);
        let mut d_a = vec![0.0; j];
        for (i, s) in self.event_slot.iter().enumerate() {
            if let (Some(s), true) = (s, in_a[i]) {
                d_a[*s] += 1.0;
            }
        }
        let mut u = 0.0;
        let mut v = 0.0;
        for k in 0..j {
            let n = self.at_risk[k];
            let d = self.deaths[k];
            let frac = n_a[k] / n;
            u += d_a[k] - d * frac;
            if n > 1.0 {
                v += d * frac * (1.0 - frac) * (n - d) / (n - 1.0);
            }
        }
        LogRank::from_uv(u, v)
    }
}

fn risk_counts(j: usize, lo: &[usize], hi: &[usize], include: impl Fn(usize) -> bool) -> Vec<f64> {
    let mut diff = vec![0i64; j + 1];
    for i in 0..lo.len() {
        if include(i) && lo[i] < hi[i] {
            diff[lo[i]] += 1;
            diff[hi[i]] -= 1;
        }
    }
    let mut acc = 0i64;
    diff[..j]
        .iter()
        .map(|d| {
            acc += d;
            acc as f64
        })
        .collect()
}

pub fn two_sample_logrank(
    group_a: &TruncatedDataset,
    group_b: &TruncatedDataset,
) -> Result<LogRank, BaselineError> {
    if group_a.is_empty() || group_b.is_empty() {
        return Err(BaselineError::EmptyGroup);
    }
    let mut entry = group_a.entries();
    entry.extend(group_b.entries());
    let mut observed = group_a.observed();
    observed.extend(group_b.observed());
    let mut event = group_a.events();
    event.extend(group_b.events());
    let plan = LogRankPlan::new(&entry, &observed, &event);
    let in_a: Vec<bool> = (0..entry.len()).map(|i| i < group_a.len()).collect();
    Ok(plan.test(&in_a))
}
