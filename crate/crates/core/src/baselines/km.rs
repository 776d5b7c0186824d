//! Product-limit survival estimates.

use serde::{Deserialize, Serialize};

use super::BaselineError;

/// Right-continuous step function equal to 1 before the first jump and to
/// `values[j]` on `[jump_times[j], jump_times[j+1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSurvivalFunction {
    pub jump_times: Vec<f64>,
    pub values: Vec<f64>,
}

impl StepSurvivalFunction {
    pub fn one() -> Self {
        Self {
            jump_times: Vec::new(),
            values: Vec::new(),
        }
    }

    /// `S(t)`.
    pub fn eval(&self, t: f64) -> f64 {
        match self.jump_times.partition_point(|&s| s <= t) {
            0 => 1.0,
            j => self.values[j - 1],
        }
    }

    /// `S(t-)`, the limit from the left.
    pub fn left_limit(&self, t: f64) -> f64 {
        match self.jump_times.partition_point(|&s| s < t) {
            0 => 1.0,
            j => self.values[j - 1],
        }
    }
}

/// Kaplan-Meier estimator. At tied times events are removed before
/// censorings, so a censoring at `t` still counts in the risk set at `t`.
pub fn kaplan_meier(times: &[f64], events: &[bool]) -> Result<StepSurvivalFunction, BaselineError> {
    assert_eq!(times.len(), events.len());
    if times.is_empty() {
        return Err(BaselineError::EmptyInput);
    }
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let mut at_risk = times.len();
    let mut s = 1.0;
    let mut out = StepSurvivalFunction::one();
    let mut i = 0;
    while i < order.len() {
        let t = times[order[i]];
        let mut j = i;
        let mut deaths = 0;
        while j < order.len() && times[order[j]] == t {
            deaths += events[order[j]] as usize;
            j += 1;
        }
        if deaths > 0 {
            s *= 1.0 - deaths as f64 / at_risk as f64;
            out.jump_times.push(t);
            out.values.push(s);
        }
        at_risk -= j - i;
        i = j;
    }
    Ok(out)
}
