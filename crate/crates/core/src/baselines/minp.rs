//! Minimal p-value cut-point tests.
//!
//! Under quasi-independence the law of `T` given `X <= t` matches the law
//! given `X > t`. MinP1 splits at every observed entry time, MinP2 splits by
//! membership of a window `[X_m - eps, X_m + eps]` around each entry time.
//! The smallest two-sample log-rank p-value over admissible splits is the
//! statistic; it is calibrated by truncation-respecting permutations of the
//! entry times.
//!
//! A split is admissible when each group holds at least `E` events. MinP2
//! additionally requires `E <= sum_i D_i 1{|T_i - T_m| < eps} <= n - E`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::logrank::LogRankPlan;
use super::permutation::permute_entries;
use super::{check_alpha, BaselineError, BaselineMethod, BaselineOutcome, CalibrationKind};
use crate::data::TruncatedDataset;
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MinPVariant {
    MinP1,
    MinP2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinPConfig {
    pub min_events: usize,
    pub permutations: usize,
}

impl Default for MinPConfig {
    fn default() -> Self {
        Self {
            min_events: 5,
            permutations: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinPStatistic {
    pub minp: f64,
    /// Index `m` of the subject defining the best split, if any split was
    /// admissible.
    pub best_cut: Option<usize>,
    pub admissible: usize,
}

/// Window half-width `eps = max_m eps_m`, where `eps_m` is the smallest
/// radius whose closed window around `X_m` holds at least `E` entry times
/// while leaving at least `E` outside. `None` when no `m` qualifies.
pub fn window_radius(entry: &[f64], min_events: usize) -> Option<f64> {
    let n = entry.len();
    if min_events == 0 || min_events > n {
        return None;
    }
    let mut best: Option<f64> = None;
    let mut dist = vec![0.0; n];
    for &xm in entry {
        for (d, &xi) in dist.iter_mut().zip(entry) {
            *d = (xi - xm).abs();
        }
        let (_, &mut eps, _) = dist.select_nth_unstable_by(min_events - 1, f64::total_cmp);
        let inside = entry.iter().filter(|&&xi| (xi - xm).abs() <= eps).count();
        if n - inside >= min_events {
            best = Some(best.map_or(eps, |b: f64| b.max(eps)));
        }
    }
    best
}

fn scan(
    entry: &[f64],
    observed: &[f64],
    event: &[bool],
    variant: MinPVariant,
    min_events: usize,
    eps: Option<f64>,
) -> MinPStatistic {
    let n = entry.len();
    let plan = LogRankPlan::new(entry, observed, event);
    let total_events = event.iter().filter(|&&d| d).count();
    let mut out = MinPStatistic {
        minp: 1.0,
        best_cut: None,
        admissible: 0,
    };
    if plan.event_times().is_empty() {
        return out;
    }
    let mut in_a = vec![false; n];
    let mut seen_cuts: Vec<f64> = Vec::new();
    for m in 0..n {
        match variant {
            MinPVariant::MinP1 => {
                // equal entry times give the same split
                if seen_cuts.contains(&entry[m]) {
                    continue;
                }
                seen_cuts.push(entry[m]);
                for i in 0..n {
                    in_a[i] = entry[i] <= entry[m];
                }
            }
            MinPVariant::MinP2 => {
                let Some(eps) = eps else { return out };
                let window_events = (0..n)
                    .filter(|&i| event[i] && (observed[i] - observed[m]).abs() < eps)
                    .count();
                if window_events < min_events || window_events > n - min_events {
                    continue;
                }
                for i in 0..n {
                    in_a[i] = (entry[i] - entry[m]).abs() <= eps;
                }
            }
        }
        let events_a = (0..n).filter(|&i| in_a[i] && event[i]).count();
        if events_a < min_events || total_events - events_a < min_events {
            continue;
        }
        out.admissible += 1;
        let p = plan.test(&in_a).p_value;
        if out.best_cut.is_none() || p < out.minp {
            out.minp = p;
            out.best_cut = Some(m);
        }
    }
    out
}

pub fn minp_statistic(
    dataset: &TruncatedDataset,
    variant: MinPVariant,
    min_events: usize,
) -> MinPStatistic {
    let entry = dataset.entries();
    let eps = match variant {
        MinPVariant::MinP1 => None,
        MinPVariant::MinP2 => window_radius(&entry, min_events),
    };
    scan(
        &entry,
        &dataset.observed(),
        &dataset.events(),
        variant,
        min_events,
        eps,
    )
}

pub fn minp_test(
    dataset: &TruncatedDataset,
    variant: MinPVariant,
    config: &MinPConfig,
    alpha: f64,
    seed: u64,
) -> Result<BaselineOutcome, BaselineError> {
    let n = dataset.len();
    if n < 2 {
        return Err(BaselineError::TooFewSamples(n));
    }
    check_alpha(alpha)?;
    if config.min_events == 0 {
        return Err(BaselineError::InvalidMinEvents);
    }
    if config.permutations == 0 {
        return Err(BaselineError::NoDraws);
    }
    let method = match variant {
        MinPVariant::MinP1 => BaselineMethod::MinP1,
        MinPVariant::MinP2 => BaselineMethod::MinP2,
    };
    let entry = dataset.entries();
    let observed = dataset.observed();
    let event = dataset.events();
    // The window radius depends only on the multiset of entry times, which
    // permutation preserves.
    let eps = match variant {
        MinPVariant::MinP1 => None,
        MinPVariant::MinP2 => window_radius(&entry, config.min_events),
    };
    let observed_stat = scan(&entry, &observed, &event, variant, config.min_events, eps);
    let mut outcome = BaselineOutcome {
        method,
        statistic: observed_stat.minp,
        p_value: 1.0,
        reject: false,
        alpha,
        calibration: CalibrationKind::Permutation,
        seed,
        diagnostic: None,
    };
    if observed_stat.admissible == 0 {
        outcome.diagnostic = Some("no admissible split".to_string());
        return Ok(outcome);
    }
    let perm: Vec<f64> = (0..config.permutations as u64)
        .into_par_iter()
        .map(|b| {
            let x = permute_entries(&entry, &observed, &mut stream_rng(seed, b))?;
            Ok(scan(&x, &observed, &event, variant, config.min_events, eps).minp)
        })
        .collect::<Result<_, BaselineError>>()?;
    let hits = perm.iter().filter(|&&p| p <= observed_stat.minp).count();
    outcome.p_value = (1 + hits) as f64 / (config.permutations + 1) as f64;
    outcome.reject = outcome.p_value <= alpha;
    Ok(outcome)
}
