//! Weighted log-rank statistics for quasi-independence.
//!
//! ```text
//! L_W = sum_i D_i W(X_i, T_i)
//!     - sum_{i,k} D_k W(X_i, T_k) 1{X_k <= X_i < T_k <= T_i} / R(X_i, T_k)
//! ```
//!
//! with `R(x, y) = #{m : X_m <= x, T_m >= y}`. Grouping the double sum by
//! the event subject gives per-subject terms
//!
//! ```text
//! l_i = D_i [ W(X_i, T_i) - sum_k W(X_k, T_i) 1{X_i <= X_k < T_i <= T_k} / R(X_k, T_i) ]
//! ```
//!
//! which add up to `L_W`. With `W = R` the squared statistic `(L_W / n^2)^2`
//! is the constant-kernel KQIC, and it is calibrated with the same wild
//! bootstrap. The censoring-corrected weight is calibrated by a multiplier
//! bootstrap of the `l_i`.

use rayon::prelude::*;

use super::km::{kaplan_meier, StepSurvivalFunction};
use super::{check_alpha, BaselineError, BaselineMethod, BaselineOutcome, CalibrationKind};
use crate::bootstrap::{calibrate, rademacher_weights};
use crate::data::TruncatedDataset;
use crate::kqic::chain;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WlrVariant {
    RiskWeight,
    SurvivalCorrected,
}

/// `W(x, y) = (1/n) sum_m 1{X_m <= x, T_m >= y} / S((y - X_m)-)` where `S`
/// is the Kaplan-Meier estimate of the residual censoring time `C - X`.
#[derive(Debug, Clone)]
pub struct ScWeight {
    entry: Vec<f64>,
    observed: Vec<f64>,
    survival: StepSurvivalFunction,
}

impl ScWeight {
    pub fn survival(&self) -> &StepSurvivalFunction {
        &self.survival
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.eval_counting(x, y).0
    }

    /// Weight together with the number of terms dropped because the
    /// survival estimate had reached zero.
    pub fn eval_counting(&self, x: f64, y: f64) -> (f64, usize) {
        let n = self.entry.len() as f64;
        let mut acc = 0.0;
        let mut skipped = 0;
        for (&xm, &tm) in self.entry.iter().zip(&self.observed) {
            if xm <= x && tm >= y {
                let s = self.survival.left_limit(y - xm);
                if s > 0.0 {
                    acc += 1.0 / s;
                } else {
                    skipped += 1;
                }
            }
        }
        (acc / n, skipped)
    }
}

pub fn weight_sc(dataset: &TruncatedDataset) -> ScWeight {
    let entry = dataset.entries();
    let observed = dataset.observed();
    let residual: Vec<f64> = observed.iter().zip(&entry).map(|(t, x)| t - x).collect();
    let censored: Vec<bool> = dataset.events().iter().map(|d| !d).collect();
    let survival =
        kaplan_meier(&residual, &censored).unwrap_or_else(|_| StepSurvivalFunction::one());
    ScWeight {
        entry,
        observed,
        survival,
    }
}

/// Weight functions understood by [`wlr_contributions`].
pub enum Weight<'a> {
    /// `W = R`.
    Risk,
    SurvivalCorrected(&'a ScWeight),
    Custom(&'a dyn Fn(f64, f64) -> f64),
}

/// Per-subject terms `l_i` (zero for censored subjects).
///
/// For each event time `y = T_e` one pass over the subjects in entry order
/// yields `R(X_i, y)` and the corrected-weight sums for every `i`, so the
/// whole vector costs O(n^2) plus survival lookups.
pub fn wlr_contributions(dataset: &TruncatedDataset, weight: &Weight<'_>) -> Vec<f64> {
    let n = dataset.len();
    let x = dataset.entries();
    let t = dataset.observed();
    let d = dataset.events();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));

    let mut risk = vec![0.0; n];
    let mut sc = vec![0.0; n];
    let mut out = vec![0.0; n];
    for e in (0..n).filter(|&e| d[e]) {
        let y = t[e];
        let mut cnt = 0.0;
        let mut acc = 0.0;
        let mut p = 0;
        while p < n {
            let mut q = p;
            while q < n && x[order[q]] == x[order[p]] {
                let m = order[q];
                if t[m] >= y {
                    cnt += 1.0;
                    if let Weight::SurvivalCorrected(w) = weight {
                        let s = w.survival.left_limit(y - x[m]);
                        if s > 0.0 {
                            acc += 1.0 / s;
                        }
                    }
                }
                q += 1;
            }
            for &m in &order[p..q] {
                risk[m] = cnt;
                sc[m] = acc / n as f64;
            }
            p = q;
        }
        let w_at = |i: usize| match weight {
            Weight::Risk => risk[i],
            Weight::SurvivalCorrected(_) => sc[i],
            Weight::Custom(f) => f(x[i], y),
        };
        let mut l = w_at(e);
        for k in 0..n {
            if chain(x[k], t[k], x[e], y) {
                debug_assert!(risk[k] > 0.0);
                l -= w_at(k) / risk[k];
            }
        }
        out[e] = l;
    }
    out
}

pub fn wlr_statistic(dataset: &TruncatedDataset, weight: &Weight<'_>) -> f64 {
    wlr_contributions(dataset, weight).iter().sum()
}

/// `(D_i pi_i - (1/n) sum_k D_k 1{X_k <= X_i < T_k <= T_i})_i`: the vector
/// whose outer product is the constant-kernel bootstrap matrix (up to
/// `1/n^2`).
pub fn risk_weight_scores(dataset: &TruncatedDataset) -> Vec<f64> {
    let n = dataset.len();
    let nf = n as f64;
    let s = dataset.samples();
    (0..n)
        .map(|i| {
            let (xi, ti) = (s[i].entry, s[i].observed);
            let mut risk = 0usize;
            let mut before = 0usize;
            for sk in s {
                let (xk, tk) = (sk.entry, sk.observed);
                if xk <= xi && tk >= ti {
                    risk += 1;
                }
                if sk.event && chain(xi, ti, xk, tk) {
                    before += 1;
                }
            }
            let a = if s[i].event { risk as f64 / nf } else { 0.0 };
            a - before as f64 / nf
        })
        .collect()
}

fn dot(w: &[f64], v: &[f64]) -> f64 {
    w.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn wlr_test(
    dataset: &TruncatedDataset,
    variant: WlrVariant,
    draws: usize,
    alpha: f64,
    seed: u64,
) -> Result<BaselineOutcome, BaselineError> {
    let n = dataset.len();
    if n < 2 {
        return Err(BaselineError::TooFewSamples(n));
    }
    check_alpha(alpha)?;
    if draws == 0 {
        return Err(BaselineError::NoDraws);
    }
    let nf = n as f64;
    let (method, calibration, statistic, scores, transform): (_, _, _, _, fn(f64, f64) -> f64) =
        match variant {
            WlrVariant::RiskWeight => {
                let v = risk_weight_scores(dataset);
                let s: f64 = v.iter().sum();
                (
                    BaselineMethod::Wlr,
                    CalibrationKind::KqicEquivalent,
                    s * s / (nf * nf),
                    v,
                    |s, nf| s * s / (nf * nf),
                )
            }
            WlrVariant::SurvivalCorrected => {
                let w = weight_sc(dataset);
                let v = wlr_contributions(dataset, &Weight::SurvivalCorrected(&w));
                (
                    BaselineMethod::WlrSc,
                    CalibrationKind::WildMultiplier,
                    v.iter().sum(),
                    v,
                    |s, _| s.abs(),
                )
            }
        };
    let replicates: Vec<f64> = (0..draws as u64)
        .into_par_iter()
        .map(|b| transform(dot(&rademacher_weights(seed, b, n), &scores), nf))
        .collect();
    let cal = calibrate(transform(scores.iter().sum(), nf), &replicates, alpha);
    Ok(BaselineOutcome {
        method,
        statistic,
        p_value: cal.p_value,
        reject: cal.reject,
        alpha,
        calibration,
        seed,
        diagnostic: None,
    })
}
