//! Competing quasi-independence tests.
//!
//! * [`wlr`]: weighted log-rank statistics with the risk-set weight (which
//!   coincides with the constant-kernel KQIC) and the censoring-corrected
//!   weight.
//! * [`mb`]: conditional Kendall's tau restricted to comparable pairs.
//! * [`minp`]: minimal p-value cut-point tests calibrated by permutation.

pub mod km;
pub mod logrank;
pub mod mb;
pub mod minp;
pub mod permutation;
pub mod wlr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use km::{kaplan_meier, StepSurvivalFunction};
pub use logrank::{two_sample_logrank, LogRank};
pub use mb::{mb_statistic, mb_test};
pub use minp::{minp_test, MinPConfig, MinPVariant};
pub use permutation::truncation_permutation;
pub use wlr::{weight_sc, wlr_statistic, wlr_test, WlrVariant};

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("Kaplan-Meier estimator needs at least one observation")]
    EmptyInput,
    #[error("test needs at least 2 subjects, got {0}")]
    TooFewSamples(usize),
    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("at least one resampling draw is required")]
    NoDraws,
    #[error("min_events must be at least 1")]
    InvalidMinEvents,
    #[error("log-rank groups must both be nonempty")]
    EmptyGroup,
    #[error(
        "no truncation-respecting permutation found in {attempts} draws; \
         truncation is too severe for permutation calibration"
    )]
    PermutationInfeasible { attempts: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    Wlr,
    WlrSc,
    Mb,
    MinP1,
    MinP2,
}

impl BaselineMethod {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineMethod::Wlr => "WLR",
            BaselineMethod::WlrSc => "WLR_SC",
            BaselineMethod::Mb => "MB",
            BaselineMethod::MinP1 => "MinP1",
            BaselineMethod::MinP2 => "MinP2",
        }
    }
}

/// How the p-value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationKind {
    WildMultiplier,
    Permutation,
    KqicEquivalent,
    NormalJackknife,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineOutcome {
    pub method: BaselineMethod,
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    pub calibration: CalibrationKind,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

pub(crate) fn check_alpha(alpha: f64) -> Result<(), BaselineError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(BaselineError::InvalidAlpha(alpha))
    }
}

/// Two-sided standard-normal tail probability `P(|Z| >= |z|)`.
pub(crate) fn normal_two_sided(z: f64) -> f64 {
    statrs::function::erf::erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}
