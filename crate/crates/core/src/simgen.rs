//! Synthetic left-truncated, right-censored data.
//!
//! Each model draws a latent pair `(X, Y)` and a censoring time `C`, forms
//! `T = min(Y, C)` and `D = 1{Y <= C}`, and keeps the triple only when
//! `X < T`. Marginals:
//!
//! | kind                 | X                | Y                                 | C                          |
//! |----------------------|------------------|-----------------------------------|----------------------------|
//! | `Monotone`           | Exp(5)           | Weibull(3, 8.5), Gaussian copula  | Exp(tuned)                 |
//! | `VShape`             | Weibull(0.5, 4)  | 0.5 +/- V, V = abs(Y - 0.5) coupled | Exp(tuned)               |
//! | `Periodic`           | Exp(1)           | Exp(exp(cos(2 pi beta X)))        | Exp(tuned)                 |
//! | `DependentCensoring` | Exp(1)           | Exp(1)                            | Exp(exp(cos(2 pi gamma X)))|
//! | `NullIndependent`    | Exp(1)           | Exp(1)                            | Exp(tuned)                 |
//!
//! `Exp(theta)` follows [`ExpConvention`]: by default `theta` is a rate.
//! Weibull parameters are (shape, scale). The tuned censoring distribution
//! is always parameterised by its rate, with rate 0 meaning no censoring.

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::data::{SurvivalSample, TruncatedDataset};
use crate::rng::{stream_rng, StreamRng};

/// Proposals after which a low acceptance rate is declared infeasible.
pub const FEASIBILITY_PROPOSALS: u64 = 1_000_000;
pub const MIN_ACCEPTANCE: f64 = 1e-4;
pub const DEFAULT_TUNING_MC_SIZE: usize = 20_000;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid generator model: {0}")]
    InvalidModel(String),
    #[error(
        "acceptance rate {accepted}/{proposals} is below {MIN_ACCEPTANCE}; truncation too severe"
    )]
    Infeasible { accepted: usize, proposals: u64 },
    #[error(
        "censoring fraction {target} unreachable for rates in [1e-6, 1e6] (closest {reached:.3})"
    )]
    TuningFailed { target: f64, reached: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Monotone,
    VShape,
    Periodic,
    DependentCensoring,
    NullIndependent,
}

/// Reading of the parameter in `Exp(theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpConvention {
    /// Mean `1 / theta`.
    #[default]
    Rate,
    /// Mean `theta`.
    Scale,
}

impl ExpConvention {
    fn rate(self, theta: f64) -> f64 {
        match self {
            ExpConvention::Rate => theta,
            ExpConvention::Scale => 1.0 / theta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorModel {
    pub kind: ModelKind,
    /// rho for the copula kinds, beta for `Periodic`, gamma for
    /// `DependentCensoring`; ignored for `NullIndependent`.
    pub dependence: f64,
    /// Censoring fraction sought among accepted samples. Ignored by
    /// `DependentCensoring`, whose censoring is part of the model.
    pub censor_target: f64,
    #[serde(default)]
    pub convention: ExpConvention,
}

impl GeneratorModel {
    pub fn new(kind: ModelKind, dependence: f64, censor_target: f64) -> Result<Self, SimError> {
        let m = Self {
            kind,
            dependence,
            censor_target,
            convention: ExpConvention::Rate,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_convention(mut self, convention: ExpConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn with_dependence(mut self, dependence: f64) -> Self {
        self.dependence = dependence;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !self.dependence.is_finite() {
            return Err(SimError::InvalidModel(format!(
                "dependence {} is not finite",
                self.dependence
            )));
        }
        match self.kind {
            ModelKind::Monotone | ModelKind::VShape if self.dependence.abs() >= 1.0 => {
                return Err(SimError::InvalidModel(format!(
                    "copula correlation {} must satisfy |rho| < 1",
                    self.dependence
                )))
            }
            ModelKind::Periodic | ModelKind::DependentCensoring if self.dependence < 0.0 => {
                return Err(SimError::InvalidModel(format!(
                    "frequency {} must be nonnegative",
                    self.dependence
                )))
            }
            _ => {}
        }
        if !(0.0..1.0).contains(&self.censor_target) {
            return Err(SimError::InvalidModel(format!(
                "censor_target {} must lie in [0, 1)",
                self.censor_target
            )));
        }
        Ok(())
    }

    /// CDF of the latent entry time.
    pub fn entry_cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self.kind {
            ModelKind::Monotone => 1.0 - (-self.convention.rate(5.0) * x).exp(),
            ModelKind::VShape => 1.0 - (-(x / 4.0).powf(0.5)).exp(),
            _ => 1.0 - (-x).exp(),
        }
    }
}

/// Standard normal CDF.
pub fn phi(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

fn exp_quantile(u: f64, rate: f64) -> f64 {
    -(-u).ln_1p() / rate
}

fn weibull_quantile(u: f64, shape: f64, scale: f64) -> f64 {
    scale * (-(-u).ln_1p()).powf(1.0 / shape)
}

/// One draw from a Gaussian copula with correlation `rho`, mapped through
/// the given quantile functions.
pub fn gaussian_copula_pair<R: Rng + ?Sized>(
    rho: f64,
    inv_cdf_u: impl Fn(f64) -> f64,
    inv_cdf_v: impl Fn(f64) -> f64,
    rng: &mut R,
) -> (f64, f64) {
    let z1: f64 = StandardNormal.sample(rng);
    let z: f64 = StandardNormal.sample(rng);
    let z2 = rho * z1 + (1.0 - rho * rho).sqrt() * z;
    (inv_cdf_u(phi(z1)), inv_cdf_v(phi(z2)))
}

fn unit_exp<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    exp_quantile(rng.random::<f64>(), 1.0)
}

/// Latent `(X, Y)` before censoring and truncation.
pub fn latent_pair<R: Rng + ?Sized>(model: &GeneratorModel, rng: &mut R) -> (f64, f64) {
    let conv = model.convention;
    match model.kind {
        ModelKind::Monotone => gaussian_copula_pair(
            model.dependence,
            |u| exp_quantile(u, conv.rate(5.0)),
            |v| weibull_quantile(v, 3.0, 8.5),
            rng,
        ),
        ModelKind::VShape => {
            let (x, half) = gaussian_copula_pair(
                model.dependence,
                |u| weibull_quantile(u, 0.5, 4.0),
                |v| 0.5 * v,
                rng,
            );
            let y = if rng.random::<bool>() {
                0.5 + half
            } else {
                0.5 - half
            };
            (x, y)
        }
        ModelKind::Periodic => {
            let x = unit_exp(rng);
            let theta = (2.0 * PI * model.dependence * x).cos().exp();
            (x, unit_exp(rng) / conv.rate(theta))
        }
        ModelKind::DependentCensoring | ModelKind::NullIndependent => {
            (unit_exp(rng), unit_exp(rng))
        }
    }
}

/// Latent triple `(X, Y, C)`; `rate` is ignored by `DependentCensoring`.
fn propose<R: Rng + ?Sized>(model: &GeneratorModel, rate: f64, rng: &mut R) -> (f64, f64, f64) {
    let (x, y) = latent_pair(model, rng);
    let e = unit_exp(rng);
    let c = match model.kind {
        ModelKind::DependentCensoring => {
            let theta = (2.0 * PI * model.dependence * x).cos().exp();
            e / model.convention.rate(theta)
        }
        _ if rate == 0.0 => f64::INFINITY,
        _ => e / rate,
    };
    (x, y, c)
}

fn accept(x: f64, y: f64, c: f64) -> Option<SurvivalSample> {
    let t = y.min(c);
    (x < t && x >= 0.0).then(|| SurvivalSample::new(x, t, y <= c))
}

/// `n` accepted subjects using censoring rate `rate` (0 for none).
pub fn gen_dataset_with_rate(
    model: &GeneratorModel,
    rate: f64,
    n: usize,
    seed: u64,
) -> Result<TruncatedDataset, SimError> {
    model.validate()?;
    let mut rng: StreamRng = stream_rng(seed, 0);
    let mut samples = Vec::with_capacity(n);
    let mut proposals: u64 = 0;
    while samples.len() < n {
        let (x, y, c) = propose(model, rate, &mut rng);
        proposals += 1;
        if let Some(s) = accept(x, y, c) {
            samples.push(s);
        }
        if proposals >= FEASIBILITY_PROPOSALS
            && (samples.len() as f64) < MIN_ACCEPTANCE * proposals as f64
        {
            return Err(SimError::Infeasible {
                accepted: samples.len(),
                proposals,
            });
        }
    }
    Ok(TruncatedDataset::new(samples).expect("accepted samples satisfy entry < observed"))
}

/// Tunes the censoring rate for `model.censor_target` and then generates.
pub fn gen_dataset(
    model: &GeneratorModel,
    n: usize,
    seed: u64,
) -> Result<TruncatedDataset, SimError> {
    let rate = tune_censoring_rate(
        model,
        model.censor_target,
        seed ^ 0x7475_6e65,
        DEFAULT_TUNING_MC_SIZE,
    )?;
    gen_dataset_with_rate(model, rate, n, seed)
}

/// Exponential censoring rate giving censoring fraction `target` among
/// accepted samples, within 0.01.
///
/// A pool of latent `(X, Y, E)` draws with `X < Y` is fixed up front and
/// `C = E / rate`, so the fraction is a deterministic function of the rate
/// and bisection on `log(rate)` converges cleanly. A target of 0 returns the
/// sentinel rate 0. For `DependentCensoring` the rate is unused and 0 is
/// returned.
pub fn tune_censoring_rate(
    model: &GeneratorModel,
    target: f64,
    seed: u64,
    mc_size: usize,
) -> Result<f64, SimError> {
    model.validate()?;
    if !(0.0..1.0).contains(&target) {
        return Err(SimError::InvalidModel(format!(
            "censoring target {target} must lie in [0, 1)"
        )));
    }
    if target == 0.0 || model.kind == ModelKind::DependentCensoring {
        return Ok(0.0);
    }
    let mut rng = stream_rng(seed, 1);
    let mut pool = Vec::with_capacity(mc_size);
    let mut proposals: u64 = 0;
    while pool.len() < mc_size {
        let (x, y) = latent_pair(model, &mut rng);
        let e = unit_exp(&mut rng);
        proposals += 1;
        if x < y && x >= 0.0 {
            pool.push((x, y, e));
        }
        if proposals >= FEASIBILITY_PROPOSALS
            && (pool.len() as f64) < MIN_ACCEPTANCE * proposals as f64
        {
            return Err(SimError::Infeasible {
                accepted: pool.len(),
                proposals,
            });
        }
    }
    let fraction = |rate: f64| {
        let mut accepted = 0usize;
        let mut censored = 0usize;
        for &(x, y, e) in &pool {
            let c = e / rate;
            if x < y.min(c) {
                accepted += 1;
                censored += (c < y) as usize;
            }
        }
        if accepted == 0 {
            1.0
        } else {
            censored as f64 / accepted as f64
        }
    };
    let (mut lo, mut hi) = (1e-6f64.ln(), 1e6f64.ln());
    let (f_lo, f_hi) = (fraction(lo.exp()), fraction(hi.exp()));
    if target < f_lo - 0.01 {
        return Err(SimError::TuningFailed {
            target,
            reached: f_lo,
        });
    }
    if target > f_hi + 0.01 {
        return Err(SimError::TuningFailed {
            target,
            reached: f_hi,
        });
    }
    let mut best = (f64::INFINITY, lo.exp());
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let f = fraction(mid.exp());
        if (f - target).abs() < best.0 {
            best = ((f - target).abs(), mid.exp());
        }
        if f < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    if best.0 <= 0.01 {
        Ok(best.1)
    } else {
        Err(SimError::TuningFailed {
            target,
            reached: target + best.0,
        })
    }
}
