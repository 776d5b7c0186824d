//! Repeated-trial rejection-rate experiments and real-data analyses.
//!
//! Seeds follow a counter scheme so any single trial can be replayed:
//!
//! * censoring rate for parameter `p`: `derive_seed([master, p, TUNE])`
//! * dataset for trial `t` of cell `(p, n_idx)`: `derive_seed([master, p, n_idx, t])`
//! * method `j` on that dataset: `derive_seed([dataset_seed, j + 1])`
//!
//! All methods of a cell see the same datasets. Rejection decisions do not
//! depend on scheduling; only the recorded wall-clock runtimes do.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{
    mb_test, minp_test, wlr_test, BaselineError, MinPConfig, MinPVariant, WlrVariant,
};
use crate::bootstrap::{run_test, TestError};
use crate::data::TruncatedDataset;
use crate::kernels::{KernelFamily, KernelSpec};
use crate::rng::derive_seed;
use crate::selection::{median_kernels, select_or_fallback, Grid, SelectionConfig, SelectionError};
use crate::simgen::{
    gen_dataset_with_rate, tune_censoring_rate, GeneratorModel, SimError, DEFAULT_TUNING_MC_SIZE,
};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
const TUNE_TAG: u64 = 0x7475_6e65;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("feasibility error: {0}")]
    Feasibility(String),
}

impl HarnessError {
    /// Process exit code: 1 data, 2 configuration, 3 feasibility.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Data(_) => 1,
            HarnessError::Config(_) => 2,
            HarnessError::Feasibility(_) => 3,
        }
    }
}

impl From<SimError> for HarnessError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidModel(_) => HarnessError::Config(e.to_string()),
            _ => HarnessError::Feasibility(e.to_string()),
        }
    }
}

impl From<TestError> for HarnessError {
    fn from(e: TestError) -> Self {
        match e {
            TestError::TooFewSamples(_) => HarnessError::Data(e.to_string()),
            _ => HarnessError::Config(e.to_string()),
        }
    }
}

impl From<BaselineError> for HarnessError {
    fn from(e: BaselineError) -> Self {
        match e {
            BaselineError::PermutationInfeasible { .. } => HarnessError::Feasibility(e.to_string()),
            BaselineError::TooFewSamples(_)
            | BaselineError::EmptyInput
            | BaselineError::EmptyGroup => HarnessError::Data(e.to_string()),
            _ => HarnessError::Config(e.to_string()),
        }
    }
}

impl From<SelectionError> for HarnessError {
    fn from(e: SelectionError) -> Self {
        match e {
            SelectionError::Kernel(_) | SelectionError::DegenerateSplit { .. } => {
                HarnessError::Feasibility(e.to_string())
            }
            _ => HarnessError::Config(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "KQIC_Gauss")]
    KqicGauss,
    #[serde(rename = "KQIC_IMQ")]
    KqicImq,
    #[serde(rename = "WLR")]
    Wlr,
    #[serde(rename = "WLR_SC")]
    WlrSc,
    #[serde(rename = "MB")]
    Mb,
    #[serde(rename = "MinP1")]
    MinP1,
    #[serde(rename = "MinP2")]
    MinP2,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::KqicGauss,
        Method::KqicImq,
        Method::Wlr,
        Method::WlrSc,
        Method::Mb,
        Method::MinP1,
        Method::MinP2,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::KqicGauss => "KQIC_Gauss",
            Method::KqicImq => "KQIC_IMQ",
            Method::Wlr => "WLR",
            Method::WlrSc => "WLR_SC",
            Method::Mb => "MB",
            Method::MinP1 => "MinP1",
            Method::MinP2 => "MinP2",
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown method `{s}`"))
    }
}

fn default_trials() -> usize {
    200
}
fn default_alpha() -> f64 {
    0.05
}
fn default_draws() -> usize {
    500
}
fn default_mc_size() -> usize {
    DEFAULT_TUNING_MC_SIZE
}

/// Settings shared by every method run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSettings {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_draws")]
    pub bootstrap_draws: usize,
    /// Per-run kernel selection for the KQIC methods. Without it the median
    /// heuristic on the full data is used.
    #[serde(default)]
    pub selection: Option<SelectionConfig>,
    #[serde(default)]
    pub minp: MinPConfig,
}

impl Default for MethodSettings {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            bootstrap_draws: default_draws(),
            selection: None,
            minp: MinPConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
    /// Kernels used by the KQIC methods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernels: Option<(KernelSpec, KernelSpec)>,
    /// Subjects the test itself saw (smaller than the input under
    /// selection).
    pub n_tested: usize,
}

fn kqic_family(method: Method) -> Option<KernelFamily> {
    match method {
        Method::KqicGauss => Some(KernelFamily::Gaussian),
        Method::KqicImq => Some(KernelFamily::Imq),
        _ => None,
    }
}

/// Runs one method on one dataset.
pub fn run_method(
    method: Method,
    dataset: &TruncatedDataset,
    settings: &MethodSettings,
    seed: u64,
) -> Result<MethodResult, HarnessError> {
    let alpha = settings.alpha;
    if let Some(family) = kqic_family(method) {
        let (kx, ky, tested) = match &settings.selection {
            Some(cfg) => {
                let mut cfg = cfg.clone();
                cfg.seed = seed;
                if let Grid::MedianScaled { family: f, .. } = &mut cfg.grid {
                    *f = family;
                }
                let sel = select_or_fallback(dataset, &cfg, family)?;
                (sel.chosen.0, sel.chosen.1, sel.test_subset)
            }
            None => {
                let (kx, ky) = median_kernels(dataset, family)
                    .map_err(|e| HarnessError::Feasibility(e.to_string()))?;
                (kx, ky, dataset.clone())
            }
        };
        let out = run_test(&tested, &kx, &ky, settings.bootstrap_draws, alpha, seed)?;
        return Ok(MethodResult {
            statistic: out.statistic,
            p_value: out.p_value,
            reject: out.reject,
            kernels: Some((kx, ky)),
            n_tested: tested.len(),
        });
    }
    let out = match method {
        Method::Wlr => wlr_test(
            dataset,
            WlrVariant::RiskWeight,
            settings.bootstrap_draws,
            alpha,
            seed,
        )?,
        Method::WlrSc => wlr_test(
            dataset,
            WlrVariant::SurvivalCorrected,
            settings.bootstrap_draws,
            alpha,
            seed,
        )?,
        Method::Mb => mb_test(dataset, alpha, seed)?,
        Method::MinP1 => minp_test(dataset, MinPVariant::MinP1, &settings.minp, alpha, seed)?,
        Method::MinP2 => minp_test(dataset, MinPVariant::MinP2, &settings.minp, alpha, seed)?,
        Method::KqicGauss | Method::KqicImq => unreachable!(),
    };
    Ok(MethodResult {
        statistic: out.statistic,
        p_value: out.p_value,
        reject: out.reject,
        kernels: None,
        n_tested: dataset.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Generator; its `dependence` is replaced by each grid value.
    pub model: GeneratorModel,
    pub n_values: Vec<usize>,
    pub parameter_values: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub methods: Vec<Method>,
    #[serde(flatten)]
    pub settings: MethodSettings,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_mc_size")]
    pub tuning_mc_size: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.methods.is_empty() {
            return bad("method list is empty");
        }
        if self.n_values.is_empty() || self.n_values.iter().any(|&n| n < 2) {
            return bad("n_values must be nonempty with every n >= 2");
        }
        if self.parameter_values.is_empty() {
            return bad("parameter_values is empty");
        }
        if !(self.settings.alpha > 0.0 && self.settings.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if self.settings.bootstrap_draws == 0 {
            return bad("bootstrap_draws must be at least 1");
        }
        for &p in &self.parameter_values {
            self.model.with_dependence(p).validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub method: Method,
    pub param: f64,
    pub n: usize,
    pub trials: usize,
    pub rejections: usize,
    /// `rejections / trials`; absent when the cell was aborted.
    pub rejection_rate: Option<f64>,
    pub mean_runtime_s: f64,
    /// Dataset seed of every trial.
    pub trial_seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    /// Tuned censoring rate per parameter value (0 means none).
    pub censoring_rates: Vec<f64>,
    pub cells: Vec<CellResult>,
}

impl RejectionReport {
    pub fn cell(&self, method: Method, param: f64, n: usize) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.param == param && c.n == n)
    }

    /// Copy with runtimes zeroed, for comparing runs.
    pub fn strip_timings(&self) -> Self {
        let mut out = self.clone();
        for c in &mut out.cells {
            c.mean_runtime_s = 0.0;
        }
        out
    }
}

type TrialOutcome = Result<(bool, f64), String>;

pub fn run_benchmark(config: &ExperimentConfig) -> Result<RejectionReport, HarnessError> {
    config.validate()?;
    let master = config.master_seed;
    let mut censoring_rates = Vec::with_capacity(config.parameter_values.len());
    let mut cells = Vec::new();
    for (p_idx, &param) in config.parameter_values.iter().enumerate() {
        let model = config.model.with_dependence(param);
        let rate = tune_censoring_rate(
            &model,
            model.censor_target,
            derive_seed(&[master, p_idx as u64, TUNE_TAG]),
            config.tuning_mc_size,
        )?;
        censoring_rates.push(rate);
        for (n_idx, &n) in config.n_values.iter().enumerate() {
            let seeds: Vec<u64> = (0..config.trials as u64)
                .map(|t| derive_seed(&[master, p_idx as u64, n_idx as u64, t]))
                .collect();
            let per_trial: Vec<Vec<TrialOutcome>> = seeds
                .par_iter()
                .map(|&seed| {
                    let data = match gen_dataset_with_rate(&model, rate, n, seed) {
                        Ok(d) => d,
                        Err(e) => return vec![Err(e.to_string()); config.methods.len()],
                    };
                    config
                        .methods
                        .iter()
                        .enumerate()
                        .map(|(j, &m)| {
                            let start = Instant::now();
                            let r = run_method(
                                m,
                                &data,
                                &config.settings,
                                derive_seed(&[seed, j as u64 + 1]),
                            )
                            .map_err(|e| e.to_string())?;
                            Ok((r.reject, start.elapsed().as_secs_f64()))
                        })
                        .collect()
                })
                .collect();
            for (j, &method) in config.methods.iter().enumerate() {
                let outcomes: Vec<&TrialOutcome> = per_trial.iter().map(|t| &t[j]).collect();
                let first_err = outcomes
                    .iter()
                    .enumerate()
                    .find_map(|(t, o)| o.as_ref().err().map(|e| (t, e)));
                let cell = match first_err {
                    Some((t, e)) => CellResult {
                        method,
                        param,
                        n,
                        trials: config.trials,
                        rejections: 0,
                        rejection_rate: None,
                        mean_runtime_s: 0.0,
                        trial_seeds: seeds.clone(),
                        error: Some(format!("trial {t} (seed {}): {e}", seeds[t])),
                    },
                    None => {
                        let ok: Vec<(bool, f64)> =
                            outcomes.iter().map(|o| *o.as_ref().unwrap()).collect();
                        let rejections = ok.iter().filter(|o| o.0).count();
                        CellResult {
                            method,
                            param,
                            n,
                            trials: config.trials,
                            rejections,
                            rejection_rate: Some(rejections as f64 / config.trials as f64),
                            mean_runtime_s: ok.iter().map(|o| o.1).sum::<f64>() / ok.len() as f64,
                            trial_seeds: seeds.clone(),
                            error: None,
                        }
                    }
                };
                cells.push(cell);
            }
        }
    }
    Ok(RejectionReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config: config.clone(),
        censoring_rates,
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

pub const CSV_HEADER: &str = "method,param,n,trials,rejection_rate,mean_runtime_s";

pub fn emit_report(report: &RejectionReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serialises");
            s.push('\n');
            s
        }
        ReportFormat::Csv => {
            let mut s = String::from(CSV_HEADER);
            s.push('\n');
            for c in &report.cells {
                let rate = c
                    .rejection_rate
                    .map_or_else(|| "NA".to_string(), |r| format!("{r:.6}"));
                let _ = writeln!(
                    s,
                    "{},{:.6},{},{},{},{:.6}",
                    c.method.name(),
                    c.param,
                    c.n,
                    c.trials,
                    rate,
                    c.mean_runtime_s
                );
            }
            s
        }
    }
}

pub fn parse_report(json: &str) -> Result<RejectionReport, HarnessError> {
    let r: RejectionReport =
        serde_json::from_str(json).map_err(|e| HarnessError::Config(e.to_string()))?;
    if r.schema_version != REPORT_SCHEMA_VERSION {
        return Err(HarnessError::Config(format!(
            "unsupported report schema version {}",
            r.schema_version
        )));
    }
    Ok(r)
}

pub const SMALL_GROUP: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealDataRow {
    /// Group label, or `combined` for the pooled data.
    pub group: String,
    pub n: usize,
    pub method: Method,
    pub result: MethodResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealDataReport {
    pub rows: Vec<RealDataRow>,
    pub warnings: Vec<String>,
}

impl RealDataReport {
    pub fn get(&self, group: &str, method: Method) -> Option<&RealDataRow> {
        self.rows
            .iter()
            .find(|r| r.group == group && r.method == method)
    }
}

/// One p-value per method for the pooled data and, when the dataset is
/// labelled, for each group. Method `j` runs with seed
/// `derive_seed([seed, j])` on every group.
pub fn run_realdata(
    dataset: &TruncatedDataset,
    methods: &[Method],
    settings: &MethodSettings,
    seed: u64,
) -> Result<RealDataReport, HarnessError> {
    if methods.is_empty() {
        return Err(HarnessError::Config("method list is empty".into()));
    }
    let mut parts = vec![("combined".to_string(), dataset.clone())];
    parts.extend(dataset.split_by_group());
    let mut warnings = Vec::new();
    let mut rows = Vec::new();
    for (group, data) in parts {
        if data.len() < SMALL_GROUP {
            warnings.push(format!("group `{group}` has only {} subjects", data.len()));
        }
        for (j, &method) in methods.iter().enumerate() {
            let result = run_method(method, &data, settings, derive_seed(&[seed, j as u64]))?;
            rows.push(RealDataRow {
                group: group.clone(),
                n: data.len(),
                method,
                result,
            });
        }
    }
    Ok(RealDataReport { rows, warnings })
}
