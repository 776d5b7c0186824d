//! `kqic` command-line tool.
//!
//! Exit codes: 0 success, 1 data error, 2 configuration error,
//! 3 feasibility error.

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use kqic::baselines::{BaselineError, MinPConfig};
use kqic::bootstrap::{run_test, TestError};
use kqic::data::{load_csv, write_csv, CsvSchema, DataError, TruncatedDataset};
use kqic::harness::{
    emit_report, run_benchmark, run_method, run_realdata, ExperimentConfig, HarnessError, Method,
    MethodSettings, ReportFormat,
};
use kqic::kernels::{KernelFamily, KernelSpec};
use kqic::selection::{median_kernels, select_or_fallback, Grid, SelectionConfig};
use kqic::simgen::{gen_dataset, ExpConvention, GeneratorModel, ModelKind, SimError};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "kqic",
    version,
    about = "Quasi-independence tests for truncated, censored event times"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test one dataset.
    Test(TestArgs),
    /// Write a synthetic dataset as CSV to stdout.
    Simulate(SimulateArgs),
    /// Run a rejection-rate experiment described by a JSON config.
    Benchmark(BenchmarkArgs),
    /// Every requested method on a dataset, pooled and per group.
    Realdata(RealdataArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TestMethod {
    Kqic,
    Wlr,
    WlrSc,
    Mb,
    Minp1,
    Minp2,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum KernelArg {
    Gauss,
    Imq,
    Const,
}

impl KernelArg {
    fn family(self) -> KernelFamily {
        match self {
            KernelArg::Gauss => KernelFamily::Gaussian,
            KernelArg::Imq => KernelFamily::Imq,
            KernelArg::Const => KernelFamily::Constant,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputArg {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Monotone,
    Vshape,
    Periodic,
    Depcens,
    Null,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    Rate,
    Scale,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Bandwidth {
    Auto,
    Select,
    Fixed(f64),
}

fn parse_bandwidth(s: &str) -> Result<Bandwidth, String> {
    match s {
        "auto" => Ok(Bandwidth::Auto),
        "select" => Ok(Bandwidth::Select),
        _ => match s.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(Bandwidth::Fixed(v)),
            _ => Err(format!(
                "expected `auto`, `select` or a positive number, got `{s}`"
            )),
        },
    }
}

#[derive(clap::Args)]
struct TestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "kqic")]
    method: TestMethod,
    #[arg(long, value_enum, default_value = "gauss")]
    kernel: KernelArg,
    /// `auto` (median heuristic), `select` (power-proxy selection on a 20%
    /// split) or a fixed scale used for both kernels.
    #[arg(long, default_value = "auto", value_parser = parse_bandwidth)]
    bandwidth: Bandwidth,
    #[arg(long, default_value_t = 500)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "json")]
    output: OutputArg,
    /// Minimum events per group for the MinP tests.
    #[arg(long, default_value_t = 5)]
    min_events: usize,
    /// Permutations for the MinP tests.
    #[arg(long, default_value_t = 500)]
    permutations: usize,
}

#[derive(clap::Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    #[arg(long, default_value_t = 0.0)]
    param: f64,
    #[arg(long)]
    n: usize,
    /// Target censoring fraction in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    censoring: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "rate")]
    convention: ConventionArg,
}

#[derive(clap::Args)]
struct BenchmarkArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    output: OutputArg,
}

#[derive(clap::Args)]
struct RealdataArgs {
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated list, e.g. `KQIC_Gauss,KQIC_IMQ,WLR`.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "KQIC_Gauss,KQIC_IMQ,WLR,WLR_SC,MB,MinP1,MinP2"
    )]
    methods: Vec<String>,
    #[arg(long, default_value = "auto", value_parser = parse_bandwidth)]
    bandwidth: Bandwidth,
    #[arg(long, default_value_t = 500)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

enum Failure {
    Data(String),
    Config(String),
    Feasibility(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Data(_) => 1,
            Failure::Config(_) => 2,
            Failure::Feasibility(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Data(m) | Failure::Config(m) | Failure::Feasibility(m) => m,
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Data(m) => Failure::Data(m),
            HarnessError::Config(m) => Failure::Config(m),
            HarnessError::Feasibility(m) => Failure::Feasibility(m),
        }
    }
}

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<TestError> for Failure {
    fn from(e: TestError) -> Self {
        HarnessError::from(e).into()
    }
}

impl From<BaselineError> for Failure {
    fn from(e: BaselineError) -> Self {
        HarnessError::from(e).into()
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        HarnessError::from(e).into()
    }
}

fn read_dataset(path: &PathBuf) -> Result<TruncatedDataset, Failure> {
    let file = File::open(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    Ok(load_csv(file, &CsvSchema::default())?)
}

fn emit(out: &str) -> Result<(), Failure> {
    io::stdout()
        .write_all(out.as_bytes())
        .map_err(|e| Failure::Data(e.to_string()))
}

fn cmd_test(a: TestArgs) -> Result<(), Failure> {
    let data = read_dataset(&a.input)?;
    let (method, mut record) = match a.method {
        TestMethod::Kqic => {
            let family = a.kernel.family();
            let (kx, ky, tested) = match a.bandwidth {
                Bandwidth::Fixed(s) => {
                    let k =
                        KernelSpec::new(family, s).map_err(|e| Failure::Config(e.to_string()))?;
                    (k, k, data.clone())
                }
                Bandwidth::Auto => {
                    let (kx, ky) = median_kernels(&data, family)
                        .map_err(|e| Failure::Feasibility(e.to_string()))?;
                    (kx, ky, data.clone())
                }
                Bandwidth::Select => {
                    let cfg = SelectionConfig {
                        grid: Grid::median_scaled(family),
                        seed: a.seed,
                        ..Default::default()
                    };
                    let sel = select_or_fallback(&data, &cfg, family)
                        .map_err(|e| Failure::from(HarnessError::from(e)))?;
                    (sel.chosen.0, sel.chosen.1, sel.test_subset)
                }
            };
            let out = run_test(&tested, &kx, &ky, a.bootstrap, a.alpha, a.seed)?;
            let rec = json!({
                "statistic": out.statistic,
                "p_value": out.p_value,
                "threshold": out.threshold,
                "reject": out.reject,
                "n_tested": out.n,
                "kernel_x": kx.to_string(),
                "kernel_y": ky.to_string(),
            });
            ("KQIC", rec)
        }
        other => {
            let m = match other {
                TestMethod::Wlr => Method::Wlr,
                TestMethod::WlrSc => Method::WlrSc,
                TestMethod::Mb => Method::Mb,
                TestMethod::Minp1 => Method::MinP1,
                TestMethod::Minp2 => Method::MinP2,
                TestMethod::Kqic => unreachable!(),
            };
            let settings = MethodSettings {
                alpha: a.alpha,
                bootstrap_draws: a.bootstrap,
                selection: None,
                minp: MinPConfig {
                    min_events: a.min_events,
                    permutations: a.permutations,
                },
            };
            let r = run_method(m, &data, &settings, a.seed)?;
            let rec = json!({
                "statistic": r.statistic,
                "p_value": r.p_value,
                "reject": r.reject,
                "n_tested": r.n_tested,
            });
            (m.name(), rec)
        }
    };
    let obj = record.as_object_mut().expect("object");
    obj.insert("method".into(), json!(method));
    obj.insert("n".into(), json!(data.len()));
    obj.insert("alpha".into(), json!(a.alpha));
    obj.insert("seed".into(), json!(a.seed));
    match a.output {
        OutputArg::Json => emit(&format!(
            "{}\n",
            serde_json::to_string_pretty(&record).expect("json")
        )),
        OutputArg::Csv => emit(&format!(
            "method,n,statistic,p_value,reject,alpha,seed\n{},{},{},{},{},{},{}\n",
            method,
            obj["n"],
            obj["statistic"],
            obj["p_value"],
            obj["reject"],
            obj["alpha"],
            obj["seed"]
        )),
    }
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), Failure> {
    let kind = match a.model {
        ModelArg::Monotone => ModelKind::Monotone,
        ModelArg::Vshape => ModelKind::VShape,
        ModelArg::Periodic => ModelKind::Periodic,
        ModelArg::Depcens => ModelKind::DependentCensoring,
        ModelArg::Null => ModelKind::NullIndependent,
    };
    let convention = match a.convention {
        ConventionArg::Rate => ExpConvention::Rate,
        ConventionArg::Scale => ExpConvention::Scale,
    };
    if a.n == 0 {
        return Err(Failure::Config("--n must be at least 1".into()));
    }
    let model = GeneratorModel::new(kind, a.param, a.censoring)?.with_convention(convention);
    let data = gen_dataset(&model, a.n, a.seed)?;
    let mut buf = Vec::new();
    write_csv(&data, &mut buf)?;
    io::stdout()
        .write_all(&buf)
        .map_err(|e| Failure::Data(e.to_string()))
}

fn cmd_benchmark(a: BenchmarkArgs) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&a.config)
        .map_err(|e| Failure::Config(format!("{}: {e}", a.config.display())))?;
    let cfg: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| Failure::Config(e.to_string()))?;
    let report = run_benchmark(&cfg)?;
    let format = match a.output {
        OutputArg::Json => ReportFormat::Json,
        OutputArg::Csv => ReportFormat::Csv,
    };
    emit(&emit_report(&report, format))
}

fn cmd_realdata(a: RealdataArgs) -> Result<(), Failure> {
    let methods = a
        .methods
        .iter()
        .map(|s| s.parse::<Method>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(Failure::Config)?;
    let data = read_dataset(&a.input)?;
    let selection = match a.bandwidth {
        Bandwidth::Auto => None,
        Bandwidth::Select => Some(SelectionConfig::default()),
        Bandwidth::Fixed(_) => {
            return Err(Failure::Config(
                "realdata accepts --bandwidth auto or select".into(),
            ))
        }
    };
    let settings = MethodSettings {
        alpha: a.alpha,
        bootstrap_draws: a.bootstrap,
        selection,
        minp: MinPConfig::default(),
    };
    let report = run_realdata(&data, &methods, &settings, a.seed)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    emit(&format!(
        "{}\n",
        serde_json::to_string_pretty(&report).expect("json")
    ))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Test(a) => cmd_test(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Realdata(a) => cmd_realdata(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
