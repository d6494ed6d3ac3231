//! The `hdcov` command-line tool.
//!
//! Exit codes: 0 on success, 2 for invalid input or usage, 3 when a numeric
//! routine fails (e.g. a series does not converge).

pub mod io;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::centering::SampleMatrix;
use crate::error::Error;
use crate::estimators::{decompose, DecompositionReport, DecompositionTarget, Statistic};
use crate::inference::{permutation_test, t_test, Regime, TestResult};
use crate::kernels::{Bandwidth, KernelFamily, KernelSpec};
use crate::simlab::{self, Example, MethodSpec, MonteCarloConfig, ScenarioSpec};
use crate::specialfn::{degrees_v, power_inf_with, power_n_with, student_t_pdf, SeriesOptions};
use io::{fmt_f64, json_f64};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Invalid(_) => "validation",
            CliError::Numeric(_) => "numeric",
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_numeric() {
            CliError::Numeric(e.to_string())
        } else {
            CliError::Invalid(e.to_string())
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "hdcov", version, about = "Distance and kernel independence tests for high-dimensional data")]
pub struct Cli {
    /// Print errors on stderr as a JSON object.
    #[arg(long, global = true)]
    pub json_errors: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test independence of two samples given as CSV files.
    Test(TestArgs),
    /// Estimate rejection rates on a simulated scenario.
    Simulate(SimulateArgs),
    /// Evaluate the finite-sample and local-alternative power formulas.
    Power(PowerArgs),
    /// Split dCov (or scaled hCov) into its leading term and remainder.
    Diagnose(DiagnoseArgs),
    /// Emit studentized statistics under a null scenario, with a t density grid.
    NullSamples(NullArgs),
    /// Write one simulated data set as two CSV files.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KernelArg {
    Gaussian,
    Laplacian,
}

impl From<KernelArg> for KernelFamily {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Gaussian => KernelFamily::Gaussian,
            KernelArg::Laplacian => KernelFamily::Laplacian,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RegimeArg {
    Hdlss,
    Hdmss,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Hdlss => Regime::Hdlss,
            RegimeArg::Hdmss => Regime::Hdmss,
        }
    }
}

#[derive(Debug, Args)]
pub struct KernelOpts {
    /// Kernel for hcov/mhcov.
    #[arg(long, value_enum, default_value = "gaussian")]
    pub kernel: KernelArg,
    /// `median` or a positive number.
    #[arg(long, default_value = "median")]
    pub bandwidth: String,
}

impl KernelOpts {
    fn spec(&self) -> CliResult<KernelSpec> {
        let bw: Bandwidth = self.bandwidth.parse()?;
        Ok(KernelSpec::new(self.kernel.into(), bw)?)
    }
}

#[derive(Debug, Args)]
pub struct OutputOpts {
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub y: PathBuf,
    /// dcov, hcov, mdcov or mhcov, optionally prefixed by `t-` or `perm-`.
    #[arg(long, default_value = "dcov")]
    pub method: String,
    #[command(flatten)]
    pub kernel: KernelOpts,
    #[arg(long, value_enum, default_value = "hdlss")]
    pub regime: RegimeArg,
    /// Number of permutations; selects the permutation test when no prefix is given.
    #[arg(long)]
    pub permutations: Option<usize>,
    /// Levels at which decisions are reported.
    #[arg(long, default_value = "0.05")]
    pub alpha: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputOpts,
}

#[derive(Debug, Args)]
pub struct ScenarioOpts {
    /// Scenario name, e.g. ex1-i or ex4-iii.
    #[arg(long)]
    pub scenario: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: usize,
    /// Dimension of Y; defaults to p.
    #[arg(long)]
    pub q: Option<usize>,
}

impl ScenarioOpts {
    fn spec_with_p(&self, p: usize) -> CliResult<ScenarioSpec> {
        let example: Example = self.scenario.parse()?;
        let spec = ScenarioSpec::new(example, self.n, p)?;
        Ok(match self.q {
            Some(q) => spec.with_q(q)?,
            None => spec,
        })
    }

    fn spec(&self) -> CliResult<ScenarioSpec> {
        self.spec_with_p(self.p)
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioOpts,
    #[arg(long, default_value_t = 1000)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated methods such as t-dcov,perm-mhcov-laplacian; all twelve table methods by default.
    #[arg(long)]
    pub methods: Option<String>,
    #[arg(long, default_value = "0.01,0.05,0.1")]
    pub alpha: String,
    #[arg(long, default_value_t = 200)]
    pub permutations: usize,
    #[arg(long, value_enum, default_value = "hdlss")]
    pub regime: RegimeArg,
    #[command(flatten)]
    pub output: OutputOpts,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    /// Sample sizes.
    #[arg(long)]
    pub n: String,
    #[arg(long, default_value = "0.05")]
    pub alpha: String,
    /// Signal ratios in [0, 1).
    #[arg(long)]
    pub phi: Option<String>,
    /// Local-alternative signals; evaluated at phi = phi0/sqrt(v).
    #[arg(long)]
    pub phi0: Option<String>,
    /// Relative truncation tolerance of the series.
    #[arg(long, default_value = "1e-12")]
    pub series_tol: f64,
    /// Term budget of the series; exit code 3 when exceeded.
    #[arg(long, default_value_t = 10_000)]
    pub max_terms: usize,
    #[command(flatten)]
    pub output: OutputOpts,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TargetArg {
    Dcov,
    Hcov,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long, requires = "y", conflicts_with = "scenario")]
    pub x: Option<PathBuf>,
    #[arg(long, requires = "x")]
    pub y: Option<PathBuf>,
    #[arg(long, requires_all = ["n", "p"])]
    pub scenario: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    /// One or more dimensions (comma-separated) for scenario mode.
    #[arg(long)]
    pub p: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "dcov")]
    pub target: TargetArg,
    #[command(flatten)]
    pub kernel: KernelOpts,
    #[command(flatten)]
    pub output: OutputOpts,
}

#[derive(Debug, Args)]
pub struct NullArgs {
    #[arg(long, default_value = "ex1-i")]
    pub scenario: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated statistics: dcov, mdcov, hcov-gaussian, mhcov-laplacian, ...
    #[arg(long, default_value = "dcov")]
    pub methods: String,
    /// Where to write the t density grid; defaults to `<out>.density.csv`.
    #[arg(long)]
    pub density: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputOpts,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub scenario: ScenarioOpts,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub x_out: PathBuf,
    #[arg(long)]
    pub y_out: PathBuf,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            if cli.json_errors {
                eprintln!("{}", json!({"error": {"kind": e.kind(), "message": e.to_string()}}));
            } else {
                eprintln!("error: {e}");
            }
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Test(a) => cmd_test(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Power(a) => cmd_power(a),
        Command::Diagnose(a) => cmd_diagnose(a),
        Command::NullSamples(a) => cmd_null_samples(a),
        Command::Generate(a) => cmd_generate(a),
    }
}

fn read_matrix(path: &Path) -> CliResult<SampleMatrix> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", path.display())))?;
    io::parse_matrix(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

fn write_text(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Invalid(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Invalid(format!("cannot write output: {e}"))),
    }
}

fn emit(output: &OutputOpts, default: Format, json: impl FnOnce() -> Value, csv: impl FnOnce() -> String) -> CliResult<()> {
    let text = match output.format.unwrap_or(default) {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&json()).expect("serializable");
            s.push('\n');
            s
        }
        Format::Csv => csv(),
    };
    write_text(output.out.as_deref(), &text)
}

fn csv_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

/// Resolves `--method` into a statistic and whether to permute.
fn parse_test_method(method: &str, kernel: KernelSpec, permutations: Option<usize>) -> CliResult<(Statistic, bool)> {
    let m = method.trim().to_ascii_lowercase();
    let (base, permute) = if let Some(rest) = m.strip_prefix("perm-") {
        (rest, true)
    } else if let Some(rest) = m.strip_prefix("t-") {
        (rest, false)
    } else {
        (m.as_str(), permutations.is_some())
    };
    let stat = match base {
        "dcov" => Statistic::Dcov,
        "mdcov" => Statistic::Mdcov,
        "hcov" => Statistic::Hcov { kx: kernel, ky: kernel },
        "mhcov" => Statistic::Mhcov { kx: kernel, ky: kernel },
        other => {
            return Err(CliError::Invalid(format!(
                "unknown method '{other}' (expected dcov, hcov, mdcov or mhcov, optionally prefixed by t- or perm-)"
            )))
        }
    };
    Ok((stat, permute))
}

fn test_json(t: &TestResult, alphas: &[f64], n: usize, p: usize, q: usize) -> Value {
    let prefix = if t.seed.is_some() { "perm" } else { "t" };
    let decisions: Vec<Value> = t
        .decisions(alphas)
        .into_iter()
        .map(|(a, r)| json!({"alpha": json_f64(a), "reject": r}))
        .collect();
    let mut meta = Map::new();
    meta.insert("n".into(), json!(n));
    meta.insert("p".into(), json!(p));
    meta.insert("q".into(), json!(q));
    meta.insert("raw_statistic".into(), json_f64(t.raw));
    meta.insert("r_star".into(), t.r_star.map_or(Value::Null, json_f64));
    meta.insert("degenerate".into(), json!(t.degenerate));
    meta.insert("heuristic_reference".into(), json!(t.heuristic));
    if let Some((kx, _)) = t.statistic.kernels() {
        meta.insert("kernel".into(), json!(kx.family.name()));
        meta.insert("bandwidth".into(), json!(kx.bandwidth.to_string()));
    }
    json!({
        "method": format!("{prefix}-{}", t.statistic.label()),
        "statistic": json_f64(t.value),
        "v": t.v,
        "reference": t.reference.to_string(),
        "p_value": json_f64(t.p_value),
        "seed": t.seed,
        "decisions": decisions,
        "meta": meta,
    })
}

fn cmd_test(a: &TestArgs) -> CliResult<()> {
    let kernel = a.kernel.spec()?;
    let (stat, permute) = parse_test_method(&a.method, kernel, a.permutations)?;
    let alphas = io::parse_alpha_list(&a.alpha)?;
    let x = read_matrix(&a.x)?;
    let y = read_matrix(&a.y)?;
    if x.n() != y.n() {
        return Err(CliError::Invalid(format!(
            "row count mismatch: {} has {} rows, {} has {}",
            a.x.display(),
            x.n(),
            a.y.display(),
            y.n()
        )));
    }
    let result = if permute {
        let b = a.permutations.unwrap_or(200);
        permutation_test(&x, &y, &stat, b, a.seed)?
    } else {
        t_test(&x, &y, &stat, a.regime.into())?
    };
    let json = test_json(&result, &alphas, x.n(), x.d(), y.d());
    emit(&a.output, Format::Json, || json.clone(), || {
        let method = json["method"].as_str().unwrap_or_default().to_string();
        csv_table(
            &["method", "statistic", "v", "reference", "p_value", "seed"],
            &[vec![
                method,
                fmt_f64(result.value),
                result.v.to_string(),
                result.reference.to_string(),
                fmt_f64(result.p_value),
                result.seed.map(|s| s.to_string()).unwrap_or_default(),
            ]],
        )
    })
}

fn cmd_simulate(a: &SimulateArgs) -> CliResult<()> {
    let spec = a.scenario.spec()?;
    let methods = match &a.methods {
        Some(list) => list
            .split(',')
            .map(|m| m.parse::<MethodSpec>())
            .collect::<Result<Vec<_>, _>>()?,
        None => MethodSpec::table_methods(),
    };
    let config = MonteCarloConfig {
        spec,
        methods,
        alphas: io::parse_alpha_list(&a.alpha)?,
        replicates: a.replicates,
        permutations: a.permutations,
        regime: a.regime.into(),
        master_seed: a.seed,
    };
    let report = simlab::monte_carlo(&config)?;
    emit(
        &a.output,
        Format::Csv,
        || {
            let cells: Vec<Value> = report
                .methods
                .iter()
                .enumerate()
                .flat_map(|(i, m)| {
                    report.alphas.iter().enumerate().map(move |(j, &al)| (i, j, m, al))
                })
                .map(|(i, j, m, al)| {
                    json!({
                        "method": m,
                        "alpha": json_f64(al),
                        "rejections": report.rejections[i][j],
                        "rate": json_f64(report.rejection_rates[i][j]),
                        "stderr": json_f64(report.standard_errors[i][j]),
                    })
                })
                .collect();
            let mut params = Map::new();
            for (k, v) in &report.scenario.params {
                params.insert(k.clone(), json_f64(*v));
            }
            json!({
                "scenario": {
                    "name": report.scenario.example.name(),
                    "n": report.scenario.n,
                    "p": report.scenario.p,
                    "q": report.scenario.q,
                    "params": params,
                },
                "replicates": report.replicates,
                "failures": report.failures,
                "failure_messages": report.failure_messages,
                "permutations": report.permutations,
                "regime": report.regime.name(),
                "seed": report.master_seed,
                "rng": report.rng,
                "wall_time": json_f64(report.wall_time),
                "results": cells,
            })
        },
        || {
            let mut rows = Vec::new();
            for (i, m) in report.methods.iter().enumerate() {
                for (j, &al) in report.alphas.iter().enumerate() {
                    rows.push(vec![
                        m.clone(),
                        fmt_f64(al),
                        fmt_f64(report.rejection_rates[i][j]),
                        fmt_f64(report.standard_errors[i][j]),
                        (report.replicates - report.failures).to_string(),
                        report.master_seed.to_string(),
                    ]);
                }
            }
            csv_table(&["method", "alpha", "rate", "stderr", "replicates", "seed"], &rows)
        },
    )
}

struct PowerRow {
    phi: f64,
    n: usize,
    alpha: f64,
    power_n: f64,
    local: Option<(f64, f64)>,
}

fn cmd_power(a: &PowerArgs) -> CliResult<()> {
    let ns = io::parse_usize_list(&a.n)?;
    let alphas = io::parse_alpha_list(&a.alpha)?;
    let phis = a.phi.as_deref().map(io::parse_f64_list).transpose()?;
    let phi0s = a.phi0.as_deref().map(io::parse_f64_list).transpose()?;
    if phis.is_none() && phi0s.is_none() {
        return Err(CliError::Invalid("give --phi and/or --phi0".into()));
    }
    if let Some(bad) = phis.iter().flatten().find(|p| !(0.0..1.0).contains(*p)) {
        return Err(CliError::Invalid(format!("phi {bad} is not in [0, 1)")));
    }
    if let Some(bad) = phi0s.iter().flatten().find(|p| **p < 0.0) {
        return Err(CliError::Invalid(format!("phi0 {bad} is negative")));
    }
    if !(a.series_tol > 0.0 && a.series_tol < 1.0) || a.max_terms == 0 {
        return Err(CliError::Invalid("--series-tol must be in (0, 1) and --max-terms positive".into()));
    }
    let opts = SeriesOptions { tol: a.series_tol, max_terms: a.max_terms };
    let mut rows = Vec::new();
    for &n in &ns {
        for &alpha in &alphas {
            for &phi in phis.iter().flatten() {
                rows.push(PowerRow { phi, n, alpha, power_n: power_n_with(phi, n, alpha, opts)?, local: None });
            }
            for &phi0 in phi0s.iter().flatten() {
                let phi = phi0 / (degrees_v(n) as f64).sqrt();
                if phi >= 1.0 {
                    return Err(CliError::Invalid(format!("phi0 {phi0} gives phi = {phi} >= 1 at n = {n}")));
                }
                rows.push(PowerRow {
                    phi,
                    n,
                    alpha,
                    power_n: power_n_with(phi, n, alpha, opts)?,
                    local: Some((phi0, power_inf_with(phi0, n, alpha, opts)?)),
                });
            }
        }
    }
    let with_local = phi0s.is_some();
    emit(
        &a.output,
        Format::Csv,
        || {
            Value::Array(
                rows.iter()
                    .map(|r| {
                        let mut m = Map::new();
                        m.insert("phi".into(), json_f64(r.phi));
                        m.insert("n".into(), json!(r.n));
                        m.insert("alpha".into(), json_f64(r.alpha));
                        m.insert("power_n".into(), json_f64(r.power_n));
                        if let Some((phi0, pi)) = r.local {
                            m.insert("phi0".into(), json_f64(phi0));
                            m.insert("power_inf".into(), json_f64(pi));
                        }
                        Value::Object(m)
                    })
                    .collect(),
            )
        },
        || {
            let mut header = vec!["phi", "n", "alpha", "power_n"];
            if with_local {
                header.extend(["phi0", "power_inf"]);
            }
            let body: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    let mut v = vec![fmt_f64(r.phi), r.n.to_string(), fmt_f64(r.alpha), fmt_f64(r.power_n)];
                    if with_local {
                        match r.local {
                            Some((phi0, pi)) => v.extend([fmt_f64(phi0), fmt_f64(pi)]),
                            None => v.extend([String::new(), String::new()]),
                        }
                    }
                    v
                })
                .collect();
            csv_table(&header, &body)
        },
    )
}

fn report_json(r: &DecompositionReport) -> Value {
    json!({
        "statistic": json_f64(r.statistic),
        "leading": json_f64(r.leading_term),
        "remainder": json_f64(r.remainder),
        "ratio": r.ratio().map_or(Value::Null, json_f64),
        "tau_hat": json_f64(r.tau_hat),
        "tau_x": json_f64(r.tau_x),
        "tau_y": json_f64(r.tau_y),
        "gamma_x": r.gamma_x.map_or(Value::Null, json_f64),
        "gamma_y": r.gamma_y.map_or(Value::Null, json_f64),
        "degenerate": r.degenerate,
    })
}

fn report_row(label: String, r: &DecompositionReport) -> Vec<String> {
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    vec![
        label,
        fmt_f64(r.statistic),
        fmt_f64(r.leading_term),
        fmt_f64(r.remainder),
        opt(r.ratio()),
        fmt_f64(r.tau_hat),
        opt(r.gamma_x),
        opt(r.gamma_y),
        r.degenerate.to_string(),
    ]
}

const REPORT_HEADER: [&str; 9] = [
    "label", "statistic", "leading", "remainder", "ratio", "tau_hat", "gamma_x", "gamma_y", "degenerate",
];

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

fn cmd_diagnose(a: &DiagnoseArgs) -> CliResult<()> {
    let kernel = a.kernel.spec()?;
    let target = match a.target {
        TargetArg::Dcov => DecompositionTarget::Dcov,
        TargetArg::Hcov => DecompositionTarget::ScaledHcov { kx: kernel, ky: kernel },
    };
    if let (Some(xp), Some(yp)) = (&a.x, &a.y) {
        let x = read_matrix(xp)?;
        let y = read_matrix(yp)?;
        if x.n() != y.n() {
            return Err(CliError::Invalid(format!("row count mismatch: {} vs {}", x.n(), y.n())));
        }
        let r = decompose(&x, &y, target)?;
        return emit(&a.output, Format::Json, || report_json(&r), || {
            csv_table(&REPORT_HEADER, &[report_row("data".into(), &r)])
        });
    }
    let Some(scenario) = &a.scenario else {
        return Err(CliError::Invalid("give either --x/--y or --scenario/--n/--p".into()));
    };
    if a.replicates == 0 {
        return Err(CliError::Invalid("replicates must be at least 1".into()));
    }
    let ps = io::parse_usize_list(a.p.as_deref().unwrap_or_default())?;
    let opts = ScenarioOpts {
        scenario: scenario.clone(),
        n: a.n.unwrap_or_default(),
        p: ps[0],
        q: None,
    };
    let mut sweeps = Vec::new();
    for &p in &ps {
        let spec = opts.spec_with_p(p)?;
        let reports: Vec<DecompositionReport> = simlab::map_replicates(&spec, a.replicates, a.seed, |_, x, y, _| {
            decompose(x, y, target)
        })?
        .into_iter()
        .collect::<Result<_, _>>()?;
        let med = median(reports.iter().filter_map(DecompositionReport::ratio).collect());
        sweeps.push((p, med, reports));
    }
    emit(
        &a.output,
        Format::Json,
        || {
            let entries: Vec<Value> = sweeps
                .iter()
                .map(|(p, med, reports)| {
                    json!({
                        "p": p,
                        "median_ratio": med.map_or(Value::Null, json_f64),
                        "reports": reports.iter().map(report_json).collect::<Vec<_>>(),
                    })
                })
                .collect();
            json!({
                "scenario": scenario,
                "n": a.n,
                "replicates": a.replicates,
                "seed": a.seed,
                "sweep": entries,
            })
        },
        || {
            let mut rows = Vec::new();
            for (p, _, reports) in &sweeps {
                for (r, rep) in reports.iter().enumerate() {
                    rows.push(report_row(format!("p={p};replicate={r}"), rep));
                }
            }
            csv_table(&REPORT_HEADER, &rows)
        },
    )
}

fn density_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".density.csv");
    PathBuf::from(s)
}

fn cmd_null_samples(a: &NullArgs) -> CliResult<()> {
    if a.replicates == 0 {
        return Err(CliError::Invalid("replicates must be at least 1".into()));
    }
    let opts = ScenarioOpts {
        scenario: a.scenario.clone(),
        n: a.n,
        p: a.p,
        q: a.q,
    };
    let spec = opts.spec()?;
    let stats = a
        .methods
        .split(',')
        .map(|m| m.parse::<Statistic>())
        .collect::<Result<Vec<_>, _>>()?;
    let samples = simlab::null_samples(&spec, &stats, a.replicates, a.seed)?;
    let nu = degrees_v(a.n) as f64 - 1.0;
    let grid: Vec<(f64, f64)> = (0..=1000)
        .map(|k| {
            let x = -5.0 + 0.01 * k as f64;
            (x, student_t_pdf(x, nu))
        })
        .collect();
    let labels: Vec<String> = stats.iter().map(Statistic::label).collect();
    emit(
        &a.output,
        Format::Csv,
        || {
            let mut m = Map::new();
            for (label, vals) in labels.iter().zip(&samples) {
                m.insert(label.clone(), Value::Array(vals.iter().map(|&v| json_f64(v)).collect()));
            }
            json!({
                "df": json_f64(nu),
                "samples": m,
                "density": grid.iter().map(|(x, d)| json!([json_f64(*x), json_f64(*d)])).collect::<Vec<_>>(),
            })
        },
        || {
            let mut rows = Vec::new();
            for (label, vals) in labels.iter().zip(&samples) {
                for v in vals {
                    rows.push(vec![fmt_f64(*v), label.clone()]);
                }
            }
            csv_table(&["statistic", "method"], &rows)
        },
    )?;
    let sidecar = a.density.clone().or_else(|| a.output.out.as_deref().map(density_path));
    if let Some(path) = sidecar {
        let rows: Vec<Vec<String>> = grid.iter().map(|(x, d)| vec![fmt_f64(*x), fmt_f64(*d)]).collect();
        write_text(Some(&path), &csv_table(&["x", "density"], &rows))?;
    }
    Ok(())
}

fn cmd_generate(a: &GenerateArgs) -> CliResult<()> {
    let spec = a.scenario.spec()?;
    let (x, y) = simlab::generate(&spec, a.seed)?;
    write_text(Some(&a.x_out), &io::write_matrix(&x))?;
    write_text(Some(&a.y_out), &io::write_matrix(&y))
}
