//! Command-line front end.
//!
//! Every subcommand prints CSV (default) or JSON to stdout or `--output`.
//! `--config <file>` reads `key=value` lines that act as flags placed before
//! the ones on the command line, so explicit flags win.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::calibration::{calibrate, linspace, write_diagnostics_csv, CalibrationGrid};
use crate::comparison::{
    compare_exponential, compare_truncated, kappa_prime_curve, write_comparison_csv, write_kappa_curve_csv, MeanEvents,
    SeverityShape, SweepSpec,
};
use crate::error::{Error, Result};
use crate::format::sig10;
use crate::loss_models::{
    erlang_quantile, solve_lambda_from_mean, trunc_quantile, var_aggregate, ConvolutionLoss, PoissonFrequency,
    QuantileMethod, SeveritySpec,
};
use crate::mc_oracle::{
    empirical_quantile, simulate_losses_with_threads, write_samples, SimulationMode, SimulationSpec,
};
use crate::quantile_approx::{gamma_quantile_approx, CorrectionModel, GammaParams};
use crate::reports::{error_grid, reference_comparison, write_error_grid_csv, write_reference_comparison_csv};

#[derive(Debug, Parser)]
#[command(
    name = "credit-var",
    version,
    about = "Closed-form credit portfolio VaR",
    args_override_self = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write the report here instead of stdout
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// key=value file of default flags
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelArg {
    /// Correction-model JSON (default: built-in calibrated model)
    #[arg(long)]
    pub model: Option<PathBuf>,
}

impl ModelArg {
    fn load(&self) -> Result<CorrectionModel> {
        match &self.model {
            Some(p) => CorrectionModel::load(p),
            None => Ok(CorrectionModel::default()),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form and exact Gamma quantile
    Quantile(QuantileArgs),
    /// Relative error grid over u × alpha at unit rate
    ReportTable1(ErrorGridArgs),
    /// Exponential vs truncated exponential severities at N = mu = 500
    ReportTable2(ReferenceComparisonArgs),
    /// Single-loss vs aggregate-loss quantile sweep
    Compare(CompareArgs),
    /// Effective confidence level of the truncated model over C and N
    KappaCurve(KappaCurveArgs),
    /// Re-derive the correction model from scratch
    Calibrate(CalibrateArgs),
    /// Monte Carlo check of a closed-form quantile
    McValidate(McArgs),
}

#[derive(Debug, Args)]
pub struct QuantileArgs {
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long)]
    pub u: f64,
    /// Print the exact quantile only
    #[arg(long)]
    pub oracle_only: bool,
    #[command(flatten)]
    pub model: ModelArg,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ErrorGridArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ReferenceComparisonArgs {
    /// Per-severity Gamma shape: `mu` (unit rate) or a number
    #[arg(long, default_value = "mu")]
    pub alpha_unit: SeverityShape,
    /// Expected event count for the confidence shift: `n` or `n+sqrt`
    #[arg(long, default_value = "n")]
    pub enmean: MeanEvents,
    #[command(flatten)]
    pub model: ModelArg,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CompareMode {
    Exp,
    Trunc,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub mode: CompareMode,
    /// Portfolio sizes, e.g. `100..2000:100` or `500,1000`
    #[arg(long, default_value = "100..2000:100")]
    pub n_list: String,
    #[arg(long, default_value = "200,500")]
    pub mu_list: String,
    /// Gross exposures (truncated mode)
    #[arg(long = "L-list", alias = "l-list")]
    pub l_list: Option<String>,
    #[arg(long, default_value_t = 0.995)]
    pub kappa: f64,
    #[arg(long, default_value = "mu")]
    pub alpha_unit: SeverityShape,
    #[arg(long, default_value = "n")]
    pub enmean: MeanEvents,
    #[command(flatten)]
    pub model: ModelArg,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct KappaCurveArgs {
    /// Exposure multiples C = L·λ'
    #[arg(long, default_value = "1..20:0.5")]
    pub c_list: String,
    #[arg(long, default_value = "100,500,1000")]
    pub n_list: String,
    #[arg(long, default_value_t = 0.995)]
    pub kappa: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long, default_value = "1..100")]
    pub alpha_list: String,
    #[arg(long, default_value_t = 0.9)]
    pub u_min: f64,
    #[arg(long, default_value_t = 0.999)]
    pub u_max: f64,
    #[arg(long, default_value_t = 100)]
    pub u_count: usize,
    #[arg(long, default_value_t = 0.05)]
    pub p_min: f64,
    #[arg(long, default_value_t = 1.5)]
    pub p_max: f64,
    #[arg(long, default_value_t = 0.01)]
    pub p_step: f64,
    /// Where to write the fitted model JSON
    #[arg(long, default_value = "model.json")]
    pub out_model: PathBuf,
    /// Where to write the per-cell optimum diagnostics
    #[arg(long, default_value = "calibration_diagnostics.csv")]
    pub diagnostics: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum McMode {
    /// N obligors, Bernoulli defaults
    Single,
    /// Poisson count of Gamma losses
    Compound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum McSeverity {
    Exp,
    Trunc,
    Gamma,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long, value_enum, default_value_t = McMode::Single)]
    pub mode: McMode,
    #[arg(long, value_enum, default_value_t = McSeverity::Exp)]
    pub severity: McSeverity,
    /// Number of obligors (single mode)
    #[arg(long, default_value_t = 500)]
    pub n: u32,
    #[arg(long, default_value_t = 1.0)]
    pub default_prob: f64,
    /// Poisson mean (compound mode)
    #[arg(long, default_value_t = 500.0)]
    pub mean_events: f64,
    /// Exponential rate λ'
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Severity mean; for truncated severities the rate is solved from it
    #[arg(long)]
    pub mu: Option<f64>,
    /// Gross exposure (truncated severities)
    #[arg(long = "L", alias = "l")]
    pub gross_exposure: Option<f64>,
    /// Gamma severity shape and rate (compound mode)
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = 0.995)]
    pub kappa: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads (0 = all cores); never changes the output
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Largest accepted relative gap between closed form and simulation
    #[arg(long, default_value_t = 0.02)]
    pub tol: f64,
    /// Dump every simulated loss to this file
    #[arg(long)]
    pub dump: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArg,
    #[command(flatten)]
    pub common: Common,
}

/// Parses `a`, `a,b,c`, `a..b` and `a..b:step` (inclusive) lists.
pub fn parse_list<T>(text: &str) -> Result<Vec<T>>
where
    T: FromStr + Copy + Into<f64> + PartialOrd,
{
    let bad = |part: &str| Error::Invalid(format!("cannot parse list element `{part}`"));
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let Some((lo, rest)) = part.split_once("..") else {
            out.push(part.parse::<T>().map_err(|_| bad(part))?);
            continue;
        };
        let (hi, step) = match rest.split_once(':') {
            Some((hi, step)) => (hi, Some(step)),
            None => (rest, None),
        };
        let lo_v: T = lo.trim().parse().map_err(|_| bad(part))?;
        let hi_v: T = hi.trim().parse().map_err(|_| bad(part))?;
        let step_f: f64 = match step {
            Some(s) => s.trim().parse::<T>().map_err(|_| bad(part))?.into(),
            None => 1.0,
        };
        let (lo_f, hi_f) = (lo_v.into(), hi_v.into());
        if !(step_f > 0.0) || hi_f < lo_f {
            return Err(Error::Invalid(format!(
                "range `{part}` needs lo <= hi and a positive step"
            )));
        }
        let count = ((hi_f - lo_f) / step_f + 1e-9).floor() as usize;
        if count > 10_000_000 {
            return Err(Error::Invalid(format!("range `{part}` is too long")));
        }
        for k in 0..=count {
            let v = lo_f + k as f64 * step_f;
            out.push(v.to_string().parse::<T>().map_err(|_| bad(part))?);
        }
    }
    if out.is_empty() {
        return Err(Error::Invalid("empty list".into()));
    }
    Ok(out)
}

/// Reads `key=value` lines (blank lines and `#` comments skipped) into
/// `--key value` arguments. `true`/`false` values toggle switches.
pub fn config_args(text: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Invalid(format!("config line {} is not key=value: `{line}`", i + 1)))?;
        let key = key.trim().trim_start_matches("--");
        if key.is_empty() || key == "config" {
            return Err(Error::Invalid(format!("config line {}: invalid key `{key}`", i + 1)));
        }
        match value.trim() {
            "true" => out.push(format!("--{key}")),
            "false" => {}
            v => {
                out.push(format!("--{key}"));
                out.push(v.to_string());
            }
        }
    }
    Ok(out)
}

/// Splices config-file flags in right after the subcommand name.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--config" {
            path = args.get(i + 1).map(PathBuf::from);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        }
    }
    let Some(path) = path else { return Ok(args) };
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let extra = config_args(&text)?;
    let sub = args
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|p| p + 2)
        .unwrap_or(args.len());
    let mut out = args[..sub].to_vec();
    out.extend(extra.into_iter().map(OsString::from));
    out.extend_from_slice(&args[sub..]);
    Ok(out)
}

fn sink(common: &Common) -> Result<Box<dyn Write>> {
    Ok(match &common.output {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit_json<T: Serialize + ?Sized>(value: &T, out: &mut dyn Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct QuantileReport {
    u: f64,
    alpha: f64,
    beta: f64,
    approx: Option<f64>,
    exact: f64,
    rel_err_pct: Option<f64>,
    warn: bool,
}

fn cmd_quantile(a: &QuantileArgs) -> Result<bool> {
    let params = GammaParams::new(a.alpha, a.beta)?;
    let exact = params.quantile_exact(a.u)?;
    let approx = if a.oracle_only {
        None
    } else {
        Some(gamma_quantile_approx(a.u, &params, &a.model.load()?)?)
    };
    let report = QuantileReport {
        u: a.u,
        alpha: a.alpha,
        beta: a.beta,
        approx: approx.map(|q| q.value),
        exact,
        rel_err_pct: approx.map(|q| 100.0 * (q.value - exact) / exact),
        warn: approx.is_some_and(|q| q.is_flagged()),
    };
    if let Some(w) = approx.and_then(|q| q.warning) {
        eprintln!("warning: {w}");
    }
    let mut out = sink(&a.common)?;
    match a.common.format {
        Format::Json => emit_json(&report, &mut out)?,
        Format::Csv => {
            let opt = |x: Option<f64>| x.map(sig10).unwrap_or_default();
            writeln!(out, "u,alpha,beta,approx,exact,rel_err_pct,warn")?;
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                sig10(report.u),
                sig10(report.alpha),
                sig10(report.beta),
                opt(report.approx),
                sig10(report.exact),
                opt(report.rel_err_pct),
                u8::from(report.warn)
            )?;
        }
    }
    out.flush()?;
    Ok(true)
}

fn cmd_error_grid(a: &ErrorGridArgs) -> Result<bool> {
    let rows = error_grid(&a.model.load()?)?;
    let mut out = sink(&a.common)?;
    match a.common.format {
        Format::Json => emit_json(&rows, &mut out)?,
        Format::Csv => write_error_grid_csv(&rows, &mut out)?,
    }
    out.flush()?;
    Ok(true)
}

fn cmd_reference_comparison(a: &ReferenceComparisonArgs) -> Result<bool> {
    let rows = reference_comparison(&a.model.load()?, a.alpha_unit, a.enmean)?;
    let mut out = sink(&a.common)?;
    match a.common.format {
        Format::Json => emit_json(&rows, &mut out)?,
        Format::Csv => write_reference_comparison_csv(&rows, &mut out)?,
    }
    out.flush()?;
    Ok(true)
}

fn cmd_compare(a: &CompareArgs) -> Result<bool> {
    let spec = SweepSpec {
        n_values: parse_list::<u32>(&a.n_list)?,
        mu_values: parse_list::<f64>(&a.mu_list)?,
        l_values: a.l_list.as_deref().map(parse_list::<f64>).transpose()?,
        kappa: a.kappa,
        alpha_unit: a.alpha_unit,
        mean_events: a.enmean,
    };
    let model = a.model.load()?;
    let rows = match a.mode {
        CompareMode::Exp => compare_exponential(&spec, &model)?,
        CompareMode::Trunc => compare_truncated(&spec, &model)?,
    };
    let mut out = sink(&a.common)?;
    match a.common.format {
        Format::Json => emit_json(&rows, &mut out)?,
        Format::Csv => write_comparison_csv(&rows, &mut out)?,
    }
    out.flush()?;
    Ok(true)
}

fn cmd_kappa_curve(a: &KappaCurveArgs) -> Result<bool> {
    let points = kappa_prime_curve(&parse_list::<f64>(&a.c_list)?, &parse_list::<u32>(&a.n_list)?, a.kappa)?;
    let mut out = sink(&a.common)?;
    match a.common.format {
        Format::Json => emit_json(&points, &mut out)?,
        Format::Csv => write_kappa_curve_csv(&points, &mut out)?,
    }
    out.flush()?;
    Ok(true)
}

#[derive(Debug, Serialize)]
struct CalibrationSummary {
    model_path: String,
    diagnostics_path: String,
    levels: usize,
    shapes: usize,
    min_r_squared: f64,
    boundary_hits: usize,
    a_095: f64,
    b_095: f64,
}

fn cmd_calibrate(a: &CalibrateArgs) -> Result<bool> {
    if a.u_count == 0 {
        return Err(Error::Invalid("need at least one confidence level".into()));
    }
    let grid = CalibrationGrid {
        alphas: parse_list::<f64>(&a.alpha_list)?,
        us: linspace(a.u_min, a.u_max, a.u_count),
        p_min: a.p_min,
        p_max: a.p_max,
        p_step: a.p_step,
    };
    let result = calibrate(&grid)?;
    result.model.save(&a.out_model)?;
    let diag = File::create(&a.diagnostics).map_err(|e| Error::Io(format!("{}: {e}", a.diagnostics.display())))?;
    let mut diag = BufWriter::new(diag);
    write_diagnostics_csv(&mut diag, &grid, &result)?;
    diag.flush()?;

    let summary = CalibrationSummary {
        model_path: a.out_model.display().to_string(),
        diagnostics_path: a.diagnostics.display().to_string(),
        levels: grid.us.len(),
        shapes: grid.alphas.len(),
        min_r_squared: result.min_r_squared(),
        boundary_hits: result.boundary_hits(),
        a_095: result.model.a(0.95),
        b_095: result.model.b(0.95),
    };
    let mut out = sink(&a.common)?;
    match a.common.format {
        Format::Json => emit_json(&summary, &mut out)?,
        Format::Csv => {
            writeln!(
                out,
                "model,diagnostics,levels,shapes,min_r_squared,boundary_hits,a_095,b_095"
            )?;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                summary.model_path,
                summary.diagnostics_path,
                summary.levels,
                summary.shapes,
                sig10(summary.min_r_squared),
                summary.boundary_hits,
                sig10(summary.a_095),
                sig10(summary.b_095)
            )?;
        }
    }
    out.flush()?;
    Ok(true)
}

#[derive(Debug, Serialize)]
struct McReport {
    mode: &'static str,
    severity: &'static str,
    paths: usize,
    seed: u64,
    kappa: f64,
    empirical: f64,
    ci_low: f64,
    ci_high: f64,
    closed_form: f64,
    rel_gap: f64,
    /// Exact quantile where one is available (Erlang and Gamma cases).
    oracle: Option<f64>,
    oracle_in_ci: Option<bool>,
    tol: f64,
    pass: bool,
}

fn mc_severity(a: &McArgs) -> Result<SeveritySpec> {
    let need = |what: &str| Error::Invalid(format!("--{what} is required for this severity"));
    Ok(match a.severity {
        McSeverity::Exp => {
            let lambda = match (a.lambda, a.mu) {
                (Some(l), _) => l,
                (None, Some(mu)) => 1.0 / mu,
                (None, None) => return Err(need("lambda")),
            };
            SeveritySpec::Exponential { lambda }
        }
        McSeverity::Trunc => {
            let l = a.gross_exposure.ok_or_else(|| need("L"))?;
            let lambda = match (a.lambda, a.mu) {
                (Some(lambda), _) => lambda,
                (None, Some(mu)) => solve_lambda_from_mean(mu, l)?,
                (None, None) => return Err(need("lambda")),
            };
            SeveritySpec::TruncatedExponential {
                lambda,
                gross_exposure: l,
            }
        }
        McSeverity::Gamma => {
            let beta = match (a.beta, a.mu) {
                (Some(b), _) => b,
                (None, Some(mu)) => a.alpha / mu,
                (None, None) => return Err(need("beta")),
            };
            SeveritySpec::Gamma(GammaParams::new(a.alpha, beta)?)
        }
    })
}

fn cmd_mc_validate(a: &McArgs) -> Result<bool> {
    let severity = mc_severity(a)?;
    let model = a.model.load()?;
    let (mode, closed_form, oracle) = match (a.mode, severity) {
        (McMode::Single, SeveritySpec::Gamma(_)) => {
            return Err(Error::Invalid("single-loss mode takes exp or trunc severities".into()))
        }
        (McMode::Single, _) if a.default_prob < 1.0 => {
            return Err(Error::Invalid(
                "closed forms assume every obligor defaults; use --default-prob 1".into(),
            ))
        }
        (McMode::Single, SeveritySpec::Exponential { lambda }) => {
            let conv = ConvolutionLoss::exponential(a.n, lambda)?;
            let q = erlang_quantile(a.kappa, &conv, &model)?.value;
            let exact = conv.erlang_params().quantile_exact(a.kappa)?;
            (
                SimulationMode::SingleLoss {
                    n_obligors: a.n,
                    default_prob: 1.0,
                },
                q,
                Some(exact),
            )
        }
        (McMode::Single, SeveritySpec::TruncatedExponential { lambda, gross_exposure }) => {
            let conv = ConvolutionLoss::truncated(a.n, lambda, gross_exposure)?;
            let q = trunc_quantile(a.kappa, &conv, &model)?.value;
            (
                SimulationMode::SingleLoss {
                    n_obligors: a.n,
                    default_prob: 1.0,
                },
                q,
                None,
            )
        }
        (McMode::Compound, SeveritySpec::Gamma(g)) => {
            let freq = PoissonFrequency::new(a.mean_events)?;
            let q = var_aggregate(a.kappa, &freq, &g, &model, QuantileMethod::Approximation)?.value;
            let exact = var_aggregate(a.kappa, &freq, &g, &model, QuantileMethod::Exact)?.value;
            (
                SimulationMode::Compound {
                    mean_events: a.mean_events,
                },
                q,
                Some(exact),
            )
        }
        (McMode::Compound, _) => return Err(Error::Invalid("compound mode takes gamma severities".into())),
    };
    if !(a.tol >= 0.0) {
        return Err(Error::Invalid(format!("tolerance must be nonnegative, got {}", a.tol)));
    }

    let spec = SimulationSpec {
        mode,
        severity,
        n_paths: a.paths,
        seed: a.seed,
    };
    let samples = simulate_losses_with_threads(&spec, a.threads)?;
    let est = empirical_quantile(&samples, a.kappa)?;
    if let Some(path) = &a.dump {
        let f = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut w = BufWriter::new(f);
        write_samples(&samples, &mut w)?;
        w.flush()?;
    }

    let rel_gap = (closed_form - est.point) / est.point;
    let oracle_in_ci = oracle.map(|q| est.contains(q));
    let pass = rel_gap.abs() <= a.tol && oracle_in_ci.unwrap_or(true);
    let report = McReport {
        mode: match a.mode {
            McMode::Single => "single",
            McMode::Compound => "compound",
        },
        severity: match a.severity {
            McSeverity::Exp => "exp",
            McSeverity::Trunc => "trunc",
            McSeverity::Gamma => "gamma",
        },
        paths: a.paths,
        seed: a.seed,
        kappa: a.kappa,
        empirical: est.point,
        ci_low: est.ci_low,
        ci_high: est.ci_high,
        closed_form,
        rel_gap,
        oracle,
        oracle_in_ci,
        tol: a.tol,
        pass,
    };
    let mut out = sink(&a.common)?;
    match a.common.format {
        Format::Json => emit_json(&report, &mut out)?,
        Format::Csv => {
            writeln!(
                out,
                "mode,severity,paths,seed,kappa,empirical,ci_low,ci_high,closed_form,rel_gap,oracle,oracle_in_ci,tol,status"
            )?;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                report.mode,
                report.severity,
                report.paths,
                report.seed,
                sig10(report.kappa),
                sig10(report.empirical),
                sig10(report.ci_low),
                sig10(report.ci_high),
                sig10(report.closed_form),
                sig10(report.rel_gap),
                report.oracle.map(sig10).unwrap_or_default(),
                report.oracle_in_ci.map(|b| u8::from(b).to_string()).unwrap_or_default(),
                sig10(report.tol),
                if pass { "PASS" } else { "FAIL" }
            )?;
        }
    }
    out.flush()?;
    Ok(pass)
}

/// Runs one command. `Ok(false)` means the command ran but a requested
/// tolerance was not met.
pub fn execute(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Quantile(a) => cmd_quantile(a),
        Command::ReportTable1(a) => cmd_error_grid(a),
        Command::ReportTable2(a) => cmd_reference_comparison(a),
        Command::Compare(a) => cmd_compare(a),
        Command::KappaCurve(a) => cmd_kappa_curve(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::McValidate(a) => cmd_mc_validate(a),
    }
}

/// Full entry point: config expansion, parsing, execution. Returns the
/// process exit code (0 ok, 1 tolerance failed, 2 usage or runtime error).
pub fn main_with_args(args: impl IntoIterator<Item = OsString>) -> i32 {
    let args = match expand_config(args.into_iter().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
