//! Command-line front end.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use crate::additive::{backfit, AdditiveConfig, AdditiveSample, VariableMethods};
use crate::distortion::{DistortedSample, DistortionMethod, ZeroDetection};
use crate::error::Error;
use crate::estimator::{MethodTag, RegressionFit};
use crate::pipeline::{detect_zeros, fit_adjusted, fit_naive_auto, fit_oracle_auto, GridSpec, Tuning};
use crate::simulate::{
    catalog, check_applicable, find_model, generate_sample, run_study, write_summary_csv,
    StudyConfig,
};
use crate::smoothing::{mean, sample_sd};

#[derive(Debug, Parser)]
#[command(name = "covadj", version, about = "Covariate-adjusted nonparametric regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the regression curve from a CSV of (u, x_tilde, y_tilde).
    Fit(FitArgs),
    /// Run a Monte Carlo study on a catalog model.
    Simulate(SimulateArgs),
    /// Report the estimated sign changes of both distortions.
    Zeros(ZerosArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Auto,
    New1,
    New2,
    New3,
    Naive,
    Oracle,
}

impl MethodArg {
    fn tag(self) -> Option<MethodTag> {
        Some(match self {
            MethodArg::Auto => return None,
            MethodArg::New1 => MethodTag::New1,
            MethodArg::New2 => MethodTag::New2,
            MethodArg::New3 => MethodTag::New3,
            MethodArg::Naive => MethodTag::Naive,
            MethodArg::Oracle => MethodTag::Oracle,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct TuningArgs {
    /// Smoothing bandwidth of the predictor distortion.
    #[arg(long, value_parser = positive)]
    pub g1: Option<f64>,
    /// Smoothing bandwidth of the response distortion.
    #[arg(long, value_parser = positive)]
    pub g2: Option<f64>,
    /// Bandwidth of the final regression.
    #[arg(long, value_parser = positive)]
    pub h: Option<f64>,
    #[arg(long, value_parser = nonnegative)]
    pub rho1: Option<f64>,
    #[arg(long, value_parser = nonnegative)]
    pub rho2: Option<f64>,
    /// Share of lowest-density u observations left out of the final fit.
    #[arg(long, default_value_t = 0.05, value_parser = trim_fraction)]
    pub trim: f64,
    /// 0 for Nadaraya-Watson, 1 for local linear.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(0..=1))]
    pub degree: u8,
    /// Slope-jump threshold of the sign-change detector, in standard errors.
    #[arg(long, default_value_t = 2.0, value_parser = positive)]
    pub kappa: f64,
    /// Largest number of blocks of the quartic pilot behind the final
    /// bandwidth; 1 is a single global fit.
    #[arg(long, default_value_t = crate::bandwidth::REGRESSION_PILOT_BLOCKS, value_parser = clap::builder::TypedValueParser::map(clap::value_parser!(u64).range(1..=10), |v| v as usize))]
    pub pilot_blocks: usize,
}

impl TuningArgs {
    fn detection(&self) -> ZeroDetection {
        ZeroDetection {
            kappa: self.kappa,
            ..ZeroDetection::default()
        }
    }

    fn tuning(&self) -> Tuning {
        Tuning {
            g1: self.g1,
            g2: self.g2,
            h: self.h,
            rho1: self.rho1,
            rho2: self.rho2,
            trim_fraction: self.trim,
            degree: self.degree as usize,
            detection: self.detection(),
            pilot_blocks: self.pilot_blocks,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Input CSV with a header row.
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    pub method: MethodArg,
    /// |mean| below this multiple of the sd selects the sign-recovering
    /// pipeline under `--method auto`.
    #[arg(long, default_value_t = 0.1, value_parser = nonnegative)]
    pub mean_threshold: f64,
    /// Additive mode: number of leading undistorted predictor columns
    /// among x1..xd.
    #[arg(long)]
    pub d1: Option<usize>,
    #[arg(long)]
    pub grid_min: Option<f64>,
    #[arg(long)]
    pub grid_max: Option<f64>,
    #[arg(long, default_value_t = 101, value_parser = clap::value_parser!(u64).range(2..))]
    pub grid_points: u64,
    #[command(flatten)]
    pub tuning: TuningArgs,
    /// Output path; standard output when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: String,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Comma-separated methods; every applicable one when absent.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub methods: Vec<MethodArg>,
    /// Worker threads; 0 picks the number of cores.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[arg(long, default_value_t = 101, value_parser = clap::value_parser!(u64).range(2..))]
    pub grid_points: u64,
    #[command(flatten)]
    pub tuning: TuningArgs,
    /// Also write the first replication's sample (u,x_tilde,y_tilde,x,y).
    #[arg(long)]
    pub export_sample: Option<PathBuf>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ZerosArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, value_parser = positive)]
    pub g1: Option<f64>,
    #[arg(long, value_parser = positive)]
    pub g2: Option<f64>,
    #[arg(long, default_value_t = 2.0, value_parser = positive)]
    pub kappa: f64,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} is not positive"))
    }
}

fn nonnegative(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} is negative"))
    }
}

fn trim_fraction(s: &str) -> Result<f64, String> {
    let v = nonnegative(s)?;
    if v < 0.5 {
        Ok(v)
    } else {
        Err(format!("{v} is not below 0.5"))
    }
}

/// Failure of a command, mapped to the process exit code.
#[derive(Debug)]
pub enum CliError {
    Parse(String),
    Estimation(Error),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Estimation(Error::MethodInapplicable { .. }) => 4,
            CliError::Estimation(Error::UnknownModel(_)) => 2,
            CliError::Estimation(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Parse(m) => write!(f, "parse error: {m}"),
            CliError::Estimation(e) => write!(f, "{}: {e}", e.name()),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Estimation(e)
    }
}

/// Runs a parsed command and returns the exit code.
pub fn run(cli: Cli) -> i32 {
    let res = match cli.command {
        Command::Fit(a) => cmd_fit(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Zeros(a) => cmd_zeros(&a),
    };
    match res {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

/// A numeric CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Result<&[f64], CliError> {
        self.headers
            .iter()
            .position(|h| h == name)
            .map(|k| self.columns[k].as_slice())
            .ok_or_else(|| CliError::Parse(format!("missing column '{name}'")))
    }
}

pub fn read_table(path: &Path) -> Result<Table, CliError> {
    let text = fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_table(&text[..])
}

pub fn parse_table<R: io::Read>(input: R) -> Result<Table, CliError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Parse(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut columns = vec![Vec::new(); headers.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Parse(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        for (k, cell) in rec.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| CliError::Parse(format!("line {line}: non-numeric cell '{cell}'")))?;
            if !v.is_finite() {
                return Err(CliError::Parse(format!("line {line}: non-finite cell '{cell}'")));
            }
            columns[k].push(v);
        }
    }
    if columns.first().is_none_or(|c| c.is_empty()) {
        return Err(CliError::Parse("no data rows".into()));
    }
    Ok(Table { headers, columns })
}

/// Maps `u` onto [0, 1] when it falls outside.
fn unit_u(u: &[f64]) -> Vec<f64> {
    let lo = u.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo >= 0.0 && hi <= 1.0 || !(hi > lo) {
        return u.to_vec();
    }
    info!("u outside [0, 1]; rescaled from [{lo}, {hi}]");
    u.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn emit(path: Option<&Path>, body: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, body).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => io::stdout()
            .write_all(body.as_bytes())
            .map_err(|e| CliError::Io(e.to_string())),
    }
}

/// Signed pipeline unless the variable's mean is small relative to its sd.
fn auto_method(z: &[f64], threshold: f64, label: &str) -> DistortionMethod {
    let m = mean(z);
    let sd = sample_sd(z);
    if m.abs() < threshold * sd {
        info!("NEW3 chosen for {label} (|mean| {:.4} < {threshold} * sd {:.4})", m.abs(), sd);
        DistortionMethod::General
    } else {
        info!("NEW2 chosen for {label}");
        DistortionMethod::Signed
    }
}

fn grid_spec(a: &FitArgs) -> GridSpec {
    GridSpec::Quantiles {
        lo_p: 0.025,
        hi_p: 0.975,
        points: a.grid_points as usize,
        lo: a.grid_min,
        hi: a.grid_max,
    }
}

fn fit_csv(fit: &RegressionFit) -> String {
    let mut out = String::from("grid,m_hat,valid\n");
    for k in 0..fit.grid.len() {
        out.push_str(&format!(
            "{},{},{}\n",
            fmt_f(fit.grid[k]),
            fmt_f(fit.m_hat[k]),
            fit.valid_mask[k]
        ));
    }
    out
}

pub fn cmd_fit(a: &FitArgs) -> Result<(), CliError> {
    let table = read_table(&a.input)?;
    if a.d1.is_some() {
        return cmd_fit_additive(a, &table);
    }
    let u = unit_u(table.column("u")?);
    let sample = DistortedSample::new(
        u,
        table.column("x_tilde")?.to_vec(),
        table.column("y_tilde")?.to_vec(),
    )?;
    let tuning = a.tuning.tuning();
    let grid = grid_spec(a);
    let fit = match a.method {
        MethodArg::Oracle => {
            let x = table.column("x")?;
            let y = table.column("y")?;
            fit_oracle_auto(x, y, &grid, &tuning)?
        }
        MethodArg::Naive => fit_naive_auto(&sample, &grid, &tuning)?,
        m => {
            let (xm, ym) = match m {
                MethodArg::New1 => (DistortionMethod::Basic, DistortionMethod::Basic),
                MethodArg::New2 => (DistortionMethod::Signed, DistortionMethod::Signed),
                MethodArg::New3 => (DistortionMethod::General, DistortionMethod::General),
                _ => (
                    auto_method(&sample.x_tilde, a.mean_threshold, "X"),
                    auto_method(&sample.y_tilde, a.mean_threshold, "Y"),
                ),
            };
            let adj = fit_adjusted(&sample, xm, ym, &grid, &tuning)?;
            let b = &adj.bandwidths;
            info!("bandwidths g1={} g2={} h={}", b.g1, b.g2, b.h);
            info!(
                "ridge rho1={} rho2={}; retained {} of {}",
                adj.predictors.rho.rho1,
                adj.predictors.rho.rho2,
                adj.predictors.retained.len(),
                sample.n()
            );
            info!("sign changes phi={:?} psi={:?}", adj.phi.tau, adj.psi.tau);
            adj.fit
        }
    };
    info!("{} fit with h={}", fit.method_tag.name(), fit.h);
    emit(a.output.as_deref(), &fit_csv(&fit))
}

fn cmd_fit_additive(a: &FitArgs, table: &Table) -> Result<(), CliError> {
    let d1 = a.d1.unwrap_or(0);
    let mut xcols: Vec<(usize, usize)> = table
        .headers
        .iter()
        .enumerate()
        .filter_map(|(k, h)| h.strip_prefix('x')?.parse::<usize>().ok().map(|j| (j, k)))
        .collect();
    xcols.sort_unstable();
    if xcols.is_empty() || xcols.iter().enumerate().any(|(i, &(j, _))| j != i + 1) {
        return Err(CliError::Parse("additive mode needs columns x1..xd".into()));
    }
    let u = unit_u(table.column("u")?);
    let y = table.column("y_tilde")?.to_vec();
    let x: Vec<Vec<f64>> = xcols.iter().map(|&(_, k)| table.columns[k].clone()).collect();
    let d = x.len();
    let sample = AdditiveSample::new(u, x, y, d1)?;
    let pick = |z: &[f64], label: &str| -> Result<DistortionMethod, CliError> {
        Ok(match a.method {
            MethodArg::Auto => auto_method(z, a.mean_threshold, label),
            MethodArg::New1 => DistortionMethod::Basic,
            MethodArg::New2 => DistortionMethod::Signed,
            MethodArg::New3 => DistortionMethod::General,
            _ => return Err(CliError::Parse("additive mode supports auto, new1, new2, new3".into())),
        })
    };
    let methods = VariableMethods {
        columns: (d1..d)
            .map(|j| pick(&sample.x_tilde[j], &format!("x{}", j + 1)))
            .collect::<Result<_, _>>()?,
        response: pick(&sample.y_tilde, "Y")?,
    };
    let cfg = AdditiveConfig {
        grid_points: a.grid_points as usize,
        trim_fraction: a.tuning.trim,
        detection: a.tuning.detection(),
        ..AdditiveConfig::default()
    };
    let fit = backfit(&sample, &methods, &cfg)?;
    info!(
        "backfitting: {} sweeps, converged={}, bandwidths={:?}",
        fit.iterations, fit.converged, fit.bandwidths
    );
    let mut out = String::from("component,grid,value,valid\n");
    out.push_str(&format!("intercept,,{},true\n", fmt_f(fit.m0_hat)));
    for (j, c) in fit.components.iter().enumerate() {
        for k in 0..c.len() {
            out.push_str(&format!(
                "x{},{},{},{}\n",
                j + 1,
                fmt_f(c.grid[k]),
                fmt_f(c.values[k]),
                c.valid_mask[k]
            ));
        }
    }
    emit(a.output.as_deref(), &out)
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let model = find_model(&a.model)?;
    let methods: Vec<MethodTag> = if a.methods.is_empty() {
        [MethodTag::Oracle, MethodTag::New1, MethodTag::New2, MethodTag::New3, MethodTag::Naive]
            .into_iter()
            .filter(|&m| check_applicable(model, m).is_ok())
            .collect()
    } else {
        a.methods
            .iter()
            .map(|m| m.tag().ok_or_else(|| CliError::Parse("auto is not a study method".into())))
            .collect::<Result<_, _>>()?
    };
    let mut cfg = StudyConfig::new(a.n, a.reps, a.seed, methods);
    cfg.tuning = a.tuning.tuning();
    cfg.workers = a.workers;
    cfg.grid_points = a.grid_points as usize;
    let summary = run_study(model, &cfg)?;
    if let Some(p) = &a.export_sample {
        let s = generate_sample(model, a.n, a.seed)?;
        let mut out = String::from("u,x_tilde,y_tilde,x,y\n");
        for i in 0..s.x.len() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt_f(s.sample.u[i]),
                fmt_f(s.sample.x_tilde[i]),
                fmt_f(s.sample.y_tilde[i]),
                fmt_f(s.x[i]),
                fmt_f(s.y[i])
            ));
        }
        emit(Some(p), &out)?;
    }
    let mut buf = Vec::new();
    write_summary_csv(&[summary], &mut buf)?;
    emit(a.output.as_deref(), &String::from_utf8_lossy(&buf))
}

pub fn cmd_zeros(a: &ZerosArgs) -> Result<(), CliError> {
    let table = read_table(&a.input)?;
    let u = unit_u(table.column("u")?);
    let sample = DistortedSample::new(
        u,
        table.column("x_tilde")?.to_vec(),
        table.column("y_tilde")?.to_vec(),
    )?;
    let det = ZeroDetection {
        kappa: a.kappa,
        ..ZeroDetection::default()
    };
    let mut out = String::new();
    for (label, z, g) in [("phi", &sample.x_tilde, a.g1), ("psi", &sample.y_tilde, a.g2)] {
        let (g, changes) = detect_zeros(&sample.u, z, g, &det)?;
        if changes.is_empty() {
            out.push_str(&format!("{label} (g = {g:.6}): none detected\n"));
        }
        for c in changes {
            out.push_str(&format!(
                "{label} (g = {g:.6}): tau = {:.6} statistic = {:.4} slope_left = {:.6} slope_right = {:.6}\n",
                c.tau, c.statistic, c.slope_left, c.slope_right
            ));
        }
    }
    emit(a.output.as_deref(), &out)
}

/// Catalog ids, for help output and tests.
pub fn model_ids() -> Vec<&'static str> {
    catalog().iter().map(|m| m.id).collect()
}
