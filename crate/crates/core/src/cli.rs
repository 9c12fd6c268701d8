//! Command-line front end: argument parsing, config loading and dispatch.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::constants::{
    check_clt_regime, clt_covariance_matrix, gamma2, regression_weights, sigma_ell, var_hhat,
    LimitConstants, DEFAULT_SERIES_TRUNCATION,
};
use crate::error::{Error, Result};
use crate::estimation::{
    check_scale_exponent, confidence_interval, default_scale, estimate, scale_from_exponent,
    BootstrapOptions, Regime,
};
use crate::io::{load_path, save_path, write_coefficients_csv};
use crate::montecarlo::{
    export_convergence_trace, export_density_sample, run_table1, run_table2, write_trace_csv,
    ExperimentConfig, McReport,
};
use crate::statistics::{normalize_v_hat, summarize, CoefficientTable};
use crate::synthesis::{
    generate_fbm, generate_rosenblatt, ProcessKind, RngStream, DEFAULT_REFINEMENT,
};
use crate::wavelets::{MotherWavelet, QuadratureGrid, WaveletKind};

pub const WORKERS_ENV: &str = "SELFSIM_WORKERS";

#[derive(Debug, Parser)]
#[command(
    name = "selfsim",
    version,
    about = "Wavelet analysis of self-similar processes"
)]
pub struct Cli {
    /// Worker threads (default: $SELFSIM_WORKERS, else all cores)
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate an fBm or Rosenblatt path
    Synth(SynthArgs),
    /// Wavelet coefficients of a path at scales a, 2a, ..., ell a
    Coeffs(CoeffsArgs),
    /// Variance statistics of a path at one scale
    Vstat(VstatArgs),
    /// Limit-theorem constants for one H and wavelet
    Constants(ConstantsArgs),
    /// Estimate H (and sigma^2) from a path
    Estimate(EstimateArgs),
    /// Normalized variance statistic over a grid of cells
    Table1(TableArgs),
    /// Estimator mean and sqrt(MSE) over a grid of cells
    Table2(TableArgs),
    /// Replicates and kernel density of the normalized statistic for one cell
    Density(DensityArgs),
    /// Normalized statistic along an increasing grid of sample sizes
    Trace(TraceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimProcess {
    Fbm,
    Rosenblatt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub process: SimProcess,
    #[arg(long = "H")]
    pub hurst: f64,
    #[arg(long = "N")]
    pub n: usize,
    #[arg(long, default_value_t = DEFAULT_REFINEMENT)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub stream: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CoeffsArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value = "psi_c")]
    pub wavelet: WaveletKind,
    #[arg(long)]
    pub scale: usize,
    #[arg(long, default_value_t = 1)]
    pub levels: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VstatArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value = "psi_c")]
    pub wavelet: WaveletKind,
    #[arg(long)]
    pub scale: usize,
    #[arg(long = "H")]
    pub hurst: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConstantsArgs {
    #[arg(long = "H")]
    pub hurst: f64,
    #[arg(long, default_value = "psi_c")]
    pub wavelet: WaveletKind,
    /// Midpoint quadrature nodes on [0, 1]
    #[arg(long, default_value_t = QuadratureGrid::DEFAULT_RESOLUTION)]
    pub resolution: usize,
    /// Also emit the ell x ell matrices and regression weights
    #[arg(long)]
    pub ell: Option<usize>,
    /// Series truncation K for the Gaussian covariance matrix
    #[arg(long, default_value_t = DEFAULT_SERIES_TRUNCATION)]
    pub truncation: usize,
    /// With --scale, also emit the Var(H-hat) approximations
    #[arg(long = "N")]
    pub n: Option<usize>,
    #[arg(long)]
    pub scale: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value = "psi_c")]
    pub wavelet: WaveletKind,
    #[arg(long, conflicts_with_all = ["scale_exponent", "delta"])]
    pub scale: Option<usize>,
    /// a = floor(N^e)
    #[arg(long, conflicts_with = "delta")]
    pub scale_exponent: Option<f64>,
    /// a = floor(N^{threshold + delta}) for the regime's threshold
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 2)]
    pub levels: usize,
    /// Defaults to rosenblatt for Rosenblatt paths and gaussian_clt otherwise
    #[arg(long)]
    pub regime: Option<Regime>,
    /// Reject scale exponents at or below the regime threshold
    #[arg(long)]
    pub strict: bool,
    #[arg(long)]
    pub ci_level: Option<f64>,
    #[arg(long, default_value_t = 400)]
    pub ci_reps: usize,
    #[arg(long, default_value_t = DEFAULT_REFINEMENT)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Report destination (stdout when absent)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-replicate values as cell_id,replicate,value
    #[arg(long)]
    pub raw: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Replicate values CSV
    #[arg(long)]
    pub out: PathBuf,
    /// Kernel density CSV
    #[arg(long)]
    pub density_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[arg(long = "H")]
    pub hurst: f64,
    #[arg(long)]
    pub scale_exponent: f64,
    /// Increasing sample sizes, comma separated
    #[arg(long = "N", value_delimiter = ',', required = true)]
    pub n_grid: Vec<usize>,
    #[arg(long, default_value = "psi_c")]
    pub wavelet: WaveletKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_REFINEMENT)]
    pub m: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Reads, parses and validates an experiment config.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(vec![format!("{}: {e}", path.display())]))?;
    let config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| Error::Config(vec![format!("{}: {e}", path.display())]))?;
    config.validate()?;
    Ok(config)
}

/// Worker count from the flag, then `$SELFSIM_WORKERS`, then all cores.
pub fn resolve_workers(flag: Option<usize>) -> Result<usize> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var(WORKERS_ENV) {
            Ok(s) => s.trim().parse().map_err(|_| {
                Error::param(
                    "workers",
                    format!("{WORKERS_ENV}=`{s}` is not a positive integer"),
                )
            })?,
            Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
        },
    };
    if n == 0 {
        return Err(Error::param("workers", "must be at least 1"));
    }
    Ok(n)
}

/// 2 for invalid input, 1 for failures while running.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidParameter { .. } | Error::UnknownWavelet { .. } | Error::Config(_) => 2,
        _ => 1,
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn parse_and_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(Error::file(p))?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn create(p: &Path) -> Result<File> {
    File::create(p).map_err(Error::file(p))
}

fn write_json(value: &serde_json::Value, out: Option<&Path>) -> Result<()> {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Coeffs(a) => coeffs_cmd(a),
        Command::Vstat(a) => vstat(a),
        Command::Constants(a) => constants_cmd(a),
        Command::Estimate(a) => estimate_cmd(a),
        Command::Table1(a) => table(a, true, resolve_workers(cli.workers)?),
        Command::Table2(a) => table(a, false, resolve_workers(cli.workers)?),
        Command::Density(a) => density(a, resolve_workers(cli.workers)?),
        Command::Trace(a) => trace(a, resolve_workers(cli.workers)?),
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let stream = RngStream::new(a.seed, a.stream);
    let path = match a.process {
        SimProcess::Fbm => generate_fbm(a.n, a.hurst, stream)?,
        SimProcess::Rosenblatt => generate_rosenblatt(a.n, a.hurst, a.m, stream)?,
    };
    save_path(&path, &a.out)
}

fn coeffs_cmd(a: CoeffsArgs) -> Result<()> {
    let path = load_path(&a.input)?;
    let table = CoefficientTable::new(&path, a.scale, a.levels, &MotherWavelet::new(a.wavelet))?;
    let mut w = sink(a.out.as_deref())?;
    write_coefficients_csv(&table, &mut w)?;
    w.flush()?;
    Ok(())
}

fn vstat(a: VstatArgs) -> Result<()> {
    let path = load_path(&a.input)?;
    let psi = MotherWavelet::new(a.wavelet);
    let grid = QuadratureGrid::default();
    let s = summarize(&path, a.scale, &psi, a.hurst, a.sigma2, &grid)?;
    let normalized = if a.hurst > 0.5 && a.hurst < 1.0 {
        let ct2 = crate::constants::c_t2(a.hurst, &psi, &grid)?;
        Some(normalize_v_hat(s.v_hat, path.len(), a.scale, a.hurst, ct2))
    } else {
        None
    };
    write_json(
        &json!({
            "wavelet": a.wavelet,
            "N": path.len(),
            "scale": s.scale,
            "usable_shifts": s.usable_shifts,
            "H": a.hurst,
            "sigma2": a.sigma2,
            "i_hat": s.i_hat,
            "v_hat": s.v_hat,
            "degenerate": s.degenerate,
            "normalized_statistic": normalized,
        }),
        a.out.as_deref(),
    )
}

fn constants_cmd(a: ConstantsArgs) -> Result<()> {
    let psi = MotherWavelet::new(a.wavelet);
    let grid = QuadratureGrid::new(a.resolution)?;
    let c = LimitConstants::new(a.hurst, &psi, &grid)?;
    let mut out = json!({ "wavelet": a.wavelet, "constants": c });
    if let Some(ell) = a.ell {
        out["sigma_ell"] = json!(sigma_ell(a.hurst, &psi, &grid, ell)?);
        if ell >= 2 {
            out["regression_weights"] = json!(regression_weights(ell)?);
            if check_clt_regime(&psi, a.hurst).is_ok() {
                out["L1"] = json!(clt_covariance_matrix(
                    ell,
                    a.hurst,
                    &psi,
                    &grid,
                    a.truncation,
                    None
                )?);
                out["gamma2"] = json!(gamma2(a.hurst, &psi, &grid, ell, a.truncation, None)?);
            }
            if let (Some(n), Some(scale)) = (a.n, a.scale) {
                out["var_hhat"] = json!(var_hhat(a.hurst, &psi, &grid, ell, n, scale)?);
            }
        }
    }
    write_json(&out, a.out.as_deref())
}

fn estimate_cmd(a: EstimateArgs) -> Result<()> {
    let path = load_path(&a.input)?;
    let psi = MotherWavelet::new(a.wavelet);
    let regime = a.regime.unwrap_or(match path.kind() {
        ProcessKind::Rosenblatt => Regime::Rosenblatt,
        _ => Regime::GaussianClt,
    });
    let n = path.len();
    let smooth = psi.smoothness();
    let scale = match (a.scale, a.scale_exponent, a.delta) {
        (Some(s), _, _) => s,
        (None, Some(e), _) => {
            if a.strict {
                check_scale_exponent(regime, smooth, e)
                    .map_err(|err| Error::param("scale-exponent", err.to_string()))?;
            }
            scale_from_exponent(n, e)?
        }
        (None, None, d) => default_scale(n, regime, smooth, d.unwrap_or(0.05))?,
    };
    let result = match a.ci_level {
        None => estimate(&path, &psi, scale, a.levels, regime)?,
        Some(level) => {
            let opts = BootstrapOptions {
                level,
                replications: a.ci_reps,
                stream: RngStream::new(a.seed, 0),
                refinement: a.m,
            };
            confidence_interval(&path, &psi, scale, a.levels, &opts)?.0
        }
    };
    let mut value = serde_json::to_value(&result)?;
    value["wavelet"] = json!(a.wavelet);
    value["N"] = json!(n);
    write_json(&value, a.out.as_deref())
}

fn write_report(report: &McReport, a: &TableArgs) -> Result<()> {
    let mut w = sink(a.out.as_deref())?;
    match a.format {
        OutputFormat::Csv => report.write_report_csv(&mut w)?,
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut w, report)?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    if let Some(raw) = &a.raw {
        report.write_raw_csv(BufWriter::new(create(raw)?))?;
    }
    Ok(())
}

fn table(a: TableArgs, first: bool, workers: usize) -> Result<()> {
    let config = load_config(&a.config)?;
    let report = if first {
        run_table1(&config, workers)?
    } else {
        run_table2(&config, workers)?
    };
    write_report(&report, &a)
}

fn density(a: DensityArgs, workers: usize) -> Result<()> {
    let config = load_config(&a.config)?;
    let sample = export_density_sample(&config, workers)?;
    sample.write_values_csv(BufWriter::new(create(&a.out)?))?;
    sample.write_density_csv(BufWriter::new(create(&a.density_out)?))?;
    write_json(
        &json!({
            "replications": sample.values.len(),
            "mean": sample.mean,
            "sd": sample.sd,
            "bandwidth": sample.bandwidth,
            "ks_distance": sample.ks_distance,
        }),
        None,
    )
}

fn trace(a: TraceArgs, workers: usize) -> Result<()> {
    let t = export_convergence_trace(
        a.hurst,
        a.scale_exponent,
        &a.n_grid,
        a.wavelet,
        a.seed,
        a.m,
        workers,
    )?;
    let mut w = sink(a.out.as_deref())?;
    write_trace_csv(&t, &mut w)?;
    w.flush()?;
    Ok(())
}
