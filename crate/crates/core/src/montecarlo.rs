//! Seeded Monte Carlo harness: grids of (H, N, scale exponent) cells, each
//! replicated R times on independent random streams.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::constants::c_t2;
use crate::error::{Error, Result};
use crate::estimation::{estimate, Regime};
use crate::statistics::{coeffs, normalize_v_hat, usable_shifts, v_hat_from_coeffs, Normalization};
use crate::synthesis::{
    stream_index_for, FbmGenerator, ProcessKind, RngStream, RosenblattGenerator, SamplePath,
    DEFAULT_REFINEMENT,
};
use crate::wavelets::{MotherWavelet, QuadratureGrid, WaveletKind};

pub const DEFAULT_REPLICATIONS: usize = 100;
pub const DEFAULT_MASTER_SEED: u64 = 0;
pub const TABLE1_EXPONENTS: [f64; 3] = [0.4, 0.5, 0.6];
/// ell = floor(N^0.3) unless set explicitly.
pub const DEFAULT_LEVEL_EXPONENT: f64 = 0.3;
pub const KDE_GRID_POINTS: usize = 512;

/// A validated experiment grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub process: ProcessKind,
    #[serde(rename = "H_list")]
    pub hurst_list: Vec<f64>,
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,
    /// `None` selects the experiment's own default exponents.
    #[serde(default)]
    pub scale_exponent_list: Option<Vec<f64>>,
    #[serde(default = "default_wavelet")]
    pub wavelet: WaveletKind,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_refinement")]
    pub m: usize,
    #[serde(default)]
    pub ell: Option<usize>,
}

fn default_wavelet() -> WaveletKind {
    WaveletKind::PsiC
}

fn default_replications() -> usize {
    DEFAULT_REPLICATIONS
}

fn default_refinement() -> usize {
    DEFAULT_REFINEMENT
}

impl ExperimentConfig {
    /// A Rosenblatt grid with every optional key at its default.
    pub fn rosenblatt(hurst_list: Vec<f64>, n_list: Vec<usize>) -> Self {
        Self {
            process: ProcessKind::Rosenblatt,
            hurst_list,
            n_list,
            scale_exponent_list: None,
            wavelet: default_wavelet(),
            replications: DEFAULT_REPLICATIONS,
            master_seed: DEFAULT_MASTER_SEED,
            m: DEFAULT_REFINEMENT,
            ell: None,
        }
    }

    /// Every violation, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let rosenblatt = self.process == ProcessKind::Rosenblatt;
        if self.process == ProcessKind::External {
            out.push("process: must be fbm or rosenblatt".into());
        }
        if self.hurst_list.is_empty() {
            out.push("H_list: must not be empty".into());
        }
        for &h in &self.hurst_list {
            let (lo, ok) = if rosenblatt {
                (0.5, h > 0.5 && h < 1.0)
            } else {
                (0.0, h > 0.0 && h < 1.0)
            };
            if !ok {
                out.push(format!(
                    "H: {h} not in ({lo}, 1) for process {}",
                    self.process
                ));
            }
        }
        if self.n_list.is_empty() {
            out.push("N_list: must not be empty".into());
        }
        for &n in &self.n_list {
            if n < 4 {
                out.push(format!("N: {n} < 4"));
            }
        }
        if let Some(list) = &self.scale_exponent_list {
            if list.is_empty() {
                out.push("scale_exponent_list: must not be empty".into());
            }
            for &e in list {
                if !(e > 0.0 && e < 1.0) {
                    out.push(format!("scale_exponent: {e} not in (0, 1)"));
                }
            }
        }
        if self.replications == 0 {
            out.push("replications: must be at least 1".into());
        }
        if self.m == 0 {
            out.push("m: must be at least 1".into());
        }
        if let Some(ell) = self.ell {
            if ell < 2 {
                out.push(format!("ell: {ell} < 2"));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }
}

/// Which statistic a run reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    /// C_T2^{-1} (N/a)^{1-H} V-hat, the normalized variance statistic.
    Table1,
    /// H-hat from the multiscale regression.
    Table2,
}

/// One cell of the grid with its replicate values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McCell {
    pub process: ProcessKind,
    #[serde(rename = "H")]
    pub hurst: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub scale_exponent: f64,
    pub wavelet: WaveletKind,
    pub scale: usize,
    pub ell: Option<usize>,
    pub values: Vec<f64>,
    pub mean: f64,
    /// Table 1: sqrt(mean of squares). Table 2: sqrt(mean of (H-hat - H)^2).
    pub sqrt_mse: f64,
    /// Sample standard deviation over sqrt(R); 0 for R = 1.
    pub stderr: f64,
    pub skipped: Option<String>,
}

impl McCell {
    pub fn id(&self) -> String {
        cell_key(
            self.process,
            self.hurst,
            self.n,
            self.scale_exponent,
            self.wavelet,
        )
    }

    pub fn is_skipped(&self) -> bool {
        self.skipped.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub experiment: Experiment,
    pub master_seed: u64,
    pub replications: usize,
    pub cells: Vec<McCell>,
}

impl McReport {
    /// process,H,N,scale_exponent,wavelet,replications,mean,sqrt_mse,stderr,skipped
    pub fn write_report_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "process",
            "H",
            "N",
            "scale_exponent",
            "wavelet",
            "replications",
            "mean",
            "sqrt_mse",
            "stderr",
            "skipped",
        ])?;
        for c in &self.cells {
            w.write_record([
                c.process.name().to_string(),
                c.hurst.to_string(),
                c.n.to_string(),
                c.scale_exponent.to_string(),
                c.wavelet.name().to_string(),
                c.values.len().to_string(),
                c.mean.to_string(),
                c.sqrt_mse.to_string(),
                c.stderr.to_string(),
                c.is_skipped().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// cell_id,replicate,value
    pub fn write_raw_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["cell_id", "replicate", "value"])?;
        for c in &self.cells {
            let id = c.id();
            for (r, v) in c.values.iter().enumerate() {
                w.write_record([id.clone(), r.to_string(), format!("{v:.16e}")])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn cell_key(process: ProcessKind, h: f64, n: usize, e: f64, wavelet: WaveletKind) -> String {
    format!("{process}/H={h:?}/N={n}/e={e:?}/{wavelet}")
}

/// Stream for replicate `r` of a cell; independent of every other cell.
pub fn replicate_stream(
    master_seed: u64,
    process: ProcessKind,
    h: f64,
    n: usize,
    e: f64,
    wavelet: WaveletKind,
    r: usize,
) -> RngStream {
    let key = format!("{}/r={r}", cell_key(process, h, n, e, wavelet));
    RngStream::new(master_seed, stream_index_for(&key))
}

/// floor(N^e) without clipping; infeasible values are reported, not fixed.
pub fn raw_scale(n: usize, exponent: f64) -> usize {
    ((n as f64).powf(exponent) * (1.0 + 1e-12)).floor().max(1.0) as usize
}

pub fn default_levels(n: usize) -> usize {
    raw_scale(n, DEFAULT_LEVEL_EXPONENT).max(2)
}

/// Table 2's per-wavelet default exponent.
pub fn table2_default_exponent(wavelet: WaveletKind) -> f64 {
    match wavelet {
        WaveletKind::PsiC => 0.4,
        _ => 0.5,
    }
}

enum Generator {
    Fbm(FbmGenerator),
    Rosenblatt(RosenblattGenerator),
}

impl Generator {
    fn new(process: ProcessKind, n: usize, h: f64, m: usize) -> Result<Self> {
        match process {
            ProcessKind::Fbm => Ok(Generator::Fbm(FbmGenerator::new(n, h)?)),
            ProcessKind::Rosenblatt => {
                Ok(Generator::Rosenblatt(RosenblattGenerator::new(n, h, m)?))
            }
            ProcessKind::External => Err(Error::param("process", "cannot simulate external data")),
        }
    }

    fn sample(&self, stream: RngStream) -> Result<SamplePath> {
        match self {
            Generator::Fbm(g) => g.sample(stream),
            Generator::Rosenblatt(g) => g.sample(stream),
        }
    }
}

struct CellPlan {
    hurst: f64,
    n: usize,
    exponent: f64,
    scale: usize,
    ell: Option<usize>,
    skipped: Option<String>,
    /// Table 1 only: (normalization, C_T2).
    table1: Option<(Normalization, f64)>,
}

fn plan_cells(
    config: &ExperimentConfig,
    experiment: Experiment,
    grid: &QuadratureGrid,
) -> Result<Vec<CellPlan>> {
    let psi = MotherWavelet::new(config.wavelet);
    let mut plans = Vec::new();
    for &h in &config.hurst_list {
        let table1 = match experiment {
            Experiment::Table1 => Some((
                Normalization::new(&psi, h, 1.0, grid)?,
                c_t2(h, &psi, grid)?,
            )),
            Experiment::Table2 => None,
        };
        for &n in &config.n_list {
            let exponents = match (&config.scale_exponent_list, experiment) {
                (Some(list), _) => list.clone(),
                (None, Experiment::Table1) => TABLE1_EXPONENTS.to_vec(),
                (None, Experiment::Table2) => vec![table2_default_exponent(config.wavelet)],
            };
            for e in exponents {
                let scale = raw_scale(n, e);
                let (ell, skipped) = match experiment {
                    Experiment::Table1 => {
                        let usable = usable_shifts(n, scale);
                        let skip =
                            (usable < 2).then(|| format!("N_a = {usable} < 2 at a = {scale}"));
                        (None, skip)
                    }
                    Experiment::Table2 => {
                        let ell = config.ell.unwrap_or_else(|| default_levels(n));
                        let usable = usable_shifts(n, scale * ell);
                        let skip = (usable < 1).then(|| {
                            format!("N_a = {usable} < 1 at the largest scale {}", scale * ell)
                        });
                        (Some(ell), skip)
                    }
                };
                plans.push(CellPlan {
                    hurst: h,
                    n,
                    exponent: e,
                    scale,
                    ell,
                    skipped,
                    table1,
                });
            }
        }
    }
    Ok(plans)
}

fn summarize_values(values: &[f64], target: f64) -> (f64, f64, f64) {
    let r = values.len() as f64;
    let mean = values.iter().sum::<f64>() / r;
    let mse = values.iter().map(|v| (v - target).powi(2)).sum::<f64>() / r;
    let stderr = if values.len() > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0);
        (var / r).sqrt()
    } else {
        0.0
    };
    (mean, mse.sqrt(), stderr)
}

/// Runs `f` on a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Err(Error::param("workers", "must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::param("workers", e.to_string()))?;
    Ok(pool.install(f))
}

fn replicate_value(
    experiment: Experiment,
    plan: &CellPlan,
    path: &SamplePath,
    psi: &MotherWavelet,
    regime: Regime,
) -> Result<f64> {
    match experiment {
        Experiment::Table1 => {
            let (norm, ct2) = plan.table1.as_ref().expect("table 1 constants");
            let e = coeffs(path.values(), plan.scale, psi)?;
            let v = v_hat_from_coeffs(&e, plan.scale, norm);
            Ok(normalize_v_hat(v, plan.n, plan.scale, plan.hurst, *ct2))
        }
        Experiment::Table2 => {
            let ell = plan.ell.expect("levels");
            Ok(estimate(path, psi, plan.scale, ell, regime)?.hurst_hat)
        }
    }
}

/// Runs one experiment over the whole grid on `workers` threads.
pub fn run(config: &ExperimentConfig, experiment: Experiment, workers: usize) -> Result<McReport> {
    config.validate()?;
    if experiment == Experiment::Table1 && config.process != ProcessKind::Rosenblatt {
        return Err(Error::Config(vec![
            "process: the normalized statistic is defined for rosenblatt only".into(),
        ]));
    }
    let grid = QuadratureGrid::default();
    let plans = plan_cells(config, experiment, &grid)?;
    let psi = MotherWavelet::new(config.wavelet);
    let regime = match config.process {
        ProcessKind::Rosenblatt => Regime::Rosenblatt,
        _ => Regime::GaussianClt,
    };
    let r_count = config.replications;

    with_workers(workers, || {
        let mut generators: HashMap<(u64, usize), Generator> = HashMap::new();
        for p in plans.iter().filter(|p| p.skipped.is_none()) {
            let key = (p.hurst.to_bits(), p.n);
            if let Entry::Vacant(slot) = generators.entry(key) {
                slot.insert(Generator::new(config.process, p.n, p.hurst, config.m)?);
            }
        }
        let tasks: Vec<(usize, usize)> = plans
            .iter()
            .enumerate()
            .filter(|(_, p)| p.skipped.is_none())
            .flat_map(|(i, _)| (0..r_count).map(move |r| (i, r)))
            .collect();
        let values = tasks
            .par_iter()
            .map(|&(i, r)| {
                let p = &plans[i];
                let stream = replicate_stream(
                    config.master_seed,
                    config.process,
                    p.hurst,
                    p.n,
                    p.exponent,
                    config.wavelet,
                    r,
                );
                let path = generators[&(p.hurst.to_bits(), p.n)].sample(stream)?;
                replicate_value(experiment, p, &path, &psi, regime)
            })
            .collect::<Result<Vec<f64>>>()?;

        let mut chunks = values.chunks(r_count.max(1));
        let cells = plans
            .iter()
            .map(|p| {
                let vals = if p.skipped.is_none() {
                    chunks.next().map(<[f64]>::to_vec).unwrap_or_default()
                } else {
                    Vec::new()
                };
                let target = match experiment {
                    Experiment::Table1 => 0.0,
                    Experiment::Table2 => p.hurst,
                };
                let (mean, sqrt_mse, stderr) = if vals.is_empty() {
                    (f64::NAN, f64::NAN, f64::NAN)
                } else {
                    summarize_values(&vals, target)
                };
                McCell {
                    process: config.process,
                    hurst: p.hurst,
                    n: p.n,
                    scale_exponent: p.exponent,
                    wavelet: config.wavelet,
                    scale: p.scale,
                    ell: p.ell,
                    values: vals,
                    mean,
                    sqrt_mse,
                    stderr,
                    skipped: p.skipped.clone(),
                }
            })
            .collect();
        Ok(McReport {
            experiment,
            master_seed: config.master_seed,
            replications: r_count,
            cells,
        })
    })?
}

pub fn run_table1(config: &ExperimentConfig, workers: usize) -> Result<McReport> {
    run(config, Experiment::Table1, workers)
}

pub fn run_table2(config: &ExperimentConfig, workers: usize) -> Result<McReport> {
    run(config, Experiment::Table2, workers)
}

/// Replicate statistics of one cell with a Gaussian kernel density estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensitySample {
    pub values: Vec<f64>,
    pub bandwidth: f64,
    /// (x, density) on an evenly spaced grid.
    pub density: Vec<(f64, f64)>,
    pub mean: f64,
    pub sd: f64,
    /// sup |F_R - Phi| against the standard normal.
    pub ks_distance: f64,
}

impl DensitySample {
    pub fn write_values_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["replicate", "value"])?;
        for (r, v) in self.values.iter().enumerate() {
            w.write_record([r.to_string(), format!("{v:.16e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_density_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "density"])?;
        for (x, d) in &self.density {
            w.write_record([format!("{x:.16e}"), format!("{d:.16e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Silverman's rule 1.06 sd R^{-1/5}.
pub fn silverman_bandwidth(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::DegenerateData(
            "need at least two values for a bandwidth".into(),
        ));
    }
    let r = values.len() as f64;
    let mean = values.iter().sum::<f64>() / r;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0)).sqrt();
    if sd.is_nan() || sd == 0.0 {
        return Err(Error::DegenerateData("all values are equal".into()));
    }
    Ok(1.06 * sd * r.powf(-0.2))
}

/// Gaussian-kernel density on `points` nodes spanning the data +/- 4 bandwidths.
pub fn gaussian_kde(values: &[f64], bandwidth: f64, points: usize) -> Vec<(f64, f64)> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min) - 4.0 * bandwidth;
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 4.0 * bandwidth;
    let step = (hi - lo) / (points - 1) as f64;
    let norm = 1.0 / (values.len() as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    (0..points)
        .map(|i| {
            let x = lo + i as f64 * step;
            let d = values
                .iter()
                .map(|v| (-0.5 * ((x - v) / bandwidth).powi(2)).exp())
                .sum::<f64>()
                * norm;
            (x, d)
        })
        .collect()
}

pub fn ks_distance_to_standard_normal(values: &[f64]) -> f64 {
    let normal = Normal::standard();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// The first (H, N, e) cell of `config` under Table 1, with its density.
pub fn export_density_sample(config: &ExperimentConfig, workers: usize) -> Result<DensitySample> {
    let single = ExperimentConfig {
        hurst_list: config.hurst_list.iter().take(1).copied().collect(),
        n_list: config.n_list.iter().take(1).copied().collect(),
        scale_exponent_list: Some(
            config
                .scale_exponent_list
                .as_deref()
                .unwrap_or(&TABLE1_EXPONENTS[1..2])
                .iter()
                .take(1)
                .copied()
                .collect(),
        ),
        ..config.clone()
    };
    let report = run_table1(&single, workers)?;
    let cell = &report.cells[0];
    if let Some(reason) = &cell.skipped {
        return Err(Error::DegenerateData(format!(
            "cell {} skipped: {reason}",
            cell.id()
        )));
    }
    let values = cell.values.clone();
    let bandwidth = silverman_bandwidth(&values)?;
    let r = values.len() as f64;
    let mean = values.iter().sum::<f64>() / r;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0)).sqrt();
    Ok(DensitySample {
        density: gaussian_kde(&values, bandwidth, KDE_GRID_POINTS),
        ks_distance: ks_distance_to_standard_normal(&values),
        bandwidth,
        mean,
        sd,
        values,
    })
}

/// One replicate of the normalized statistic for each N in `n_grid`.
#[allow(clippy::too_many_arguments)]
pub fn export_convergence_trace(
    hurst: f64,
    exponent: f64,
    n_grid: &[usize],
    wavelet: WaveletKind,
    master_seed: u64,
    refinement: usize,
    workers: usize,
) -> Result<Vec<(usize, f64)>> {
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("N_grid", "must be a nonempty increasing list"));
    }
    let grid = QuadratureGrid::default();
    let psi = MotherWavelet::new(wavelet);
    let norm = Normalization::new(&psi, hurst, 1.0, &grid)?;
    let ct2 = c_t2(hurst, &psi, &grid)?;
    let lineage = RngStream::new(master_seed, stream_index_for("trace"));
    with_workers(workers, || {
        n_grid
            .par_iter()
            .map(|&n| {
                let scale = raw_scale(n, exponent);
                let usable = usable_shifts(n, scale);
                if usable < 2 {
                    return Err(Error::ScaleTooLarge {
                        scale,
                        n,
                        usable,
                        required: 2,
                    });
                }
                let key = format!("{}/H={hurst:?}/e={exponent:?}/{wavelet}", n);
                let stream = lineage.derive(&key, 0);
                let path = RosenblattGenerator::new(n, hurst, refinement)?.sample(stream)?;
                let e = coeffs(path.values(), scale, &psi)?;
                let v = v_hat_from_coeffs(&e, scale, &norm);
                Ok((n, normalize_v_hat(v, n, scale, hurst, ct2)))
            })
            .collect()
    })?
}

pub fn write_trace_csv<W: Write>(trace: &[(usize, f64)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["N", "value"])?;
    for (n, v) in trace {
        w.write_record([n.to_string(), format!("{v:.16e}")])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            replications: 6,
            m: 5,
            master_seed: 17,
            scale_exponent_list: Some(vec![0.4, 0.5]),
            ..ExperimentConfig::rosenblatt(vec![0.7, 0.8], vec![300])
        }
    }

    #[test]
    fn config_collects_all_violations() {
        let c = ExperimentConfig {
            replications: 0,
            m: 0,
            ..ExperimentConfig::rosenblatt(vec![0.4, 1.2], vec![2])
        };
        let v = c.violations();
        assert_eq!(v.len(), 5, "{v:?}");
        assert!(v.iter().any(|s| s.starts_with("H: 0.4")));
        assert!(v.iter().any(|s| s.starts_with("replications")));
        let ok = ExperimentConfig {
            process: ProcessKind::Fbm,
            ..ExperimentConfig::rosenblatt(vec![0.3], vec![100])
        };
        assert!(ok.validate().is_ok());
    }

    #[test]
    fn raw_scale_values() {
        assert_eq!(raw_scale(2000, 0.5), 44);
        assert_eq!(raw_scale(2000, 0.4), 20);
        assert_eq!(raw_scale(10_000, 0.6), 251);
        assert_eq!(default_levels(2000), 9);
        assert_eq!(default_levels(10_000), 15);
    }

    #[test]
    fn summary_statistics() {
        let (m, s, e) = summarize_values(&[-3.0], 0.0);
        assert_eq!((m, s, e), (-3.0, 3.0, 0.0));
        let (m, s, _) = summarize_values(&[0.6, 0.8], 0.7);
        assert!((m - 0.7).abs() < 1e-15);
        assert!((s - 0.1).abs() < 1e-12);
    }

    #[test]
    fn table1_is_worker_independent() {
        let c = small_config();
        let a = run_table1(&c, 1).unwrap();
        let b = run_table1(&c, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cells.len(), 4);
        assert!(a
            .cells
            .iter()
            .all(|c| c.values.len() == 6 && c.sqrt_mse >= 0.0));
    }

    #[test]
    fn adding_cells_keeps_existing_draws() {
        let c = small_config();
        let a = run_table1(&c, 2).unwrap();
        let wider = ExperimentConfig {
            hurst_list: vec![0.6, 0.7, 0.8],
            ..c
        };
        let b = run_table1(&wider, 2).unwrap();
        for cell in &a.cells {
            let twin = b.cells.iter().find(|x| x.id() == cell.id()).unwrap();
            assert_eq!(twin.values, cell.values);
        }
    }

    #[test]
    fn infeasible_cells_are_skipped() {
        let c = ExperimentConfig {
            scale_exponent_list: Some(vec![0.5, 0.95]),
            ..small_config()
        };
        let r = run_table1(&c, 2).unwrap();
        assert_eq!(r.cells.len(), 4);
        let skipped: Vec<_> = r.cells.iter().filter(|c| c.is_skipped()).collect();
        assert_eq!(skipped.len(), 2);
        assert!(skipped.iter().all(|c| c.values.is_empty()));
        let ran = r.cells.iter().filter(|c| !c.is_skipped()).count();
        assert_eq!(ran + skipped.len(), 2 * 2);
    }

    #[test]
    fn table2_on_fbm() {
        let c = ExperimentConfig {
            process: ProcessKind::Fbm,
            replications: 20,
            ell: Some(4),
            scale_exponent_list: Some(vec![0.45]),
            ..ExperimentConfig::rosenblatt(vec![0.7], vec![16384])
        };
        let r = run_table2(&c, 2).unwrap();
        let cell = &r.cells[0];
        assert_eq!(cell.scale, 78);
        assert!((cell.mean - 0.7).abs() < 0.05, "{}", cell.mean);
        assert!(run_table1(&c, 1).is_err());
    }

    #[test]
    fn report_csv_schema() {
        let r = run_table1(&small_config(), 2).unwrap();
        let mut buf = Vec::new();
        r.write_report_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(
            "process,H,N,scale_exponent,wavelet,replications,mean,sqrt_mse,stderr,skipped\n"
        ));
        assert_eq!(text.lines().count(), 5);
        let mut raw = Vec::new();
        r.write_raw_csv(&mut raw).unwrap();
        let raw = String::from_utf8(raw).unwrap();
        assert!(raw.starts_with("cell_id,replicate,value\n"));
        assert_eq!(raw.lines().count(), 1 + 4 * 6);
    }

    #[test]
    fn kde_integrates_to_one() {
        let values: Vec<f64> = (0..100)
            .map(|i| ((i * 37) % 101) as f64 / 30.0 - 1.5)
            .collect();
        let bw = silverman_bandwidth(&values).unwrap();
        let d = gaussian_kde(&values, bw, KDE_GRID_POINTS);
        assert_eq!(d.len(), 512);
        let integral: f64 = d
            .windows(2)
            .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
            .sum();
        assert!((integral - 1.0).abs() < 1e-3, "{integral}");
        assert!(silverman_bandwidth(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn ks_distance_oracle() {
        assert!((ks_distance_to_standard_normal(&[0.0]) - 0.5).abs() < 1e-15);
        let far = ks_distance_to_standard_normal(&[100.0, 101.0]);
        assert!((far - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trace_rows() {
        let t = export_convergence_trace(0.7, 0.5, &[100, 200, 400], WaveletKind::PsiC, 3, 5, 2)
            .unwrap();
        assert_eq!(t.len(), 3);
        assert!(t.iter().all(|(_, v)| v.is_finite()));
        assert!(
            export_convergence_trace(0.7, 0.5, &[200, 100], WaveletKind::PsiC, 3, 5, 2).is_err()
        );
    }
}
