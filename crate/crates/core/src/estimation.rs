//! Estimation of H and sigma^2 by least-squares regression of log I-hat on
//! the log of the scale, plus a parametric-bootstrap confidence interval for
//! Rosenblatt data.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::regression_weights;
use crate::error::{check_open_interval, Error, Result};
use crate::statistics::{usable_shifts, CoefficientTable};
use crate::synthesis::{RngStream, RosenblattGenerator, SamplePath};
use crate::wavelets::{c_psi, MotherWavelet, QuadratureGrid};

/// Which limit law governs the fluctuations of V-hat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    GaussianClt,
    Rosenblatt,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::GaussianClt => "gaussian_clt",
            Regime::Rosenblatt => "rosenblatt",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian_clt" | "fbm" => Ok(Regime::GaussianClt),
            "rosenblatt" => Ok(Regime::Rosenblatt),
            other => Err(Error::param(
                "regime",
                format!("unknown regime `{other}` (expected gaussian_clt or rosenblatt)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    #[serde(rename = "H_hat")]
    pub hurst_hat: f64,
    /// `None` when H-hat falls outside (0, 1), where C_psi is undefined.
    pub sigma2_hat: Option<f64>,
    pub scales_used: Vec<usize>,
    pub log_ivalues: Vec<f64>,
    pub regression_residuals: Vec<f64>,
    pub regime: Regime,
    pub ci: Option<ConfidenceInterval>,
}

/// Fits `log I(i a) = (2H+1) log i + c` over i = 1..=ell and solves
/// `c = (2H+1) log a + log(sigma^2 C_psi(H))` for sigma^2.
pub fn estimate_from_ivalues(
    ivalues: &[f64],
    base_scale: usize,
    psi: &MotherWavelet,
    grid: &QuadratureGrid,
    regime: Regime,
) -> Result<EstimationResult> {
    let ell = ivalues.len();
    let weights = regression_weights(ell)?;
    if base_scale == 0 {
        return Err(Error::param("a", "scale must be at least 1"));
    }
    if let Some((i, v)) = ivalues
        .iter()
        .enumerate()
        .find(|(_, &v)| !(v > 0.0 && v.is_finite()))
    {
        return Err(Error::DegenerateData(format!(
            "I-hat at scale {} is {v}; its logarithm is undefined",
            (i + 1) * base_scale
        )));
    }
    let logs: Vec<f64> = ivalues.iter().map(|v| v.ln()).collect();
    let dot = |row: &[f64]| row.iter().zip(&logs).map(|(w, y)| w * y).sum::<f64>();
    let slope = dot(&weights.slope_row);
    let intercept = dot(&weights.intercept_row);
    let hurst_hat = 0.5 * slope - 0.5;

    let residuals = weights
        .design
        .iter()
        .zip(&logs)
        .map(|(z, y)| y - slope * z[0] - intercept)
        .collect();

    let sigma2_hat = if hurst_hat > 0.0 && hurst_hat < 1.0 {
        let cpsi = c_psi(psi, hurst_hat, grid)?;
        let log_a = (base_scale as f64).ln();
        Some((intercept - (2.0 * hurst_hat + 1.0) * log_a).exp() / cpsi)
    } else {
        None
    };

    Ok(EstimationResult {
        hurst_hat,
        sigma2_hat,
        scales_used: (1..=ell).map(|i| i * base_scale).collect(),
        log_ivalues: logs,
        regression_residuals: residuals,
        regime,
        ci: None,
    })
}

/// Estimates H from the scales a, 2a, ..., ell a of one path.
pub fn estimate(
    path: &SamplePath,
    psi: &MotherWavelet,
    base_scale: usize,
    ell: usize,
    regime: Regime,
) -> Result<EstimationResult> {
    estimate_on_grid(
        path,
        psi,
        base_scale,
        ell,
        regime,
        &QuadratureGrid::default(),
    )
}

pub fn estimate_on_grid(
    path: &SamplePath,
    psi: &MotherWavelet,
    base_scale: usize,
    ell: usize,
    regime: Regime,
    grid: &QuadratureGrid,
) -> Result<EstimationResult> {
    if ell < 2 {
        return Err(Error::param("ell", "regression needs at least 2 scales"));
    }
    let table = CoefficientTable::new(path, base_scale, ell, psi)?;
    estimate_from_ivalues(&table.i_hats(), base_scale, psi, grid, regime)
}

/// Lower bound on the scale exponent below which the variance statistic
/// is dominated by discretization bias.
///
/// Rosenblatt input needs N a^{-2} -> 0. Gaussian input needs
/// N a^{-1 - min(1, 2m/3)} -> 0 where m is the smoothness of psi; m = 0 is
/// treated as m = 1.
pub fn exponent_threshold(regime: Regime, smoothness: Option<u32>) -> f64 {
    match regime {
        Regime::Rosenblatt => 0.5,
        Regime::GaussianClt => {
            let m = smoothness.map_or(f64::INFINITY, |m| m.max(1) as f64);
            1.0 / (1.0 + (2.0 * m / 3.0).min(1.0))
        }
    }
}

/// Rejects exponents at or below `exponent_threshold`.
pub fn check_scale_exponent(regime: Regime, smoothness: Option<u32>, exponent: f64) -> Result<()> {
    let t = exponent_threshold(regime, smoothness);
    if exponent > t {
        Ok(())
    } else {
        Err(Error::Regime(format!(
            "scale exponent {exponent} must exceed {t} for the {regime} regime"
        )))
    }
}

/// floor(N^e) for a given exponent, clipped to 1 <= a <= N/3 so N_a >= 2.
pub fn scale_from_exponent(n: usize, exponent: f64) -> Result<usize> {
    if n < 4 {
        return Err(Error::param("N", format!("{n} < 4")));
    }
    if !exponent.is_finite() {
        return Err(Error::param("scale_exponent", "must be finite"));
    }
    // absorb roundoff so that exact powers such as 10000^0.5 land on 100
    let raw = ((n as f64).powf(exponent) * (1.0 + 1e-12)).floor();
    let cap = n / 3;
    Ok((raw.max(1.0) as usize).min(cap).max(1))
}

/// floor(N^{threshold + delta}), clipped so that N_a >= 2.
pub fn default_scale(
    n: usize,
    regime: Regime,
    smoothness: Option<u32>,
    delta: f64,
) -> Result<usize> {
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::param("delta", format!("{delta} must be positive")));
    }
    let a = scale_from_exponent(n, exponent_threshold(regime, smoothness) + delta)?;
    debug_assert!(usable_shifts(n, a) >= 2);
    Ok(a)
}

/// max(100, 20 / (1 - level)) so the tail quantile rests on at least 20 draws.
pub fn min_bootstrap_replications(level: f64) -> usize {
    (20.0 / (1.0 - level) - 1e-9).ceil().max(100.0) as usize
}

/// Bootstrap settings for `confidence_interval`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapOptions {
    pub level: f64,
    pub replications: usize,
    pub stream: RngStream,
    pub refinement: usize,
}

/// Symmetric interval H-hat -/+ q (N/a)^{H-hat - 1}, where q is the
/// `level` quantile of |(N/a)^{1-H-hat} (H* - H-hat)| over Rosenblatt
/// paths simulated with H = H-hat.
pub fn confidence_interval(
    path: &SamplePath,
    psi: &MotherWavelet,
    base_scale: usize,
    ell: usize,
    opts: &BootstrapOptions,
) -> Result<(EstimationResult, ConfidenceInterval)> {
    check_open_interval("level", opts.level, 0.0, 1.0)?;
    let needed = min_bootstrap_replications(opts.level);
    if opts.replications < needed {
        return Err(Error::param(
            "B",
            format!(
                "{} bootstrap replications; level {} needs at least {needed}",
                opts.replications, opts.level
            ),
        ));
    }
    let mut est = estimate(path, psi, base_scale, ell, Regime::Rosenblatt)?;
    let h = est.hurst_hat;
    if !(h > 0.5 && h < 1.0) {
        return Err(Error::Regime(format!(
            "H-hat = {h} is outside (1/2, 1); no Rosenblatt model to resample"
        )));
    }
    let n = path.len();
    let generator = RosenblattGenerator::new(n, h, opts.refinement)?;
    let rate = (n as f64 / base_scale as f64).powf(1.0 - h);
    let mut stats = (0..opts.replications as u64)
        .into_par_iter()
        .map(|b| {
            let synthetic = generator.sample(opts.stream.derive("bootstrap", b))?;
            let star = estimate(&synthetic, psi, base_scale, ell, Regime::Rosenblatt)?;
            Ok((rate * (star.hurst_hat - h)).abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    stats.sort_by(f64::total_cmp);
    let rank = ((opts.level * stats.len() as f64).ceil() as usize).clamp(1, stats.len());
    let q = stats[rank - 1];
    let half = q / rate;
    let ci = ConfidenceInterval {
        lower: h - half,
        upper: h + half,
        level: opts.level,
    };
    est.ci = Some(ci);
    Ok((est, ci))
}
