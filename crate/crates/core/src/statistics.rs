//! Discretized wavelet coefficients e(a, b) and the empirical variance
//! statistics built from them.

use rayon::prelude::*;

use crate::constants;
use crate::error::{check_open_interval, Error, Result};
use crate::synthesis::SamplePath;
use crate::wavelets::{c_psi, MotherWavelet, QuadratureGrid};

/// N_a = floor(N / a) - 1, the number of shifts whose support lies inside 1..=N.
pub fn usable_shifts(n: usize, scale: usize) -> i64 {
    if scale == 0 {
        return -1;
    }
    (n / scale) as i64 - 1
}

fn check_scale(n: usize, scale: usize, required: i64) -> Result<usize> {
    if scale == 0 {
        return Err(Error::param("a", "scale must be at least 1"));
    }
    let usable = usable_shifts(n, scale);
    if usable < required {
        return Err(Error::ScaleTooLarge {
            scale,
            n,
            usable,
            required,
        });
    }
    Ok(usable as usize)
}

/// `psi(k / a)` for k = 1..=a; e(a, b) only ever reads these values.
fn scale_weights(psi: &MotherWavelet, scale: usize) -> Vec<f64> {
    let a = scale as f64;
    (1..=scale).map(|k| psi.evaluate(k as f64 / a)).collect()
}

fn coeff_at(values: &[f64], weights: &[f64], scale: usize, shift: usize) -> f64 {
    let start = scale * shift;
    let sum: f64 = values[start..start + scale]
        .iter()
        .zip(weights)
        .map(|(x, w)| x * w)
        .sum();
    sum / (scale as f64).sqrt()
}

/// e(a, b) = a^{-1/2} sum_k X_k psi(k/a - b) for 1 <= b <= N_a.
pub fn coeff(path: &SamplePath, scale: usize, shift: usize, psi: &MotherWavelet) -> Result<f64> {
    let n = path.len();
    let usable = check_scale(n, scale, 1)?;
    if shift == 0 || shift > usable {
        return Err(Error::ShiftOutOfRange {
            shift,
            max: usable,
            scale,
        });
    }
    Ok(coeff_at(
        path.values(),
        &scale_weights(psi, scale),
        scale,
        shift,
    ))
}

/// All coefficients e(a, 1), ..., e(a, N_a).
pub fn coeffs(values: &[f64], scale: usize, psi: &MotherWavelet) -> Result<Vec<f64>> {
    let usable = check_scale(values.len(), scale, 1)?;
    let weights = scale_weights(psi, scale);
    Ok((1..=usable)
        .map(|b| coeff_at(values, &weights, scale, b))
        .collect())
}

/// Known (H, sigma^2) together with C_psi(H), for turning e into e-tilde.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub hurst: f64,
    pub sigma2: f64,
    pub c_psi: f64,
}

impl Normalization {
    pub fn new(
        psi: &MotherWavelet,
        hurst: f64,
        sigma2: f64,
        grid: &QuadratureGrid,
    ) -> Result<Self> {
        check_open_interval("H", hurst, 0.0, 1.0)?;
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::param("sigma2", format!("{sigma2} must be positive")));
        }
        Ok(Self {
            hurst,
            sigma2,
            c_psi: c_psi(psi, hurst, grid)?,
        })
    }

    /// sigma a^{H + 1/2} C_psi(H)^{1/2}.
    pub fn divisor(&self, scale: usize) -> f64 {
        self.sigma2.sqrt() * (scale as f64).powf(self.hurst + 0.5) * self.c_psi.sqrt()
    }
}

pub fn coeff_normalized(
    path: &SamplePath,
    scale: usize,
    shift: usize,
    psi: &MotherWavelet,
    hurst: f64,
    sigma2: f64,
) -> Result<f64> {
    let norm = Normalization::new(psi, hurst, sigma2, &QuadratureGrid::default())?;
    Ok(coeff(path, scale, shift, psi)? / norm.divisor(scale))
}

/// Mean of e^2 over the shifts of one scale.
pub fn i_hat_from_coeffs(coeffs: &[f64]) -> f64 {
    coeffs.iter().map(|e| e * e).sum::<f64>() / coeffs.len() as f64
}

/// Mean of (e-tilde^2 - 1); equals I-hat / (sigma^2 C_psi a^{2H+1}) - 1.
pub fn v_hat_from_coeffs(coeffs: &[f64], scale: usize, norm: &Normalization) -> f64 {
    let d2 = norm.divisor(scale).powi(2);
    coeffs.iter().map(|e| e * e / d2 - 1.0).sum::<f64>() / coeffs.len() as f64
}

pub fn i_hat(path: &SamplePath, scale: usize, psi: &MotherWavelet) -> Result<f64> {
    Ok(i_hat_from_coeffs(&coeffs(path.values(), scale, psi)?))
}

/// V-hat with sigma^2 = 1 and C_psi on the default quadrature grid.
pub fn v_hat(path: &SamplePath, scale: usize, psi: &MotherWavelet, hurst: f64) -> Result<f64> {
    Ok(summarize(path, scale, psi, hurst, 1.0, &QuadratureGrid::default())?.v_hat)
}

/// Scale-level summary of the coefficient statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleSummary {
    pub scale: usize,
    pub usable_shifts: usize,
    pub i_hat: f64,
    pub v_hat: f64,
    /// Every coefficient vanished; `v_hat` is then exactly -1.
    pub degenerate: bool,
}

pub fn summarize(
    path: &SamplePath,
    scale: usize,
    psi: &MotherWavelet,
    hurst: f64,
    sigma2: f64,
    grid: &QuadratureGrid,
) -> Result<ScaleSummary> {
    let norm = Normalization::new(psi, hurst, sigma2, grid)?;
    let e = coeffs(path.values(), scale, psi)?;
    Ok(ScaleSummary {
        scale,
        usable_shifts: e.len(),
        i_hat: i_hat_from_coeffs(&e),
        v_hat: v_hat_from_coeffs(&e, scale, &norm),
        degenerate: e.iter().all(|&c| c == 0.0),
    })
}

/// C_T2(H)^{-1} (N/a)^{1-H} V-hat.
pub fn normalize_v_hat(v_hat: f64, n: usize, scale: usize, hurst: f64, c_t2: f64) -> f64 {
    (n as f64 / scale as f64).powf(1.0 - hurst) * v_hat / c_t2
}

pub fn normalized_statistic(
    path: &SamplePath,
    scale: usize,
    psi: &MotherWavelet,
    hurst: f64,
) -> Result<f64> {
    check_open_interval("H", hurst, 0.5, 1.0)?;
    let grid = QuadratureGrid::default();
    let ct2 = constants::c_t2(hurst, psi, &grid)?;
    let v = summarize(path, scale, psi, hurst, 1.0, &grid)?.v_hat;
    Ok(normalize_v_hat(v, path.len(), scale, hurst, ct2))
}

/// Coefficients at the scales a, 2a, ..., ell a of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    base_scale: usize,
    n: usize,
    rows: Vec<Vec<f64>>,
}

impl CoefficientTable {
    pub fn new(
        path: &SamplePath,
        base_scale: usize,
        ell: usize,
        psi: &MotherWavelet,
    ) -> Result<Self> {
        if ell == 0 {
            return Err(Error::param("ell", "need at least one scale"));
        }
        let n = path.len();
        check_scale(n, base_scale, 1)?;
        let largest = base_scale
            .checked_mul(ell)
            .ok_or_else(|| Error::param("ell", "scale overflow"))?;
        check_scale(n, largest, 1)?;
        let rows = (1..=ell)
            .into_par_iter()
            .map(|i| coeffs(path.values(), i * base_scale, psi))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            base_scale,
            n,
            rows,
        })
    }

    pub fn base_scale(&self) -> usize {
        self.base_scale
    }

    pub fn sample_len(&self) -> usize {
        self.n
    }

    /// Number of scale multipliers ell.
    pub fn levels(&self) -> usize {
        self.rows.len()
    }

    /// Scales i a for i = 1..=ell.
    pub fn scales(&self) -> Vec<usize> {
        (1..=self.rows.len()).map(|i| i * self.base_scale).collect()
    }

    /// Row for multiplier `i` (1-based).
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i - 1]
    }

    pub fn i_hats(&self) -> Vec<f64> {
        self.rows.iter().map(|r| i_hat_from_coeffs(r)).collect()
    }

    /// (scale, shift, value) triples in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows.iter().enumerate().flat_map(move |(i, row)| {
            let scale = (i + 1) * self.base_scale;
            row.iter().enumerate().map(move |(j, &v)| (scale, j + 1, v))
        })
    }
}
