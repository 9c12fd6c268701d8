//! Closed-form constants and asymptotic covariances of the wavelet-variance
//! limit theorems.

use num_integer::Integer;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_open_interval, Error, Result};
use crate::synthesis::driver_hurst;
use crate::wavelets::{c_psi, moment, LagKernel, MotherWavelet, QuadratureGrid};

/// Default symmetric truncation K of the lag series in `ell1`.
pub const DEFAULT_SERIES_TRUNCATION: usize = 512;

/// d_H = (1/(H+1)) (H / (2(2H-1)))^{-1/2}.
pub fn d_h(hurst: f64) -> Result<f64> {
    check_open_interval("H", hurst, 0.5, 1.0)?;
    Ok((hurst / (2.0 * (2.0 * hurst - 1.0))).powf(-0.5) / (hurst + 1.0))
}

/// alpha_H = H (H+1) / 2.
pub fn alpha_h(hurst: f64) -> f64 {
    0.5 * hurst * (hurst + 1.0)
}

fn c_t2_from(hurst: f64, c_psi_h: f64, c_psi_hprime: f64) -> Result<f64> {
    let ratio = c_psi_hprime / c_psi_h;
    let via_d = 4.0 * d_h(hurst)? * ratio;
    let squared = 32.0 * (2.0 * hurst - 1.0) / (hurst * (hurst + 1.0).powi(2)) * ratio * ratio;
    debug_assert!(
        (via_d * via_d - squared).abs() <= 1e-10 * squared.max(1.0),
        "C_T2 forms disagree: {via_d} vs {}",
        squared.sqrt()
    );
    Ok(via_d)
}

/// C_T2(H) = 4 d_H C_psi(H') / C_psi(H) with H' = (H+1)/2.
pub fn c_t2(hurst: f64, psi: &MotherWavelet, grid: &QuadratureGrid) -> Result<f64> {
    check_open_interval("H", hurst, 0.5, 1.0)?;
    let kernel = LagKernel::new(psi, grid, 1, 1);
    c_t2_from(
        hurst,
        kernel.c_psi(hurst)?,
        kernel.c_psi(driver_hurst(hurst))?,
    )
}

/// Every scalar constant attached to one (H, psi) pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitConstants {
    #[serde(rename = "H")]
    pub hurst: f64,
    #[serde(rename = "H_prime")]
    pub hurst_prime: f64,
    #[serde(rename = "d_H")]
    pub d_h: f64,
    #[serde(rename = "alpha_H")]
    pub alpha_h: f64,
    #[serde(rename = "c_psi_H")]
    pub c_psi_h: f64,
    #[serde(rename = "c_psi_Hprime")]
    pub c_psi_hprime: f64,
    pub c_t2: f64,
    /// Only defined for H > 3/4.
    pub ell2: Option<f64>,
}

impl LimitConstants {
    pub fn new(hurst: f64, psi: &MotherWavelet, grid: &QuadratureGrid) -> Result<Self> {
        check_open_interval("H", hurst, 0.5, 1.0)?;
        let kernel = LagKernel::new(psi, grid, 1, 1);
        let hurst_prime = driver_hurst(hurst);
        let c_psi_h = kernel.c_psi(hurst)?;
        let c_psi_hprime = kernel.c_psi(hurst_prime)?;
        let ell2 = if hurst > 0.75 {
            Some(ell2_from(hurst, moment(psi, 1, grid), c_psi_h))
        } else {
            None
        };
        Ok(Self {
            hurst,
            hurst_prime,
            d_h: d_h(hurst)?,
            alpha_h: alpha_h(hurst),
            c_psi_h,
            c_psi_hprime,
            c_t2: c_t2_from(hurst, c_psi_h, c_psi_hprime)?,
            ell2,
        })
    }
}

/// The Gaussian CLT for V-hat needs Q >= 2, or Q = 1 with H < 3/4.
pub fn check_clt_regime(psi: &MotherWavelet, hurst: f64) -> Result<()> {
    check_open_interval("H", hurst, 0.0, 1.0)?;
    if psi.vanishing_moments() == 1 && hurst >= 0.75 {
        return Err(Error::Regime(format!(
            "{} has one vanishing moment; the lag series diverges for H = {hurst} >= 3/4",
            psi.name()
        )));
    }
    Ok(())
}

/// `(1 / (2 d (pq)^{2H-1})) sum_{|k| <= K} [ int int psi psi |p x - q x' + k d|^{2H} / C_psi(H) ]^2`.
pub fn ell1(
    p: usize,
    q: usize,
    hurst: f64,
    psi: &MotherWavelet,
    grid: &QuadratureGrid,
    truncation: usize,
    d_pq: f64,
) -> Result<f64> {
    check_clt_regime(psi, hurst)?;
    if p == 0 || q == 0 {
        return Err(Error::param("p", "scale multipliers must be positive"));
    }
    if !(d_pq > 0.0 && d_pq.is_finite()) {
        return Err(Error::param("d_pq", format!("{d_pq} must be positive")));
    }
    let cpsi = c_psi(psi, hurst, grid)?;
    let kernel = LagKernel::new(psi, grid, p, q);
    let k = truncation as i64;
    let terms: Vec<f64> = (-k..=k)
        .into_par_iter()
        .map(|j| (kernel.power_integral(hurst, j as f64 * d_pq) / cpsi).powi(2))
        .collect();
    let sum: f64 = terms.iter().sum();
    let pq = (p * q) as f64;
    Ok(sum / (2.0 * d_pq * pq.powf(2.0 * hurst - 1.0)))
}

/// Limit of N_a Cov(V-hat(p a), V-hat(q a)) for Gaussian input.
///
/// Lags `p j - q j'` run over multiples of g = gcd(p, q), each hit about
/// N_a g / (pq) times, so the limit equals `ell1` with `d_pq = g` scaled by
/// g^2 / (pq). On the diagonal this is `ell1(p, p)` with `d_pp = p`.
pub fn asymptotic_covariance(
    p: usize,
    q: usize,
    hurst: f64,
    psi: &MotherWavelet,
    grid: &QuadratureGrid,
    truncation: usize,
) -> Result<f64> {
    let g = p.gcd(&q);
    let value = ell1(p, q, hurst, psi, grid, truncation, g as f64)?;
    Ok(value * (g * g) as f64 / (p * q) as f64)
}

/// ell x ell matrix L_1 of limit covariances. With `d_table` the literal
/// `ell1(p, q, d_table[p-1][q-1])` is used for every cell instead.
pub fn clt_covariance_matrix(
    ell: usize,
    hurst: f64,
    psi: &MotherWavelet,
    grid: &QuadratureGrid,
    truncation: usize,
    d_table: Option<&[Vec<f64>]>,
) -> Result<Vec<Vec<f64>>> {
    if let Some(t) = d_table {
        if t.len() != ell || t.iter().any(|r| r.len() != ell) {
            return Err(Error::param("d_pq", format!("table must be {ell} x {ell}")));
        }
    }
    let mut m = vec![vec![0.0; ell]; ell];
    for p in 1..=ell {
        for q in p..=ell {
            let v = match d_table {
                Some(t) => ell1(p, q, hurst, psi, grid, truncation, t[p - 1][q - 1])?,
                None => asymptotic_covariance(p, q, hurst, psi, grid, truncation)?,
            };
            m[p - 1][q - 1] = v;
            m[q - 1][p - 1] = v;
        }
    }
    Ok(m)
}

fn ell2_from(hurst: f64, first_moment: f64, c_psi_h: f64) -> f64 {
    let factor = (2.0 * hurst * hurst * (2.0 * hurst - 1.0) / (4.0 * hurst - 3.0)).sqrt();
    factor * first_moment * first_moment / c_psi_h
}

/// `(2H^2(2H-1)/(4H-3))^{1/2} (int x psi)^2 / C_psi(H)` for H in (3/4, 1).
/// Zero whenever the first moment of psi vanishes.
pub fn ell2(hurst: f64, psi: &MotherWavelet, grid: &QuadratureGrid) -> Result<f64> {
    check_open_interval("H", hurst, 0.75, 1.0)?;
    let m1 = if psi.vanishing_moments() >= 2 {
        0.0
    } else {
        moment(psi, 1, grid)
    };
    Ok(ell2_from(hurst, m1, c_psi(psi, hurst, grid)?))
}

/// Sigma_ell(i, j) = C_T2(H)^2 (ij)^{1-H}.
pub fn sigma_ell(
    hurst: f64,
    psi: &MotherWavelet,
    grid: &QuadratureGrid,
    ell: usize,
) -> Result<Vec<Vec<f64>>> {
    if ell == 0 {
        return Err(Error::param("ell", "must be at least 1"));
    }
    let ct2 = c_t2(hurst, psi, grid)?;
    Ok(sigma_ell_from(hurst, ct2, ell))
}

fn sigma_ell_from(hurst: f64, c_t2: f64, ell: usize) -> Vec<Vec<f64>> {
    (1..=ell)
        .map(|i| {
            (1..=ell)
                .map(|j| c_t2 * c_t2 * ((i * j) as f64).powf(1.0 - hurst))
                .collect()
        })
        .collect()
}

/// Least-squares design for regressing on log i, i = 1..=ell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionWeights {
    /// Row of (Z'Z)^{-1} Z' that extracts the slope.
    pub slope_row: Vec<f64>,
    /// Row of (Z'Z)^{-1} Z' that extracts the intercept.
    pub intercept_row: Vec<f64>,
    /// Design rows (log i, 1).
    pub design: Vec<[f64; 2]>,
}

pub fn regression_weights(ell: usize) -> Result<RegressionWeights> {
    if ell < 2 {
        return Err(Error::param("ell", "regression needs at least 2 scales"));
    }
    let logs: Vec<f64> = (1..=ell).map(|i| (i as f64).ln()).collect();
    let mean = logs.iter().sum::<f64>() / ell as f64;
    let sxx: f64 = logs.iter().map(|l| (l - mean).powi(2)).sum();
    let slope_row: Vec<f64> = logs.iter().map(|l| (l - mean) / sxx).collect();
    let intercept_row = slope_row
        .iter()
        .map(|w| 1.0 / ell as f64 - mean * w)
        .collect();
    Ok(RegressionWeights {
        slope_row,
        intercept_row,
        design: logs.iter().map(|&l| [l, 1.0]).collect(),
    })
}

fn quadratic_form(row: &[f64], matrix: &[Vec<f64>]) -> f64 {
    row.iter()
        .zip(matrix)
        .map(|(ri, mi)| ri * mi.iter().zip(row).map(|(m, rj)| m * rj).sum::<f64>())
        .sum()
}

/// gamma^2 = (1/4) M L_1 M', the asymptotic variance of sqrt(N/a)(H-hat - H)
/// for Gaussian input.
pub fn gamma2(
    hurst: f64,
    psi: &MotherWavelet,
    grid: &QuadratureGrid,
    ell: usize,
    truncation: usize,
    d_table: Option<&[Vec<f64>]>,
) -> Result<f64> {
    let weights = regression_weights(ell)?;
    let l1 = clt_covariance_matrix(ell, hurst, psi, grid, truncation, d_table)?;
    Ok(0.25 * quadratic_form(&weights.slope_row, &l1))
}

/// Approximations of Var(H-hat) for Rosenblatt input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HurstVariance {
    /// `(1-H)^2 C_T2^2 / (4 H^4) ell^{2H-2} (a/N)^{2-2H}`.
    pub asymptotic: f64,
    /// `(1/4) M Sigma_ell M' (a/N)^{2-2H}`.
    pub finite_ell: f64,
}

pub fn var_hhat(
    hurst: f64,
    psi: &MotherWavelet,
    grid: &QuadratureGrid,
    ell: usize,
    n: usize,
    scale: usize,
) -> Result<HurstVariance> {
    let weights = regression_weights(ell)?;
    if scale == 0 || scale > n {
        return Err(Error::param("a", format!("{scale} not in 1..={n}")));
    }
    let ct2 = c_t2(hurst, psi, grid)?;
    let rate = (scale as f64 / n as f64).powf(2.0 - 2.0 * hurst);
    let asymptotic = (1.0 - hurst).powi(2) * ct2 * ct2 / (4.0 * hurst.powi(4))
        * (ell as f64).powf(2.0 * hurst - 2.0)
        * rate;
    let sigma = sigma_ell_from(hurst, ct2, ell);
    let finite_ell = 0.25 * quadratic_form(&weights.slope_row, &sigma) * rate;
    Ok(HurstVariance {
        asymptotic,
        finite_ell,
    })
}

/// Just the asymptotic approximation of Var(H-hat).
pub fn var_hhat_asymptotic(
    hurst: f64,
    psi: &MotherWavelet,
    grid: &QuadratureGrid,
    ell: usize,
    n: usize,
    scale: usize,
) -> Result<f64> {
    Ok(var_hhat(hurst, psi, grid, ell, n, scale)?.asymptotic)
}
