//! Analyzing wavelets on [0, 1] and the midpoint quadrature used for their
//! moments and for the `|x - x'|^{2H}` double integrals.
//!
//! Every built-in wavelet is supported on [0, 1] and evaluates to zero
//! outside the half-open interval (0, 1]. The right-closed convention makes
//! the discrete coefficient at shift `b` read exactly the samples
//! `a*b < k <= a*(b+1)`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{check_open_interval, Error, Result};

/// Half-width of the Mexican Hat window in its natural variable `u`.
///
/// `(1 - u^2) exp(-u^2 / 2)` has magnitude about 1.1e-9 at `|u| = 7`.
pub const MEXICAN_HAT_HALF_WIDTH: f64 = 7.0;

/// Dyadic depth of the Daubechies cascade table.
pub const CASCADE_DEPTH: u32 = 14;

/// Daubechies scaling filter with four vanishing moments (8 taps, sum sqrt 2).
const DB4_LOWPASS: [f64; 8] = [
    0.23037781330885523,
    0.7148465705525415,
    0.6308807679295904,
    -0.02798376941698385,
    -0.18703481171888114,
    0.030841381835986965,
    0.032883011666982945,
    -0.010597401784997278,
];

/// Composite midpoint rule on [0, 1] with `resolution` uniform cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureGrid {
    resolution: usize,
}

impl QuadratureGrid {
    pub const DEFAULT_RESOLUTION: usize = 1 << 12;
    pub const FINE_RESOLUTION: usize = 1 << 14;

    pub fn new(resolution: usize) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::param("resolution", format!("{resolution} < 2")));
        }
        Ok(Self { resolution })
    }

    pub fn fine() -> Self {
        Self {
            resolution: Self::FINE_RESOLUTION,
        }
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn step(&self) -> f64 {
        1.0 / self.resolution as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.step();
        (0..self.resolution).map(move |i| (i as f64 + 0.5) * h)
    }
}

impl Default for QuadratureGrid {
    fn default() -> Self {
        Self {
            resolution: Self::DEFAULT_RESOLUTION,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveletKind {
    Haar,
    PsiC,
    MexicanHat,
    Daubechies4,
}

impl WaveletKind {
    pub const ALL: [WaveletKind; 4] = [
        WaveletKind::Haar,
        WaveletKind::PsiC,
        WaveletKind::MexicanHat,
        WaveletKind::Daubechies4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WaveletKind::Haar => "haar",
            WaveletKind::PsiC => "psi_c",
            WaveletKind::MexicanHat => "mexican_hat",
            WaveletKind::Daubechies4 => "daubechies4",
        }
    }
}

impl fmt::Display for WaveletKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WaveletKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WaveletKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownWavelet {
                name: s.to_string(),
                available: WaveletKind::ALL.map(|k| k.name()).join(", "),
            })
    }
}

/// A compactly supported mother wavelet normalized to support [0, 1].
///
/// Immutable after construction; the Daubechies table is shared behind an
/// `Arc` so clones are cheap.
#[derive(Debug, Clone)]
pub struct MotherWavelet {
    kind: WaveletKind,
    amplitude: f64,
    cascade: Option<Arc<Vec<f64>>>,
}

/// Returns the built-in wavelet registered under `name`.
pub fn builtin(name: &str) -> Result<MotherWavelet> {
    Ok(MotherWavelet::new(name.parse()?))
}

impl MotherWavelet {
    pub fn new(kind: WaveletKind) -> Self {
        let cascade = match kind {
            WaveletKind::Daubechies4 => Some(Arc::new(daubechies_cascade(CASCADE_DEPTH))),
            _ => None,
        };
        Self {
            kind,
            amplitude: 1.0,
            cascade,
        }
    }

    /// The same wavelet multiplied by a nonzero constant.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if factor == 0.0 || !factor.is_finite() {
            return Err(Error::param("factor", "must be finite and nonzero"));
        }
        Ok(Self {
            amplitude: self.amplitude * factor,
            ..self.clone()
        })
    }

    pub fn kind(&self) -> WaveletKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn support(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    /// Number of vanishing moments Q.
    pub fn vanishing_moments(&self) -> u32 {
        match self.kind {
            WaveletKind::Haar => 1,
            WaveletKind::PsiC => 3,
            WaveletKind::MexicanHat => 2,
            WaveletKind::Daubechies4 => 4,
        }
    }

    /// Order m of continuous differentiability; `None` means C^infinity.
    ///
    /// psi_c is smooth inside (0, 1) but has a kink at both ends, so it is
    /// recorded as m = 1.
    pub fn smoothness(&self) -> Option<u32> {
        match self.kind {
            WaveletKind::Haar => Some(0),
            WaveletKind::PsiC => Some(1),
            WaveletKind::MexicanHat => None,
            WaveletKind::Daubechies4 => Some(1),
        }
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        if !(t > 0.0 && t <= 1.0) {
            return 0.0;
        }
        let raw = match self.kind {
            WaveletKind::Haar => {
                if t <= 0.5 {
                    1.0
                } else {
                    -1.0
                }
            }
            WaveletKind::PsiC => t * (t - 1.0) * (2.0 * t - 1.0) * (t * t - t + 1.0 / 7.0),
            WaveletKind::MexicanHat => {
                let u = 2.0 * MEXICAN_HAT_HALF_WIDTH * (t - 0.5);
                let u2 = u * u;
                (1.0 - u2) * (-0.5 * u2).exp()
            }
            WaveletKind::Daubechies4 => {
                let table = self.cascade.as_deref().expect("cascade table");
                interpolate_cascade(table, t)
            }
        };
        self.amplitude * raw
    }

    /// psi evaluated at the grid midpoints.
    pub fn sample(&self, grid: &QuadratureGrid) -> Vec<f64> {
        grid.nodes().map(|x| self.evaluate(x)).collect()
    }
}

/// Midpoint approximation of the p-th moment of psi.
pub fn moment(psi: &MotherWavelet, p: u32, grid: &QuadratureGrid) -> f64 {
    let h = grid.step();
    grid.nodes()
        .map(|x| psi.evaluate(x) * x.powi(p as i32))
        .sum::<f64>()
        * h
}

/// C_psi(H) = -1/2 int int psi(x) psi(x') |x - x'|^{2H} dx dx'.
pub fn c_psi(psi: &MotherWavelet, hurst: f64, grid: &QuadratureGrid) -> Result<f64> {
    LagKernel::new(psi, grid, 1, 1).c_psi(hurst)
}

/// Midpoint discretization of the measure psi(x) psi(x') dx dx' pushed
/// forward by `(x, x') -> p x - q x'`.
///
/// With nodes `x_i = (i + 1/2) h`, `p x_i - q x_j = h (s + (p - q)/2)` where
/// `s = p i - q j` is an integer, so every double integral of the form
/// `int int psi psi f(p x - q x')` collapses to a single sum over `s`.
#[derive(Debug, Clone)]
pub struct LagKernel {
    weights: Vec<f64>,
    min_lag: i64,
    step: f64,
    shift: f64,
    reach: f64,
    moments: Vec<f64>,
}

/// Offsets at least this many times the kernel's reach use the binomial
/// expansion in `power_integral`.
const FAR_FIELD_RATIO: f64 = 8.0;
const FAR_FIELD_TERMS: usize = 24;

impl LagKernel {
    pub fn new(psi: &MotherWavelet, grid: &QuadratureGrid, p: usize, q: usize) -> Self {
        assert!(p >= 1 && q >= 1, "dilations must be positive");
        let samples = psi.sample(grid);
        let r = samples.len();
        let h = grid.step();

        let len_u = p * (r - 1) + 1;
        let len_v = q * (r - 1) + 1;
        let full = len_u + len_v - 1;
        let size = full.next_power_of_two();

        let mut u = vec![Complex::new(0.0, 0.0); size];
        let mut v = vec![Complex::new(0.0, 0.0); size];
        for (i, &s) in samples.iter().enumerate() {
            u[p * i].re = s;
            // reversed, so the product of transforms is a cross-correlation
            v[len_v - 1 - q * i].re = s;
        }
        let mut planner = FftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        forward.process(&mut u);
        forward.process(&mut v);
        for (a, b) in u.iter_mut().zip(&v) {
            *a *= *b;
        }
        inverse.process(&mut u);

        let norm = h * h / size as f64;
        let weights: Vec<f64> = u[..full].iter().map(|c| c.re * norm).collect();
        let mut kernel = Self {
            weights,
            min_lag: -((len_v - 1) as i64),
            step: h,
            shift: 0.5 * (p as f64 - q as f64),
            reach: p.max(q) as f64,
            moments: Vec::new(),
        };
        kernel.moments = (0..=FAR_FIELD_TERMS)
            .map(|j| kernel.integrate(|z| z.powi(j as i32)))
            .collect();
        kernel
    }

    /// Sum of `w(s) f(lag(s))` over all lags.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(idx, &w)| {
                let s = (self.min_lag + idx as i64) as f64;
                w * f(self.step * (s + self.shift))
            })
            .sum()
    }

    /// `int int psi(x) psi(x') |p x - q x' + offset|^{2H} dx dx'`.
    ///
    /// Far from the origin `|o + z|^{2H}` is expanded as
    /// `|o|^{2H} sum_j binom(2H, j) (z / o)^j` against the kernel's own
    /// discrete moments, which is both faster and free of the cancellation
    /// the direct sum suffers.
    pub fn power_integral(&self, hurst: f64, offset: f64) -> f64 {
        let e = 2.0 * hurst;
        if offset.abs() < FAR_FIELD_RATIO * self.reach {
            return self.integrate(|z| (z + offset).abs().powf(e));
        }
        let mut binom = 1.0;
        let mut inv_pow = 1.0;
        let mut total = 0.0;
        for (j, mu) in self.moments.iter().enumerate() {
            total += binom * inv_pow * mu;
            binom *= (e - j as f64) / (j + 1) as f64;
            inv_pow /= offset;
        }
        offset.abs().powf(e) * total
    }

    /// Discrete moment `sum_s w(s) lag(s)^j`, i.e. `int int psi psi (p x - q x')^j`.
    pub fn moment(&self, j: usize) -> f64 {
        if j < self.moments.len() {
            self.moments[j]
        } else {
            self.integrate(|z| z.powi(j as i32))
        }
    }

    /// C_psi(H); only meaningful for the (1, 1) kernel.
    pub fn c_psi(&self, hurst: f64) -> Result<f64> {
        check_open_interval("H", hurst, 0.0, 1.0)?;
        Ok(-0.5 * self.power_integral(hurst, 0.0))
    }
}

/// Scaling and wavelet functions of the 8-tap Daubechies filter on the
/// dyadic grid `k / 2^depth` over [0, 7]; returns the wavelet values.
fn daubechies_cascade(depth: u32) -> Vec<f64> {
    let taps = DB4_LOWPASS.len();
    let span = taps - 1;
    let sqrt2 = std::f64::consts::SQRT_2;

    // phi at the integers: eigenvector of T[i][j] = sqrt2 h[2i - j] for
    // eigenvalue 1, normalized to sum 1. Found by power iteration on the
    // interior points 1..span-1 (phi vanishes at 0 and span).
    let interior = span - 1;
    let mut phi_int = vec![1.0 / interior as f64; interior];
    for _ in 0..2000 {
        let mut next = vec![0.0; interior];
        for (row, out) in next.iter_mut().enumerate() {
            let i = row + 1;
            for (col, &val) in phi_int.iter().enumerate() {
                let j = col + 1;
                let k = 2 * i as i64 - j as i64;
                if (0..taps as i64).contains(&k) {
                    *out += sqrt2 * DB4_LOWPASS[k as usize] * val;
                }
            }
        }
        let sum: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= sum);
        phi_int = next;
    }

    // phi on successively finer dyadic grids.
    let mut phi = vec![0.0; span + 1];
    phi[1..span].copy_from_slice(&phi_int);
    for level in 1..=depth {
        let n = span << level;
        let mut finer = vec![0.0; n + 1];
        for (k, out) in finer.iter_mut().enumerate() {
            if k % 2 == 0 {
                *out = phi[k / 2];
                continue;
            }
            // phi(x) = sqrt2 sum_n h_n phi(2x - n), 2x - n on the previous grid
            let mut acc = 0.0;
            for (tap, &h) in DB4_LOWPASS.iter().enumerate() {
                let idx = k as i64 - (tap << (level - 1)) as i64;
                if idx >= 0 && (idx as usize) < phi.len() {
                    acc += h * phi[idx as usize];
                }
            }
            *out = sqrt2 * acc;
        }
        phi = finer;
    }

    // psi(x) = sqrt2 sum_n g_n phi(2x - n), g_n = (-1)^n h_{span - n}.
    let n = span << depth;
    let mut psi = vec![0.0; n + 1];
    for (k, out) in psi.iter_mut().enumerate() {
        let mut acc = 0.0;
        for tap in 0..taps {
            let g = if tap % 2 == 0 { 1.0 } else { -1.0 } * DB4_LOWPASS[span - tap];
            let idx = 2 * k as i64 - (tap << depth) as i64;
            if idx >= 0 && (idx as usize) < phi.len() {
                acc += g * phi[idx as usize];
            }
        }
        *out = sqrt2 * acc;
    }
    psi
}

fn interpolate_cascade(table: &[f64], t: f64) -> f64 {
    let last = table.len() - 1;
    let pos = t * last as f64;
    let lo = (pos.floor() as usize).min(last);
    if lo == last {
        return table[last];
    }
    let frac = pos - lo as f64;
    table[lo] + frac * (table[lo + 1] - table[lo])
}
