//! Exact fractional Gaussian noise by circulant embedding, fractional
//! Brownian motion by cumulative sums, and approximate Rosenblatt paths from
//! normalized partial sums of `fGn^2 - 1`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{check_open_interval, Error, Result};

/// Refinement factor of the Rosenblatt generator used unless overridden.
pub const DEFAULT_REFINEMENT: usize = 100;

/// Relative tolerance below zero at which circulant eigenvalues are clamped.
pub const EIGENVALUE_TOLERANCE: f64 = 1e-9;

/// A reproducible random stream: the generator state is a pure function of
/// `(master_seed, stream_index)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    /// A child stream under the same master seed, indexed by a hash of
    /// (parent index, label, index); stable across platforms and releases.
    pub fn derive(&self, label: &str, index: u64) -> RngStream {
        let key = format!("{}/{label}/{index}", self.stream_index);
        RngStream::new(self.master_seed, stream_index_for(&key))
    }

    /// ChaCha keyed by the master seed, on the counter stream `stream_index`.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

/// First 8 bytes (little endian) of SHA-256 of `key`.
pub fn stream_index_for(key: &str) -> u64 {
    let digest = Sha256::digest(key.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessKind {
    Fbm,
    Rosenblatt,
    External,
}

impl ProcessKind {
    pub fn name(self) -> &'static str {
        match self {
            ProcessKind::Fbm => "fbm",
            ProcessKind::Rosenblatt => "rosenblatt",
            ProcessKind::External => "external",
        }
    }
}

impl fmt::Display for ProcessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProcessKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fbm" => Ok(ProcessKind::Fbm),
            "rosenblatt" => Ok(ProcessKind::Rosenblatt),
            "external" => Ok(ProcessKind::External),
            other => Err(Error::param(
                "process",
                format!("unknown process `{other}` (expected fbm, rosenblatt or external)"),
            )),
        }
    }
}

/// A trajectory observed at times 1..=N; `values[k - 1]` holds X_k.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    values: Vec<f64>,
    hurst: Option<f64>,
    kind: ProcessKind,
    stream: Option<RngStream>,
    refinement: Option<usize>,
}

impl SamplePath {
    /// Wraps observed data with no known generating parameters.
    pub fn external(values: Vec<f64>) -> Result<Self> {
        Self::build(values, None, ProcessKind::External, None, None)
    }

    fn build(
        values: Vec<f64>,
        hurst: Option<f64>,
        kind: ProcessKind,
        stream: Option<RngStream>,
        refinement: Option<usize>,
    ) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::param(
                "N",
                format!("path length {} < 2", values.len()),
            ));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::DegenerateData(format!(
                "non-finite value at time {}",
                pos + 1
            )));
        }
        if kind == ProcessKind::Rosenblatt {
            check_open_interval("H", hurst.unwrap_or(f64::NAN), 0.5, 1.0)?;
        }
        Ok(Self {
            values,
            hurst,
            kind,
            stream,
            refinement,
        })
    }

    /// Rebuilds a path with full metadata, e.g. after reading it from disk.
    pub fn with_metadata(
        values: Vec<f64>,
        kind: ProcessKind,
        hurst: Option<f64>,
        stream: Option<RngStream>,
        refinement: Option<usize>,
    ) -> Result<Self> {
        Self::build(values, hurst, kind, stream, refinement)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn hurst(&self) -> Option<f64> {
        self.hurst
    }

    pub fn kind(&self) -> ProcessKind {
        self.kind
    }

    pub fn stream(&self) -> Option<RngStream> {
        self.stream
    }

    pub fn refinement(&self) -> Option<usize> {
        self.refinement
    }

    /// A copy with each value replaced by `f(k, X_k)` for k = 1..=N.
    ///
    /// Keeps the process metadata, so it is meant for deterministic
    /// perturbations such as scaling or adding a trend.
    pub fn map_values(&self, f: impl Fn(usize, f64) -> f64) -> Result<Self> {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &x)| f(i + 1, x))
            .collect();
        Self::build(values, self.hurst, self.kind, self.stream, self.refinement)
    }
}

/// Autocovariance of unit-variance fractional Gaussian noise at lag `k`.
pub fn fgn_autocov(k: i64, hurst: f64) -> f64 {
    let k = k.unsigned_abs() as f64;
    let e = 2.0 * hurst;
    0.5 * ((k + 1.0).powf(e) - 2.0 * k.powf(e) + (k - 1.0).abs().powf(e))
}

/// Exact sampler for n consecutive fGn values.
///
/// The autocovariance is embedded in a circulant of order `2n - 2` whose
/// spectrum is computed once; each draw then costs one FFT.
#[derive(Clone)]
pub struct CirculantFgn {
    n: usize,
    hurst: f64,
    eigenvalues: Vec<f64>,
    amplitudes: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for CirculantFgn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CirculantFgn")
            .field("n", &self.n)
            .field("hurst", &self.hurst)
            .field("embedding", &self.eigenvalues.len())
            .finish()
    }
}

impl CirculantFgn {
    pub fn new(n: usize, hurst: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::param("n", format!("{n} < 2")));
        }
        check_open_interval("H", hurst, 0.0, 1.0)?;

        let size = 2 * n - 2;
        let mut row: Vec<Complex<f64>> = (0..size)
            .map(|j| {
                let lag = j.min(size - j) as i64;
                Complex::new(fgn_autocov(lag, hurst), 0.0)
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(size);
        fft.process(&mut row);

        let largest = row.iter().map(|c| c.re).fold(f64::NEG_INFINITY, f64::max);
        let tolerance = EIGENVALUE_TOLERANCE * largest;
        let mut eigenvalues = Vec::with_capacity(size);
        for c in &row {
            if c.re < -tolerance {
                return Err(Error::EmbeddingFailure {
                    eigenvalue: c.re,
                    tolerance,
                });
            }
            eigenvalues.push(c.re.max(0.0));
        }
        let amplitudes = eigenvalues
            .iter()
            .map(|&l| (l / size as f64).sqrt())
            .collect();
        Ok(Self {
            n,
            hurst,
            eigenvalues,
            amplitudes,
            fft,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    /// Clamped circulant spectrum.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Lags 0..n of the covariance realized by the clamped spectrum,
    /// `(1/M) sum_l lambda_l cos(2 pi l k / M)`.
    pub fn implied_autocovariance(&self) -> Vec<f64> {
        let size = self.eigenvalues.len();
        let mut spec: Vec<Complex<f64>> = self
            .eigenvalues
            .iter()
            .map(|&l| Complex::new(l, 0.0))
            .collect();
        FftPlanner::new().plan_fft_inverse(size).process(&mut spec);
        spec[..self.n].iter().map(|c| c.re / size as f64).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = self
            .amplitudes
            .iter()
            .map(|&amp| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex::new(amp * re, amp * im)
            })
            .collect();
        self.fft.process(&mut buf);
        buf[..self.n].iter().map(|c| c.re).collect()
    }
}

pub fn generate_fgn(n: usize, hurst: f64, stream: RngStream) -> Result<Vec<f64>> {
    Ok(CirculantFgn::new(n, hurst)?.sample(&mut stream.rng()))
}

/// fBm at times 1..=n as cumulative sums of fGn, so Var X_k = k^{2H}.
pub fn generate_fbm(n: usize, hurst: f64, stream: RngStream) -> Result<SamplePath> {
    FbmGenerator::new(n, hurst)?.sample(stream)
}

/// Reusable fBm sampler for repeated draws of the same (n, H).
#[derive(Debug, Clone)]
pub struct FbmGenerator {
    noise: CirculantFgn,
}

impl FbmGenerator {
    pub fn new(n: usize, hurst: f64) -> Result<Self> {
        Ok(Self {
            noise: CirculantFgn::new(n, hurst)?,
        })
    }

    pub fn sample(&self, stream: RngStream) -> Result<SamplePath> {
        let mut values = self.noise.sample(&mut stream.rng());
        let mut acc = 0.0;
        for v in values.iter_mut() {
            acc += *v;
            *v = acc;
        }
        SamplePath::build(
            values,
            Some(self.noise.hurst()),
            ProcessKind::Fbm,
            Some(stream),
            None,
        )
    }
}

pub fn generate_rosenblatt(
    n: usize,
    hurst: f64,
    refinement: usize,
    stream: RngStream,
) -> Result<SamplePath> {
    RosenblattGenerator::new(n, hurst, refinement)?.sample(stream)
}

/// Approximate normalized Rosenblatt paths on the grid 1..=N.
///
/// Draws `N m` fGn values with index `H' = (H + 1)/2`, forms
/// `Y_j = (mN)^{-H} sum_{i <= m j} (g_i^2 - 1)` and rescales by
/// `sqrt(2(2H - 1) / (H (H + 1)^2)) N^H` so that Var X_N is about N^{2H}.
#[derive(Debug, Clone)]
pub struct RosenblattGenerator {
    n: usize,
    hurst: f64,
    refinement: usize,
    noise: CirculantFgn,
}

impl RosenblattGenerator {
    pub fn new(n: usize, hurst: f64, refinement: usize) -> Result<Self> {
        check_open_interval("H", hurst, 0.5, 1.0)?;
        if n < 2 {
            return Err(Error::param("N", format!("{n} < 2")));
        }
        if refinement == 0 {
            return Err(Error::param("m", "refinement must be at least 1"));
        }
        let noise = CirculantFgn::new(n * refinement, driver_hurst(hurst))?;
        Ok(Self {
            n,
            hurst,
            refinement,
            noise,
        })
    }

    /// Hurst index of the underlying fGn.
    pub fn driver_hurst(&self) -> f64 {
        self.noise.hurst()
    }

    pub fn sample(&self, stream: RngStream) -> Result<SamplePath> {
        let noise = self.noise.sample(&mut stream.rng());
        let h = self.hurst;
        let total = (self.n * self.refinement) as f64;
        let scale = (2.0 * (2.0 * h - 1.0) / (h * (h + 1.0) * (h + 1.0))).sqrt()
            * (self.n as f64).powf(h)
            / total.powf(h);

        let mut values = Vec::with_capacity(self.n);
        let mut acc = 0.0;
        for block in noise.chunks_exact(self.refinement) {
            acc += block.iter().map(|g| g * g - 1.0).sum::<f64>();
            values.push(scale * acc);
        }
        SamplePath::build(
            values,
            Some(h),
            ProcessKind::Rosenblatt,
            Some(stream),
            Some(self.refinement),
        )
    }
}

/// `H' = (H + 1)/2`, the index of the Gaussian driver of a Rosenblatt process.
pub fn driver_hurst(hurst: f64) -> f64 {
    0.5 * (hurst + 1.0)
}
