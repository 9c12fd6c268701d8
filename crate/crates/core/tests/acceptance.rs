//! Acceptance suite: ten end-to-end criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so every line is printed on a plain
//! `cargo test`; the process exits nonzero when any criterion fails.

use std::time::Instant;

use rayon::prelude::*;
use selfsim::constants::ell1;
use selfsim::estimation::{estimate, estimate_from_ivalues, Regime};
use selfsim::montecarlo::{run_table1, run_table2, ExperimentConfig};
use selfsim::statistics::{coeffs, v_hat_from_coeffs, Normalization};
use selfsim::synthesis::{fgn_autocov, CirculantFgn, FbmGenerator, RngStream, RosenblattGenerator};
use selfsim::wavelets::{c_psi, moment, MotherWavelet, QuadratureGrid, WaveletKind};

type Outcome = Result<(bool, String), String>;

fn psi_c() -> MotherWavelet {
    MotherWavelet::new(WaveletKind::PsiC)
}

/// Exact moments of psi_c(t) = 2t^5 - 5t^4 + (30/7)t^3 - (10/7)t^2 + (1/7)t.
fn psi_c_exact_moment(p: i32) -> f64 {
    let coef = [
        (5, 2.0),
        (4, -5.0),
        (3, 30.0 / 7.0),
        (2, -10.0 / 7.0),
        (1, 1.0 / 7.0),
    ];
    coef.iter().map(|&(d, c)| c / (d + p + 1) as f64).sum()
}

fn vanishing_moments() -> Outcome {
    let grid = QuadratureGrid::fine();
    let psi = psi_c();
    let mut worst = 0.0f64;
    for p in 0..=2 {
        worst = worst.max(moment(&psi, p, &grid).abs());
    }
    let m3 = moment(&psi, 3, &grid);
    let exact = psi_c_exact_moment(3);
    let oracle_ok = (exact + 1.0 / 17640.0).abs() < 1e-15;
    let ok = worst < 1e-8 && (m3 + 1.0 / 17640.0).abs() < 1e-8 && oracle_ok;
    Ok((
        ok,
        format!("max|m_p|, p<3 = {worst:.2e}; m_3 = {m3:.10e} (exact {exact:.10e})"),
    ))
}

fn haar_quadrature() -> Outcome {
    let v = c_psi(
        &MotherWavelet::new(WaveletKind::Haar),
        0.5,
        &QuadratureGrid::fine(),
    )
    .map_err(|e| e.to_string())?;
    let err = (v - 1.0 / 12.0).abs();
    Ok((
        err < 1e-5,
        format!("C_psi = {v:.12} vs 1/12, error {err:.2e}"),
    ))
}

fn generator_exactness() -> Outcome {
    let n = 64;
    let mut worst = 0.0f64;
    for h in [0.55, 0.7, 0.9] {
        let gen = CirculantFgn::new(n, h).map_err(|e| e.to_string())?;
        let lambda = gen.eigenvalues();
        let m = lambda.len() as f64;
        // covariance realized by the clamped spectrum, by direct cosine sums
        let implied = |k: usize| -> f64 {
            lambda
                .iter()
                .enumerate()
                .map(|(l, v)| v * (2.0 * std::f64::consts::PI * (l * k) as f64 / m).cos())
                .sum::<f64>()
                / m
        };
        for i in 0..n {
            for j in 0..n {
                let lag = i.abs_diff(j);
                worst = worst.max((implied(lag) - fgn_autocov(lag as i64, h)).abs());
            }
        }
    }
    Ok((worst < 1e-8, format!("max entrywise error {worst:.2e}")))
}

fn variance_law() -> Outcome {
    let (n, h, a, reps) = (1usize << 16, 0.7, 64usize, 50u64);
    let psi = psi_c();
    let gen = FbmGenerator::new(n, h).map_err(|e| e.to_string())?;
    let norm =
        Normalization::new(&psi, h, 1.0, &QuadratureGrid::default()).map_err(|e| e.to_string())?;
    let d2 = norm.divisor(a).powi(2);
    let sums: Vec<(f64, usize)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let p = gen.sample(RngStream::new(4, r)).unwrap();
            let e = coeffs(p.values(), a, &psi).unwrap();
            (e.iter().map(|c| c * c / d2).sum::<f64>(), e.len())
        })
        .collect();
    let total: f64 = sums.iter().map(|s| s.0).sum();
    let count: usize = sums.iter().map(|s| s.1).sum();
    let mean = total / count as f64;
    Ok((
        (0.95..=1.05).contains(&mean),
        format!("pooled mean e~^2 = {mean:.4} over {count} coefficients"),
    ))
}

fn regression_identity() -> Outcome {
    let grid = QuadratureGrid::default();
    let psi = psi_c();
    let (h, sigma2, a) = (0.72, 1.7, 11usize);
    let cpsi = c_psi(&psi, h, &grid).map_err(|e| e.to_string())?;
    let mut worst_h = 0.0f64;
    let mut worst_s = 0.0f64;
    for ell in [2usize, 5, 10] {
        let iv: Vec<f64> = (1..=ell)
            .map(|i| sigma2 * cpsi * ((i * a) as f64).powf(2.0 * h + 1.0))
            .collect();
        let r = estimate_from_ivalues(&iv, a, &psi, &grid, Regime::GaussianClt)
            .map_err(|e| e.to_string())?;
        worst_h = worst_h.max((r.hurst_hat - h).abs());
        worst_s = worst_s.max((r.sigma2_hat.unwrap() - sigma2).abs());
    }
    Ok((
        worst_h < 1e-12 && worst_s < 1e-10,
        format!("max |H-hat - H| = {worst_h:.1e}, max |sigma2-hat - sigma2| = {worst_s:.1e}"),
    ))
}

fn table1_cell() -> Outcome {
    let config = ExperimentConfig {
        scale_exponent_list: Some(vec![0.5]),
        master_seed: 2_000,
        ..ExperimentConfig::rosenblatt(vec![0.7], vec![2000])
    };
    let report = run_table1(&config, workers()).map_err(|e| e.to_string())?;
    let c = &report.cells[0];
    Ok((
        c.scale == 44 && c.values.len() == 100 && (0.9..=2.0).contains(&c.sqrt_mse),
        format!(
            "a = {}, sqrt(MSE) = {:.3}, mean = {:.3} over {} replicates",
            c.scale,
            c.sqrt_mse,
            c.mean,
            c.values.len()
        ),
    ))
}

fn table2_cell() -> Outcome {
    let config = ExperimentConfig {
        master_seed: 2_001,
        ..ExperimentConfig::rosenblatt(vec![0.7], vec![2000])
    };
    let report = run_table2(&config, workers()).map_err(|e| e.to_string())?;
    let c = &report.cells[0];
    Ok((
        c.scale == 20 && c.ell == Some(9) && (0.60..=0.70).contains(&c.mean) && c.sqrt_mse <= 0.12,
        format!(
            "a = {}, ell = {:?}, mean H-hat = {:.4}, sqrt(MSE) = {:.4}",
            c.scale, c.ell, c.mean, c.sqrt_mse
        ),
    ))
}

fn clt_variance() -> Outcome {
    let (n, h, a, reps) = (1usize << 17, 0.6, 128usize, 200u64);
    let psi = psi_c();
    let grid = QuadratureGrid::default();
    let gen = FbmGenerator::new(n, h).map_err(|e| e.to_string())?;
    let norm = Normalization::new(&psi, h, 1.0, &grid).map_err(|e| e.to_string())?;
    let v: Vec<(f64, usize)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let p = gen.sample(RngStream::new(8, r)).unwrap();
            let e = coeffs(p.values(), a, &psi).unwrap();
            (v_hat_from_coeffs(&e, a, &norm), e.len())
        })
        .collect();
    let n_a = v[0].1 as f64;
    let mean = v.iter().map(|x| x.0).sum::<f64>() / reps as f64;
    let var = v.iter().map(|x| (x.0 - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
    let target = ell1(1, 1, h, &psi, &grid, 512, 1.0).map_err(|e| e.to_string())?;
    let ratio = n_a * var / target;
    Ok((
        (0.8..=1.2).contains(&ratio),
        format!(
            "N_a Var(V-hat) = {:.4}, ell1 = {target:.4}, ratio {ratio:.3}",
            n_a * var
        ),
    ))
}

fn trend_robustness() -> Outcome {
    let (n, h, a, ell, reps) = (4096usize, 0.7, 64usize, 3usize, 20u64);
    let psi = psi_c();
    let gen = RosenblattGenerator::new(n, h, 100).map_err(|e| e.to_string())?;
    let amplitude = (n as f64).powf(h);
    let diffs: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let p = gen.sample(RngStream::new(9, r)).unwrap();
            let q = p
                .map_values(|k, x| {
                    let t = k as f64 / n as f64;
                    x + amplitude * (1.0 - 2.0 * t + 3.0 * t * t)
                })
                .unwrap();
            let h0 = estimate(&p, &psi, a, ell, Regime::Rosenblatt)
                .unwrap()
                .hurst_hat;
            let h1 = estimate(&q, &psi, a, ell, Regime::Rosenblatt)
                .unwrap()
                .hurst_hat;
            (h1 - h0).abs()
        })
        .collect();
    let worst = diffs.iter().copied().fold(0.0, f64::max);
    Ok((
        worst < 0.01,
        format!("max |change in H-hat| = {worst:.2e} over {reps} paths"),
    ))
}

fn determinism() -> Outcome {
    let config = ExperimentConfig {
        replications: 20,
        m: 20,
        master_seed: 10,
        scale_exponent_list: Some(vec![0.4, 0.5]),
        ..ExperimentConfig::rosenblatt(vec![0.7, 0.8], vec![1000])
    };
    let render = |workers: usize| -> Result<Vec<u8>, String> {
        let report = run_table1(&config, workers).map_err(|e| e.to_string())?;
        let mut buf = Vec::new();
        report
            .write_report_csv(&mut buf)
            .map_err(|e| e.to_string())?;
        Ok(buf)
    };
    let one = render(1)?;
    let four = render(4)?;
    let cells = String::from_utf8_lossy(&one).lines().count() - 1;
    Ok((
        one == four && cells == 4,
        format!(
            "{cells} cells, {} bytes, identical = {}",
            one.len(),
            one == four
        ),
    ))
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("vanishing moments of psi_c", vanishing_moments),
        ("Haar quadrature oracle", haar_quadrature),
        ("circulant generator exactness", generator_exactness),
        ("fBm wavelet variance law", variance_law),
        ("regression identity", regression_identity),
        ("normalized statistic, Rosenblatt N=2000", table1_cell),
        ("estimator, Rosenblatt N=2000", table2_cell),
        ("Gaussian CLT variance", clt_variance),
        ("quadratic trend robustness", trend_robustness),
        ("worker-count determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = match run() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let secs = start.elapsed().as_secs_f64();
        if !ok {
            failed += 1;
        }
        println!(
            "{} criterion {:>2}: {name}: {detail} ({secs:.1} s)",
            if ok { "PASS" } else { "FAIL" },
            i + 1
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
