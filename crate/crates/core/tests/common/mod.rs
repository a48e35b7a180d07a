//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use redlaw::experiments::{ExperimentConfig, ExperimentId, ExperimentParams};

/// Golden-section minimizer of a unimodal `f` on `[lo, hi]`, searching in
/// `log(lambda)` so that tiny minimizers keep full relative precision.
pub fn golden_section_log(f: impl Fn(f64) -> f64, lo: f64, hi: f64, rel_tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c.exp()), f(d.exp()));
    while (b - a) > rel_tol * 0.1 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c.exp());
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d.exp());
        }
    }
    ((a + b) / 2.0).exp()
}

/// `sum_{i<=dim} l_i / (l_i + lambda)` for `l_i = i^-beta`, accumulated
/// from the smallest term with compensated summation.
pub fn neff_brute(beta: f64, lambda: f64, dim: usize) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for i in (1..=dim).rev() {
        let l = (i as f64).powf(-beta);
        let term = l / (l + lambda) - comp;
        let next = sum + term;
        comp = (next - sum) - term;
        sum = next;
    }
    sum
}

/// AR(1) effective sample size from the closed form of
/// `sum_{t,t'} rho^|t-t'|`.
pub fn ar1_neff_closed(n: u64, rho: f64) -> f64 {
    let nf = n as f64;
    let total = nf * (1.0 + rho) / (1.0 - rho) - 2.0 * rho * (1.0 - rho.powi(n as i32)) / (1.0 - rho).powi(2);
    nf * nf / total
}

/// Ordinary least-squares slope of `ln y` on `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// A desk-scale variant of an experiment's defaults: a handful of trials on
/// a short grid, for plumbing and determinism checks only.
pub fn reduced(id: ExperimentId) -> ExperimentConfig {
    let mut config = ExperimentConfig::defaults(id);
    if let Some(s) = config.params.sampling_mut() {
        s.trials = 3;
        s.dim = 48;
        s.n_grid = (5..=9).map(|k| 1u64 << k).collect();
    }
    match &mut config.params {
        ExperimentParams::RffWidth(p) => {
            p.widths = vec![8, 16, 64];
            p.probe_n = 256;
        }
        ExperimentParams::Mixing(p) => p.sampling.n_grid = (6..=10).map(|k| 1u64 << k).collect(),
        ExperimentParams::Spectra(p) => p.dim = 200,
        _ => {}
    }
    config.validate().expect("reduced configuration is valid");
    config
}
