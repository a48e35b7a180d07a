//! Kernel ridge regression in the whitened diagonal model.

mod curve;
mod sampling;

use faer::Mat;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;
use crate::spectrum::SpectralModel;
use crate::theory::ProblemParams;

pub use curve::{
    assemble, run_cells, run_curve, run_curves, run_drift_curve, CurveConfig, CurveMeta, CurvePoint,
    LambdaSchedule, LearningCurve,
    sample_cells,
};
pub use sampling::{draw_stats, sample_dataset, Dataset, Dependence, SampleStats};
pub(crate) use sampling::spectrum_values;

/// Envelope exponent of the target's free coefficients `g_i`.
const ENVELOPE: f64 = 0.55;

/// Source-condition target `theta_i = lambda_i^s g_i` with `sum g_i^2 = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub s: f64,
    pub g: Vec<f64>,
    pub theta: Vec<f64>,
}

impl TargetSpec {
    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// `sum theta_i^2`, the risk of the zero predictor.
    pub fn norm2(&self) -> f64 {
        self.theta.iter().map(|t| t * t).sum()
    }
}

/// `g_i = zeta_i i^(-0.55)` with Rademacher signs, normalized.
pub fn make_target(model: &SpectralModel, s: f64, dim: usize, seed: u64) -> Result<TargetSpec> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::invalid("s must be non-negative"));
    }
    let lam = spectrum_values(model, dim)?;
    let mut rng = rng::stream(seed, &[rng::label("target")]);
    let mut g: Vec<f64> = (1..=dim)
        .map(|i| {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            sign * (i as f64).powf(-ENVELOPE)
        })
        .collect();
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    g.iter_mut().for_each(|v| *v /= norm);
    let theta = g.iter().zip(&lam).map(|(gi, li)| li.powf(s) * gi).collect();
    Ok(TargetSpec { s, g, theta })
}

/// Coefficients in the feature basis `phi_i = sqrt(lambda_i) z_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeFit {
    pub a_hat: Vec<f64>,
    pub lambda: f64,
    pub n: usize,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid("lambda must be positive"));
    }
    Ok(())
}

/// Ridge in the feature basis from latent sufficient statistics.
///
/// With `Phi = Z Lambda^(1/2)` the normal equations read
/// `(L G L / n + lambda P) a = L c / n`, `L = Lambda^(1/2)`, `c = Z^T y`.
/// `penalty` defaults to the identity.
pub fn solve_ridge(
    stats: &SampleStats,
    lam: &[f64],
    cross: &[f64],
    lambda: f64,
    penalty: Option<&Mat<f64>>,
) -> Result<RidgeFit> {
    check_lambda(lambda)?;
    let d = stats.dim();
    if lam.len() != d || cross.len() != d {
        return Err(Error::invalid("dimension mismatch between spectrum and sample"));
    }
    let n = stats.n as f64;
    let root: Vec<f64> = lam.iter().map(|l| l.sqrt()).collect();
    let mut h = Mat::from_fn(d, d, |i, j| root[i] * root[j] * stats.gram[(i, j)] / n);
    match penalty {
        None => {
            for i in 0..d {
                h[(i, i)] += lambda;
            }
        }
        Some(p) => {
            for j in 0..d {
                for i in 0..d {
                    h[(i, j)] += lambda * p[(i, j)];
                }
            }
        }
    }
    let rhs: Vec<f64> = root.iter().zip(cross).map(|(r, c)| r * c / n).collect();
    let a_hat = linalg::spd_solve(&h, &rhs, "ridge normal equations")?;
    Ok(RidgeFit {
        a_hat,
        lambda,
        n: stats.n,
    })
}

/// Ridge on an explicit dataset; the model supplies the feature scales.
pub fn fit_ridge(data: &Dataset, model: &SpectralModel, lambda: f64) -> Result<RidgeFit> {
    check_lambda(lambda)?;
    let lam = spectrum_values(model, data.dim())?;
    let stats = data.stats();
    let cross = stats.cross(&[], 0.0);
    solve_ridge(&stats, &lam, &cross, lambda, None)
}

/// `sum_i (sqrt(lambda_i) a_i - theta_i)^2`, the exact population excess risk.
pub fn excess_risk(fit: &RidgeFit, target: &TargetSpec, model: &SpectralModel) -> Result<f64> {
    let lam = spectrum_values(model, target.dim())?;
    risk_from_values(&fit.a_hat, target, &lam)
}

pub(crate) fn risk_from_values(a_hat: &[f64], target: &TargetSpec, lam: &[f64]) -> Result<f64> {
    if a_hat.len() != target.dim() || lam.len() != target.dim() {
        return Err(Error::invalid("dimension mismatch between fit and target"));
    }
    Ok(a_hat
        .iter()
        .zip(lam)
        .zip(&target.theta)
        .map(|((a, l), t)| {
            let e = l.sqrt() * a - t;
            e * e
        })
        .sum())
}

/// Exact bias `sum (lambda/(lambda_i+lambda))^2 theta_i^2` and the variance
/// bound `(sigma2/n) N_eff(lambda)` with unit constant.
pub fn analytic_curves(
    p: &ProblemParams,
    model: &SpectralModel,
    target: &TargetSpec,
    lambda: f64,
    n: u64,
    dim: usize,
) -> Result<(f64, f64)> {
    check_lambda(lambda)?;
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    if target.dim() < dim {
        return Err(Error::invalid("target shorter than requested dimension"));
    }
    let lam = spectrum_values(model, dim)?;
    let bias2 = lam
        .iter()
        .zip(&target.theta)
        .map(|(l, t)| {
            let shrink = lambda / (l + lambda);
            shrink * shrink * t * t
        })
        .sum();
    let neff = model.effective_dimension(lambda, dim)?;
    Ok((bias2, p.sigma2 / n as f64 * neff))
}
