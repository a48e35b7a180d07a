//! Finite-width random-feature approximation of the diagonal kernel.
//!
//! A map of width `m` has weights `V_{k,i} = sqrt(lambda_i) g_{k,i}` with
//! standard normal `g`, and features `psi(z) = V z / sqrt(m)` of the latent
//! coordinates, so `K_m(z, z') = psi(z) . psi(z')` and
//! `E[V^T V / m] = diag(lambda)`. Ridge on `psi` predicts `z . W^T c` with
//! `W = V / sqrt(m)`, hence excess risk `|W^T c - theta|^2`.

use faer::Mat;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::loglog_fit;
use crate::linalg;
use crate::rng;
use crate::simulate::{spectrum_values, Dataset, RidgeFit, SampleStats, TargetSpec};
use crate::spectrum::SpectralModel;

/// Relative tolerance of the operator-norm power iteration.
pub const OP_NORM_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct RandomFeatureMap {
    /// `m x D` weights.
    pub v: Mat<f64>,
    pub seed: u64,
}

impl RandomFeatureMap {
    pub fn width(&self) -> usize {
        self.v.nrows()
    }

    pub fn dim(&self) -> usize {
        self.v.ncols()
    }

    /// `W = V / sqrt(m)`.
    pub fn scaled(&self) -> Mat<f64> {
        let r = 1.0 / (self.width() as f64).sqrt();
        Mat::from_fn(self.width(), self.dim(), |k, i| self.v[(k, i)] * r)
    }

    /// `V^T V / m`, the approximate operator in the latent basis.
    pub fn operator(&self) -> Mat<f64> {
        let w = self.scaled();
        let mut s = Mat::zeros(self.dim(), self.dim());
        linalg::gram_lower_add(&mut s, w.as_ref(), 1.0);
        linalg::mirror_lower(&mut s);
        s
    }
}

/// Rows are drawn in order, each row taking D normals.
pub fn build_features(model: &SpectralModel, dim: usize, m: usize, seed: u64) -> Result<RandomFeatureMap> {
    if m == 0 || dim == 0 {
        return Err(Error::invalid("width and dimension must be at least 1"));
    }
    let root: Vec<f64> = spectrum_values(model, dim)?.iter().map(|l| l.sqrt()).collect();
    let mut rng = rng::stream(seed, &[rng::label("features"), m as u64]);
    let mut v = Mat::zeros(m, dim);
    for k in 0..m {
        for i in 0..dim {
            let g: f64 = rng.sample(StandardNormal);
            v[(k, i)] = root[i] * g;
        }
    }
    Ok(RandomFeatureMap { v, seed })
}

/// Ridge in the width-m feature space from latent statistics; returns the
/// predictor's latent-basis coefficients `W^T c`.
pub fn solve_rff(stats: &SampleStats, map: &RandomFeatureMap, cross: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid("lambda must be positive"));
    }
    if map.dim() != stats.dim() || cross.len() != stats.dim() {
        return Err(Error::invalid("feature map dimension does not match sample"));
    }
    let n = stats.n as f64;
    let w = map.scaled();
    let wg = linalg::product(w.as_ref(), stats.gram.as_ref());
    let mut h = linalg::product(wg.as_ref(), w.as_ref().transpose());
    let m = map.width();
    for j in 0..m {
        for i in 0..m {
            h[(i, j)] /= n;
        }
        h[(j, j)] += lambda;
    }
    let rhs: Vec<f64> = linalg::mat_vec(w.as_ref(), cross).into_iter().map(|v| v / n).collect();
    let c = linalg::spd_solve(&h, &rhs, "random-feature ridge")?;
    Ok(linalg::mat_t_vec(w.as_ref(), &c))
}

/// Ridge on the random features of an explicit dataset. The coefficients
/// are reported in the kernel feature basis `phi_i = sqrt(lambda_i) z_i`,
/// i.e. `a_i = (W^T c)_i / sqrt(lambda_i)`, so that
/// [`crate::simulate::excess_risk`] applies unchanged.
pub fn fit_ridge_rff(data: &Dataset, model: &SpectralModel, map: &RandomFeatureMap, lambda: f64) -> Result<RidgeFit> {
    let lam = spectrum_values(model, data.dim())?;
    let stats = data.stats();
    let cross = stats.cross(&[], 0.0);
    let az = solve_rff(&stats, map, &cross, lambda)?;
    Ok(RidgeFit {
        a_hat: az.iter().zip(&lam).map(|(a, l)| a / l.sqrt()).collect(),
        lambda,
        n: data.n(),
    })
}

/// `|a_z - theta|^2` for latent-basis coefficients.
pub fn latent_risk(az: &[f64], target: &TargetSpec) -> f64 {
    az.iter().zip(&target.theta).map(|(a, t)| (a - t).powi(2)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthStats {
    pub m: usize,
    /// Per seed, `|V^T V/m - Lambda|_op`.
    pub op_norm_gap: Vec<f64>,
    /// Per seed, `|Tr((T_m + lambda)^-1 T_m) - N_eff(lambda)|`.
    pub neff_gap: Vec<f64>,
    /// Per seed, `|lambda_1(T_m) - lambda_1|`.
    pub top_gap: Vec<f64>,
    pub mean_op_norm_gap: f64,
    pub mean_neff_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthDiagnostics {
    pub lambda: f64,
    pub per_width: Vec<WidthStats>,
    /// Decay exponent of the mean operator gap in `m`; NaN with fewer than
    /// two distinct widths.
    pub r_hat: f64,
}

pub fn width_diagnostics(
    model: &SpectralModel,
    dim: usize,
    m_grid: &[usize],
    lambda: f64,
    seeds: &[u64],
) -> Result<WidthDiagnostics> {
    if m_grid.is_empty() || seeds.is_empty() {
        return Err(Error::invalid("need at least one width and one seed"));
    }
    if m_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("width grid must be increasing"));
    }
    if !(lambda > 0.0) {
        return Err(Error::invalid("lambda must be positive"));
    }
    let lam = spectrum_values(model, dim)?;
    let neff = model.effective_dimension(lambda, dim)?;
    let mut per_width = Vec::with_capacity(m_grid.len());
    for &m in m_grid {
        let mut op = Vec::new();
        let mut ng = Vec::new();
        let mut top = Vec::new();
        for &seed in seeds {
            let map = build_features(model, dim, m, seed)?;
            let s = map.operator();
            let mut diff = s.clone();
            for i in 0..dim {
                diff[(i, i)] -= lam[i];
            }
            op.push(linalg::power_norm(&diff, OP_NORM_TOL, 100_000));
            let mu = linalg::symmetric_eigenvalues(&s, "random-feature operator")?;
            let trace: f64 = mu.iter().map(|u| u.max(0.0) / (u.max(0.0) + lambda)).sum();
            ng.push((trace - neff).abs());
            top.push((mu[0] - lam[0]).abs());
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        per_width.push(WidthStats {
            m,
            mean_op_norm_gap: mean(&op),
            mean_neff_gap: mean(&ng),
            op_norm_gap: op,
            neff_gap: ng,
            top_gap: top,
        });
    }
    let xs: Vec<f64> = per_width.iter().map(|w| w.m as f64).collect();
    let ys: Vec<f64> = per_width.iter().map(|w| w.mean_op_norm_gap).collect();
    let r_hat = loglog_fit(&xs, &ys).map(|f| -f.slope).unwrap_or(f64::NAN);
    Ok(WidthDiagnostics {
        lambda,
        per_width,
        r_hat,
    })
}

/// Eigenvalues of `V^T V / m`, descending.
pub fn operator_spectrum(map: &RandomFeatureMap) -> Result<Vec<f64>> {
    linalg::symmetric_eigenvalues(&map.operator(), "random-feature operator")
}

/// Log-log slope of `values[i-1]` against `i` over `lo..=hi` (1-based).
pub fn index_slope(values: &[f64], lo: usize, hi: usize) -> Result<f64> {
    if lo == 0 || hi > values.len() || hi <= lo {
        return Err(Error::invalid("index range out of bounds"));
    }
    let xs: Vec<f64> = (lo..=hi).map(|i| i as f64).collect();
    let ys: Vec<f64> = values[lo - 1..hi].to_vec();
    Ok(loglog_fit(&xs, &ys)?.slope)
}
