//! Boundedly invertible reparameterizations of the feature space.
//!
//! A transform maps features `phi -> A phi` with `A = diag(d) Q`, `Q`
//! orthogonal and `d_i` in `[m_lo, m_hi]`, so `m_lo |v| <= |A v| <= m_hi |v|`.
//! The rotation is applied first: with the scaling first, `A^T A` would be
//! diagonal and a rotation would be invisible to ridge.
//!
//! Ridge on `A phi` with coefficients `b` predicts `phi . A^T b`; writing
//! `a = A^T b` it is ridge on `phi` with penalty `a^T (A^T A)^(-1) a`, so
//! every representation is fitted in one coordinate system and scored with
//! the same excess-risk formula.

use faer::Mat;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;
use crate::simulate::{
    assemble, sample_cells, solve_ridge, spectrum_values, CurveConfig, Dataset, LearningCurve,
    RidgeFit, SampleStats,
};
use crate::spectrum::{SpectralModel, TruncatedSpectrum};

#[derive(Debug, Clone)]
pub struct BoundedTransform {
    pub q: Mat<f64>,
    pub d: Vec<f64>,
    pub m_lo: f64,
    pub m_hi: f64,
}

impl BoundedTransform {
    pub fn identity(dim: usize) -> Self {
        BoundedTransform {
            q: Mat::identity(dim, dim),
            d: vec![1.0; dim],
            m_lo: 1.0,
            m_hi: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    /// `A = diag(d) Q`.
    pub fn matrix(&self) -> Mat<f64> {
        Mat::from_fn(self.dim(), self.dim(), |i, j| self.d[i] * self.q[(i, j)])
    }

    /// `(A^T A)^(-1) = Q^T diag(d^-2) Q`.
    pub fn penalty(&self) -> Mat<f64> {
        let k = self.dim();
        let scaled = Mat::from_fn(k, k, |i, j| self.q[(i, j)] / (self.d[i] * self.d[i]));
        let mut p = linalg::product(self.q.as_ref().transpose(), scaled.as_ref());
        symmetrize(&mut p);
        p
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = linalg::mat_vec(self.q.as_ref(), v);
        out.iter_mut().zip(&self.d).for_each(|(o, d)| *o *= d);
        out
    }
}

fn symmetrize(m: &mut Mat<f64>) {
    for j in 0..m.ncols() {
        for i in (j + 1)..m.nrows() {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Haar rotation and uniform scalings on `[m_lo, m_hi]`.
pub fn make_transform(dim: usize, m_lo: f64, m_hi: f64, seed: u64) -> Result<BoundedTransform> {
    if !(m_lo > 0.0) || !m_lo.is_finite() {
        return Err(Error::invalid("lower frame bound must be positive"));
    }
    if !(m_hi >= m_lo) || !m_hi.is_finite() {
        return Err(Error::invalid("upper frame bound must be at least the lower one"));
    }
    if dim == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    let mut rng = rng::stream(seed, &[rng::label("transform")]);
    let q = linalg::haar_orthogonal(dim, &mut rng);
    let d = (0..dim)
        .map(|_| {
            if m_hi > m_lo {
                rng.random_range(m_lo..=m_hi)
            } else {
                m_lo
            }
        })
        .collect();
    Ok(BoundedTransform { q, d, m_lo, m_hi })
}

/// Eigenvalues of `A diag(lambda) A^T`, descending.
pub fn transformed_spectrum(
    model: &SpectralModel,
    transform: &BoundedTransform,
    dim: usize,
) -> Result<TruncatedSpectrum> {
    if transform.dim() != dim {
        return Err(Error::invalid("transform dimension does not match D"));
    }
    let lam = spectrum_values(model, dim)?;
    let a = transform.matrix();
    let scaled = Mat::from_fn(dim, dim, |i, j| a[(i, j)] * lam[j]);
    let mut cov = linalg::product(scaled.as_ref(), a.as_ref().transpose());
    symmetrize(&mut cov);
    let mut vals = linalg::symmetric_eigenvalues(&cov, "transformed spectrum")?;
    // Round-off can leave the smallest eigenvalues marginally non-positive.
    let floor = vals[0] * f64::EPSILON;
    vals.iter_mut().for_each(|v| *v = v.max(floor));
    TruncatedSpectrum::new(vals, format!("{} under a bounded transform", model.describe()))
}

/// Ridge fitted literally on the transformed features `psi_t = A phi_t`,
/// pulled back to the `phi` basis as `A^T b`.
pub fn fit_transformed(
    data: &Dataset,
    model: &SpectralModel,
    transform: &BoundedTransform,
    lambda: f64,
) -> Result<RidgeFit> {
    if !(lambda > 0.0) {
        return Err(Error::invalid("lambda must be positive"));
    }
    let (n, dim) = (data.n(), data.dim());
    if transform.dim() != dim {
        return Err(Error::invalid("transform dimension does not match data"));
    }
    let lam = spectrum_values(model, dim)?;
    let a = transform.matrix();
    let phi = Mat::from_fn(n, dim, |t, i| lam[i].sqrt() * data.z[(t, i)]);
    let psi = linalg::product(phi.as_ref(), a.as_ref().transpose());
    let mut h = linalg::product(psi.as_ref().transpose(), psi.as_ref());
    for j in 0..dim {
        for i in 0..dim {
            h[(i, j)] /= n as f64;
        }
        h[(j, j)] += lambda;
    }
    let rhs: Vec<f64> = linalg::mat_t_vec(psi.as_ref(), &data.y)
        .into_iter()
        .map(|v| v / n as f64)
        .collect();
    let b = linalg::spd_solve(&h, &rhs, "transformed ridge")?;
    Ok(RidgeFit {
        a_hat: linalg::mat_t_vec(a.as_ref(), &b),
        lambda,
        n,
    })
}

/// Ridge in the `phi` basis under the penalty induced by `transform`.
pub fn fit_with_penalty(
    stats: &SampleStats,
    lam: &[f64],
    cross: &[f64],
    lambda: f64,
    transform: &BoundedTransform,
) -> Result<RidgeFit> {
    solve_ridge(stats, lam, cross, lambda, Some(&transform.penalty()))
}

/// Baseline curve followed by one curve per transform, all fitted on the
/// same samples with the same regularization schedule.
pub fn run_invariance_experiment(
    config: &CurveConfig,
    transforms: &[BoundedTransform],
) -> Result<Vec<LearningCurve>> {
    config.validate()?;
    if transforms.iter().any(|t| t.dim() != config.dim) {
        return Err(Error::invalid("all transforms must share D with the configuration"));
    }
    let lam = spectrum_values(&config.model, config.dim)?;
    let target = config.target()?;
    let sigma = config.sigma2.sqrt();
    let lambdas = config.lambdas()?;
    let penalties: Vec<Mat<f64>> = transforms.iter().map(|t| t.penalty()).collect();

    let cells = sample_cells(config, |k, _, stats| {
        let cross = stats.cross(&target.theta, sigma);
        let mut risks = Vec::with_capacity(1 + penalties.len());
        let base = solve_ridge(stats, &lam, &cross, lambdas[k], None)?;
        risks.push(crate::simulate::risk_from_values(&base.a_hat, &target, &lam)?);
        for p in &penalties {
            let fit = solve_ridge(stats, &lam, &cross, lambdas[k], Some(p))?;
            risks.push(crate::simulate::risk_from_values(&fit.a_hat, &target, &lam)?);
        }
        Ok(risks)
    })?;

    let mut curves = vec![(config.label.clone(), config.meta(), lambdas.clone())];
    for i in 0..transforms.len() {
        curves.push((format!("transform_{}", i + 1), config.meta(), lambdas.clone()));
    }
    assemble(config, curves, &cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{make_target, sample_dataset, Dependence};
    use rand::SeedableRng;
    use rand_distr::StandardNormal;

    #[test]
    fn rotation_is_orthogonal_and_scalings_bounded() {
        let t = make_transform(40, 0.5, 2.0, 3).unwrap();
        let qtq = linalg::product(t.q.as_ref().transpose(), t.q.as_ref());
        for i in 0..40 {
            for j in 0..40 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((qtq[(i, j)] - want).abs() < 1e-10);
            }
        }
        assert!(t.d.iter().all(|d| (0.5..=2.0).contains(d)));
        assert!(make_transform(4, 0.0, 1.0, 1).is_err());
        assert!(make_transform(4, 2.0, 1.0, 1).is_err());
    }

    #[test]
    fn frame_bounds_hold_on_random_vectors() {
        let t = make_transform(30, 0.5, 2.0, 9).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let v: Vec<f64> = (0..30).map(|_| rng.sample(StandardNormal)).collect();
            let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let av = t.apply(&v).iter().map(|x| x * x).sum::<f64>().sqrt() / nv;
            assert!((0.5 - 1e-12..=2.0 + 1e-12).contains(&av), "{av}");
        }
    }

    #[test]
    fn identity_and_pure_rotation_keep_the_spectrum() {
        let model = SpectralModel::tail(2.0).unwrap();
        let id = BoundedTransform::identity(25);
        let a = id.matrix();
        assert_eq!(a, Mat::<f64>::identity(25, 25));
        let rot = make_transform(25, 1.0, 1.0, 4).unwrap();
        let base = model.truncate(25).unwrap();
        for t in [&id, &rot] {
            let sp = transformed_spectrum(&model, t, 25).unwrap();
            for (x, y) in sp.values().iter().zip(base.values()) {
                assert!((x - y).abs() <= 1e-12 * base.values()[0] + 1e-13 * y, "{x} {y}");
            }
        }
    }

    #[test]
    fn spectral_sandwich() {
        let model = SpectralModel::tail(2.0).unwrap();
        let t = make_transform(60, 0.5, 2.0, 11).unwrap();
        let sp = transformed_spectrum(&model, &t, 60).unwrap();
        for (i, v) in sp.values().iter().enumerate() {
            let l = model.eigenvalue(i + 1).unwrap();
            let r = v / l;
            // Relative round-off on the smallest eigenvalues is ~eps * lambda_1 / lambda_i.
            let slack = 1e-9;
            assert!(r >= 0.25 - slack && r <= 4.0 + slack, "index {i}: {r}");
        }
    }

    #[test]
    fn penalty_route_matches_literal_transformed_fit() {
        let model = SpectralModel::tail(2.0).unwrap();
        let dim = 12;
        let target = make_target(&model, 0.5, dim, 5).unwrap();
        let data = sample_dataset(&target, 50, 0.5, &Dependence::Iid, 6).unwrap();
        let t = make_transform(dim, 0.5, 2.0, 7).unwrap();
        let literal = fit_transformed(&data, &model, &t, 0.03).unwrap();
        let stats = data.stats();
        let lam = spectrum_values(&model, dim).unwrap();
        let cross = stats.cross(&[], 0.0);
        let via_penalty = fit_with_penalty(&stats, &lam, &cross, 0.03, &t).unwrap();
        for (x, y) in literal.a_hat.iter().zip(&via_penalty.a_hat) {
            assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()), "{x} {y}");
        }
    }
}
