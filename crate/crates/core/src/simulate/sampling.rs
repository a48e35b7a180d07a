//! Data generation in the whitened diagonal model.
//!
//! Features are `phi_i = sqrt(lambda_i) z_i` with latent standardized
//! coordinates `z`, responses `y_t = sum_i theta_i z_{t,i} + sigma eps_t`.
//! Ridge only ever sees the data through `G = Z^T Z` and `Z^T y`, and
//! `Z^T y = G theta + sigma Z^T eps`, so one draw of `(G, Z^T eps)` serves
//! every target, noise level and spectrum evaluated on the same cell.

use faer::Mat;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;
use crate::spectrum::SpectralModel;
use crate::theory::{effective_sample_size, MixingProfile};

use super::TargetSpec;

const BLOCK_ROWS: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dependence {
    #[default]
    Iid,
    Mixing(MixingProfile),
}

impl Dependence {
    pub fn ar1(rho: f64) -> Result<Self> {
        Ok(Dependence::Mixing(MixingProfile::ar1(rho)?))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Dependence::Iid => Ok(()),
            Dependence::Mixing(p) => p.validate(),
        }
    }

    /// AR coefficient, with `Some(0)` for i.i.d. data.
    pub fn rho(&self) -> Option<f64> {
        match self {
            Dependence::Iid => Some(0.0),
            Dependence::Mixing(p) => p.rho(),
        }
    }

    pub fn effective_n(&self, n: u64) -> Result<f64> {
        match self {
            Dependence::Iid => Ok(n as f64),
            Dependence::Mixing(p) => effective_sample_size(n, p),
        }
    }

    /// The AR coefficient the sampler can realize.
    fn sampler_rho(&self) -> Result<f64> {
        match self {
            Dependence::Iid => Ok(0.0),
            Dependence::Mixing(MixingProfile::Ar1 { rho, .. }) => Ok(*rho),
            Dependence::Mixing(MixingProfile::Custom { .. }) => Err(Error::invalid(
                "only AR(1) dependence can be sampled; custom profiles are theory-only",
            )),
        }
    }
}

/// An explicit sample: latent coordinates `Z` (n x D) and responses.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub z: Mat<f64>,
    pub y: Vec<f64>,
    pub sigma2: f64,
    pub dependence: Dependence,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn dim(&self) -> usize {
        self.z.ncols()
    }

    pub fn stats(&self) -> SampleStats {
        let mut gram = Mat::zeros(self.dim(), self.dim());
        linalg::gram_lower_add(&mut gram, self.z.as_ref(), 1.0);
        linalg::mirror_lower(&mut gram);
        SampleStats {
            n: self.n(),
            gram,
            noise_cross: vec![0.0; self.dim()],
            response_cross: Some(linalg::mat_t_vec(self.z.as_ref(), &self.y)),
        }
    }
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return Err(Error::invalid("sigma2 must be non-negative"));
    }
    Ok(())
}

/// Draws an explicit dataset. Rows are generated in order; each row takes
/// D feature normals followed by one noise normal. Under AR(1) dependence
/// both the features and the noise follow `x_t = rho x_{t-1} + sqrt(1-rho^2) xi_t`
/// from a stationary start, so `rho = 0` reproduces the i.i.d. draws exactly.
pub fn sample_dataset(
    target: &TargetSpec,
    n: usize,
    sigma2: f64,
    dependence: &Dependence,
    seed: u64,
) -> Result<Dataset> {
    check_sigma2(sigma2)?;
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    dependence.validate()?;
    let rho = dependence.sampler_rho()?;
    let d = target.dim();
    let sigma = sigma2.sqrt();
    let mut rng = rng::stream(seed, &[rng::label("dataset")]);
    let mut z = Mat::zeros(n, d);
    let mut y = vec![0.0; n];
    let mut process = Ar1Rows::new(d, rho);
    let mut row = vec![0.0; d];
    for t in 0..n {
        let eps = process.next_row(&mut rng, &mut row);
        let mut signal = 0.0;
        for i in 0..d {
            z[(t, i)] = row[i];
            signal += target.theta[i] * row[i];
        }
        y[t] = signal + sigma * eps;
    }
    Ok(Dataset {
        z,
        y,
        sigma2,
        dependence: dependence.clone(),
    })
}

struct Ar1Rows {
    rho: f64,
    innovation: f64,
    state: Vec<f64>,
    noise: f64,
    started: bool,
}

impl Ar1Rows {
    fn new(d: usize, rho: f64) -> Self {
        Ar1Rows {
            rho,
            innovation: (1.0 - rho * rho).sqrt(),
            state: vec![0.0; d],
            noise: 0.0,
            started: false,
        }
    }

    /// Fills `row` with the next latent vector and returns the noise term.
    fn next_row(&mut self, rng: &mut ChaCha8Rng, row: &mut [f64]) -> f64 {
        for (i, r) in row.iter_mut().enumerate() {
            let xi: f64 = rng.sample(StandardNormal);
            let v = if self.started {
                self.rho * self.state[i] + self.innovation * xi
            } else {
                xi
            };
            self.state[i] = v;
            *r = v;
        }
        let xi: f64 = rng.sample(StandardNormal);
        self.noise = if self.started {
            self.rho * self.noise + self.innovation * xi
        } else {
            xi
        };
        self.started = true;
        self.noise
    }
}

/// Sufficient statistics of one sample.
#[derive(Debug, Clone)]
pub struct SampleStats {
    pub n: usize,
    /// `Z^T Z`, full symmetric.
    pub gram: Mat<f64>,
    /// `Z^T eps` for unit-variance noise.
    pub noise_cross: Vec<f64>,
    /// `Z^T y` when the stats come from an explicit dataset.
    response_cross: Option<Vec<f64>>,
}

impl SampleStats {
    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    /// `Z^T y` for `y = Z theta + sigma eps`. For stats computed from an
    /// explicit dataset the stored responses are used and the arguments
    /// are ignored.
    pub fn cross(&self, theta: &[f64], sigma: f64) -> Vec<f64> {
        if let Some(c) = &self.response_cross {
            return c.clone();
        }
        let mut c = linalg::mat_vec(self.gram.as_ref(), theta);
        for (ci, e) in c.iter_mut().zip(&self.noise_cross) {
            *ci += sigma * e;
        }
        c
    }
}

/// Draws `(Z^T Z, Z^T eps)` for `n` rows of dimension `d`.
///
/// For i.i.d. rows this uses the Bartlett factorization: if `Z = Q R` then
/// `R` (k x d, k = min(n, d), upper trapezoidal) has independent entries with
/// `R_ii^2 ~ chi^2(n - i)` (0-based) and standard normals above the diagonal,
/// independent of `Q`; and `Q^T eps ~ N(0, I_k)`. The result has exactly the
/// law of the explicit construction at O(k d^2) cost. AR(1) rows are
/// streamed in blocks.
pub fn draw_stats(d: usize, n: usize, dependence: &Dependence, rng: &mut ChaCha8Rng) -> Result<SampleStats> {
    if n == 0 || d == 0 {
        return Err(Error::invalid("n and D must be at least 1"));
    }
    let rho = dependence.sampler_rho()?;
    linalg::sequential();
    if rho == 0.0 {
        Ok(bartlett(d, n, rng))
    } else {
        Ok(streamed(d, n, rho, rng))
    }
}

fn bartlett(d: usize, n: usize, rng: &mut ChaCha8Rng) -> SampleStats {
    let k = n.min(d);
    let mut r = Mat::<f64>::zeros(k, d);
    for i in 0..k {
        let chi = ChiSquared::new((n - i) as f64).expect("positive degrees of freedom");
        r[(i, i)] = chi.sample(rng).sqrt();
        for j in (i + 1)..d {
            r[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let xi: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
    let mut gram = Mat::zeros(d, d);
    linalg::gram_lower_add(&mut gram, r.as_ref(), 1.0);
    linalg::mirror_lower(&mut gram);
    let noise_cross = linalg::mat_t_vec(r.as_ref(), &xi);
    SampleStats {
        n,
        gram,
        noise_cross,
        response_cross: None,
    }
}

fn streamed(d: usize, n: usize, rho: f64, rng: &mut ChaCha8Rng) -> SampleStats {
    let mut gram = Mat::zeros(d, d);
    let mut noise_cross = vec![0.0; d];
    let mut process = Ar1Rows::new(d, rho);
    let mut row = vec![0.0; d];
    let mut start = 0;
    while start < n {
        let rows = BLOCK_ROWS.min(n - start);
        let mut block = Mat::<f64>::zeros(rows, d);
        for t in 0..rows {
            let eps = process.next_row(rng, &mut row);
            for i in 0..d {
                block[(t, i)] = row[i];
                noise_cross[i] += row[i] * eps;
            }
        }
        linalg::gram_lower_add(&mut gram, block.as_ref(), 1.0);
        start += rows;
    }
    linalg::mirror_lower(&mut gram);
    SampleStats {
        n,
        gram,
        noise_cross,
        response_cross: None,
    }
}

/// Eigenvalues of `model` on `1..=d`, failing if the model is shorter.
pub(crate) fn spectrum_values(model: &SpectralModel, d: usize) -> Result<Vec<f64>> {
    Ok(model.truncate(d)?.values().to_vec())
}
