//! Per-experiment parameter schemas with defaults and validation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SEED: u64 = 42;

fn dyadic(lo: u32, hi: u32) -> Vec<u64> {
    (lo..=hi).map(|k| 1u64 << k).collect()
}

fn positive(field: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::config(field, "must be positive and finite"));
    }
    Ok(())
}

fn non_negative(field: &str, v: f64) -> Result<()> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::config(field, "must be non-negative and finite"));
    }
    Ok(())
}

fn tail(field: &str, beta: f64) -> Result<()> {
    if !(beta > 1.0) || !beta.is_finite() {
        return Err(Error::config(field, "beta must exceed 1"));
    }
    Ok(())
}

fn count(field: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(Error::config(field, "must be at least 1"));
    }
    Ok(())
}

fn grid(field: &str, ns: &[u64]) -> Result<()> {
    if ns.len() < 3 {
        return Err(Error::config(field, "needs at least 3 sample sizes"));
    }
    if ns[0] == 0 || ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config(field, "must be positive and strictly increasing"));
    }
    Ok(())
}

fn tolerance(field: &str, v: f64) -> Result<()> {
    positive(field, v)
}

/// Settings shared by every simulation-backed experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub seed: u64,
    pub trials: usize,
    pub dim: usize,
    pub n_grid: Vec<u64>,
    pub sigma2: f64,
}

impl Sampling {
    fn standard() -> Self {
        Sampling {
            seed: DEFAULT_SEED,
            trials: 32,
            dim: 2000,
            n_grid: dyadic(7, 14),
            sigma2: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        count("trials", self.trials)?;
        count("dim", self.dim)?;
        grid("n_grid", &self.n_grid)?;
        non_negative("sigma2", self.sigma2)
    }
}

macro_rules! sampling_accessors {
    ($t:ty) => {
        impl $t {
            pub fn sampling(&self) -> &Sampling {
                &self.sampling
            }
            pub fn sampling_mut(&mut self) -> &mut Sampling {
                &mut self.sampling
            }
        }
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSurfaceParams {
    pub seed: u64,
    /// Redundancy indices `1/beta`, each in (0, 1).
    pub redundancy: Vec<f64>,
    pub s_values: Vec<f64>,
}

impl Default for AlphaSurfaceParams {
    fn default() -> Self {
        AlphaSurfaceParams {
            seed: DEFAULT_SEED,
            redundancy: (1..=19).map(|k| k as f64 * 0.05).collect(),
            s_values: vec![0.25, 0.5, 1.0, 2.0],
        }
    }
}

impl AlphaSurfaceParams {
    pub fn validate(&self) -> Result<()> {
        if self.redundancy.len() < 2 {
            return Err(Error::config("redundancy", "needs at least 2 values"));
        }
        if self.redundancy.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
            return Err(Error::config("redundancy", "values must lie in (0, 1)"));
        }
        if self.redundancy.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("redundancy", "must be strictly increasing"));
        }
        if self.s_values.is_empty() {
            return Err(Error::config("s_values", "needs at least one value"));
        }
        self.s_values.iter().try_for_each(|s| positive("s_values", *s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitcheckParams {
    #[serde(flatten)]
    pub sampling: Sampling,
    pub beta: f64,
    pub s: f64,
    pub tolerance: f64,
    pub min_r2: f64,
}

impl Default for FitcheckParams {
    fn default() -> Self {
        FitcheckParams {
            sampling: Sampling::standard(),
            beta: 2.0,
            s: 0.5,
            tolerance: 0.08,
            min_r2: 0.98,
        }
    }
}

impl FitcheckParams {
    pub fn validate(&self) -> Result<()> {
        self.sampling.validate()?;
        tail("beta", self.beta)?;
        positive("s", self.s)?;
        positive("sigma2", self.sampling.sigma2)?;
        tolerance("tolerance", self.tolerance)?;
        if !(0.0..=1.0).contains(&self.min_r2) {
            return Err(Error::config("min_r2", "must lie in [0, 1]"));
        }
        Ok(())
    }
}
sampling_accessors!(FitcheckParams);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarySParams {
    #[serde(flatten)]
    pub sampling: Sampling,
    pub beta: f64,
    pub s_values: Vec<f64>,
    /// Required gap between consecutive slopes, in standard errors.
    pub min_gap_se: f64,
}

impl Default for VarySParams {
    fn default() -> Self {
        VarySParams {
            sampling: Sampling::standard(),
            beta: 2.0,
            s_values: vec![0.25, 0.5, 1.0],
            min_gap_se: 2.0,
        }
    }
}

impl VarySParams {
    pub fn validate(&self) -> Result<()> {
        self.sampling.validate()?;
        positive("sigma2", self.sampling.sigma2)?;
        tail("beta", self.beta)?;
        ascending("s_values", &self.s_values)?;
        self.s_values.iter().try_for_each(|s| positive("s_values", *s))?;
        non_negative("min_gap_se", self.min_gap_se)
    }
}
sampling_accessors!(VarySParams);

fn ascending(field: &str, v: &[f64]) -> Result<()> {
    if v.len() < 2 {
        return Err(Error::config(field, "needs at least 2 values"));
    }
    if v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config(field, "must be strictly increasing"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaryBetaParams {
    #[serde(flatten)]
    pub sampling: Sampling,
    pub s: f64,
    pub betas: Vec<f64>,
    pub min_gap_se: f64,
}

impl Default for VaryBetaParams {
    fn default() -> Self {
        VaryBetaParams {
            sampling: Sampling::standard(),
            s: 0.5,
            betas: vec![1.2, 2.0, 5.0],
            min_gap_se: 2.0,
        }
    }
}

impl VaryBetaParams {
    pub fn validate(&self) -> Result<()> {
        self.sampling.validate()?;
        positive("sigma2", self.sampling.sigma2)?;
        positive("s", self.s)?;
        ascending("betas", &self.betas)?;
        self.betas.iter().try_for_each(|b| tail("betas", *b))?;
        non_negative("min_gap_se", self.min_gap_se)
    }
}
sampling_accessors!(VaryBetaParams);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceParams {
    #[serde(flatten)]
    pub sampling: Sampling,
    pub beta: f64,
    pub s: f64,
    pub transforms: usize,
    pub frame_lo: f64,
    pub frame_hi: f64,
    pub slope_tolerance: f64,
}

impl Default for InvarianceParams {
    fn default() -> Self {
        InvarianceParams {
            sampling: Sampling::standard(),
            beta: 2.0,
            s: 0.5,
            transforms: 3,
            frame_lo: 0.5,
            frame_hi: 2.0,
            slope_tolerance: 0.05,
        }
    }
}

impl InvarianceParams {
    pub fn validate(&self) -> Result<()> {
        self.sampling.validate()?;
        positive("sigma2", self.sampling.sigma2)?;
        tail("beta", self.beta)?;
        positive("s", self.s)?;
        count("transforms", self.transforms)?;
        positive("frame_lo", self.frame_lo)?;
        if !(self.frame_hi >= self.frame_lo) || !self.frame_hi.is_finite() {
            return Err(Error::config("frame_hi", "must be finite and at least frame_lo"));
        }
        tolerance("slope_tolerance", self.slope_tolerance)
    }
}
sampling_accessors!(InvarianceParams);

/// Sample count at which the theory regularization is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMode {
    Raw,
    Effective,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingParams {
    #[serde(flatten)]
    pub sampling: Sampling,
    pub beta: f64,
    pub s: f64,
    pub rhos: Vec<f64>,
    pub lambda_mode: LambdaMode,
    pub min_collapse_ratio: f64,
    pub slope_spread: f64,
}

impl Default for MixingParams {
    fn default() -> Self {
        MixingParams {
            sampling: Sampling {
                dim: 400,
                n_grid: dyadic(9, 15),
                ..Sampling::standard()
            },
            beta: 2.0,
            s: 0.5,
            rhos: vec![0.2, 0.5, 0.8],
            lambda_mode: LambdaMode::Raw,
            min_collapse_ratio: 3.0,
            slope_spread: 0.08,
        }
    }
}

impl MixingParams {
    pub fn validate(&self) -> Result<()> {
        self.sampling.validate()?;
        positive("sigma2", self.sampling.sigma2)?;
        tail("beta", self.beta)?;
        positive("s", self.s)?;
        if self.rhos.len() < 2 {
            return Err(Error::config("rhos", "needs at least 2 values"));
        }
        if self.rhos.iter().any(|r| !(0.0..1.0).contains(r)) {
            return Err(Error::config("rhos", "values must lie in [0, 1)"));
        }
        positive("min_collapse_ratio", self.min_collapse_ratio)?;
        tolerance("slope_spread", self.slope_spread)
    }
}
sampling_accessors!(MixingParams);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    #[serde(flatten)]
    pub sampling: Sampling,
    pub s: f64,
    pub betas: Vec<f64>,
    pub weights: Vec<f64>,
    pub tolerance: f64,
    /// Required distance below the prediction of the lightest tail.
    pub min_separation: f64,
}

impl Default for MixtureParams {
    fn default() -> Self {
        MixtureParams {
            sampling: Sampling::standard(),
            s: 0.5,
            betas: vec![1.3, 2.5],
            weights: vec![0.6, 0.4],
            tolerance: 0.08,
            min_separation: 0.08,
        }
    }
}

impl MixtureParams {
    pub fn validate(&self) -> Result<()> {
        self.sampling.validate()?;
        positive("sigma2", self.sampling.sigma2)?;
        positive("s", self.s)?;
        if self.betas.is_empty() {
            return Err(Error::config("betas", "needs at least one component"));
        }
        self.betas.iter().try_for_each(|b| tail("betas", *b))?;
        if self.weights.len() != self.betas.len() {
            return Err(Error::config("weights", "must have one weight per beta"));
        }
        if self.weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::config("weights", "must be positive"));
        }
        if (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::config("weights", "must sum to 1"));
        }
        tolerance("tolerance", self.tolerance)?;
        non_negative("min_separation", self.min_separation)
    }
}
sampling_accessors!(MixtureParams);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectraParams {
    pub seed: u64,
    pub betas: Vec<f64>,
    pub dim: usize,
    /// Slope window `[slope_lo, dim / 4]` in the eigenvalue index.
    pub slope_lo: usize,
    pub relative_tolerance: f64,
}

impl Default for SpectraParams {
    fn default() -> Self {
        SpectraParams {
            seed: DEFAULT_SEED,
            betas: vec![1.2, 1.5, 2.0, 5.0],
            dim: 2000,
            slope_lo: 5,
            relative_tolerance: 0.1,
        }
    }
}

impl SpectraParams {
    pub fn validate(&self) -> Result<()> {
        if self.betas.is_empty() {
            return Err(Error::config("betas", "needs at least one value"));
        }
        self.betas.iter().try_for_each(|b| tail("betas", *b))?;
        count("slope_lo", self.slope_lo)?;
        if self.dim / 4 < self.slope_lo + 2 {
            return Err(Error::config("dim", "too small for the slope window"));
        }
        tolerance("relative_tolerance", self.relative_tolerance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RffWidthParams {
    #[serde(flatten)]
    pub sampling: Sampling,
    pub beta: f64,
    pub s: f64,
    pub widths: Vec<usize>,
    /// Sample size at which risk must be non-increasing in width.
    pub probe_n: u64,
    pub slope_tolerance: f64,
    /// Inversions of the width ordering tolerated within 2 standard errors.
    pub allowed_inversions: usize,
}

impl Default for RffWidthParams {
    fn default() -> Self {
        RffWidthParams {
            sampling: Sampling {
                dim: 400,
                ..Sampling::standard()
            },
            beta: 1.5,
            s: 0.5,
            widths: vec![50, 100, 200, 500, 1000, 2000],
            probe_n: 4096,
            slope_tolerance: 0.1,
            allowed_inversions: 1,
        }
    }
}

impl RffWidthParams {
    pub fn validate(&self) -> Result<()> {
        self.sampling.validate()?;
        positive("sigma2", self.sampling.sigma2)?;
        tail("beta", self.beta)?;
        positive("s", self.s)?;
        if self.widths.len() < 2 || self.widths[0] == 0 || self.widths.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("widths", "needs at least 2 positive, strictly increasing widths"));
        }
        if !self.sampling.n_grid.contains(&self.probe_n) {
            return Err(Error::config("probe_n", "must be one of n_grid"));
        }
        tolerance("slope_tolerance", self.slope_tolerance)
    }
}
sampling_accessors!(RffWidthParams);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftParams {
    #[serde(flatten)]
    pub sampling: Sampling,
    pub s: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    pub steps: usize,
    /// Index of the constant-schedule control curve.
    pub control_beta: f64,
    pub margin: f64,
    pub control_tolerance: f64,
}

impl Default for DriftParams {
    fn default() -> Self {
        DriftParams {
            sampling: Sampling::standard(),
            s: 0.5,
            beta_min: 1.5,
            beta_max: 3.0,
            steps: 8,
            control_beta: 2.0,
            margin: 0.05,
            control_tolerance: 0.08,
        }
    }
}

impl DriftParams {
    pub fn validate(&self) -> Result<()> {
        self.sampling.validate()?;
        positive("sigma2", self.sampling.sigma2)?;
        positive("s", self.s)?;
        tail("beta_min", self.beta_min)?;
        if !(self.beta_max >= self.beta_min) || !self.beta_max.is_finite() {
            return Err(Error::config("beta_max", "must be finite and at least beta_min"));
        }
        count("steps", self.steps)?;
        tail("control_beta", self.control_beta)?;
        non_negative("margin", self.margin)?;
        tolerance("control_tolerance", self.control_tolerance)
    }
}
sampling_accessors!(DriftParams);
