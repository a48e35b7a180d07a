//! Eigenvalue spectra and spectral functionals.
//!
//! A polynomial tail with index `beta` has eigenvalues `scale * i^(-beta)`.
//! With that parameterization the counting function and the effective
//! dimension both scale as `t^(-1/beta)`, which is what the exponent
//! formulas in [`crate::theory`] rely on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::theory::DriftSchedule;

/// Default truncation for pure spectral sums (never materialized).
pub const SUMMATION_DIM: usize = 1_000_000;
/// Default truncation for simulation.
pub const SIMULATION_DIM: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralTail {
    pub beta: f64,
    #[serde(default = "unit")]
    pub scale: f64,
}

fn unit() -> f64 {
    1.0
}

impl SpectralTail {
    pub fn new(beta: f64) -> Result<Self> {
        Self::with_scale(beta, 1.0)
    }

    pub fn with_scale(beta: f64, scale: f64) -> Result<Self> {
        let tail = SpectralTail { beta, scale };
        tail.validate()?;
        Ok(tail)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 1.0) || !self.beta.is_finite() {
            return Err(Error::invalid("beta must exceed 1"));
        }
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(Error::invalid("scale must be positive"));
        }
        Ok(())
    }

    /// Redundancy index `1 / beta`.
    pub fn redundancy(&self) -> f64 {
        1.0 / self.beta
    }

    #[inline]
    fn value(&self, i: usize) -> f64 {
        self.scale * (i as f64).powf(-self.beta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub tail: SpectralTail,
}

/// Convex combination of polynomial tails, summed index by index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpectrum {
    components: Vec<MixtureComponent>,
}

impl MixtureSpectrum {
    pub fn new(components: Vec<MixtureComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("mixture needs at least one component"));
        }
        for c in &components {
            c.tail.validate()?;
            if !(c.weight > 0.0) {
                return Err(Error::invalid("mixture weights must be positive"));
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "mixture weights must sum to 1 (got {total})"
            )));
        }
        Ok(MixtureSpectrum { components })
    }

    /// Unit-scale tails with the given `(weight, beta)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        let components = pairs
            .iter()
            .map(|&(weight, beta)| {
                Ok(MixtureComponent {
                    weight,
                    tail: SpectralTail::new(beta)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(components)
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }
}

/// The tail index of a mixture: the heaviest (smallest) component index.
pub fn mixture_tail_index(m: &MixtureSpectrum) -> Result<f64> {
    m.components
        .iter()
        .map(|c| c.tail.beta)
        .reduce(f64::min)
        .ok_or_else(|| Error::invalid("mixture needs at least one component"))
}

/// A finite, materialized spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedSpectrum {
    values: Vec<f64>,
    pub provenance: String,
}

impl TruncatedSpectrum {
    pub fn new(values: Vec<f64>, provenance: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("spectrum must have at least one value"));
        }
        if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("spectrum values must be positive and finite"));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::invalid("spectrum values must be non-increasing"));
        }
        Ok(TruncatedSpectrum {
            values,
            provenance: provenance.into(),
        })
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
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectralModel {
    Tail(SpectralTail),
    Mixture(MixtureSpectrum),
    /// Time average of a drifting tail: `(1/T) sum_t i^(-beta_t)`.
    Drift(DriftSchedule),
    /// A finite spectrum, e.g. the eigenvalues of a transformed or randomly
    /// perturbed operator.
    Tabulated(TruncatedSpectrum),
}

impl From<SpectralTail> for SpectralModel {
    fn from(t: SpectralTail) -> Self {
        SpectralModel::Tail(t)
    }
}

impl From<MixtureSpectrum> for SpectralModel {
    fn from(m: MixtureSpectrum) -> Self {
        SpectralModel::Mixture(m)
    }
}

impl SpectralModel {
    pub fn tail(beta: f64) -> Result<Self> {
        Ok(SpectralModel::Tail(SpectralTail::new(beta)?))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SpectralModel::Tail(t) => t.validate(),
            SpectralModel::Mixture(m) => MixtureSpectrum::new(m.components.clone()).map(|_| ()),
            SpectralModel::Drift(s) => s.validate(),
            SpectralModel::Tabulated(t) => TruncatedSpectrum::new(t.values.clone(), "").map(|_| ()),
        }
    }

    /// The tail index governing the asymptotics, if the model has one.
    pub fn tail_index(&self) -> Option<f64> {
        match self {
            SpectralModel::Tail(t) => Some(t.beta),
            SpectralModel::Mixture(m) => mixture_tail_index(m).ok(),
            SpectralModel::Drift(s) => Some(s.beta_min()),
            SpectralModel::Tabulated(_) => None,
        }
    }

    /// Largest index the model can produce (`usize::MAX` for closed forms).
    pub fn max_index(&self) -> usize {
        match self {
            SpectralModel::Tabulated(t) => t.len(),
            _ => usize::MAX,
        }
    }

    /// Unchecked evaluation; `i >= 1` and in range.
    #[inline]
    fn value(&self, i: usize) -> f64 {
        match self {
            SpectralModel::Tail(t) => t.value(i),
            SpectralModel::Mixture(m) => m
                .components
                .iter()
                .map(|c| c.weight * c.tail.value(i))
                .sum(),
            SpectralModel::Drift(s) => {
                if let Some(beta) = s.constant_beta() {
                    return (i as f64).powf(-beta);
                }
                let path = s.path();
                path.iter().map(|b| (i as f64).powf(-b)).sum::<f64>() / path.len() as f64
            }
            SpectralModel::Tabulated(t) => t.values[i - 1],
        }
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i == 0 {
            return Err(Error::invalid("eigenvalue index starts at 1"));
        }
        if i > self.max_index() {
            return Err(Error::invalid(format!(
                "index {i} exceeds tabulated length {}",
                self.max_index()
            )));
        }
        Ok(())
    }

    pub fn eigenvalue(&self, i: usize) -> Result<f64> {
        self.check_index(i)?;
        self.validate_shallow()?;
        Ok(self.value(i))
    }

    fn validate_shallow(&self) -> Result<()> {
        match self {
            SpectralModel::Tail(t) => t.validate(),
            SpectralModel::Mixture(m) => m.components.iter().try_for_each(|c| c.tail.validate()),
            _ => Ok(()),
        }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if dim == 0 {
            return Err(Error::invalid("truncation dimension must be at least 1"));
        }
        self.check_index(dim)?;
        self.validate_shallow()
    }

    pub fn truncate(&self, dim: usize) -> Result<TruncatedSpectrum> {
        self.check_dim(dim)?;
        let values: Vec<f64> = (1..=dim).map(|i| self.value(i)).collect();
        TruncatedSpectrum::new(values, self.describe())
    }

    /// `#{1 <= i <= dim : lambda_i >= t}`.
    pub fn counting_function(&self, t: f64, dim: usize) -> Result<usize> {
        if !(t > 0.0) {
            return Err(Error::invalid("threshold must be positive"));
        }
        self.check_dim(dim)?;
        // Every model here is non-increasing in i, so the count is a prefix.
        let mut count = 0;
        for i in 1..=dim {
            if self.value(i) >= t {
                count = i;
            } else {
                break;
            }
        }
        Ok(count)
    }

    /// `sum_{i<=dim} lambda_i / (lambda_i + lambda)`, evaluated lazily.
    pub fn effective_dimension(&self, lambda: f64, dim: usize) -> Result<f64> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::invalid("lambda must be positive"));
        }
        self.check_dim(dim)?;
        Ok((1..=dim)
            .map(|i| {
                let v = self.value(i);
                v / (v + lambda)
            })
            .sum())
    }

    /// `sum_{i > dim} lambda_i`, the mass dropped by truncation. Closed-form
    /// tails use an integral bound, which is exact to leading order.
    pub fn omitted_mass(&self, dim: usize) -> f64 {
        let tail_mass = |t: &SpectralTail| {
            t.scale * (dim as f64 + 0.5).powf(1.0 - t.beta) / (t.beta - 1.0)
        };
        match self {
            SpectralModel::Tail(t) => tail_mass(t),
            SpectralModel::Mixture(m) => m
                .components
                .iter()
                .map(|c| c.weight * tail_mass(&c.tail))
                .sum(),
            SpectralModel::Drift(s) => {
                s.path()
                    .iter()
                    .map(|&b| tail_mass(&SpectralTail { beta: b, scale: 1.0 }))
                    .sum::<f64>()
                    / s.path().len() as f64
            }
            SpectralModel::Tabulated(t) => {
                t.values.iter().skip(dim).sum()
            }
        }
    }

    /// Smallest power-of-two-ish dimension satisfying the truncation rule
    /// `omitted_mass(D) <= 1e-3 * lambda * N_eff(lambda)`, capped at `cap`.
    pub fn recommended_dim(&self, lambda_min: f64, cap: usize) -> Result<usize> {
        let mut dim = 64.min(cap).max(1);
        loop {
            let neff = self.effective_dimension(lambda_min, dim)?;
            if self.omitted_mass(dim) <= 1e-3 * lambda_min * neff || dim >= cap {
                return Ok(dim);
            }
            dim = (dim * 2).min(cap);
        }
    }

    pub fn describe(&self) -> String {
        match self {
            SpectralModel::Tail(t) => format!("tail(beta={}, scale={})", t.beta, t.scale),
            SpectralModel::Mixture(m) => {
                let parts: Vec<String> = m
                    .components
                    .iter()
                    .map(|c| format!("{}*tail(beta={})", c.weight, c.tail.beta))
                    .collect();
                format!("mixture({})", parts.join(" + "))
            }
            SpectralModel::Drift(s) => format!(
                "drift(beta {}..{}, T={})",
                s.beta_min(),
                s.beta_max(),
                s.path().len()
            ),
            SpectralModel::Tabulated(t) => format!("tabulated({})", t.provenance),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tail_values() {
        let m = SpectralModel::tail(2.0).unwrap();
        assert_eq!(m.eigenvalue(1).unwrap(), 1.0);
        assert_eq!(m.eigenvalue(4).unwrap(), 1.0 / 16.0);
        assert!(matches!(m.eigenvalue(0), Err(Error::InvalidArgument(_))));
        let bad = SpectralModel::Tail(SpectralTail {
            beta: 1.0,
            scale: 1.0,
        });
        assert!(bad.eigenvalue(3).is_err());
    }

    #[test]
    fn mixture_value_is_weighted_sum() {
        let m: SpectralModel = MixtureSpectrum::from_pairs(&[(0.6, 1.3), (0.4, 2.5)])
            .unwrap()
            .into();
        let want = 0.6 * 10f64.powf(-1.3) + 0.4 * 10f64.powf(-2.5);
        assert!((m.eigenvalue(10).unwrap() - want).abs() < 1e-15);
        assert_eq!(m.truncate(1).unwrap().values(), &[1.0]);
    }

    #[test]
    fn mixture_validation() {
        assert!(MixtureSpectrum::from_pairs(&[]).is_err());
        assert!(MixtureSpectrum::from_pairs(&[(0.5, 2.0), (0.4, 3.0)]).is_err());
        assert!(MixtureSpectrum::from_pairs(&[(1.2, 2.0), (-0.2, 3.0)]).is_err());
        assert!(MixtureSpectrum::from_pairs(&[(0.5, 0.9), (0.5, 3.0)]).is_err());
    }

    #[test]
    fn mixture_index_is_minimum() {
        let idx = |p: &[(f64, f64)]| mixture_tail_index(&MixtureSpectrum::from_pairs(p).unwrap()).unwrap();
        assert_eq!(idx(&[(0.6, 1.3), (0.4, 2.5)]), 1.3);
        assert_eq!(idx(&[(1.0, 2.0)]), 2.0);
        assert_eq!(idx(&[(0.01, 1.1), (0.99, 5.0)]), 1.1);
    }

    #[test]
    fn counting_examples() {
        let m = SpectralModel::tail(2.0).unwrap();
        // i^-2 >= 1/4 iff i <= 2
        assert_eq!(m.counting_function(0.25, 100).unwrap(), 2);
        assert_eq!(m.counting_function(1.5, 100).unwrap(), 0);
        assert_eq!(m.counting_function(1e-4, 100).unwrap(), 100);
        let m = SpectralModel::tail(1.5).unwrap();
        let t = 1e-3;
        let count = m.counting_function(t, 1_000_000).unwrap() as f64;
        // floor(t^(-1/beta)) = floor(100.0000...)
        assert!((count / t.powf(-1.0 / 1.5) - 1.0).abs() < 0.02, "{count}");
    }

    #[test]
    fn truncate_examples() {
        let m = SpectralModel::tail(2.0).unwrap();
        assert_eq!(m.truncate(3).unwrap().values(), &[1.0, 0.25, 1.0 / 9.0]);
        assert!(m.truncate(0).is_err());
        let tab = SpectralModel::Tabulated(m.truncate(3).unwrap());
        assert!(tab.truncate(4).is_err());
        assert_eq!(tab.eigenvalue(2).unwrap(), 0.25);
    }

    #[test]
    fn effective_dimension_single_value() {
        let m = SpectralModel::Tabulated(TruncatedSpectrum::new(vec![1.0], "unit").unwrap());
        assert_eq!(m.effective_dimension(1.0, 1).unwrap(), 0.5);
        assert!(m.effective_dimension(0.0, 1).is_err());
        assert!(m.effective_dimension(-1.0, 1).is_err());
    }

    #[test]
    fn truncated_spectrum_rejects_bad_values() {
        assert!(TruncatedSpectrum::new(vec![], "x").is_err());
        assert!(TruncatedSpectrum::new(vec![1.0, 2.0], "x").is_err());
        assert!(TruncatedSpectrum::new(vec![1.0, 0.0], "x").is_err());
    }

    #[test]
    fn omitted_mass_brackets_direct_sum() {
        let m = SpectralModel::tail(2.0).unwrap();
        let direct: f64 = (101..2_000_000).map(|i| (i as f64).powi(-2)).sum();
        let approx = m.omitted_mass(100);
        assert!((approx - direct).abs() / direct < 1e-3, "{approx} vs {direct}");
    }

    #[test]
    fn recommended_dim_grows_as_lambda_shrinks() {
        let m = SpectralModel::tail(2.0).unwrap();
        let a = m.recommended_dim(1e-2, 1 << 22).unwrap();
        let b = m.recommended_dim(1e-3, 1 << 22).unwrap();
        assert!(b > a);
        let neff = m.effective_dimension(1e-3, b).unwrap();
        assert!(m.omitted_mass(b) <= 1e-3 * 1e-3 * neff);
    }

    proptest! {
        #[test]
        fn counting_band(beta in 1.05f64..6.0, log_t in -8.0f64..-1.3863) {
            // t <= 1/4 and D large enough that lambda_D < t
            let t = log_t.exp();
            let m = SpectralModel::tail(beta).unwrap();
            let dim = (t.powf(-1.0 / beta) as usize) + 10;
            let c = m.counting_function(t, dim).unwrap() as f64;
            let band = c * t.powf(1.0 / beta);
            prop_assert!((0.5..=2.0).contains(&band), "band {}", band);
        }

        #[test]
        fn counting_monotone_in_t(beta in 1.05f64..6.0, a in 1e-6f64..1.0, b in 1e-6f64..1.0) {
            let m = SpectralModel::tail(beta).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(m.counting_function(lo, 5000).unwrap() >= m.counting_function(hi, 5000).unwrap());
        }

        #[test]
        fn effective_dimension_monotone(beta in 1.05f64..6.0, lam in 1e-5f64..1.0, dim in 1usize..400) {
            let m = SpectralModel::tail(beta).unwrap();
            let base = m.effective_dimension(lam, dim).unwrap();
            prop_assert!(m.effective_dimension(lam * 1.5, dim).unwrap() < base);
            prop_assert!(m.effective_dimension(lam, dim + 1).unwrap() > base);
        }

        #[test]
        fn mixture_sandwich(b1 in 1.05f64..6.0, b2 in 1.05f64..6.0, w in 0.01f64..0.99, i in 1usize..10_000) {
            let mix: SpectralModel = MixtureSpectrum::from_pairs(&[(w, b1), (1.0 - w, b2)]).unwrap().into();
            let e1 = SpectralModel::tail(b1).unwrap().eigenvalue(i).unwrap();
            let e2 = SpectralModel::tail(b2).unwrap().eigenvalue(i).unwrap();
            let v = mix.eigenvalue(i).unwrap();
            prop_assert!(v >= e1.min(e2) * (1.0 - 1e-12) && v <= e1.max(e2) * (1.0 + 1e-12));
        }

        #[test]
        fn mixture_index_ignores_order_and_weights(b1 in 1.05f64..6.0, b2 in 1.05f64..6.0, b3 in 1.05f64..6.0, w in 0.05f64..0.45) {
            let a = MixtureSpectrum::from_pairs(&[(w, b1), (w, b2), (1.0 - 2.0 * w, b3)]).unwrap();
            let b = MixtureSpectrum::from_pairs(&[(1.0 - 2.0 * w, b2), (w, b3), (w, b1)]).unwrap();
            prop_assert_eq!(mixture_tail_index(&a).unwrap(), mixture_tail_index(&b).unwrap());
            prop_assert_eq!(mixture_tail_index(&a).unwrap(), b1.min(b2).min(b3));
        }
    }
}
