//! Closed-form scaling predictions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub s: f64,
    pub beta: f64,
    pub sigma2: f64,
    #[serde(default = "one")]
    pub a: f64,
    #[serde(default = "one")]
    pub b: f64,
}

fn one() -> f64 {
    1.0
}

impl ProblemParams {
    /// Unit bias and variance constants.
    pub fn new(s: f64, beta: f64, sigma2: f64) -> Result<Self> {
        let p = ProblemParams {
            s,
            beta,
            sigma2,
            a: 1.0,
            b: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    /// `sigma2 = 0` is accepted: noiseless problems are legitimate inputs.
    pub fn validate(&self) -> Result<()> {
        check_s(self.s)?;
        check_beta(self.beta)?;
        if !(self.sigma2 >= 0.0) || !self.sigma2.is_finite() {
            return Err(Error::invalid("sigma2 must be non-negative"));
        }
        if !(self.a > 0.0 && self.b > 0.0) || !(self.a.is_finite() && self.b.is_finite()) {
            return Err(Error::invalid("A and B must be positive"));
        }
        Ok(())
    }

    /// `2s + 1/beta`, the denominator shared by every exponent.
    pub fn rate_denominator(&self) -> f64 {
        2.0 * self.s + 1.0 / self.beta
    }
}

fn check_s(s: f64) -> Result<()> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::invalid("s must be positive"));
    }
    Ok(())
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 1.0) || !beta.is_finite() {
        return Err(Error::invalid("beta must exceed 1"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MixingProfile {
    /// `rho(k) = rho^k`.
    Ar1 {
        rho: f64,
        #[serde(default = "one")]
        gamma: f64,
    },
    /// Explicit `rho(1), rho(2), ...`; lags past the end are zero.
    Custom {
        correlations: Vec<f64>,
        #[serde(default = "one")]
        gamma: f64,
    },
}

impl MixingProfile {
    pub fn ar1(rho: f64) -> Result<Self> {
        let p = MixingProfile::Ar1 { rho, gamma: 1.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let gamma = match self {
            MixingProfile::Ar1 { rho, gamma } => {
                if !(0.0..1.0).contains(rho) {
                    return Err(Error::invalid("rho must lie in [0, 1)"));
                }
                gamma
            }
            MixingProfile::Custom {
                correlations,
                gamma,
            } => {
                if correlations.iter().any(|c| !c.is_finite() || c.abs() > 1.0) {
                    return Err(Error::invalid("correlations must lie in [-1, 1]"));
                }
                gamma
            }
        };
        if !(*gamma > 0.0) {
            return Err(Error::invalid("gamma must be positive"));
        }
        Ok(())
    }

    /// Lag-`k` correlation, `k >= 1`.
    pub fn correlation(&self, k: usize) -> f64 {
        match self {
            MixingProfile::Ar1 { rho, .. } => rho.powi(k as i32),
            MixingProfile::Custom { correlations, .. } => {
                correlations.get(k - 1).copied().unwrap_or(0.0)
            }
        }
    }

    pub fn rho(&self) -> Option<f64> {
        match self {
            MixingProfile::Ar1 { rho, .. } => Some(*rho),
            MixingProfile::Custom { .. } => None,
        }
    }
}

/// A kernel path `beta_1, ..., beta_T` inside `[beta_min, beta_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSchedule {
    beta_min: f64,
    beta_max: f64,
    path: Vec<f64>,
}

impl DriftSchedule {
    pub fn new(beta_min: f64, beta_max: f64, path: Vec<f64>) -> Result<Self> {
        let s = DriftSchedule {
            beta_min,
            beta_max,
            path,
        };
        s.validate()?;
        Ok(s)
    }

    /// `beta_t` interpolates linearly from `beta_min` (t = 1) to `beta_max` (t = T).
    pub fn linear(beta_min: f64, beta_max: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::invalid("drift schedule needs at least one step"));
        }
        let path = (0..steps)
            .map(|t| {
                if steps == 1 {
                    beta_min
                } else {
                    let b = beta_min + (beta_max - beta_min) * t as f64 / (steps - 1) as f64;
                    b.min(beta_max)
                }
            })
            .collect();
        Self::new(beta_min, beta_max, path)
    }

    pub fn constant(beta: f64, steps: usize) -> Result<Self> {
        Self::linear(beta, beta, steps)
    }

    pub fn validate(&self) -> Result<()> {
        check_beta(self.beta_min)?;
        if !(self.beta_max >= self.beta_min) || !self.beta_max.is_finite() {
            return Err(Error::invalid("beta_max must be at least beta_min"));
        }
        if self.path.is_empty() {
            return Err(Error::invalid("drift schedule needs at least one step"));
        }
        if self
            .path
            .iter()
            .any(|b| !(*b >= self.beta_min && *b <= self.beta_max))
        {
            return Err(Error::invalid("drift path leaves [beta_min, beta_max]"));
        }
        Ok(())
    }

    pub fn beta_min(&self) -> f64 {
        self.beta_min
    }

    pub fn beta_max(&self) -> f64 {
        self.beta_max
    }

    pub fn steps(&self) -> usize {
        self.path.len()
    }

    pub fn path(&self) -> &[f64] {
        &self.path
    }

    /// `Some(beta)` when every step uses the same index.
    pub fn constant_beta(&self) -> Option<f64> {
        let first = self.path[0];
        self.path.iter().all(|b| *b == first).then_some(first)
    }
}

/// `alpha = 2s / (2s + 1/beta)`.
pub fn predict_alpha(s: f64, beta: f64) -> Result<f64> {
    check_s(s)?;
    check_beta(beta)?;
    Ok(2.0 * s / (2.0 * s + 1.0 / beta))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid("lambda must be positive"));
    }
    Ok(())
}

fn check_n(n: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    Ok(())
}

/// The bias-variance bound `A lambda^(2s) + B (sigma2/n) lambda^(-1/beta)`.
pub fn phi(p: &ProblemParams, n: f64, lambda: f64) -> Result<f64> {
    p.validate()?;
    check_lambda(lambda)?;
    if !(n >= 1.0) {
        return Err(Error::invalid("n must be at least 1"));
    }
    Ok(p.a * lambda.powf(2.0 * p.s) + p.b * p.sigma2 / n * lambda.powf(-1.0 / p.beta))
}

pub fn phi_derivative(p: &ProblemParams, n: f64, lambda: f64) -> Result<f64> {
    p.validate()?;
    check_lambda(lambda)?;
    Ok(2.0 * p.s * p.a * lambda.powf(2.0 * p.s - 1.0)
        - p.b * p.sigma2 / (p.beta * n) * lambda.powf(-1.0 / p.beta - 1.0))
}

/// Stationary point of `phi`: `(B sigma2 / (2 s A beta n))^(1/(2s + 1/beta))`.
/// Takes a real `n` so that effective sample sizes can be passed directly.
pub fn optimal_lambda(p: &ProblemParams, n: f64) -> Result<f64> {
    p.validate()?;
    if !(n >= 1.0) || !n.is_finite() {
        return Err(Error::invalid("n must be at least 1"));
    }
    if p.sigma2 == 0.0 {
        return Err(Error::invalid("optimal lambda is undefined for sigma2 = 0"));
    }
    let base = p.b * p.sigma2 / (2.0 * p.s * p.a * p.beta * n);
    Ok(base.powf(1.0 / p.rate_denominator()))
}

/// `n / (1 + 2 sum_{k<n} (1 - k/n) rho(k))`.
pub fn effective_sample_size(n: u64, profile: &MixingProfile) -> Result<f64> {
    check_n(n)?;
    profile.validate()?;
    let nf = n as f64;
    let mut sum = 0.0;
    for k in 1..n {
        let r = profile.correlation(k as usize);
        if r == 0.0 && matches!(profile, MixingProfile::Ar1 { .. }) {
            break;
        }
        sum += (1.0 - k as f64 / nf) * r;
    }
    let denom = 1.0 + 2.0 * sum;
    if !(denom > 0.0) {
        return Err(Error::invalid("correlation profile gives non-positive variance"));
    }
    Ok(nf / denom)
}

/// Ridge penalty matching `t` steps of gradient descent with step `eta`.
pub fn sgd_equivalent_lambda(eta: f64, t: u64) -> Result<f64> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::invalid("eta must be positive"));
    }
    check_n(t)?;
    Ok(1.0 / (eta * t as f64))
}

/// `ceil(n^(r / (2s + 1/beta)))`.
pub fn required_width(n: u64, s: f64, beta: f64, r: f64) -> Result<u64> {
    check_n(n)?;
    check_s(s)?;
    check_beta(beta)?;
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid("r must be positive"));
    }
    let raw = (n as f64).powf(r / (2.0 * s + 1.0 / beta));
    // Exact powers such as 4096^(1/3) come out as 16.000000000000004.
    let snapped = if (raw - raw.round()).abs() <= 1e-9 * raw.max(1.0) {
        raw.round()
    } else {
        raw.ceil()
    };
    Ok(snapped.max(1.0) as u64)
}

/// `(alpha(beta_min), alpha(beta_max))`, ascending.
pub fn drift_alpha_interval(sched: &DriftSchedule, s: f64) -> Result<(f64, f64)> {
    sched.validate()?;
    Ok((
        predict_alpha(s, sched.beta_min)?,
        predict_alpha(s, sched.beta_max)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(s: f64, beta: f64) -> ProblemParams {
        ProblemParams::new(s, beta, 1.0).unwrap()
    }

    /// Golden-section minimizer over log(lambda).
    fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let a = hi - g * (hi - lo);
            let b = lo + g * (hi - lo);
            if f(a.exp()) < f(b.exp()) {
                hi = b;
            } else {
                lo = a;
            }
        }
        ((lo + hi) / 2.0).exp()
    }

    #[test]
    fn alpha_examples() {
        assert!((predict_alpha(0.5, 2.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((predict_alpha(0.5, 1e9).unwrap() - 1.0).abs() < 1e-8);
        assert!((predict_alpha(0.5, 1.0 + 1e-9).unwrap() - 0.5).abs() < 1e-8);
        assert!(predict_alpha(0.5, 1.0).is_err());
        assert!(predict_alpha(0.0, 2.0).is_err());
    }

    #[test]
    fn phi_examples() {
        let p = unit(0.5, 2.0);
        assert_eq!(phi(&p, 1.0, 1.0).unwrap(), 2.0);
        assert!(phi(&p, 1.0, 1e12).unwrap() > 1e11);
        assert!(phi(&p, 1.0, 0.0).is_err());
        assert!(phi(&p, 1.0, -1.0).is_err());
    }

    #[test]
    fn optimal_lambda_matches_golden_section() {
        let p = unit(0.5, 2.0);
        let lam = optimal_lambda(&p, 100.0).unwrap();
        assert!((lam - 0.005f64.powf(2.0 / 3.0)).abs() < 1e-15);
        assert!((lam - 0.02924).abs() < 1e-5);
        let oracle = golden_min(|l| phi(&p, 100.0, l).unwrap(), -20.0, 5.0);
        assert!((lam / oracle - 1.0).abs() < 1e-6);
        let grid_min = (0..4001)
            .map(|k| phi(&p, 100.0, lam * (1e-5 * (k as f64 - 2000.0)).exp()).unwrap())
            .fold(f64::INFINITY, f64::min);
        let at = phi(&p, 100.0, lam).unwrap();
        assert!(at <= grid_min + 1e-12 && grid_min - at < 1e-9);
    }

    #[test]
    fn optimal_lambda_unit_base() {
        // B sigma2 / (2 s A beta) = 1 with n = 1
        let p = ProblemParams {
            s: 0.5,
            beta: 2.0,
            sigma2: 2.0,
            a: 1.0,
            b: 1.0,
        };
        assert!((optimal_lambda(&p, 1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn effective_sample_size_examples() {
        let ar = |r| MixingProfile::ar1(r).unwrap();
        assert_eq!(effective_sample_size(1, &ar(0.7)).unwrap(), 1.0);
        assert_eq!(effective_sample_size(500, &ar(0.0)).unwrap(), 500.0);
        let n = 100_000u64;
        let got = effective_sample_size(n, &ar(0.5)).unwrap();
        // Direct double sum over the Toeplitz correlation matrix.
        let nf = n as f64;
        let direct: f64 = (1..n).map(|k| 2.0 * (nf - k as f64) * 0.5f64.powi(k as i32)).sum::<f64>() + nf;
        assert!((got - nf * nf / direct).abs() < 1e-6 * got);
        assert!((got / nf - 1.0 / 3.0).abs() < 1e-4);
        assert!(MixingProfile::ar1(1.0).is_err());
    }

    #[test]
    fn sgd_examples() {
        assert!((sgd_equivalent_lambda(0.1, 10).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(sgd_equivalent_lambda(1.0, 1).unwrap(), 1.0);
        assert_eq!(
            sgd_equivalent_lambda(0.3, 14).unwrap() / 2.0,
            sgd_equivalent_lambda(0.3, 28).unwrap()
        );
        assert!(sgd_equivalent_lambda(0.0, 3).is_err());
    }

    #[test]
    fn width_examples() {
        assert_eq!(required_width(1, 0.7, 3.0, 2.0).unwrap(), 1);
        assert_eq!(required_width(4096, 0.5, 2.0, 1.5).unwrap(), 4096);
        assert_eq!(required_width(4096, 0.5, 2.0, 0.5).unwrap(), 16);
        assert_eq!(required_width(10, 0.5, 2.0, 1.5).unwrap(), 10);
        assert_eq!(required_width(10, 0.5, 2.0, 0.75).unwrap(), 4);
    }

    #[test]
    fn drift_examples() {
        let flat = DriftSchedule::constant(2.0, 5).unwrap();
        let (lo, hi) = drift_alpha_interval(&flat, 0.5).unwrap();
        assert!((lo - 2.0 / 3.0).abs() < 1e-15 && lo == hi);
        let s = DriftSchedule::linear(1.5, 3.0, 7).unwrap();
        let (lo, hi) = drift_alpha_interval(&s, 0.5).unwrap();
        assert!((lo - 0.6).abs() < 1e-15 && (hi - 0.75).abs() < 1e-15);
        assert!(DriftSchedule::new(1.5, 3.0, vec![1.5, 3.5]).is_err());
        assert!(DriftSchedule::linear(3.0, 1.5, 2).is_err());
        assert_eq!(flat.constant_beta(), Some(2.0));
        assert_eq!(s.constant_beta(), None);
    }

    proptest! {
        #[test]
        fn alpha_monotone(s in 0.05f64..3.0, b in 1.01f64..20.0, ds in 1e-3f64..1.0, db in 1e-3f64..5.0) {
            let base = predict_alpha(s, b).unwrap();
            prop_assert!(base > 0.0 && base < 1.0);
            prop_assert!(predict_alpha(s + ds, b).unwrap() > base);
            prop_assert!(predict_alpha(s, b + db).unwrap() > base);
        }

        #[test]
        fn alpha_derivative_matches_difference(s in 0.05f64..3.0, b in 1.01f64..20.0) {
            let h = 1e-6;
            let fd = (predict_alpha(s, b + h).unwrap() - predict_alpha(s, b - h).unwrap()) / (2.0 * h);
            // d/dbeta [2s / (2s + 1/beta)] = 2s / (beta^2 (2s + 1/beta)^2)
            let exact = 2.0 * s / (b * b * (2.0 * s + 1.0 / b).powi(2));
            prop_assert!(exact > 0.0);
            prop_assert!((fd - exact).abs() <= 1e-6 * exact.max(1e-3));
        }

        #[test]
        fn optimal_lambda_stationary(s in 0.1f64..2.0, b in 1.1f64..8.0, log_n in 0.0f64..16.0, sigma2 in 0.1f64..4.0) {
            let p = ProblemParams::new(s, b, sigma2).unwrap();
            let n = log_n.exp();
            let lam = optimal_lambda(&p, n).unwrap();
            let val = phi(&p, n, lam).unwrap();
            prop_assert!(phi_derivative(&p, n, lam).unwrap().abs() <= 1e-10 * val / lam);
            let oracle = golden_min(|l| phi(&p, n, l).unwrap(), -60.0, 10.0);
            prop_assert!((lam / oracle - 1.0).abs() < 1e-6);
        }

        #[test]
        fn lambda_scaling_ratio(s in 0.1f64..2.0, b in 1.1f64..8.0, n in 1u64..100_000) {
            let p = unit(s, b);
            let r = optimal_lambda(&p, 4.0 * n as f64).unwrap() / optimal_lambda(&p, n as f64).unwrap();
            prop_assert!((r / 4f64.powf(-1.0 / p.rate_denominator()) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn ess_at_most_n(rho in 0.0f64..0.99, n in 1u64..5000) {
            let v = effective_sample_size(n, &MixingProfile::ar1(rho).unwrap()).unwrap();
            prop_assert!(v <= n as f64 * (1.0 + 1e-12));
            if rho > 0.0 && n > 1 {
                prop_assert!(v < n as f64);
            }
        }

        #[test]
        fn drift_interval_inside_unit(lo in 1.01f64..6.0, width in 0.0f64..6.0, s in 0.05f64..3.0) {
            let sched = DriftSchedule::linear(lo, lo + width, 4).unwrap();
            let (a, b) = drift_alpha_interval(&sched, s).unwrap();
            prop_assert!(0.0 < a && a <= b && b < 1.0);
        }
    }

    #[test]
    fn purification_grid() {
        for si in 1..=30 {
            let s = si as f64 * 0.1;
            for bi in 0..60 {
                let beta = 1.05 + bi as f64 * 0.25;
                for step in 0..10 {
                    let beta2 = beta + step as f64 * 0.5;
                    assert!(predict_alpha(s, beta2).unwrap() >= predict_alpha(s, beta).unwrap());
                }
            }
        }
    }

    #[test]
    fn risk_bound_times_rate_is_bounded() {
        let p = unit(0.5, 2.0);
        let alpha = predict_alpha(0.5, 2.0).unwrap();
        let vals: Vec<f64> = (0..30)
            .map(|k| {
                let n = 2f64.powi(k);
                phi(&p, n, optimal_lambda(&p, n).unwrap()).unwrap() * n.powf(alpha)
            })
            .collect();
        let (lo, hi) = vals
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
        assert!(hi / lo < 1.0 + 1e-9);
    }
}
