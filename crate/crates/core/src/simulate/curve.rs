//! Learning curves: mean excess risk over independent trials on an n-grid.
//!
//! Work is split into (n index, trial) cells. Cell `(k, t)` draws from the
//! stream `derive_seed(seed, [label(stream), k, t])`, results are collected
//! in cell order and reduced sequentially, so the output does not depend on
//! the worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::spectrum::SpectralModel;
use crate::theory::{optimal_lambda, DriftSchedule, ProblemParams};

use super::sampling::{draw_stats, spectrum_values, Dependence, SampleStats};
use super::{make_target, risk_from_values, solve_ridge, TargetSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LambdaSchedule {
    /// `optimal_lambda` with unit constants, the configured noise level and
    /// the model's tail index, evaluated at the raw sample count.
    Theory,
    /// As `Theory`, evaluated at the effective sample count of the
    /// configured dependence.
    TheoryEffective,
    Fixed { lambda: f64 },
    /// `optimal_lambda` under explicit parameters.
    Params { params: ProblemParams },
}

#[derive(Debug, Clone)]
pub struct CurveConfig {
    pub label: String,
    pub model: SpectralModel,
    pub s: f64,
    pub sigma2: f64,
    pub dim: usize,
    pub n_grid: Vec<u64>,
    pub trials: usize,
    pub lambda: LambdaSchedule,
    pub dependence: Dependence,
    pub seed: u64,
    /// Name mixed into every seed; normally the experiment id.
    pub stream: String,
    pub workers: usize,
}

impl CurveConfig {
    pub fn new(model: SpectralModel, s: f64) -> Self {
        CurveConfig {
            label: "kernel".into(),
            model,
            s,
            sigma2: 1.0,
            dim: crate::spectrum::SIMULATION_DIM,
            n_grid: (7..=14).map(|k| 1u64 << k).collect(),
            trials: 32,
            lambda: LambdaSchedule::Theory,
            dependence: Dependence::Iid,
            seed: 0,
            stream: "curve".into(),
            workers: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(self.s >= 0.0) {
            return Err(Error::invalid("s must be non-negative"));
        }
        if !(self.sigma2 >= 0.0) || !self.sigma2.is_finite() {
            return Err(Error::invalid("sigma2 must be non-negative"));
        }
        if self.dim == 0 || self.dim > self.model.max_index() {
            return Err(Error::invalid("dimension out of range for the model"));
        }
        if self.n_grid.is_empty() || self.n_grid[0] == 0 {
            return Err(Error::invalid("n grid must be non-empty and positive"));
        }
        if self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("n grid must be strictly increasing"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.workers == 0 {
            return Err(Error::invalid("workers must be at least 1"));
        }
        self.dependence.validate()?;
        match &self.lambda {
            LambdaSchedule::Fixed { lambda } if !(*lambda > 0.0) => {
                Err(Error::invalid("lambda must be positive"))
            }
            LambdaSchedule::Params { params } => params.validate(),
            _ => Ok(()),
        }
    }

    pub fn lambda_at(&self, n: u64) -> Result<f64> {
        match &self.lambda {
            LambdaSchedule::Fixed { lambda } => Ok(*lambda),
            LambdaSchedule::Params { params } => optimal_lambda(params, n as f64),
            LambdaSchedule::Theory | LambdaSchedule::TheoryEffective => {
                let beta = self.model.tail_index().ok_or_else(|| {
                    Error::invalid("theory lambda needs a model with a tail index")
                })?;
                let p = ProblemParams::new(self.s, beta, self.sigma2)?;
                let count = match self.lambda {
                    LambdaSchedule::TheoryEffective => self.dependence.effective_n(n)?,
                    _ => n as f64,
                };
                optimal_lambda(&p, count)
            }
        }
    }

    /// Regularization at every grid point.
    pub fn lambdas(&self) -> Result<Vec<f64>> {
        self.n_grid.iter().map(|&n| self.lambda_at(n)).collect()
    }

    pub fn target(&self) -> Result<TargetSpec> {
        make_target(&self.model, self.s, self.dim, self.target_seed())
    }

    pub fn target_seed(&self) -> u64 {
        rng::derive_seed(self.seed, &[rng::label(&self.stream)])
    }

    pub fn cell_rng(&self, n_index: usize, trial: usize) -> rand_chacha::ChaCha8Rng {
        rng::stream(
            self.seed,
            &[rng::label(&self.stream), n_index as u64, trial as u64],
        )
    }

    pub fn meta(&self) -> CurveMeta {
        CurveMeta {
            beta: self.model.tail_index(),
            s: Some(self.s),
            sigma2: Some(self.sigma2),
            rho: match &self.dependence {
                Dependence::Iid => None,
                Dependence::Mixing(p) => p.rho(),
            },
            m: None,
        }
    }
}

/// Columns a curve contributes to the report; `None` is "not applicable".
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CurveMeta {
    pub beta: Option<f64>,
    pub s: Option<f64>,
    pub sigma2: Option<f64>,
    pub rho: Option<f64>,
    pub m: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: u64,
    pub n_eff: f64,
    pub lambda: f64,
    pub mean: f64,
    /// Standard error of the mean; NaN with a single trial.
    pub stderr: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub label: String,
    pub meta: CurveMeta,
    pub points: Vec<CurvePoint>,
}

impl LearningCurve {
    pub fn ns(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.n as f64).collect()
    }

    pub fn n_effs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.n_eff).collect()
    }

    pub fn risks(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mean).collect()
    }
}

/// Evaluates `f` on cells `0..count` with `workers` threads; results come
/// back in cell order.
pub fn run_cells<T, F>(workers: usize, count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    if workers <= 1 {
        return (0..count).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    pool.install(|| (0..count).into_par_iter().map(&f).collect::<Vec<_>>())
        .into_iter()
        .collect()
}

/// Mean and standard error, accumulated in slice order.
pub(crate) fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

pub fn run_curve(config: &CurveConfig) -> Result<LearningCurve> {
    Ok(run_curves(std::slice::from_ref(config))?.remove(0))
}

/// Draws the sample of every (n index, trial) cell of `config` and applies
/// `eval(k, trial, stats)`. Results are indexed `k * trials + trial`.
pub fn sample_cells<T, F>(config: &CurveConfig, eval: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, usize, &SampleStats) -> Result<T> + Sync,
{
    config.validate()?;
    let trials = config.trials;
    run_cells(config.workers, config.n_grid.len() * trials, |cell| {
        let (k, t) = (cell / trials, cell % trials);
        let n = config.n_grid[k];
        let context = format!("n={n}, trial={t}");
        let mut rng = config.cell_rng(k, t);
        let stats = draw_stats(config.dim, n as usize, &config.dependence, &mut rng)
            .map_err(|e| e.with_context(&context))?;
        eval(k, t, &stats).map_err(|e| e.with_context(&context))
    })
}

/// Reduces per-cell risk vectors into curves: entry `ci` of each cell
/// belongs to curve `ci`.
pub fn assemble(
    config: &CurveConfig,
    curves: Vec<(String, CurveMeta, Vec<f64>)>,
    cells: &[Vec<f64>],
) -> Result<Vec<LearningCurve>> {
    let trials = config.trials;
    curves
        .into_iter()
        .enumerate()
        .map(|(ci, (label, meta, lambdas))| {
            let points = config
                .n_grid
                .iter()
                .enumerate()
                .map(|(k, &n)| {
                    let risks: Vec<f64> = (0..trials).map(|t| cells[k * trials + t][ci]).collect();
                    let (mean, stderr) = mean_stderr(&risks);
                    Ok(CurvePoint {
                        n,
                        n_eff: config.dependence.effective_n(n)?,
                        lambda: lambdas[k],
                        mean,
                        stderr,
                        trials,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(LearningCurve {
                label,
                meta,
                points,
            })
        })
        .collect()
}

/// Several curves evaluated on shared samples: every cell draws one
/// `(Z^T Z, Z^T eps)` and fits each configuration on it. The configurations
/// must agree on everything that determines the sample.
pub fn run_curves(configs: &[CurveConfig]) -> Result<Vec<LearningCurve>> {
    let first = configs
        .first()
        .ok_or_else(|| Error::invalid("no curve configurations"))?;
    for c in configs {
        c.validate()?;
        if c.dim != first.dim
            || c.n_grid != first.n_grid
            || c.trials != first.trials
            || c.dependence != first.dependence
            || c.seed != first.seed
            || c.stream != first.stream
        {
            return Err(Error::invalid(
                "curves sharing samples must agree on D, n grid, trials, dependence, seed and stream",
            ));
        }
    }
    struct Prepared {
        lam: Vec<f64>,
        target: TargetSpec,
        sigma: f64,
        lambdas: Vec<f64>,
    }
    let prepared = configs
        .iter()
        .map(|c| {
            Ok(Prepared {
                lam: spectrum_values(&c.model, c.dim)?,
                target: c.target()?,
                sigma: c.sigma2.sqrt(),
                lambdas: c.lambdas()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let cells = sample_cells(first, |k, _, stats| {
        prepared
            .iter()
            .map(|p| {
                let cross = stats.cross(&p.target.theta, p.sigma);
                let fit = solve_ridge(stats, &p.lam, &cross, p.lambdas[k], None)?;
                risk_from_values(&fit.a_hat, &p.target, &p.lam)
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    let curves = configs
        .iter()
        .zip(prepared)
        .map(|(c, p)| (c.label.clone(), c.meta(), p.lambdas))
        .collect();
    assemble(first, curves, &cells)
}

/// A curve under the time-averaged spectrum of a drifting kernel.
pub fn run_drift_curve(config: &CurveConfig, sched: &DriftSchedule) -> Result<LearningCurve> {
    sched.validate()?;
    let mut c = config.clone();
    c.model = SpectralModel::Drift(sched.clone());
    run_curve(&c)
}
