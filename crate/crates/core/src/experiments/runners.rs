//! One runner per experiment id.

use super::params::*;
use super::report::format_float;
use super::{ExperimentId, ExperimentParams, ExperimentResult, FitRecord, Panel, Provenance, Series, Table, Verdict};
use crate::error::Result;
use crate::fitting::{collapse_score, fit_slope, fit_slope_xy, SlopeFit};
use crate::rff::{build_features, latent_risk, solve_rff};
use crate::rng;
use crate::simulate::{
    assemble, risk_from_values, run_curve, run_curves, sample_cells, solve_ridge, spectrum_values, CurveConfig,
    CurveMeta, Dependence, LambdaSchedule, LearningCurve,
};
use crate::spectrum::{MixtureSpectrum, SpectralModel};
use crate::theory::{drift_alpha_interval, predict_alpha, DriftSchedule};
use crate::transforms::{make_transform, run_invariance_experiment, transformed_spectrum};

pub(super) fn run(params: &ExperimentParams, workers: usize, provenance: Provenance) -> Result<ExperimentResult> {
    let mut out = Outcome::default();
    match params {
        ExperimentParams::AlphaSurface(p) => alpha_surface(p, &mut out)?,
        ExperimentParams::Fitcheck(p) => fitcheck(p, workers, &mut out)?,
        ExperimentParams::VaryS(p) => vary_s(p, workers, &mut out)?,
        ExperimentParams::VaryBeta(p) => vary_beta(p, workers, &mut out)?,
        ExperimentParams::Invariance(p) => invariance(p, workers, &mut out)?,
        ExperimentParams::Mixing(p) => mixing(p, workers, &mut out)?,
        ExperimentParams::Mixture(p) => mixture(p, workers, &mut out)?,
        ExperimentParams::Spectra(p) => spectra(p, &mut out)?,
        ExperimentParams::RffWidth(p) => rff_width(p, workers, &mut out)?,
        ExperimentParams::Drift(p) => drift(p, workers, &mut out)?,
    }
    Ok(ExperimentResult {
        curves: out.curves,
        fits: out.fits,
        verdicts: out.verdicts,
        provenance,
        tables: out.tables,
        panels: out.panels,
    })
}

#[derive(Default)]
struct Outcome {
    curves: Vec<LearningCurve>,
    fits: Vec<FitRecord>,
    verdicts: Vec<Verdict>,
    tables: Vec<Table>,
    panels: Vec<Panel>,
}

impl Outcome {
    fn fit(&mut self, curve: &LearningCurve, predicted: Option<f64>) -> Result<SlopeFit> {
        let fit = fit_slope(curve, None)?;
        self.fits.push(FitRecord {
            curve: curve.label.clone(),
            abscissa: "n".into(),
            fit,
            predicted,
        });
        Ok(fit)
    }

    fn verdict(&mut self, name: impl Into<String>, observed: f64, comparison: &str, threshold: f64, message: impl Into<String>) {
        self.verdicts.push(Verdict::check(name, observed, comparison, threshold, message));
    }

    /// Log-log risk against `n`, one series per curve.
    fn curve_panel(&mut self, slug: &str, title: &str) {
        let series = self
            .curves
            .iter()
            .map(|c| Series {
                label: c.label.clone(),
                x: c.ns(),
                y: c.risks(),
                dashed: false,
            })
            .collect();
        self.panels.push(Panel {
            slug: slug.into(),
            title: title.into(),
            x_label: "n".into(),
            y_label: "excess risk".into(),
            log_x: true,
            log_y: true,
            series,
        });
    }
}

fn base_config(id: ExperimentId, sampling: &Sampling, model: SpectralModel, s: f64, workers: usize) -> CurveConfig {
    CurveConfig {
        label: "kernel".into(),
        model,
        s,
        sigma2: sampling.sigma2,
        dim: sampling.dim,
        n_grid: sampling.n_grid.clone(),
        trials: sampling.trials,
        lambda: LambdaSchedule::Theory,
        dependence: Dependence::Iid,
        seed: sampling.seed,
        stream: id.as_str().into(),
        workers,
    }
}

fn label_value(name: &str, v: f64) -> String {
    format!("{name}={v}")
}

fn alpha_surface(p: &AlphaSurfaceParams, out: &mut Outcome) -> Result<()> {
    let mut rows = Vec::new();
    let mut series = Vec::new();
    let mut worst_redundancy = f64::NEG_INFINITY;
    let mut alphas = Vec::with_capacity(p.s_values.len());
    for &s in &p.s_values {
        let column: Vec<f64> = p
            .redundancy
            .iter()
            .map(|r| predict_alpha(s, 1.0 / r))
            .collect::<Result<_>>()?;
        for (r, a) in p.redundancy.iter().zip(&column) {
            rows.push(vec![format_float(*r), format_float(1.0 / r), format_float(s), format_float(*a)]);
        }
        worst_redundancy = column.windows(2).map(|w| w[1] - w[0]).fold(worst_redundancy, f64::max);
        series.push(Series {
            label: label_value("s", s),
            x: p.redundancy.clone(),
            y: column.clone(),
            dashed: false,
        });
        alphas.push(column);
    }
    out.verdict(
        "alpha_decreases_with_redundancy",
        worst_redundancy,
        "<",
        0.0,
        "largest step of alpha between consecutive redundancy values, every s",
    );
    if alphas.len() > 1 {
        let mut order: Vec<usize> = (0..p.s_values.len()).collect();
        order.sort_by(|&a, &b| p.s_values[a].total_cmp(&p.s_values[b]));
        let worst_s = order
            .windows(2)
            .flat_map(|w| alphas[w[0]].iter().zip(&alphas[w[1]]).map(|(lo, hi)| lo - hi))
            .fold(f64::NEG_INFINITY, f64::max);
        out.verdict(
            "alpha_increases_with_s",
            worst_s,
            "<",
            0.0,
            "largest decrease of alpha between consecutive s values, every redundancy",
        );
    }
    let in_range = alphas.iter().flatten().all(|a| *a > 0.0 && *a < 1.0);
    out.verdict(
        "alpha_within_unit_interval",
        if in_range { 1.0 } else { 0.0 },
        ">=",
        1.0,
        "1 when every predicted alpha lies in (0, 1)",
    );
    out.tables.push(Table {
        name: "surface".into(),
        header: ["redundancy", "beta", "s", "alpha"].map(String::from).to_vec(),
        rows,
    });
    out.panels.push(Panel {
        slug: "surface".into(),
        title: "predicted exponent against redundancy".into(),
        x_label: "redundancy 1/beta".into(),
        y_label: "alpha".into(),
        log_x: false,
        log_y: false,
        series,
    });
    Ok(())
}

fn fitcheck(p: &FitcheckParams, workers: usize, out: &mut Outcome) -> Result<()> {
    let config = base_config(ExperimentId::Fitcheck, &p.sampling, SpectralModel::tail(p.beta)?, p.s, workers);
    let curve = run_curve(&config)?;
    let predicted = predict_alpha(p.s, p.beta)?;
    out.curves.push(curve);
    let fit = out.fit(&out.curves[0].clone(), Some(predicted))?;
    out.verdict(
        "slope_matches_prediction",
        (fit.alpha_hat - predicted).abs(),
        "<=",
        p.tolerance,
        format!("|alpha_hat - alpha| with alpha_hat = {:.4}, alpha = {predicted:.4}", fit.alpha_hat),
    );
    out.verdict("fit_quality", fit.r2, ">=", p.min_r2, "r^2 of the log-log fit");
    out.curve_panel("curve", "fit check");
    push_reference(out, 0, &fit, predicted);
    Ok(())
}

/// Dashed `C n^-alpha` through the fitted curve's centre of mass.
fn push_reference(out: &mut Outcome, panel: usize, fit: &SlopeFit, alpha: f64) {
    let (lo, hi) = fit.window;
    let mid = (lo.ln() + hi.ln()) / 2.0;
    let level = fit.intercept - fit.alpha_hat * mid;
    let xs = vec![lo, hi];
    let ys = xs.iter().map(|x: &f64| (level - alpha * (x.ln() - mid)).exp()).collect();
    out.panels[panel].series.push(Series {
        label: format!("slope -{alpha:.3}"),
        x: xs,
        y: ys,
        dashed: true,
    });
}

/// Consecutive slopes must increase by more than `min_gap_se` standard
/// errors of their difference.
fn ordering_verdicts(out: &mut Outcome, fits: &[SlopeFit], labels: &[String], min_gap_se: f64) {
    for j in 1..fits.len() {
        let (a, b) = (&fits[j - 1], &fits[j]);
        let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        out.verdict(
            format!("slope_increases_{}_to_{}", labels[j - 1], labels[j]),
            b.alpha_hat - a.alpha_hat,
            ">",
            min_gap_se * se,
            format!("alpha_hat gap against {min_gap_se} standard errors of the difference"),
        );
    }
}

fn vary_s(p: &VarySParams, workers: usize, out: &mut Outcome) -> Result<()> {
    let model = SpectralModel::tail(p.beta)?;
    let configs: Vec<CurveConfig> = p
        .s_values
        .iter()
        .map(|&s| CurveConfig {
            label: label_value("s", s),
            ..base_config(ExperimentId::VaryS, &p.sampling, model.clone(), s, workers)
        })
        .collect();
    out.curves = run_curves(&configs)?;
    let mut fits = Vec::new();
    for (curve, &s) in out.curves.clone().iter().zip(&p.s_values) {
        fits.push(out.fit(curve, Some(predict_alpha(s, p.beta)?))?);
    }
    let labels: Vec<String> = configs.iter().map(|c| c.label.clone()).collect();
    ordering_verdicts(out, &fits, &labels, p.min_gap_se);
    out.curve_panel("curves", "varying smoothness s");
    Ok(())
}

fn vary_beta(p: &VaryBetaParams, workers: usize, out: &mut Outcome) -> Result<()> {
    let configs = p
        .betas
        .iter()
        .map(|&beta| {
            Ok(CurveConfig {
                label: label_value("beta", beta),
                ..base_config(ExperimentId::VaryBeta, &p.sampling, SpectralModel::tail(beta)?, p.s, workers)
            })
        })
        .collect::<Result<Vec<_>>>()?;
    out.curves = run_curves(&configs)?;
    let mut fits = Vec::new();
    for (curve, &beta) in out.curves.clone().iter().zip(&p.betas) {
        fits.push(out.fit(curve, Some(predict_alpha(p.s, beta)?))?);
    }
    let labels: Vec<String> = configs.iter().map(|c| c.label.clone()).collect();
    ordering_verdicts(out, &fits, &labels, p.min_gap_se);
    out.curve_panel("curves", "varying tail index beta");
    Ok(())
}

fn invariance(p: &InvarianceParams, workers: usize, out: &mut Outcome) -> Result<()> {
    let model = SpectralModel::tail(p.beta)?;
    let config = base_config(ExperimentId::Invariance, &p.sampling, model.clone(), p.s, workers);
    let transforms = (0..p.transforms)
        .map(|i| {
            let seed = rng::derive_seed(p.sampling.seed, &[rng::label("invariance"), i as u64]);
            make_transform(p.sampling.dim, p.frame_lo, p.frame_hi, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    out.curves = run_invariance_experiment(&config, &transforms)?;
    let predicted = predict_alpha(p.s, p.beta)?;
    let mut slopes = Vec::new();
    for curve in out.curves.clone() {
        slopes.push(out.fit(&curve, Some(predicted))?.alpha_hat);
    }
    let spread = slopes.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - slopes.iter().cloned().fold(f64::INFINITY, f64::min);
    out.verdict(
        "pairwise_slope_difference",
        spread,
        "<=",
        p.slope_tolerance,
        "largest |alpha_hat_i - alpha_hat_j| over the baseline and all transforms",
    );

    let base = spectrum_values(&model, p.sampling.dim)?;
    for (i, t) in transforms.iter().enumerate() {
        let values = transformed_spectrum(&model, t, p.sampling.dim)?;
        let ratios: Vec<f64> = values.values().iter().zip(&base).map(|(v, l)| v / l).collect();
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        out.verdict(
            format!("eigenvalue_ratio_min_transform_{}", i + 1),
            lo,
            ">=",
            p.frame_lo * p.frame_lo,
            "smallest transformed-to-original eigenvalue ratio against the squared lower frame bound",
        );
        out.verdict(
            format!("eigenvalue_ratio_max_transform_{}", i + 1),
            hi,
            "<=",
            p.frame_hi * p.frame_hi,
            "largest transformed-to-original eigenvalue ratio against the squared upper frame bound",
        );
    }
    out.curve_panel("curves", "representation invariance");
    Ok(())
}

fn mixing(p: &MixingParams, workers: usize, out: &mut Outcome) -> Result<()> {
    let model = SpectralModel::tail(p.beta)?;
    let lambda = match p.lambda_mode {
        LambdaMode::Raw => LambdaSchedule::Theory,
        LambdaMode::Effective => LambdaSchedule::TheoryEffective,
    };
    for &rho in &p.rhos {
        let config = CurveConfig {
            label: label_value("rho", rho),
            dependence: Dependence::ar1(rho)?,
            lambda: lambda.clone(),
            ..base_config(ExperimentId::Mixing, &p.sampling, model.clone(), p.s, workers)
        };
        out.curves.push(run_curve(&config)?);
    }
    let predicted = predict_alpha(p.s, p.beta)?;
    let mut slopes = Vec::new();
    for curve in &out.curves {
        let fit = fit_slope_xy(&curve.n_effs(), &curve.risks(), None)?;
        slopes.push(fit.alpha_hat);
        out.fits.push(FitRecord {
            curve: curve.label.clone(),
            abscissa: "n_eff".into(),
            fit,
            predicted: Some(predicted),
        });
    }
    let score = collapse_score(&out.curves)?;
    out.verdict(
        "collapse_ratio",
        score.ratio,
        ">=",
        p.min_collapse_ratio,
        format!(
            "log-risk spread at matched n ({:.4}) over spread at matched n_eff ({:.4})",
            score.gap_raw, score.gap_reparam
        ),
    );
    let spread = slopes.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - slopes.iter().cloned().fold(f64::INFINITY, f64::min);
    out.verdict(
        "slope_spread",
        spread,
        "<=",
        p.slope_spread,
        "largest difference between per-curve alpha_hat fitted against n_eff",
    );
    out.curve_panel("raw", "risk against n");
    let series = out
        .curves
        .iter()
        .map(|c| Series {
            label: c.label.clone(),
            x: c.n_effs(),
            y: c.risks(),
            dashed: false,
        })
        .collect();
    out.panels.push(Panel {
        slug: "effective".into(),
        title: "risk against effective sample size".into(),
        x_label: "n_eff".into(),
        y_label: "excess risk".into(),
        log_x: true,
        log_y: true,
        series,
    });
    Ok(())
}

fn mixture(p: &MixtureParams, workers: usize, out: &mut Outcome) -> Result<()> {
    let pairs: Vec<(f64, f64)> = p.weights.iter().cloned().zip(p.betas.iter().cloned()).collect();
    let model: SpectralModel = MixtureSpectrum::from_pairs(&pairs)?.into();
    let config = CurveConfig {
        label: "mixture".into(),
        ..base_config(ExperimentId::Mixture, &p.sampling, model, p.s, workers)
    };
    out.curves.push(run_curve(&config)?);
    let heavy = p.betas.iter().cloned().fold(f64::INFINITY, f64::min);
    let light = p.betas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let alpha_heavy = predict_alpha(p.s, heavy)?;
    let alpha_light = predict_alpha(p.s, light)?;
    let fit = out.fit(&out.curves[0].clone(), Some(alpha_heavy))?;
    out.verdict(
        "matches_heaviest_tail",
        (fit.alpha_hat - alpha_heavy).abs(),
        "<=",
        p.tolerance,
        format!("|alpha_hat - alpha(beta={heavy})| with alpha_hat = {:.4}, alpha = {alpha_heavy:.4}", fit.alpha_hat),
    );
    out.verdict(
        "below_lightest_tail",
        alpha_light - fit.alpha_hat,
        ">=",
        p.min_separation,
        format!("alpha(beta={light}) - alpha_hat with alpha(beta={light}) = {alpha_light:.4}"),
    );
    out.curve_panel("curve", "mixture of two tails");
    push_reference(out, 0, &fit, alpha_heavy);
    push_reference(out, 0, &fit, alpha_light);
    Ok(())
}

fn spectra(p: &SpectraParams, out: &mut Outcome) -> Result<()> {
    let mut rows = Vec::new();
    let mut series = Vec::new();
    let hi = p.dim / 4;
    for &beta in &p.betas {
        let values = SpectralModel::tail(beta)?.truncate(p.dim)?;
        let xs: Vec<f64> = (1..=p.dim).map(|i| i as f64).collect();
        for (i, v) in values.values().iter().enumerate() {
            rows.push(vec![format_float(beta), (i + 1).to_string(), format_float(*v)]);
        }
        let slope = crate::rff::index_slope(values.values(), p.slope_lo, hi)?;
        out.verdict(
            format!("tail_slope_beta={beta}"),
            (slope + beta).abs() / beta,
            "<=",
            p.relative_tolerance,
            format!("relative error of the eigenvalue slope {slope:.4} over i in [{}, {hi}] against -beta", p.slope_lo),
        );
        series.push(Series {
            label: label_value("beta", beta),
            x: xs,
            y: values.values().to_vec(),
            dashed: false,
        });
    }
    out.tables.push(Table {
        name: "spectra".into(),
        header: ["beta", "i", "eigenvalue"].map(String::from).to_vec(),
        rows,
    });
    out.panels.push(Panel {
        slug: "spectra".into(),
        title: "eigenvalue decay".into(),
        x_label: "index i".into(),
        y_label: "eigenvalue".into(),
        log_x: true,
        log_y: true,
        series,
    });
    Ok(())
}

/// Window covering the central half of the log-n range.
fn mid_window(n_grid: &[u64]) -> (f64, f64) {
    let lo = (n_grid[0] as f64).ln();
    let hi = (n_grid[n_grid.len() - 1] as f64).ln();
    let q = (hi - lo) / 4.0;
    ((lo + q).exp() * (1.0 - 1e-12), (hi - q).exp() * (1.0 + 1e-12))
}

fn rff_width(p: &RffWidthParams, workers: usize, out: &mut Outcome) -> Result<()> {
    let model = SpectralModel::tail(p.beta)?;
    let config = base_config(ExperimentId::RffWidth, &p.sampling, model.clone(), p.s, workers);
    let lam = spectrum_values(&model, p.sampling.dim)?;
    let target = config.target()?;
    let lambdas = config.lambdas()?;
    let sigma = config.sigma2.sqrt();
    let map_seed = rng::derive_seed(p.sampling.seed, &[rng::label("rff_width")]);
    let maps = p
        .widths
        .iter()
        .map(|&m| build_features(&model, p.sampling.dim, m, map_seed))
        .collect::<Result<Vec<_>>>()?;

    let cells = sample_cells(&config, |k, _, stats| {
        let cross = stats.cross(&target.theta, sigma);
        let mut risks = Vec::with_capacity(1 + maps.len());
        let kernel = solve_ridge(stats, &lam, &cross, lambdas[k], None)?;
        risks.push(risk_from_values(&kernel.a_hat, &target, &lam)?);
        for map in &maps {
            let az = solve_rff(stats, map, &cross, lambdas[k])?;
            risks.push(latent_risk(&az, &target));
        }
        Ok(risks)
    })?;
    let mut specs = vec![(config.label.clone(), config.meta(), lambdas.clone())];
    for &m in &p.widths {
        specs.push((format!("m={m}"), CurveMeta { m: Some(m), ..config.meta() }, lambdas.clone()));
    }
    out.curves = assemble(&config, specs, &cells)?;

    let predicted = predict_alpha(p.s, p.beta)?;
    let mut fits = Vec::new();
    for curve in out.curves.clone() {
        fits.push(out.fit(&curve, Some(predicted))?);
    }

    let probe = p.sampling.n_grid.iter().position(|&n| n == p.probe_n).unwrap_or(0);
    let points: Vec<_> = out.curves[1..].iter().map(|c| c.points[probe].clone()).collect();
    let mut inversions = 0usize;
    let mut worst_excess = f64::NEG_INFINITY;
    for w in points.windows(2) {
        if w[1].mean > w[0].mean {
            inversions += 1;
            let se = (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
            worst_excess = worst_excess.max((w[1].mean - w[0].mean) / se);
        }
    }
    out.verdict(
        "risk_non_increasing_in_width",
        inversions as f64,
        "<=",
        p.allowed_inversions as f64,
        format!("increases of mean risk with width at n={}", p.probe_n),
    );
    if inversions > 0 {
        out.verdict(
            "inversions_within_noise",
            worst_excess,
            "<=",
            2.0,
            "largest increase in standard errors of the difference",
        );
    }

    let kernel_fit = fits[0];
    let widest = fits[fits.len() - 1];
    out.verdict(
        "widest_slope_matches_kernel",
        (widest.alpha_hat - kernel_fit.alpha_hat).abs(),
        "<=",
        p.slope_tolerance,
        format!("|alpha_hat(m={}) - alpha_hat(kernel)|", p.widths[p.widths.len() - 1]),
    );
    let window = mid_window(&p.sampling.n_grid);
    let kernel_mid = fit_slope(&out.curves[0], Some(window))?;
    let narrow_mid = fit_slope(&out.curves[1], Some(window))?;
    for (curve, fit) in [(&out.curves[0], kernel_mid), (&out.curves[1], narrow_mid)] {
        out.fits.push(FitRecord {
            curve: format!("{} (mid n)", curve.label),
            abscissa: "n".into(),
            fit,
            predicted: None,
        });
    }
    out.verdict(
        "narrowest_slope_deviates_mid_n",
        (narrow_mid.alpha_hat - kernel_mid.alpha_hat).abs(),
        ">",
        p.slope_tolerance,
        format!(
            "|alpha_hat(m={}) - alpha_hat(kernel)| over n in [{:.0}, {:.0}]",
            p.widths[0], window.0, window.1
        ),
    );
    out.curve_panel("curves", "finite random-feature width");
    Ok(())
}

fn drift(p: &DriftParams, workers: usize, out: &mut Outcome) -> Result<()> {
    let sched = DriftSchedule::linear(p.beta_min, p.beta_max, p.steps)?;
    let ramp = CurveConfig {
        label: "drift".into(),
        ..base_config(ExperimentId::Drift, &p.sampling, SpectralModel::Drift(sched.clone()), p.s, workers)
    };
    let control = CurveConfig {
        label: label_value("constant_beta", p.control_beta),
        ..base_config(
            ExperimentId::Drift,
            &p.sampling,
            SpectralModel::Drift(DriftSchedule::constant(p.control_beta, p.steps)?),
            p.s,
            workers,
        )
    };
    out.curves = run_curves(&[ramp, control])?;
    let (lo, hi) = drift_alpha_interval(&sched, p.s)?;
    let alpha_control = predict_alpha(p.s, p.control_beta)?;
    let fit = out.fit(&out.curves[0].clone(), None)?;
    let control_fit = out.fit(&out.curves[1].clone(), Some(alpha_control))?;
    out.verdict(
        "drift_slope_above_band",
        fit.alpha_hat,
        ">=",
        lo - p.margin,
        format!("alpha_hat against alpha(beta_min) = {lo:.4} minus margin {}", p.margin),
    );
    out.verdict(
        "drift_slope_below_band",
        fit.alpha_hat,
        "<=",
        hi + p.margin,
        format!("alpha_hat against alpha(beta_max) = {hi:.4} plus margin {}", p.margin),
    );
    out.verdict(
        "constant_schedule_matches_prediction",
        (control_fit.alpha_hat - alpha_control).abs(),
        "<=",
        p.control_tolerance,
        format!("|alpha_hat - alpha| for the constant schedule, alpha = {alpha_control:.4}"),
    );
    out.curve_panel("curves", "kernel drift");
    Ok(())
}
