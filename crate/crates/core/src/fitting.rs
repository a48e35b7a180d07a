//! Log-log slope estimation and curve-collapse metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulate::LearningCurve;
use crate::theory::predict_alpha;

/// Fits below this r² are flagged as poor power laws.
pub const R2_FLAG: f64 = 0.95;
pub const DEFAULT_TOLERANCE: f64 = 0.08;
const COLLAPSE_GRID: usize = 50;

/// Ordinary least squares on `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Standard error of the slope; NaN with fewer than three points.
    pub slope_stderr: f64,
}

pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<LogLogFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("need at least two paired points"));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::invalid("log-log fit needs positive finite values"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("abscissae must not all coincide"));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let syy: f64 = ly.iter().map(|b| (b - my).powi(2)).sum();
    // A flat line is fitted exactly; call that a perfect fit.
    let r2 = if syy == 0.0 { 1.0 } else { (1.0 - sse / syy).clamp(0.0, 1.0) };
    let slope_stderr = if lx.len() > 2 {
        (sse / (k - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    Ok(LogLogFit {
        slope,
        intercept,
        r2,
        slope_stderr,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub alpha_hat: f64,
    pub intercept: f64,
    pub r2: f64,
    pub stderr: f64,
    pub window: (f64, f64),
    pub points: usize,
    pub flagged: bool,
}

/// Fits `risk ~ C n^(-alpha)`. Without a window the smallest quarter of the
/// n values (rounded down) is dropped.
pub fn fit_slope(curve: &LearningCurve, window: Option<(f64, f64)>) -> Result<SlopeFit> {
    fit_slope_xy(&curve.ns(), &curve.risks(), window)
}

/// As [`fit_slope`], for an arbitrary abscissa sorted ascending.
pub fn fit_slope_xy(x: &[f64], y: &[f64], window: Option<(f64, f64)>) -> Result<SlopeFit> {
    if x.len() != y.len() {
        return Err(Error::invalid("abscissa and risk lengths differ"));
    }
    let keep: Vec<usize> = match window {
        Some((lo, hi)) => (0..x.len()).filter(|&i| x[i] >= lo && x[i] <= hi).collect(),
        None => (x.len() / 4..x.len()).collect(),
    };
    if keep.len() < 3 {
        return Err(Error::invalid("slope fit needs at least 3 points in the window"));
    }
    let xs: Vec<f64> = keep.iter().map(|&i| x[i]).collect();
    let ys: Vec<f64> = keep.iter().map(|&i| y[i]).collect();
    let f = loglog_fit(&xs, &ys)?;
    Ok(SlopeFit {
        alpha_hat: -f.slope,
        intercept: f.intercept,
        r2: f.r2,
        stderr: f.slope_stderr,
        window: (xs[0], xs[xs.len() - 1]),
        points: xs.len(),
        flagged: f.r2 < R2_FLAG,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseScore {
    pub gap_raw: f64,
    pub gap_reparam: f64,
    /// `gap_raw / gap_reparam`; `+inf` when the reparameterized gap is zero.
    pub ratio: f64,
}

/// Largest spread of log-risk across curves over the common abscissa range,
/// with each curve interpolated linearly in log-log coordinates onto a
/// shared 50-point grid.
pub fn max_log_spread(curves: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
    if curves.len() < 2 {
        return Err(Error::invalid("collapse needs at least two curves"));
    }
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (x, y) in curves {
        if x.len() < 2 || x.len() != y.len() {
            return Err(Error::invalid("each curve needs at least two points"));
        }
        if x.iter().chain(y).any(|v| !(*v > 0.0)) {
            return Err(Error::invalid("collapse needs positive values"));
        }
        lo = lo.max(x[0].ln());
        hi = hi.min(x[x.len() - 1].ln());
    }
    if !(hi >= lo) {
        return Err(Error::invalid("curves have no overlapping abscissa range"));
    }
    let mut gap = 0.0_f64;
    for g in 0..COLLAPSE_GRID {
        let u = lo + (hi - lo) * g as f64 / (COLLAPSE_GRID - 1) as f64;
        let (mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in curves {
            let v = interp_loglog(x, y, u);
            vmin = vmin.min(v);
            vmax = vmax.max(v);
        }
        gap = gap.max(vmax - vmin);
    }
    Ok(gap)
}

fn interp_loglog(x: &[f64], y: &[f64], u: f64) -> f64 {
    let j = x
        .windows(2)
        .position(|w| u <= w[1].ln())
        .unwrap_or(x.len() - 2);
    let (x0, x1) = (x[j].ln(), x[j + 1].ln());
    let (y0, y1) = (y[j].ln(), y[j + 1].ln());
    let w = ((u - x0) / (x1 - x0)).clamp(0.0, 1.0);
    y0 + w * (y1 - y0)
}

/// Spread at matched `n` against spread at matched `n_eff`.
pub fn collapse_score(curves: &[LearningCurve]) -> Result<CollapseScore> {
    let raw: Vec<_> = curves.iter().map(|c| (c.ns(), c.risks())).collect();
    let reparam: Vec<_> = curves.iter().map(|c| (c.n_effs(), c.risks())).collect();
    let gap_raw = max_log_spread(&raw)?;
    let gap_reparam = max_log_spread(&reparam)?;
    let ratio = if gap_reparam == 0.0 {
        f64::INFINITY
    } else {
        gap_raw / gap_reparam
    };
    Ok(CollapseScore {
        gap_raw,
        gap_reparam,
        ratio,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryComparison {
    pub predicted: f64,
    pub alpha_hat: f64,
    pub gap: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn compare_to_theory(fit: &SlopeFit, s: f64, beta: f64, tolerance: f64) -> Result<TheoryComparison> {
    let predicted = predict_alpha(s, beta)?;
    let gap = (fit.alpha_hat - predicted).abs();
    Ok(TheoryComparison {
        predicted,
        alpha_hat: fit.alpha_hat,
        gap,
        tolerance,
        pass: gap <= tolerance,
    })
}
