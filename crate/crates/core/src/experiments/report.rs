//! Text serializations of experiment results.

use serde_json::json;

use super::{ExperimentResult, Table};
use crate::error::Result;

pub const CSV_HEADER: &str = "experiment,curve_label,trial_aggregate,n,n_eff,beta,s,sigma2,rho,m,lambda,excess_risk_mean,excess_risk_stderr";

/// 17 significant digits, which round-trips every finite `f64`; `NA`
/// otherwise.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "NA".into()
    }
}

fn optional(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_else(|| "NA".into())
}

/// One row per curve point, curves in result order. `trial_aggregate`
/// reads `mean_of_<trials>`.
pub fn curves_csv(result: &ExperimentResult) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    let id = result.id().as_str();
    for curve in &result.curves {
        let m = curve.meta.m.map(|m| m.to_string()).unwrap_or_else(|| "NA".into());
        for p in &curve.points {
            let row = [
                id.to_string(),
                curve.label.clone(),
                format!("mean_of_{}", p.trials),
                p.n.to_string(),
                format_float(p.n_eff),
                optional(curve.meta.beta),
                optional(curve.meta.s),
                optional(curve.meta.sigma2),
                optional(curve.meta.rho),
                m.clone(),
                format_float(p.lambda),
                format_float(p.mean),
                format_float(p.stderr),
            ];
            out.push_str(&row.join(","));
            out.push('\n');
        }
    }
    out
}

pub fn table_csv(table: &Table) -> String {
    let mut out = table.header.join(",");
    out.push('\n');
    for row in &table.rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn verdicts_json(result: &ExperimentResult) -> Result<String> {
    let value = json!({
        "experiment": result.id(),
        "passed": result.passed(),
        "provenance": result.provenance,
        "verdicts": result.verdicts,
        "fits": result.fits,
    });
    Ok(serde_json::to_string_pretty(&value)? + "\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 6.02214076e23, 5e-324, -2.5] {
            let s = format_float(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(format_float(f64::NAN), "NA");
        assert_eq!(format_float(f64::INFINITY), "NA");
    }

    #[test]
    fn header_has_thirteen_columns() {
        assert_eq!(CSV_HEADER.split(',').count(), 13);
    }
}
