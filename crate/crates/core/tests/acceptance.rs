//! Acceptance run: one PASS/FAIL line per criterion, default scale.
//!
//! Criterion 11 is evaluated as literally stated and is expected to fail
//! under the eigenvalue convention `lambda_i = i^-beta`; a companion line
//! checks the same quantity against `-beta`. The process exits nonzero
//! when any other criterion fails.

mod common;

use std::time::Instant;

use common::{golden_section_log, reduced};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use redlaw::experiments::{curves_csv, run, table_csv, ExperimentConfig, ExperimentId, ExperimentResult};
use redlaw::rff::{build_features, index_slope, operator_spectrum};
use redlaw::simulate::{analytic_curves, make_target};
use redlaw::spectrum::SpectralModel;
use redlaw::theory::{optimal_lambda, phi, phi_derivative, predict_alpha, ProblemParams};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

struct Criterion {
    label: &'static str,
    name: &'static str,
    budget_secs: f64,
    /// Failure does not affect the exit status.
    known_unattainable: bool,
    check: fn() -> Outcome,
}

fn exponent_formula() -> Outcome {
    let alpha = predict_alpha(0.5, 2.0).unwrap();
    let betas: Vec<f64> = (0..10).map(|k| 1.1 + k as f64 * (10.0 - 1.1) / 9.0).collect();
    let ss: Vec<f64> = (0..10).map(|k| 0.1 + k as f64 * (2.0 - 0.1) / 9.0).collect();
    let grid: Vec<Vec<f64>> = betas
        .iter()
        .map(|&b| ss.iter().map(|&s| predict_alpha(s, b).unwrap()).collect())
        .collect();
    let in_s = grid.iter().all(|row| row.windows(2).all(|w| w[1] > w[0]));
    let in_beta = (0..ss.len()).all(|j| grid.windows(2).all(|w| w[1][j] > w[0][j]));
    let rounded = (alpha * 100.0).round() / 100.0;
    outcome(
        (alpha - 2.0 / 3.0).abs() < 1e-12 && rounded == 0.67 && in_s && in_beta,
        format!("alpha(0.5, 2) = {alpha:.6}; increasing in s: {in_s}, in beta: {in_beta}"),
    )
}

fn lambda_closed_form() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_rel, mut worst_stat) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let p = ProblemParams {
            s: rng.random_range(0.1..2.0),
            beta: rng.random_range(1.1..8.0),
            sigma2: rng.random_range(0.1..4.0),
            a: rng.random_range(0.2..5.0),
            b: rng.random_range(0.2..5.0),
        };
        let n = 10f64.powf(rng.random_range(1.0..6.0)).round();
        let closed = optimal_lambda(&p, n).unwrap();
        let found = golden_section_log(|l| phi(&p, n, l).unwrap(), 1e-14, 1e4, 1e-10);
        worst_rel = worst_rel.max((closed / found - 1.0).abs());
        let stat = phi_derivative(&p, n, closed).unwrap().abs() * closed / phi(&p, n, closed).unwrap();
        worst_stat = worst_stat.max(stat);
    }
    outcome(
        worst_rel <= 1e-6 && worst_stat <= 1e-9,
        format!("max relative gap {worst_rel:.2e}, max stationarity {worst_stat:.2e}"),
    )
}

fn neff_power_law() -> Outcome {
    let lambdas: Vec<f64> = (0..7).map(|k| 10f64.powf(-6.0 + 0.5 * k as f64)).collect();
    let mut parts = Vec::new();
    let mut ok = true;
    for beta in [1.5, 2.0, 3.0] {
        let model = SpectralModel::tail(beta).unwrap();
        let values: Vec<f64> = lambdas
            .iter()
            .map(|&l| model.effective_dimension(l, 1_000_000).unwrap())
            .collect();
        let slope = common::loglog_slope(&lambdas, &values);
        let rel = (slope + 1.0 / beta).abs() * beta;
        ok &= rel <= 0.05;
        parts.push(format!("beta={beta}: {slope:.4} ({:.1}%)", 100.0 * rel));
    }
    outcome(ok, parts.join(", "))
}

fn bias_bound() -> Outcome {
    let model = SpectralModel::tail(2.0).unwrap();
    let dim = 2000;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut min_gap = f64::INFINITY;
    let mut ok = true;
    for target_seed in 0..5u64 {
        let s = rng.random_range(0.1..1.0);
        let target = make_target(&model, s, dim, target_seed).unwrap();
        let p = ProblemParams::new(s, 2.0, 1.0).unwrap();
        for _ in 0..100 {
            let lambda = 10f64.powf(rng.random_range(-8.0..0.0));
            let (bias2, _) = analytic_curves(&p, &model, &target, lambda, 1, dim).unwrap();
            let bound = lambda.powf(2.0 * s);
            ok &= bias2 < bound;
            min_gap = min_gap.min((bound - bias2) / bound);
        }
    }
    outcome(ok && min_gap > 0.0, format!("500 checks, min relative gap {min_gap:.3e}"))
}

fn summarize(result: &ExperimentResult, names: Option<&[&str]>) -> Outcome {
    let chosen: Vec<_> = result
        .verdicts
        .iter()
        .filter(|v| names.is_none_or(|n| n.contains(&v.name.as_str())))
        .collect();
    let detail = chosen
        .iter()
        .map(|v| {
            format!(
                "{}{} {:.4} {} {:.4}",
                if v.passed { "" } else { "!" },
                v.name,
                v.observed,
                v.comparison,
                v.threshold
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    outcome(!chosen.is_empty() && chosen.iter().all(|v| v.passed), detail)
}

fn default_run(id: ExperimentId) -> ExperimentResult {
    run(&ExperimentConfig::defaults(id), 1).unwrap_or_else(|e| panic!("{id}: {e}"))
}

fn experiment(id: ExperimentId) -> Outcome {
    summarize(&default_run(id), None)
}

fn ordering() -> Outcome {
    let a = summarize(&default_run(ExperimentId::VaryS), None);
    let b = summarize(&default_run(ExperimentId::VaryBeta), None);
    outcome(a.passed && b.passed, format!("{}; {}", a.detail, b.detail))
}

/// Mean log-log slope of the operator spectrum over indices 5..=50.
fn width_tail_slope() -> f64 {
    let model = SpectralModel::tail(2.0).unwrap();
    let slopes: Vec<f64> = (0..8u64)
        .map(|seed| {
            let map = build_features(&model, 200, 2000, seed).unwrap();
            index_slope(&operator_spectrum(&map).unwrap(), 5, 50).unwrap()
        })
        .collect();
    slopes.iter().sum::<f64>() / slopes.len() as f64
}

fn tail_preservation_literal() -> Outcome {
    let slope = width_tail_slope();
    let rel = (slope + 0.5).abs() / 0.5;
    outcome(
        rel <= 0.15,
        format!("beta=2, m=2000, D=200: slope {slope:.4} vs -1/beta = -0.5 ({:.0}% off); known unattainable", 100.0 * rel),
    )
}

fn tail_preservation_convention() -> Outcome {
    let slope = width_tail_slope();
    let rel = (slope + 2.0).abs() / 2.0;
    outcome(rel <= 0.15, format!("slope {slope:.4} vs -beta = -2 ({:.1}% off)", 100.0 * rel))
}

fn determinism() -> Outcome {
    let mut diverged = Vec::new();
    for id in ExperimentId::ALL {
        let config = reduced(id);
        let one = run(&config, 1).unwrap();
        let many = run(&config, 4).unwrap();
        let same = curves_csv(&one) == curves_csv(&many)
            && one.tables.len() == many.tables.len()
            && one.tables.iter().zip(&many.tables).all(|(a, b)| table_csv(a) == table_csv(b));
        if !same {
            diverged.push(id.as_str());
        }
    }
    outcome(
        diverged.is_empty(),
        if diverged.is_empty() {
            "all 10 experiments byte-identical at 1 and 4 workers (reduced scale)".to_string()
        } else {
            format!("diverged: {}", diverged.join(", "))
        },
    )
}

fn main() {
    let criteria = [
        Criterion { label: "1", name: "exponent formula", budget_secs: 1.0, known_unattainable: false, check: exponent_formula },
        Criterion { label: "2", name: "optimal regularization", budget_secs: 1.0, known_unattainable: false, check: lambda_closed_form },
        Criterion { label: "3", name: "effective dimension power law", budget_secs: 30.0, known_unattainable: false, check: neff_power_law },
        Criterion { label: "4", name: "bias bound", budget_secs: 5.0, known_unattainable: false, check: bias_bound },
        Criterion { label: "5", name: "fit check", budget_secs: 300.0, known_unattainable: false, check: || experiment(ExperimentId::Fitcheck) },
        Criterion { label: "6", name: "smoothness and tail ordering", budget_secs: 900.0, known_unattainable: false, check: ordering },
        Criterion { label: "7", name: "representation invariance", budget_secs: 600.0, known_unattainable: false, check: || experiment(ExperimentId::Invariance) },
        Criterion { label: "8", name: "mixing collapse", budget_secs: 600.0, known_unattainable: false, check: || experiment(ExperimentId::Mixing) },
        Criterion { label: "9", name: "mixture dominance", budget_secs: 300.0, known_unattainable: false, check: || experiment(ExperimentId::Mixture) },
        Criterion { label: "10", name: "random feature width", budget_secs: 600.0, known_unattainable: false, check: || experiment(ExperimentId::RffWidth) },
        Criterion { label: "11", name: "tail preservation under width", budget_secs: 60.0, known_unattainable: true, check: tail_preservation_literal },
        Criterion { label: "11c", name: "tail preservation, index convention", budget_secs: 60.0, known_unattainable: false, check: tail_preservation_convention },
        Criterion { label: "12", name: "drift interval", budget_secs: 300.0, known_unattainable: false, check: || experiment(ExperimentId::Drift) },
        Criterion { label: "13", name: "determinism", budget_secs: 600.0, known_unattainable: false, check: determinism },
    ];

    let mut blocking = 0;
    for c in &criteria {
        let start = Instant::now();
        let out = (c.check)();
        let secs = start.elapsed().as_secs_f64();
        let in_budget = secs <= c.budget_secs;
        let passed = out.passed && in_budget;
        let budget = if in_budget { String::new() } else { format!(" [over budget {:.0}s]", c.budget_secs) };
        println!(
            "criterion {:>3} {} {}: {} ({secs:.1}s){budget}",
            c.label,
            if passed { "PASS" } else { "FAIL" },
            c.name,
            out.detail
        );
        if !passed && !c.known_unattainable {
            blocking += 1;
        }
    }
    if blocking > 0 {
        println!("{blocking} criteria failed");
        std::process::exit(1);
    }
}
