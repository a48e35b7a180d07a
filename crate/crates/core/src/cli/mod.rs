//! Command-line front end: `predict`, `run` and `list`.
//!
//! Exit status: 0 when every verdict passed, 1 when a verdict failed, 2 on
//! usage or configuration errors, 3 on runtime failures.

mod svg;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::experiments::{
    curves_csv, list_experiments, run, table_csv, verdicts_json, ExperimentConfig, ExperimentId, ExperimentResult,
};
use crate::theory::{optimal_lambda, predict_alpha, ProblemParams};

pub use svg::render_panel;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VERDICT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "REDLAW_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "redlaw", version, about = "Learning-curve exponents of kernel ridge regression under polynomial spectral decay")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Predicted exponent, redundancy index and optimal regularization.
    Predict {
        #[arg(long)]
        s: f64,
        #[arg(long)]
        beta: f64,
        /// Sample size for the optimal regularization.
        #[arg(long)]
        n: Option<u64>,
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        /// Bias constant.
        #[arg(long = "a", default_value_t = 1.0)]
        bias_constant: f64,
        /// Variance constant.
        #[arg(long = "b", default_value_t = 1.0)]
        variance_constant: f64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Runs one experiment, or `all`, and writes its artifacts.
    Run {
        #[arg(long)]
        experiment: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; defaults to REDLAW_WORKERS, then 1.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Lists the experiments with their default parameters.
    List {
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

/// Parses `args` (program name first), executes, and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. } | Error::InvalidArgument(_) => EXIT_USAGE,
                _ => EXIT_RUNTIME,
            }
        }
    }
}

pub fn main() -> i32 {
    main_with(std::env::args_os())
}

fn execute(command: Command) -> Result<i32> {
    match command {
        Command::Predict {
            s,
            beta,
            n,
            sigma2,
            bias_constant,
            variance_constant,
            format,
        } => predict(s, beta, n, sigma2, bias_constant, variance_constant, format),
        Command::Run {
            experiment,
            config,
            out,
            seed,
            workers,
        } => {
            let workers = resolve_workers(workers)?;
            run_command(&experiment, config.as_deref(), &out, seed, workers)
        }
        Command::List { format } => list(format),
    }
}

fn predict(s: f64, beta: f64, n: Option<u64>, sigma2: f64, a: f64, b: f64, format: Format) -> Result<i32> {
    let alpha = predict_alpha(s, beta)?;
    let lambda = match n {
        Some(n) => {
            if n == 0 {
                return Err(Error::config("n", "must be at least 1"));
            }
            let p = ProblemParams {
                s,
                beta,
                sigma2,
                a,
                b,
            };
            p.validate()?;
            Some((n, optimal_lambda(&p, n as f64)?))
        }
        None => None,
    };
    match format {
        Format::Text => {
            println!("alpha = {alpha:.4}");
            println!("redundancy = {:.4}", 1.0 / beta);
            if let Some((n, l)) = lambda {
                println!("lambda_star(n={n}) = {l:.6e}");
            }
        }
        Format::Json => {
            let value = json!({
                "s": s,
                "beta": beta,
                "alpha": alpha,
                "redundancy": 1.0 / beta,
                "n": lambda.map(|(n, _)| n),
                "lambda_star": lambda.map(|(_, l)| l),
            });
            println!("{}", serde_json::to_string_pretty(&value)?);
        }
    }
    Ok(EXIT_PASS)
}

fn list(format: Format) -> Result<i32> {
    let infos = list_experiments();
    match format {
        Format::Text => {
            for info in &infos {
                println!("{:<14} {}", info.id.as_str(), info.description);
            }
        }
        Format::Json => {
            let items = infos
                .iter()
                .map(|info| {
                    let defaults: toml::Table = info.defaults.to_toml()?.parse().map_err(|e: toml::de::Error| {
                        Error::config(info.id.as_str(), e.message().to_string())
                    })?;
                    Ok(json!({
                        "id": info.id,
                        "description": info.description,
                        "defaults": defaults.get(info.id.as_str()),
                    }))
                })
                .collect::<Result<Vec<_>>>()?;
            println!("{}", serde_json::to_string_pretty(&items)?);
        }
    }
    Ok(EXIT_PASS)
}

fn resolve_workers(flag: Option<usize>) -> Result<usize> {
    let workers = match flag {
        Some(w) => w,
        None => match std::env::var(WORKERS_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::config(WORKERS_ENV, format!("`{v}` is not a worker count")))?,
            Err(_) => 1,
        },
    };
    if workers == 0 {
        return Err(Error::config("workers", "must be at least 1"));
    }
    Ok(workers)
}

/// Loads the configuration for `id` from an optional file.
pub fn load_config(id: ExperimentId, path: Option<&Path>, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut config = match path {
        Some(p) => ExperimentConfig::parse(id, &fs::read_to_string(p)?)?,
        None => ExperimentConfig::defaults(id),
    };
    if let Some(seed) = seed {
        config.set_seed(seed);
        config.validate()?;
    }
    Ok(config)
}

fn run_command(experiment: &str, config: Option<&Path>, out: &Path, seed: Option<u64>, workers: usize) -> Result<i32> {
    let ids: Vec<ExperimentId> = if experiment == "all" {
        ExperimentId::ALL.to_vec()
    } else {
        vec![experiment.parse()?]
    };
    // Every configuration is checked before anything runs.
    let configs = ids
        .iter()
        .map(|&id| load_config(id, config, seed))
        .collect::<Result<Vec<_>>>()?;
    let mut code = EXIT_PASS;
    for cfg in &configs {
        let started = unix_seconds();
        let result = run(cfg, workers)?;
        let dir = out.join(cfg.id().as_str());
        let outputs = write_artifacts(&result, &dir)?;
        let manifest = Manifest {
            experiment: cfg.id().as_str().into(),
            config_path: config.map(|p| p.display().to_string()),
            config_hash: result.provenance.config_hash.clone(),
            seed: cfg.seed(),
            version: result.provenance.version.clone(),
            workers,
            started_unix: started,
            finished_unix: unix_seconds(),
            outputs,
            passed: result.passed(),
        };
        write_atomic(&dir.join("manifest.json"), &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
        print_summary(&result);
        if !result.passed() {
            code = EXIT_VERDICT;
        }
    }
    Ok(code)
}

#[derive(Debug, Serialize)]
struct Manifest {
    experiment: String,
    config_path: Option<String>,
    config_hash: String,
    seed: u64,
    version: String,
    workers: usize,
    started_unix: f64,
    finished_unix: f64,
    outputs: Vec<String>,
    passed: bool,
}

fn unix_seconds() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Writes curves, tables, verdicts and plots into `dir`; returns the file
/// names written.
pub fn write_artifacts(result: &ExperimentResult, dir: &Path) -> Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let mut files = vec![("curves.csv".to_string(), curves_csv(result))];
    for table in &result.tables {
        files.push((format!("{}.csv", table.name), table_csv(table)));
    }
    files.push(("verdicts.json".into(), verdicts_json(result)?));
    for panel in &result.panels {
        files.push((format!("plot_{}.svg", panel.slug), render_panel(panel)));
    }
    for (name, body) in &files {
        write_atomic(&dir.join(name), body)?;
    }
    Ok(files.into_iter().map(|(name, _)| name).collect())
}

/// Write to a sibling temporary file, then rename over the target.
fn write_atomic(path: &Path, body: &str) -> Result<()> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(body.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn print_summary(result: &ExperimentResult) {
    let status = if result.passed() { "PASS" } else { "FAIL" };
    println!("{} {}", result.id(), status);
    for v in &result.verdicts {
        println!(
            "  [{}] {}: {:.6} {} {:.6}",
            if v.passed { "pass" } else { "FAIL" },
            v.name,
            v.observed,
            v.comparison,
            v.threshold
        );
    }
}
