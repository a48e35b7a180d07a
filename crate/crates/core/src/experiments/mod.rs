//! Figure-level experiments: declarative configurations, runners, verdicts.
//!
//! A configuration file holds one `[section]` per experiment id; keys absent
//! from a section keep their defaults, unknown keys are rejected by name.

mod params;
mod report;
mod runners;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fitting::SlopeFit;
use crate::simulate::LearningCurve;

pub use params::*;
pub use report::{curves_csv, format_float, table_csv, verdicts_json, CSV_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    AlphaSurface,
    Fitcheck,
    VaryS,
    VaryBeta,
    Invariance,
    Mixing,
    Mixture,
    Spectra,
    RffWidth,
    Drift,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 10] = [
        ExperimentId::AlphaSurface,
        ExperimentId::Fitcheck,
        ExperimentId::VaryS,
        ExperimentId::VaryBeta,
        ExperimentId::Invariance,
        ExperimentId::Mixing,
        ExperimentId::Mixture,
        ExperimentId::Spectra,
        ExperimentId::RffWidth,
        ExperimentId::Drift,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::AlphaSurface => "alpha_surface",
            ExperimentId::Fitcheck => "fitcheck",
            ExperimentId::VaryS => "vary_s",
            ExperimentId::VaryBeta => "vary_beta",
            ExperimentId::Invariance => "invariance",
            ExperimentId::Mixing => "mixing",
            ExperimentId::Mixture => "mixture",
            ExperimentId::Spectra => "spectra",
            ExperimentId::RffWidth => "rff_width",
            ExperimentId::Drift => "drift",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ExperimentId::AlphaSurface => {
                "exponent surface: predicted alpha over redundancy 1/beta and smoothness s, no simulation"
            }
            ExperimentId::Fitcheck => "fit check: simulated slope at beta=2, s=0.5 against the predicted 0.667",
            ExperimentId::VaryS => "varying smoothness: slopes increase across s at fixed beta",
            ExperimentId::VaryBeta => "varying tail index: slopes increase across beta at fixed s",
            ExperimentId::Invariance => "representation invariance: slopes under bounded rotations and rescalings",
            ExperimentId::Mixing => "AR(1) dependence: curves collapse when indexed by the effective sample size",
            ExperimentId::Mixture => "mixture of domains: the heavier tail sets the slope",
            ExperimentId::Spectra => "spectrum comparison: eigenvalue decay for several tail indices",
            ExperimentId::RffWidth => "finite width: random-feature curves approach the kernel curve as width grows",
            ExperimentId::Drift => "kernel drift: slope under a ramping tail index lies in the predicted band",
        }
    }

    pub fn valid_ids() -> String {
        Self::ALL.iter().map(|id| id.as_str()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| {
                Error::config(
                    "experiment",
                    format!("unknown experiment `{s}`; valid ids: {}", Self::valid_ids()),
                )
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentParams {
    AlphaSurface(AlphaSurfaceParams),
    Fitcheck(FitcheckParams),
    VaryS(VarySParams),
    VaryBeta(VaryBetaParams),
    Invariance(InvarianceParams),
    Mixing(MixingParams),
    Mixture(MixtureParams),
    Spectra(SpectraParams),
    RffWidth(RffWidthParams),
    Drift(DriftParams),
}

/// Applies `$body` to the inner parameter struct bound as `$p`.
macro_rules! dispatch {
    ($value:expr, $p:ident => $body:expr) => {
        match $value {
            ExperimentParams::AlphaSurface($p) => $body,
            ExperimentParams::Fitcheck($p) => $body,
            ExperimentParams::VaryS($p) => $body,
            ExperimentParams::VaryBeta($p) => $body,
            ExperimentParams::Invariance($p) => $body,
            ExperimentParams::Mixing($p) => $body,
            ExperimentParams::Mixture($p) => $body,
            ExperimentParams::Spectra($p) => $body,
            ExperimentParams::RffWidth($p) => $body,
            ExperimentParams::Drift($p) => $body,
        }
    };
}

impl ExperimentParams {
    pub fn defaults(id: ExperimentId) -> Self {
        match id {
            ExperimentId::AlphaSurface => ExperimentParams::AlphaSurface(Default::default()),
            ExperimentId::Fitcheck => ExperimentParams::Fitcheck(Default::default()),
            ExperimentId::VaryS => ExperimentParams::VaryS(Default::default()),
            ExperimentId::VaryBeta => ExperimentParams::VaryBeta(Default::default()),
            ExperimentId::Invariance => ExperimentParams::Invariance(Default::default()),
            ExperimentId::Mixing => ExperimentParams::Mixing(Default::default()),
            ExperimentId::Mixture => ExperimentParams::Mixture(Default::default()),
            ExperimentId::Spectra => ExperimentParams::Spectra(Default::default()),
            ExperimentId::RffWidth => ExperimentParams::RffWidth(Default::default()),
            ExperimentId::Drift => ExperimentParams::Drift(Default::default()),
        }
    }

    pub fn id(&self) -> ExperimentId {
        match self {
            ExperimentParams::AlphaSurface(_) => ExperimentId::AlphaSurface,
            ExperimentParams::Fitcheck(_) => ExperimentId::Fitcheck,
            ExperimentParams::VaryS(_) => ExperimentId::VaryS,
            ExperimentParams::VaryBeta(_) => ExperimentId::VaryBeta,
            ExperimentParams::Invariance(_) => ExperimentId::Invariance,
            ExperimentParams::Mixing(_) => ExperimentId::Mixing,
            ExperimentParams::Mixture(_) => ExperimentId::Mixture,
            ExperimentParams::Spectra(_) => ExperimentId::Spectra,
            ExperimentParams::RffWidth(_) => ExperimentId::RffWidth,
            ExperimentParams::Drift(_) => ExperimentId::Drift,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seed() > i64::MAX as u64 {
            return Err(Error::config("seed", "must not exceed 2^63 - 1"));
        }
        dispatch!(self, p => p.validate())
    }

    pub fn seed(&self) -> u64 {
        match self {
            ExperimentParams::AlphaSurface(p) => p.seed,
            ExperimentParams::Spectra(p) => p.seed,
            other => other.sampling().map(|s| s.seed).unwrap_or_default(),
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            ExperimentParams::AlphaSurface(p) => p.seed = seed,
            ExperimentParams::Spectra(p) => p.seed = seed,
            other => {
                if let Some(s) = other.sampling_mut() {
                    s.seed = seed;
                }
            }
        }
    }

    /// Sampling settings of simulation-backed experiments.
    pub fn sampling(&self) -> Option<&Sampling> {
        match self {
            ExperimentParams::AlphaSurface(_) | ExperimentParams::Spectra(_) => None,
            ExperimentParams::Fitcheck(p) => Some(p.sampling()),
            ExperimentParams::VaryS(p) => Some(p.sampling()),
            ExperimentParams::VaryBeta(p) => Some(p.sampling()),
            ExperimentParams::Invariance(p) => Some(p.sampling()),
            ExperimentParams::Mixing(p) => Some(p.sampling()),
            ExperimentParams::Mixture(p) => Some(p.sampling()),
            ExperimentParams::RffWidth(p) => Some(p.sampling()),
            ExperimentParams::Drift(p) => Some(p.sampling()),
        }
    }

    pub fn sampling_mut(&mut self) -> Option<&mut Sampling> {
        match self {
            ExperimentParams::AlphaSurface(_) | ExperimentParams::Spectra(_) => None,
            ExperimentParams::Fitcheck(p) => Some(p.sampling_mut()),
            ExperimentParams::VaryS(p) => Some(p.sampling_mut()),
            ExperimentParams::VaryBeta(p) => Some(p.sampling_mut()),
            ExperimentParams::Invariance(p) => Some(p.sampling_mut()),
            ExperimentParams::Mixing(p) => Some(p.sampling_mut()),
            ExperimentParams::Mixture(p) => Some(p.sampling_mut()),
            ExperimentParams::RffWidth(p) => Some(p.sampling_mut()),
            ExperimentParams::Drift(p) => Some(p.sampling_mut()),
        }
    }

    fn to_table(&self) -> Result<toml::Table> {
        dispatch!(self, p => toml::Table::try_from(p))
            .map_err(|e| Error::config(self.id().as_str(), e.to_string()))
    }

    fn from_table(id: ExperimentId, table: toml::Table) -> Result<Self> {
        let value = toml::Value::Table(table);
        let wrap = |e: toml::de::Error| Error::config(id.as_str(), e.message().to_string());
        Ok(match id {
            ExperimentId::AlphaSurface => ExperimentParams::AlphaSurface(value.try_into().map_err(wrap)?),
            ExperimentId::Fitcheck => ExperimentParams::Fitcheck(value.try_into().map_err(wrap)?),
            ExperimentId::VaryS => ExperimentParams::VaryS(value.try_into().map_err(wrap)?),
            ExperimentId::VaryBeta => ExperimentParams::VaryBeta(value.try_into().map_err(wrap)?),
            ExperimentId::Invariance => ExperimentParams::Invariance(value.try_into().map_err(wrap)?),
            ExperimentId::Mixing => ExperimentParams::Mixing(value.try_into().map_err(wrap)?),
            ExperimentId::Mixture => ExperimentParams::Mixture(value.try_into().map_err(wrap)?),
            ExperimentId::Spectra => ExperimentParams::Spectra(value.try_into().map_err(wrap)?),
            ExperimentId::RffWidth => ExperimentParams::RffWidth(value.try_into().map_err(wrap)?),
            ExperimentId::Drift => ExperimentParams::Drift(value.try_into().map_err(wrap)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub params: ExperimentParams,
}

impl ExperimentConfig {
    pub fn defaults(id: ExperimentId) -> Self {
        ExperimentConfig {
            params: ExperimentParams::defaults(id),
        }
    }

    pub fn id(&self) -> ExperimentId {
        self.params.id()
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()
    }

    /// Section `[id]` of `text` laid over the defaults. Sections for other
    /// experiments are allowed but must name valid ids; a missing section
    /// yields the defaults.
    pub fn parse(id: ExperimentId, text: &str) -> Result<Self> {
        let doc: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("config", e.message().to_string()))?;
        let mut section = None;
        for (key, value) in doc {
            let sid: ExperimentId = key
                .parse()
                .map_err(|_| Error::config(&key, format!("not an experiment section; valid ids: {}", ExperimentId::valid_ids())))?;
            let toml::Value::Table(table) = value else {
                return Err(Error::config(&key, "must be a [section]"));
            };
            if sid == id {
                section = Some(table);
            }
        }
        let mut merged = ExperimentParams::defaults(id).to_table()?;
        if let Some(user) = section {
            for (key, value) in user {
                let slot = merged
                    .get_mut(&key)
                    .ok_or_else(|| Error::config(&key, format!("unknown parameter for {id}")))?;
                *slot = coerce(&key, slot, value)?;
            }
        }
        let config = ExperimentConfig {
            params: ExperimentParams::from_table(id, merged)?,
        };
        config.validate()?;
        Ok(config)
    }

    /// Canonical `[id]` section holding every parameter.
    pub fn to_toml(&self) -> Result<String> {
        let mut doc = toml::Table::new();
        doc.insert(self.id().as_str().into(), toml::Value::Table(self.params.to_table()?));
        toml::to_string(&doc).map_err(|e| Error::config(self.id().as_str(), e.to_string()))
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn seed(&self) -> u64 {
        self.params.seed()
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.params.set_seed(seed);
    }
}

/// Replaces a default value by a user value of the same shape; integers are
/// accepted where reals are expected.
fn coerce(field: &str, default: &toml::Value, value: toml::Value) -> Result<toml::Value> {
    use toml::Value as V;
    match (default, value) {
        (V::Float(_), V::Integer(i)) => Ok(V::Float(i as f64)),
        (V::Integer(_), V::Integer(i)) if i < 0 => Err(Error::config(field, "must be non-negative")),
        (V::Array(d), V::Array(items)) => {
            let Some(template) = d.first() else {
                return Ok(V::Array(items));
            };
            items
                .into_iter()
                .map(|item| coerce(field, template, item))
                .collect::<Result<Vec<_>>>()
                .map(V::Array)
        }
        (d, v) if d.same_type(&v) => Ok(v),
        (d, v) => Err(Error::config(
            field,
            format!("expected {}, found {}", d.type_str(), v.type_str()),
        )),
    }
}

/// Pass/fail outcome of one check; `threshold` is the bound actually used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub observed: f64,
    /// One of `<=`, `<`, `>=`, `>`, read as `observed <op> threshold`.
    pub comparison: String,
    pub threshold: f64,
    pub message: String,
}

impl Verdict {
    pub fn check(name: impl Into<String>, observed: f64, comparison: &str, threshold: f64, message: impl Into<String>) -> Self {
        let passed = match comparison {
            "<=" => observed <= threshold,
            "<" => observed < threshold,
            ">=" => observed >= threshold,
            ">" => observed > threshold,
            _ => false,
        };
        Verdict {
            name: name.into(),
            passed,
            observed,
            comparison: comparison.into(),
            threshold,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub curve: String,
    /// `n` or `n_eff`.
    pub abscissa: String,
    pub fit: SlopeFit,
    pub predicted: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub experiment: ExperimentId,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

/// A named CSV table beside the learning curves; cells are pre-formatted.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub dashed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub slug: String,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub curves: Vec<LearningCurve>,
    pub fits: Vec<FitRecord>,
    pub verdicts: Vec<Verdict>,
    pub provenance: Provenance,
    pub tables: Vec<Table>,
    pub panels: Vec<Panel>,
}

impl ExperimentResult {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn id(&self) -> ExperimentId {
        self.provenance.experiment
    }
}

/// Validates, runs and judges one experiment. `workers` only affects wall
/// time.
pub fn run(config: &ExperimentConfig, workers: usize) -> Result<ExperimentResult> {
    config.validate()?;
    if workers == 0 {
        return Err(Error::config("workers", "must be at least 1"));
    }
    let provenance = Provenance {
        experiment: config.id(),
        config_hash: config.hash()?,
        seed: config.seed(),
        version: env!("CARGO_PKG_VERSION").into(),
    };
    runners::run(&config.params, workers, provenance)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentInfo {
    pub id: ExperimentId,
    pub description: &'static str,
    pub defaults: ExperimentConfig,
}

/// Every experiment in a fixed order.
pub fn list_experiments() -> Vec<ExperimentInfo> {
    ExperimentId::ALL
        .into_iter()
        .map(|id| ExperimentInfo {
            id,
            description: id.description(),
            defaults: ExperimentConfig::defaults(id),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_parse_and_display() {
        for id in ExperimentId::ALL {
            assert_eq!(id.as_str().parse::<ExperimentId>().unwrap(), id);
        }
        let err = "figure7".parse::<ExperimentId>().unwrap_err().to_string();
        assert!(err.contains("fitcheck") && err.contains("drift"), "{err}");
    }

    #[test]
    fn defaults_validate_and_round_trip() {
        for info in list_experiments() {
            info.defaults.validate().unwrap();
            let text = info.defaults.to_toml().unwrap();
            let back = ExperimentConfig::parse(info.id, &text).unwrap();
            assert_eq!(back, info.defaults, "{}", info.id);
        }
    }

    #[test]
    fn overlay_keeps_unset_defaults() {
        let c = ExperimentConfig::parse(ExperimentId::Fitcheck, "[fitcheck]\ntrials = 4\nbeta = 3\n").unwrap();
        let ExperimentParams::Fitcheck(p) = &c.params else { panic!() };
        assert_eq!(p.sampling.trials, 4);
        assert_eq!(p.beta, 3.0);
        assert_eq!(p.s, 0.5);
        assert_eq!(p.sampling.n_grid, FitcheckParams::default().sampling.n_grid);
    }

    #[test]
    fn schema_errors_name_the_field() {
        let cases = [
            ("[fitcheck]\nbogus = 1\n", "bogus"),
            ("[fitcheck]\nbeta = \"two\"\n", "beta"),
            ("[fitcheck]\nbeta = 1.0\n", "beta"),
            ("[fitcheck]\ntrials = -3\n", "trials"),
            ("[fitchek]\n", "fitchek"),
            ("[mixing]\nrhos = [0.2, 1.5]\n", "rhos"),
        ];
        for (text, field) in cases {
            let id = if text.contains("mixing") { ExperimentId::Mixing } else { ExperimentId::Fitcheck };
            match ExperimentConfig::parse(id, text) {
                Err(Error::Config { field: f, .. }) => assert_eq!(f, field, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn missing_section_gives_defaults() {
        let c = ExperimentConfig::parse(ExperimentId::Drift, "[fitcheck]\ntrials = 2\n").unwrap();
        assert_eq!(c, ExperimentConfig::defaults(ExperimentId::Drift));
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::defaults(ExperimentId::Mixture);
        let mut b = a.clone();
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        b.set_seed(7);
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
        assert_eq!(b.seed(), 7);
        assert_eq!(a.hash().unwrap().len(), 64);
    }
}
