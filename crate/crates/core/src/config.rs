//! Experiment configuration, read from TOML.
//!
//! ```toml
//! version = 1
//! algorithm = "saboa"          # squint | squint-corners | squint-cover | boa+ | saboa
//! horizon = 4096
//! seed = 7
//! checkpoints = "pow2"         # or an explicit list of rounds
//!
//! [stream]
//! kind = "quadratic"           # quadratic | adversarial | experts | absolute
//! dim = 20
//! sparsity = 3
//!
//! [[comparators]]
//! kind = "optimum"
//! ```
//!
//! Unknown keys are rejected. The full grammar is in `docs/config.md`.

use std::path::Path;

use serde::de::{self, DeserializeOwned, Error as _};
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::meta::LeaderSolverConfig;
use crate::par::Execution;
use crate::streams::{Design, Latent, NoiseKind};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    /// Squint over the canonical basis (prediction with expert advice).
    #[serde(rename = "squint")]
    Squint,
    /// Squint over the `2d` unit corners.
    #[serde(rename = "squint-corners")]
    SquintCorners,
    /// Squint over an eps-cover of the unit ball (d <= 3).
    #[serde(rename = "squint-cover")]
    SquintCover,
    #[serde(rename = "boa+")]
    BoaPlus,
    #[serde(rename = "saboa")]
    Saboa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckpointRule {
    /// Powers of two up to the horizon, plus the horizon.
    Pow2,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Checkpoints {
    Rule(CheckpointRule),
    List(Vec<usize>),
}

impl Default for Checkpoints {
    fn default() -> Self {
        Checkpoints::Rule(CheckpointRule::Pow2)
    }
}

impl Checkpoints {
    pub fn resolve(&self, horizon: usize) -> Vec<usize> {
        let mut rounds = match self {
            Checkpoints::Rule(CheckpointRule::Pow2) => {
                let mut r: Vec<usize> = (0..usize::BITS)
                    .map(|j| 1usize << j)
                    .take_while(|t| *t <= horizon)
                    .collect();
                r.push(horizon);
                r
            }
            Checkpoints::List(list) => list.clone(),
        };
        rounds.sort_unstable();
        rounds.dedup();
        rounds
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleConfig {
    /// `E = multiplier * G`.
    #[serde(default = "default_multiplier")]
    pub multiplier: f64,
    /// Explicit `E`, overriding the multiplier.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

fn default_multiplier() -> f64 {
    4.0 / 3.0
}

impl Default for ScaleConfig {
    fn default() -> Self {
        Self {
            multiplier: default_multiplier(),
            value: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoverPrior {
    #[default]
    Sparsity,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverConfig {
    pub eps: f64,
    #[serde(default)]
    pub prior: CoverPrior,
}

fn half() -> f64 {
    0.5
}
fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn default_noise() -> f64 {
    0.1
}
fn default_truncation() -> f64 {
    4.0
}
fn default_spread() -> f64 {
    0.2
}
fn default_rows() -> usize {
    20
}
fn default_outcome_noise() -> f64 {
    0.25
}
fn default_bias() -> [f64; 2] {
    [0.15, 0.25]
}
fn default_max_noise() -> f64 {
    0.05
}
fn identity() -> Design {
    Design::Identity
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticStream {
    pub dim: usize,
    pub sparsity: usize,
    #[serde(default = "half")]
    pub theta_norm: f64,
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default)]
    pub noise_kind: NoiseKind,
    #[serde(default)]
    pub latent: Latent,
    #[serde(default = "default_truncation")]
    pub truncation: f64,
    #[serde(default = "identity")]
    pub design: Design,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarialStream {
    pub dim: usize,
    pub sparsity: usize,
    #[serde(default = "one")]
    pub modulus: f64,
    #[serde(default = "half")]
    pub centre_norm: f64,
    #[serde(default = "default_spread")]
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpertsStream {
    pub experts: usize,
    #[serde(default = "one_usize")]
    pub good: usize,
    #[serde(default = "default_outcome_noise")]
    pub outcome_noise: f64,
    #[serde(default = "default_bias")]
    pub bias: [f64; 2],
    #[serde(default = "default_max_noise")]
    pub max_noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbsoluteStream {
    pub dim: usize,
    pub sparsity: usize,
    #[serde(default = "half")]
    pub theta_norm: f64,
    #[serde(default = "default_rows")]
    pub rows: usize,
}

/// Loss stream selected by `kind`.
///
/// Deserialized by hand rather than through serde's internally tagged
/// enums, which buffer the table and lose field names from type errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StreamConfig {
    Quadratic(QuadraticStream),
    Adversarial(AdversarialStream),
    Experts(ExpertsStream),
    Absolute(AbsoluteStream),
}

const STREAM_KINDS: &[&str] = &["quadratic", "adversarial", "experts", "absolute"];

impl<'de> Deserialize<'de> for StreamConfig {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let mut table = toml::Table::deserialize(deserializer)?;
        let kind = match table.remove("kind") {
            Some(toml::Value::String(k)) => k,
            Some(other) => {
                return Err(D::Error::custom(format!(
                    "kind: expected a string, got {}",
                    other.type_str()
                )))
            }
            None => return Err(D::Error::missing_field("kind")),
        };
        match kind.as_str() {
            "quadratic" => fields(table).map(StreamConfig::Quadratic),
            "adversarial" => fields(table).map(StreamConfig::Adversarial),
            "experts" => fields(table).map(StreamConfig::Experts),
            "absolute" => fields(table).map(StreamConfig::Absolute),
            other => Err(D::Error::unknown_variant(other, STREAM_KINDS)),
        }
    }
}

fn fields<T: DeserializeOwned, E: de::Error>(table: toml::Table) -> std::result::Result<T, E> {
    serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            E::custom(e.into_inner())
        } else {
            E::custom(format!("{path}: {}", e.into_inner()))
        }
    })
}

impl StreamConfig {
    pub fn dim(&self) -> usize {
        match self {
            StreamConfig::Quadratic(s) => s.dim,
            StreamConfig::Adversarial(s) => s.dim,
            StreamConfig::Absolute(s) => s.dim,
            StreamConfig::Experts(s) => s.experts,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComparatorKind {
    /// The stream's risk minimizer (or cycle centre).
    Optimum,
    Zero,
    /// `e_index` (0-based).
    Basis,
    /// Explicit coordinates.
    Vector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparatorConfig {
    pub kind: ComparatorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<f64>>,
}

impl ComparatorConfig {
    pub fn optimum() -> Self {
        Self {
            kind: ComparatorKind::Optimum,
            name: None,
            index: None,
            coords: None,
        }
    }

    /// Column label: the explicit name, or one derived from the kind.
    pub fn label(&self, position: usize) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        match self.kind {
            ComparatorKind::Optimum => "optimum".into(),
            ComparatorKind::Zero => "zero".into(),
            ComparatorKind::Basis => format!("e{}", self.index.unwrap_or(0)),
            ComparatorKind::Vector => format!("vector{position}"),
        }
    }
}

fn default_comparators() -> Vec<ComparatorConfig> {
    vec![ComparatorConfig::optimum()]
}

fn default_slope_min_t() -> usize {
    1024
}

/// Axes of a sweep; the cells are their cross product.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub horizon: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dim: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sparsity: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seed: Vec<u64>,
}

impl SweepConfig {
    pub fn is_empty(&self) -> bool {
        self.horizon.is_empty()
            && self.dim.is_empty()
            && self.sparsity.is_empty()
            && self.seed.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub algorithm: Algorithm,
    pub horizon: usize,
    pub seed: u64,
    #[serde(default)]
    pub checkpoints: Checkpoints,
    /// Checkpoints below this round are excluded from slope fits.
    #[serde(default = "default_slope_min_t")]
    pub slope_min_t: usize,
    #[serde(default)]
    pub execution: Execution,
    #[serde(default)]
    pub snapshot_predictions: bool,
    #[serde(default)]
    pub scale: ScaleConfig,
    /// Ladder exponent; defaults to 1 for squint variants and 2 for restarts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<u32>,
    #[serde(default)]
    pub leader: LeaderSolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cover: Option<CoverConfig>,
    pub stream: StreamConfig,
    #[serde(default = "default_comparators")]
    pub comparators: Vec<ComparatorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Checks cross-field constraints; stream parameter ranges are checked
    /// when the stream is built.
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::config(format!(
                "version: unsupported config version {}, expected {CONFIG_VERSION}",
                self.version
            )));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon: must be at least 1"));
        }
        if let Checkpoints::List(list) = &self.checkpoints {
            if let Some(bad) = list.iter().find(|t| **t == 0 || **t > self.horizon) {
                return Err(Error::config(format!(
                    "checkpoints: round {bad} is outside 1..={}",
                    self.horizon
                )));
            }
        }
        if !(self.scale.multiplier > 0.0 && self.scale.multiplier.is_finite()) {
            return Err(Error::config("scale.multiplier: must be positive"));
        }
        if let Some(v) = self.scale.value {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config("scale.value: must be positive"));
            }
        }
        if let Some(p) = self.exponent {
            if !(1..=2).contains(&p) {
                return Err(Error::config(format!("exponent: must be 1 or 2, got {p}")));
            }
        }
        self.leader.validate()?;
        match (self.algorithm, &self.cover) {
            (Algorithm::SquintCover, None) => {
                return Err(Error::config(
                    "cover: squint-cover needs a [cover] table with eps",
                ));
            }
            (Algorithm::SquintCover, Some(_)) if self.stream.dim() > 3 => {
                return Err(Error::config(format!(
                    "stream.dim: squint-cover supports d <= 3, got {}",
                    self.stream.dim()
                )));
            }
            _ => {}
        }
        for (j, c) in self.comparators.iter().enumerate() {
            let field = format!("comparators[{j}]");
            match c.kind {
                ComparatorKind::Basis if c.index.is_none() => {
                    return Err(Error::config(format!(
                        "{field}.index: required for kind = \"basis\""
                    )));
                }
                ComparatorKind::Vector if c.coords.is_none() => {
                    return Err(Error::config(format!(
                        "{field}.coords: required for kind = \"vector\""
                    )));
                }
                _ => {}
            }
            if let Some(name) = &c.name {
                if name.is_empty()
                    || !name
                        .chars()
                        .all(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '-')
                {
                    return Err(Error::config(format!(
                        "{field}.name: use letters, digits, '_' or '-', got {name:?}"
                    )));
                }
            }
        }
        let mut labels: Vec<String> = self
            .comparators
            .iter()
            .enumerate()
            .map(|(j, c)| c.label(j))
            .collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("comparators: labels must be distinct"));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.horizon.contains(&0) {
                return Err(Error::config("sweep.horizon: values must be at least 1"));
            }
        }
        Ok(())
    }

    /// Compact JSON rendering used to embed the resolved config in outputs.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
version = 1
algorithm = "saboa"
horizon = 100
seed = 3

[stream]
kind = "quadratic"
dim = 5
sparsity = 2
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.algorithm, Algorithm::Saboa);
        assert_eq!(cfg.checkpoints, Checkpoints::Rule(CheckpointRule::Pow2));
        assert_eq!(cfg.comparators, vec![ComparatorConfig::optimum()]);
        assert!((cfg.scale.multiplier - 4.0 / 3.0).abs() < 1e-15);
        match cfg.stream {
            StreamConfig::Quadratic(q) => {
                assert_eq!(q.noise, 0.1);
                assert_eq!(q.design, Design::Identity);
            }
            _ => panic!("wrong stream"),
        }
    }

    #[test]
    fn unknown_key_is_named() {
        let text = MINIMAL.replace("seed = 3", "seed = 3\nhorizn = 5");
        let err = ExperimentConfig::from_toml_str(&text)
            .unwrap_err()
            .to_string();
        assert!(err.contains("horizn"), "{err}");
        let text = MINIMAL.replace("sparsity = 2", "sparsity = 2\nrho = 0.4");
        let err = ExperimentConfig::from_toml_str(&text)
            .unwrap_err()
            .to_string();
        assert!(err.contains("rho"), "{err}");
    }

    #[test]
    fn stream_type_errors_name_the_key() {
        let err = ExperimentConfig::from_toml_str(&MINIMAL.replace("dim = 5", "dim = \"five\""))
            .unwrap_err()
            .to_string();
        assert!(err.contains("dim"), "{err}");
        let err = ExperimentConfig::from_toml_str(&MINIMAL.replace("\"quadratic\"", "\"logistic\""))
            .unwrap_err()
            .to_string();
        assert!(err.contains("logistic"), "{err}");
    }

    #[test]
    fn unknown_algorithm_rejected() {
        let err =
            ExperimentConfig::from_toml_str(&MINIMAL.replace("saboa", "adagrad")).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn semantic_errors_name_the_key() {
        let err = ExperimentConfig::from_toml_str(&MINIMAL.replace("horizon = 100", "horizon = 0"))
            .unwrap_err();
        assert!(err.to_string().contains("horizon"));
        let text = MINIMAL.replace("seed = 3", "seed = 3\ncheckpoints = [1, 500]");
        assert!(ExperimentConfig::from_toml_str(&text)
            .unwrap_err()
            .to_string()
            .contains("checkpoints"));
        let text = MINIMAL.replace("saboa", "squint-cover");
        assert!(ExperimentConfig::from_toml_str(&text)
            .unwrap_err()
            .to_string()
            .contains("cover"));
    }

    #[test]
    fn checkpoint_resolution() {
        assert_eq!(Checkpoints::default().resolve(10), vec![1, 2, 4, 8, 10]);
        assert_eq!(Checkpoints::default().resolve(8), vec![1, 2, 4, 8]);
        assert_eq!(Checkpoints::List(vec![7, 3, 3]).resolve(10), vec![3, 7]);
    }

    #[test]
    fn nested_tables_parse() {
        let text = format!(
            "{MINIMAL}\n[[comparators]]\nkind = \"vector\"\nname = \"probe\"\ncoords = [0.1, 0, 0, 0, 0]\n\n[sweep]\nseed = [1, 2]\n"
        )
        .replace("sparsity = 2", "sparsity = 2\ndesign = { kind = \"toeplitz\", rho = 0.5 }");
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg.comparators.len(), 1);
        assert_eq!(cfg.sweep.unwrap().seed, vec![1, 2]);
        match cfg.stream {
            StreamConfig::Quadratic(q) => assert_eq!(q.design, Design::Toeplitz { rho: 0.5 }),
            _ => panic!(),
        }
    }

    #[test]
    fn json_round_trip() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }
}
