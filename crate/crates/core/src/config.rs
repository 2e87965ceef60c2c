//! Engine configuration documents (TOML).
//!
//! A document names its engine with a top-level `engine = "fuzzy"` or
//! `engine = "anfis"` key. Unknown keys are rejected.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::anfis::{AnfisError, AnfisHyper};
use crate::fuzzy::{
    FisDescription, FuzzyError, FuzzyRule, LinguisticVariable, MamdaniFis,
    DEFAULT_DEFUZZ_RESOLUTION,
};

pub const DEFAULT_FUZZY_CONFIG: &str = include_str!("../configs/fuzzy.toml");
pub const DEFAULT_ANFIS_CONFIG: &str = include_str!("../configs/anfis.toml");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid fuzzy config: {0}")]
    Fuzzy(#[from] FuzzyError),
    #[error("invalid anfis config: {0}")]
    Anfis(#[from] AnfisError),
    #[error("expected a `{expected}` config, found `{found}`")]
    WrongEngine {
        expected: &'static str,
        found: &'static str,
    },
}

/// The on-disk form of a Mamdani engine. Rules are written in the verbose
/// `if (...) and (...) then (...)` form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuzzyConfig {
    #[serde(default = "default_resolution")]
    pub defuzz_resolution: usize,
    pub inputs: Vec<LinguisticVariable>,
    pub output: LinguisticVariable,
    pub rules: Vec<String>,
}

fn default_resolution() -> usize {
    DEFAULT_DEFUZZ_RESOLUTION
}

impl FuzzyConfig {
    pub fn to_description(&self) -> Result<FisDescription, FuzzyError> {
        let names: Vec<&str> = self.inputs.iter().map(|v| v.name.as_str()).collect();
        let rules = self
            .rules
            .iter()
            .map(|text| FuzzyRule::parse(text, &names, &self.output.name))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FisDescription {
            inputs: self.inputs.clone(),
            output: self.output.clone(),
            rules,
            defuzz_resolution: self.defuzz_resolution,
        })
    }

    pub fn from_description(desc: &FisDescription) -> Self {
        let names = desc.input_names();
        Self {
            defuzz_resolution: desc.defuzz_resolution,
            inputs: desc.inputs.clone(),
            output: desc.output.clone(),
            rules: desc
                .rules
                .iter()
                .map(|r| r.render(&names, &desc.output.name))
                .collect(),
        }
    }

    pub fn build(&self) -> Result<MamdaniFis, FuzzyError> {
        MamdaniFis::new(&self.to_description()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "engine", rename_all = "lowercase")]
pub enum EngineConfig {
    Fuzzy(FuzzyConfig),
    Anfis(AnfisHyper),
}

impl EngineConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            EngineConfig::Fuzzy(_) => "fuzzy",
            EngineConfig::Anfis(_) => "anfis",
        }
    }

    /// Parses and validates a document.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        // Internally tagged enums lose source spans, so the tag is read first
        // and the body is parsed as the concrete type with the tag blanked out.
        #[derive(Deserialize)]
        struct Peek {
            engine: Option<toml::Spanned<String>>,
        }
        let parse_err = |e: toml::de::Error| ConfigError::Parse(e.to_string());
        let peek: Peek = toml::from_str(text).map_err(parse_err)?;
        let engine = peek
            .engine
            .ok_or_else(|| ConfigError::Parse("missing top-level `engine` key".into()))?;
        let span = engine.span();
        let line_start = text[..span.start].rfind('\n').map_or(0, |i| i + 1);
        let mut body = String::with_capacity(text.len());
        body.push_str(&text[..line_start]);
        body.extend(
            text[line_start..span.end]
                .chars()
                .map(|c| if c == '\n' { c } else { ' ' }),
        );
        body.push_str(&text[span.end..]);
        let cfg = match engine.get_ref().as_str() {
            "fuzzy" => EngineConfig::Fuzzy(toml::from_str(&body).map_err(parse_err)?),
            "anfis" => EngineConfig::Anfis(toml::from_str(&body).map_err(parse_err)?),
            other => {
                return Err(ConfigError::Parse(format!(
                    "unknown engine `{other}`, expected `fuzzy` or `anfis`"
                )))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match self {
            EngineConfig::Fuzzy(f) => {
                f.build()?;
            }
            EngineConfig::Anfis(h) => validate_hyper(h)?,
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("engine config serializes to TOML")
    }

    /// SHA-256 of the canonical JSON encoding, hex encoded.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("engine config serializes to JSON");
        hex::encode(Sha256::digest(&canonical))
    }

    pub fn default_fuzzy() -> Self {
        Self::from_toml(DEFAULT_FUZZY_CONFIG).expect("shipped fuzzy config is valid")
    }

    pub fn default_anfis() -> Self {
        Self::from_toml(DEFAULT_ANFIS_CONFIG).expect("shipped anfis config is valid")
    }

    pub fn into_fuzzy(self) -> Result<FuzzyConfig, ConfigError> {
        match self {
            EngineConfig::Fuzzy(f) => Ok(f),
            other => Err(ConfigError::WrongEngine {
                expected: "fuzzy",
                found: other.kind(),
            }),
        }
    }

    pub fn into_anfis(self) -> Result<AnfisHyper, ConfigError> {
        match self {
            EngineConfig::Anfis(h) => Ok(h),
            other => Err(ConfigError::WrongEngine {
                expected: "anfis",
                found: other.kind(),
            }),
        }
    }
}

pub fn validate_hyper(h: &AnfisHyper) -> Result<(), AnfisError> {
    if h.mfs < 2 {
        return Err(AnfisError::InvalidParameters(format!(
            "mfs must be >= 2, got {}",
            h.mfs
        )));
    }
    if !(h.step_size >= 0.0 && h.step_size.is_finite()) {
        return Err(AnfisError::InvalidParameters(format!(
            "step_size must be finite and >= 0, got {}",
            h.step_size
        )));
    }
    if !(h.ridge >= 0.0 && h.ridge.is_finite()) {
        return Err(AnfisError::InvalidParameters(format!(
            "ridge must be finite and >= 0, got {}",
            h.ridge
        )));
    }
    Ok(())
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<EngineConfig, ConfigError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    EngineConfig::from_toml(&text)
}
