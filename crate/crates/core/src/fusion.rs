//! End-to-end pixel-level fusion of two grayscale images.
//!
//! Both pipelines crop the inputs to their common top-left window, flatten
//! them to columns, map every co-located pixel pair through an engine and
//! reshape the result, rounding and clamping to 8 bits.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::anfis::{AnfisError, AnfisHyper, SugenoFis, TrainingReport};
use crate::config::{validate_hyper, ConfigError, EngineConfig};
use crate::fuzzy::{FuzzyError, FuzzyLut, MamdaniFis};
use crate::image::{crop_to_common, from_column, Image, PixelColumn};

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum FusionError {
    #[error(transparent)]
    Fuzzy(#[from] FuzzyError),
    #[error(transparent)]
    Anfis(#[from] AnfisError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("method `{method}` cannot run a `{config}` engine config")]
    MethodMismatch {
        method: &'static str,
        config: &'static str,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Fuzzy,
    NeuroFuzzy,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Fuzzy => "fuzzy",
            Method::NeuroFuzzy => "anfis",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::Fuzzy => "Fuzzy Fusion",
            Method::NeuroFuzzy => "Neuro Fuzzy Fusion",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fuzzy" => Ok(Method::Fuzzy),
            "anfis" | "neuro-fuzzy" | "neuro_fuzzy" => Ok(Method::NeuroFuzzy),
            other => Err(format!("unknown fusion method `{other}`")),
        }
    }
}

fn columns(a: &Image, b: &Image) -> (PixelColumn, PixelColumn) {
    let (a, b) = crop_to_common(a, b);
    (a.to_column(), b.to_column())
}

fn reshape(values: Vec<f64>, like: &PixelColumn) -> Image {
    from_column(&PixelColumn::new(
        values,
        like.source_rows,
        like.source_cols,
    ))
    .expect("one output per input pixel")
}

/// Mamdani fusion through the precomputed 256x256 table.
pub fn fuse_fuzzy(a: &Image, b: &Image, fis: &MamdaniFis) -> Image {
    fuse_with_lut(a, b, &fis.evaluate_lut()).0
}

/// Mamdani fusion evaluating the engine for every pixel. Produces the same
/// pixels as [`fuse_fuzzy`].
pub fn fuse_fuzzy_direct(a: &Image, b: &Image, fis: &MamdaniFis) -> Image {
    let (ca, cb) = columns(a, b);
    let values = ca
        .values
        .par_iter()
        .zip(cb.values.par_iter())
        .map(|(&x1, &x2)| fis.evaluate(x1, x2))
        .collect();
    reshape(values, &ca)
}

/// Fuses through a table and also counts pixels that used the
/// zero-activation fallback.
pub fn fuse_with_lut(a: &Image, b: &Image, lut: &FuzzyLut) -> (Image, usize) {
    let (a, b) = crop_to_common(a, b);
    let mut fallback = 0;
    let values = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(&x1, &x2)| {
            fallback += usize::from(lut.is_fallback(x1, x2));
            lut.get(x1, x2)
        })
        .collect();
    (reshape(values, &a.to_column()), fallback)
}

/// Runs a trained Sugeno model over the pixel pairs. Also returns how many
/// pixels had no firing rule.
pub fn fuse_with_model(a: &Image, b: &Image, model: &SugenoFis) -> (Image, usize) {
    let (ca, cb) = columns(a, b);
    let outputs: Vec<(f64, bool)> = ca
        .values
        .par_iter()
        .zip(cb.values.par_iter())
        .map(|(&x1, &x2)| {
            let fwd = model.forward(x1, x2);
            (fwd.output, fwd.all_rules_silent)
        })
        .collect();
    let silent = outputs.iter().filter(|(_, s)| *s).count();
    let values = outputs.into_iter().map(|(v, _)| v).collect();
    (reshape(values, &ca), silent)
}

/// Output of the neuro-fuzzy pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuroFuzzyFusion {
    pub image: Image,
    pub report: TrainingReport,
    pub model: SugenoFis,
    pub silent_pixels: usize,
}

/// Trains a grid-partitioned model on the preset training data, then
/// predicts the fused image from the input pixel pairs.
pub fn fuse_neuro_fuzzy(
    a: &Image,
    b: &Image,
    hyper: &AnfisHyper,
) -> Result<(Image, TrainingReport), AnfisError> {
    fuse_neuro_fuzzy_detailed(a, b, hyper).map(|out| (out.image, out.report))
}

pub fn fuse_neuro_fuzzy_detailed(
    a: &Image,
    b: &Image,
    hyper: &AnfisHyper,
) -> Result<NeuroFuzzyFusion, AnfisError> {
    validate_hyper(hyper)?;
    let (model, report) = hyper.train()?;
    let (image, silent_pixels) = fuse_with_model(a, b, &model);
    Ok(NeuroFuzzyFusion {
        image,
        report,
        model,
        silent_pixels,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionJob {
    pub method: Method,
    pub engine: EngineConfig,
    pub a: Image,
    pub b: Image,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FuzzyProvenance {
    pub rules: Vec<String>,
    pub duplicate_rules_removed: usize,
    pub fallback_pixels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnfisProvenance {
    pub training: TrainingReport,
    pub silent_pixels: usize,
}

/// Sidecar record describing how a fused image was produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub engine_version: &'static str,
    pub method: Method,
    pub config_hash: String,
    pub config: EngineConfig,
    pub input_a_dims: [usize; 2],
    pub input_b_dims: [usize; 2],
    pub output_dims: [usize; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fuzzy: Option<FuzzyProvenance>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anfis: Option<AnfisProvenance>,
}

impl Provenance {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("provenance serializes")
    }
}

/// Output of [`run_job`]; the trained model is kept for neuro-fuzzy jobs.
#[derive(Debug, Clone, PartialEq)]
pub struct JobOutput {
    pub image: Image,
    pub provenance: Provenance,
    pub model: Option<SugenoFis>,
}

pub fn run_job(job: &FusionJob) -> Result<JobOutput, FusionError> {
    let mismatch = || FusionError::MethodMismatch {
        method: job.method.name(),
        config: job.engine.kind(),
    };
    let mut provenance = Provenance {
        tool: "fusecraft",
        engine_version: ENGINE_VERSION,
        method: job.method,
        config_hash: job.engine.hash(),
        config: job.engine.clone(),
        input_a_dims: [job.a.rows(), job.a.cols()],
        input_b_dims: [job.b.rows(), job.b.cols()],
        output_dims: [0, 0],
        fuzzy: None,
        anfis: None,
    };
    let (image, model) = match (job.method, &job.engine) {
        (Method::Fuzzy, EngineConfig::Fuzzy(cfg)) => {
            let fis = cfg.build()?;
            let (image, fallback_pixels) = fuse_with_lut(&job.a, &job.b, &fis.evaluate_lut());
            provenance.fuzzy = Some(FuzzyProvenance {
                rules: fis.rule_texts(),
                duplicate_rules_removed: fis.duplicates_removed(),
                fallback_pixels,
            });
            (image, None)
        }
        (Method::NeuroFuzzy, EngineConfig::Anfis(hyper)) => {
            let out = fuse_neuro_fuzzy_detailed(&job.a, &job.b, hyper)?;
            provenance.anfis = Some(AnfisProvenance {
                training: out.report,
                silent_pixels: out.silent_pixels,
            });
            (out.image, Some(out.model))
        }
        _ => return Err(mismatch()),
    };
    provenance.output_dims = [image.rows(), image.cols()];
    Ok(JobOutput {
        image,
        provenance,
        model,
    })
}
