//! Pixel-level fusion of two grayscale images with a Mamdani fuzzy engine or
//! a trained ANFIS (neuro-fuzzy) engine, and the quality indices used to
//! compare fused results.
//!
//! ```
//! use fusecraft::{fuse_fuzzy, Image, MamdaniFis, fuzzy::default_description};
//!
//! let a = Image::from_fn(4, 4, |r, c| (r * 60 + c) as u8).unwrap();
//! let b = Image::filled(4, 4, 128).unwrap();
//! let fis = MamdaniFis::new(&default_description()).unwrap();
//! let fused = fuse_fuzzy(&a, &b, &fis);
//! assert_eq!(fused.dims(), (4, 4));
//! ```

pub mod anfis;
pub mod config;
pub mod fusion;
pub mod fuzzy;
pub mod image;
pub mod metrics;

pub use anfis::{
    grid_partition, train_hybrid, AnfisError, AnfisHyper, ModelDocument, PremiseShape, SugenoFis,
    TrainingReport, TrainingSet, TrainingTarget,
};
pub use config::{parse_config, ConfigError, EngineConfig, FuzzyConfig};
pub use fusion::{
    fuse_fuzzy, fuse_fuzzy_direct, fuse_neuro_fuzzy, fuse_with_model, run_job, FusionError,
    FusionJob, JobOutput, Method, Provenance,
};
pub use fuzzy::{FisDescription, FuzzyError, MamdaniFis, MembershipFunction};
pub use image::{
    crop_to_common, from_column, load_image, save_image, to_column, Image, ImageError, PixelColumn,
};
pub use metrics::{
    evaluate_all, render_structured, render_table, EvaluateOptions, MetricError, MetricsReport,
    PsnrFormula,
};
