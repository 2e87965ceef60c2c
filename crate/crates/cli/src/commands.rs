use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use fusecraft::anfis::ModelDocument;
use fusecraft::{
    evaluate_all, load_image, parse_config, render_structured, render_table, run_job, save_image,
    AnfisHyper, EngineConfig, EvaluateOptions, FusionJob, FuzzyConfig, Image, JobOutput, Method,
    MetricsReport,
};

use crate::error::CliError;
use crate::{CompareArgs, EngineArgs, EvaluateArgs, FormatArg, FuseArgs, ReportArgs};

fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::write(path, e))
}

fn write_job(output: &Path, job: &JobOutput) -> Result<(), CliError> {
    save_image(&job.image, output)?;
    let mut sidecar = job.provenance.to_json();
    sidecar.push('\n');
    write_file(&sidecar_path(output), &sidecar)?;
    log::info!("wrote {}", output.display());
    Ok(())
}

impl EngineArgs {
    fn has_anfis_overrides(&self) -> bool {
        self.epochs.is_some()
            || self.mfs.is_some()
            || self.step_size.is_some()
            || self.target.is_some()
            || self.shape.is_some()
    }

    fn apply_fuzzy(&self, mut cfg: FuzzyConfig) -> FuzzyConfig {
        if let Some(n) = self.defuzz_resolution {
            cfg.defuzz_resolution = n;
        }
        cfg
    }

    fn apply_anfis(&self, mut h: AnfisHyper) -> AnfisHyper {
        if let Some(v) = self.epochs {
            h.epochs = v;
        }
        if let Some(v) = self.mfs {
            h.mfs = v;
        }
        if let Some(v) = self.step_size {
            h.step_size = v;
        }
        if let Some(v) = self.target {
            h.target = v.into();
        }
        if let Some(v) = self.shape {
            h.shape = v.into();
        }
        h
    }

    fn load_configs(&self) -> Result<Vec<EngineConfig>, CliError> {
        self.configs
            .iter()
            .map(|p| parse_config(p).map_err(CliError::from))
            .collect()
    }

    /// Applies command-line overrides and re-validates.
    fn finish(&self, cfg: EngineConfig) -> Result<EngineConfig, CliError> {
        let cfg = match cfg {
            EngineConfig::Fuzzy(f) => EngineConfig::Fuzzy(self.apply_fuzzy(f)),
            EngineConfig::Anfis(h) => EngineConfig::Anfis(self.apply_anfis(h)),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn default_config(method: Method) -> EngineConfig {
    match method {
        Method::Fuzzy => EngineConfig::default_fuzzy(),
        Method::NeuroFuzzy => EngineConfig::default_anfis(),
    }
}

pub fn fuse(args: &FuseArgs) -> Result<(), CliError> {
    let method: Method = args.method.into();
    let engine = &args.engine;
    match method {
        Method::Fuzzy if engine.has_anfis_overrides() => {
            return Err(CliError::Usage(
                "--epochs, --mfs, --step-size, --target and --shape need --method anfis".into(),
            ))
        }
        Method::NeuroFuzzy if engine.defuzz_resolution.is_some() => {
            return Err(CliError::Usage(
                "--defuzz-resolution needs --method fuzzy".into(),
            ))
        }
        Method::Fuzzy if args.save_model.is_some() => {
            return Err(CliError::Usage("--save-model needs --method anfis".into()))
        }
        _ => {}
    }
    if engine.configs.len() > 1 {
        return Err(CliError::Usage("fuse takes at most one --config".into()));
    }

    let a = load_image(&args.a)?;
    let b = load_image(&args.b)?;
    let cfg = match engine.load_configs()?.pop() {
        Some(cfg) => cfg,
        None => default_config(method),
    };
    let cfg = engine.finish(cfg)?;
    let job = run_job(&FusionJob {
        method,
        engine: cfg,
        a,
        b,
    })?;
    write_job(&args.output, &job)?;

    if let (Some(path), Some(model)) = (&args.save_model, &job.model) {
        let hyper = match &job.provenance.config {
            EngineConfig::Anfis(h) => Some(*h),
            EngineConfig::Fuzzy(_) => None,
        };
        let training = job.provenance.anfis.as_ref().map(|p| p.training.clone());
        let mut doc = ModelDocument::new(model.clone(), hyper, training).to_json();
        doc.push('\n');
        write_file(path, &doc)?;
    }
    Ok(())
}

fn load_reference(args: &ReportArgs) -> Result<Option<Image>, CliError> {
    args.reference
        .as_ref()
        .map(|p| load_image(p).map_err(CliError::from))
        .transpose()
}

fn options(args: &ReportArgs) -> EvaluateOptions {
    EvaluateOptions {
        psnr_formula: args.psnr_formula.into(),
        ..EvaluateOptions::default()
    }
}

fn render(format: FormatArg, rows: &[(&str, &MetricsReport)]) -> String {
    match format {
        FormatArg::Table => render_table(rows),
        FormatArg::Structured => {
            let mut s = if rows.len() == 1 {
                rows[0].1.to_structured()
            } else {
                render_structured(rows)
            };
            s.push('\n');
            s
        }
    }
}

fn print(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| CliError::Io(format!("cannot write to stdout: {e}")))
}

pub fn evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let a = load_image(&args.a)?;
    let b = load_image(&args.b)?;
    let f = load_image(&args.fused)?;
    let reference = load_reference(&args.report)?;
    let report = evaluate_all(&a, &b, &f, reference.as_ref(), options(&args.report));
    for flag in &report.flags {
        log::warn!("{flag}");
    }
    print(&render(args.report.format, &[("Fused", &report)]))
}

pub fn compare(args: &CompareArgs) -> Result<(), CliError> {
    let a = load_image(&args.a)?;
    let b = load_image(&args.b)?;
    let reference = load_reference(&args.report)?;

    let mut fuzzy_cfg = None;
    let mut anfis_cfg = None;
    for cfg in args.engine.load_configs()? {
        let slot = match cfg {
            EngineConfig::Fuzzy(_) => &mut fuzzy_cfg,
            EngineConfig::Anfis(_) => &mut anfis_cfg,
        };
        if slot.is_some() {
            return Err(CliError::Usage(format!(
                "more than one `{}` config given",
                cfg.kind()
            )));
        }
        *slot = Some(cfg);
    }
    let fuzzy_cfg = args
        .engine
        .finish(fuzzy_cfg.unwrap_or_else(|| default_config(Method::Fuzzy)))?;
    let anfis_cfg = args
        .engine
        .finish(anfis_cfg.unwrap_or_else(|| default_config(Method::NeuroFuzzy)))?;

    fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", args.out_dir.display())))?;

    let mut reports = Vec::with_capacity(2);
    for (method, cfg) in [(Method::Fuzzy, fuzzy_cfg), (Method::NeuroFuzzy, anfis_cfg)] {
        let job = run_job(&FusionJob {
            method,
            engine: cfg,
            a: a.clone(),
            b: b.clone(),
        })?;
        write_job(&args.out_dir.join(format!("{}.png", method.name())), &job)?;
        let report = evaluate_all(
            &a,
            &b,
            &job.image,
            reference.as_ref(),
            options(&args.report),
        );
        for flag in &report.flags {
            log::warn!("{}: {flag}", method.label());
        }
        reports.push((method.label(), report));
    }

    let rows: Vec<(&str, &MetricsReport)> = reports.iter().map(|(l, r)| (*l, r)).collect();
    let text = render(args.report.format, &rows);
    let report_name = match args.report.format {
        FormatArg::Table => "report.txt",
        FormatArg::Structured => "report.json",
    };
    write_file(&args.out_dir.join(report_name), &text)?;
    print(&text)
}
