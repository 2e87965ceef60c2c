use fusecraft::anfis::ModelDocument;
use fusecraft::fuzzy::FuzzyLut;
use fusecraft::{
    evaluate_all, fuse_fuzzy, fuse_with_model, parse_config, run_job, EngineConfig,
    EvaluateOptions, FusionJob, Image, Method,
};

const GAUSSIAN_CONFIG: &str = r#"
engine = "fuzzy"
defuzz_resolution = 200
rules = [
    "if (x is dark) and (y is dark) then (z is dark)",
    "if (x is bright) or (y is bright) then (z is bright) (0.5)",
    "if (x is dark) and (y is bright) then (z is grey)",
    "if (x is bright) and (y is dark) then (z is grey)",
]

[[inputs]]
name = "x"
terms = [
    { label = "dark", mf = { shape = "gaussian", mean = 0.0, sigma = 60.0 } },
    { label = "bright", mf = { shape = "gaussian", mean = 255.0, sigma = 60.0 } },
]

[[inputs]]
name = "y"
terms = [
    { label = "dark", mf = { shape = "trapezoidal", a = -1.0, b = 0.0, c = 60.0, d = 170.0 } },
    { label = "bright", mf = { shape = "trapezoidal", a = 85.0, b = 195.0, c = 255.0, d = 256.0 } },
]

[output]
name = "z"
terms = [
    { label = "dark", mf = { shape = "gbell", a = 50.0, b = 2.0, c = 0.0 } },
    { label = "grey", mf = { shape = "triangular", a = 64.0, b = 128.0, c = 192.0 } },
    { label = "bright", mf = { shape = "gbell", a = 50.0, b = 2.0, c = 255.0 } },
]
"#;

fn pattern(rows: usize, cols: usize, seed: usize) -> Image {
    Image::from_fn(rows, cols, |r, c| {
        ((r * 31 + c * 17 + seed * 89) % 256) as u8
    })
    .unwrap()
}

#[test]
fn shipped_config_files_parse_from_disk() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/configs");
    assert_eq!(
        parse_config(format!("{dir}/fuzzy.toml")).unwrap(),
        EngineConfig::default_fuzzy()
    );
    assert_eq!(
        parse_config(format!("{dir}/anfis.toml")).unwrap(),
        EngineConfig::default_anfis()
    );
}

#[test]
fn custom_config_lut_matches_direct_evaluation() {
    let fis = EngineConfig::from_toml(GAUSSIAN_CONFIG)
        .unwrap()
        .into_fuzzy()
        .unwrap()
        .build()
        .unwrap();
    let lut = FuzzyLut::build(&fis);
    assert_eq!(lut.len(), 65536);
    for x1 in 0..=255u8 {
        for x2 in 0..=255u8 {
            let direct = fis.evaluate(f64::from(x1), f64::from(x2));
            assert_eq!(lut.get(x1, x2).to_bits(), direct.to_bits(), "({x1}, {x2})");
        }
    }
}

#[test]
fn fuzzy_job_matches_direct_fusion() {
    let (a, b) = (pattern(30, 40, 1), pattern(35, 33, 2));
    let cfg = EngineConfig::default_fuzzy();
    let fis = cfg.clone().into_fuzzy().unwrap().build().unwrap();
    let out = run_job(&FusionJob {
        method: Method::Fuzzy,
        engine: cfg,
        a: a.clone(),
        b: b.clone(),
    })
    .unwrap();
    assert_eq!(out.image, fuse_fuzzy(&a, &b, &fis));
    assert_eq!(out.provenance.output_dims, [30, 33]);
    assert!(out.model.is_none());
}

#[test]
fn saved_model_reproduces_fusion() {
    let (a, b) = (pattern(20, 20, 3), pattern(20, 20, 4));
    let mut hyper = EngineConfig::default_anfis().into_anfis().unwrap();
    hyper.epochs = 5;
    let out = run_job(&FusionJob {
        method: Method::NeuroFuzzy,
        engine: EngineConfig::Anfis(hyper),
        a: a.clone(),
        b: b.clone(),
    })
    .unwrap();
    let model = out.model.unwrap();
    let doc = ModelDocument::new(model, Some(hyper), None);
    let reloaded = ModelDocument::from_json(&doc.to_json()).unwrap();
    let (image, _) = fuse_with_model(&a, &b, &reloaded.model);
    assert_eq!(image, out.image);
}

#[test]
fn metrics_on_fused_outputs_stay_in_range() {
    let (a, b) = (pattern(48, 48, 5), pattern(48, 48, 6));
    for method in [Method::Fuzzy, Method::NeuroFuzzy] {
        let engine = match method {
            Method::Fuzzy => EngineConfig::default_fuzzy(),
            Method::NeuroFuzzy => EngineConfig::default_anfis(),
        };
        let out = run_job(&FusionJob {
            method,
            engine,
            a: a.clone(),
            b: b.clone(),
        })
        .unwrap();
        let r = evaluate_all(&a, &b, &out.image, None, EvaluateOptions::default());
        assert!(r.flags.is_empty(), "{:?}", r.flags);
        assert!((-1.0..=1.0).contains(&r.iqi));
        assert!((-1.0..=1.0).contains(&r.cc));
        assert!((0.0..=0.5).contains(&r.fs));
        assert!((0.0..=8.0).contains(&r.entropy));
        assert_eq!(r.mim, r.i_af);
        assert!((r.ff - (r.i_af + r.i_bf)).abs() < 1e-12);
    }
}
