#![allow(dead_code)]

use std::path::PathBuf;

pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn silprop(args: &[&str]) -> Output {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("silprop").chain(args.iter().copied());
    let code = silprop_cli::run(argv, &mut out, &mut err);
    Output {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

pub fn model(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

pub const MODELS: &[&str] = &[
    "example_compose_product.json",
    "example_compose_sum.json",
    "example_h.json",
    "example_hbs.json",
    "example_hbs_literal.json",
    "example_sum_of_products.json",
    "example_xy.json",
];

/// Golden cases: a name and the arguments, with `@file` standing for a bundled model.
pub fn golden_cases() -> Vec<(String, Vec<String>)> {
    let mut cases = Vec::new();
    let mut add = |name: String, args: &[&str]| {
        let args = args
            .iter()
            .map(|a| match a.strip_prefix('@') {
                Some(file) => model(file),
                None => a.to_string(),
            })
            .collect();
        cases.push((name, args));
    };
    for m in MODELS {
        let stem = m.trim_start_matches("example_").trim_end_matches(".json");
        add(format!("propagate_{stem}"), &["propagate", &format!("@{m}")]);
        add(format!("simulate_{stem}"), &["simulate", &format!("@{m}"), "--samples", "20000", "--seed", "42", "--kde"]);
    }
    for m in ["xy", "h", "hbs", "hbs_literal", "compose_product"] {
        add(format!("propagate_lognormal_{m}"), &["propagate", &format!("@example_{m}.json"), "--mode", "lognormal"]);
    }
    add("classify_h".into(), &["classify", "@example_h.json", "--band-exponent", "8", "--q", "3"]);
    add("classify_h_exact".into(), &["classify", "@example_h.json", "--band-exponent", "8", "--q", "3", "--exact"]);
    add("classify_xy_confidence".into(), &["classify", "@example_xy.json", "--band-exponent", "3", "--confidence", "0.95"]);
    add("classify_xy_exact".into(), &["classify", "@example_xy.json", "--band-exponent", "3", "--confidence", "0.95", "--exact"]);
    add("classify_sum_of_products".into(), &["classify", "@example_sum_of_products.json"]);
    add("compose_product".into(), &["compose", "@example_compose_product.json", "--component-band-exponent", "2"]);
    add("compose_product_exact".into(), &["compose", "@example_compose_product.json", "--exact", "--component-band-exponent", "2"]);
    add("compose_sum".into(), &["compose", "@example_compose_sum.json", "--band-exponent", "2", "--confidence", "0.9973", "--component-band-exponent", "2"]);
    add("budget".into(), &["budget", "--target-sd", "0.15", "--mu-x", "0.55", "--mu-y", "0.55"]);
    add("calibrate".into(), &["calibrate", "--input-factor", "3.1622776601683795", "--output-factor", "10"]);
    cases
}

/// Runs `report` into a fresh directory; returns stdout and the three files.
pub fn report_bundle(model_file: &str, seed: u64, samples: usize) -> (Output, [String; 3]) {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_string_lossy().into_owned();
    let o = silprop(&[
        "report",
        &model(model_file),
        "--out-dir",
        &out_dir,
        "--seed",
        &seed.to_string(),
        "--samples",
        &samples.to_string(),
    ]);
    let read = |f: &str| std::fs::read_to_string(dir.path().join(f)).unwrap_or_default();
    let files = [read("report.json"), read("curves.csv"), read("samples.csv")];
    (o, files)
}
