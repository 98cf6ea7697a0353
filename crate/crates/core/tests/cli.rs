use std::fs;
use std::path::Path;
use std::process::Command;

use seroclass::cli::manifest::{read_manifest, MANIFEST_FILE};
use seroclass::density::io::{load_model, save_model};
use seroclass::density::{DensityModel, ParametricModel};
use seroclass::fixtures;
use tempfile::TempDir;

struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_seroclass")).args(args).output().unwrap();
    Outcome {
        code: out.status.code().unwrap(),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn ok(args: &[&str]) -> String {
    let o = run(args);
    assert_eq!(o.code, 0, "{args:?}\n{}", o.stderr);
    o.stdout
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_owned()
}

/// Emits `count` synthetic log-space samples at `prevalence` into `dir/name`.
fn emit(dir: &Path, name: &str, count: usize, prevalence: f64, seed: u64) -> String {
    let out = p(dir, name);
    ok(&[
        "simulate",
        "--out-dir",
        &out,
        "--emit-csv",
        &count.to_string(),
        "--prevalence",
        &prevalence.to_string(),
        "--seed",
        &seed.to_string(),
    ]);
    p(Path::new(&out), "samples.csv")
}

/// Writes the fixture densities as model files and returns their paths.
fn fixture_models(dir: &Path) -> (String, String) {
    let (pos, neg) = fixtures::densities(&Default::default()).unwrap();
    let (pp, np) = (p(dir, "pos.json"), p(dir, "neg.json"));
    save_model(&pos, Path::new(&pp)).unwrap();
    save_model(&neg, Path::new(&np)).unwrap();
    (pp, np)
}

fn label_counts(labels_csv: &str) -> (usize, usize, usize) {
    let text = fs::read_to_string(labels_csv).unwrap();
    let mut c = (0, 0, 0);
    for line in text.lines().skip(1) {
        match line.split(',').nth(1).unwrap() {
            "positive" => c.0 += 1,
            "negative" => c.1 += 1,
            "holdout" => c.2 += 1,
            other => panic!("label {other}"),
        }
    }
    c
}

fn params(path: &str) -> Vec<f64> {
    match load_model(Path::new(path)).unwrap().model() {
        DensityModel::Parametric(ParametricModel::Negative(q)) => vec![q.theta, q.k, q.alpha, q.mu, q.beta],
        DensityModel::Parametric(ParametricModel::Positive(q)) => vec![q.alpha, q.beta_shape, q.theta, q.mu],
        DensityModel::Gridded(_) => panic!("expected a parametric model"),
    }
}

#[test]
fn emitted_samples_round_trip_through_fit() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    for (family, prevalence, truth) in
        [("negative", 0.0, vec![0.12, 12.0, 0.15, 0.1, 2.0]), ("positive", 1.0, vec![10.0, 3.0, 0.4, -0.15])]
    {
        let csv = emit(d, &format!("emit-{family}"), 50_000, prevalence, 11);
        let out = p(d, &format!("fit-{family}"));
        ok(&["fit", "--out-dir", &out, "--input", &csv, "--log-space", "--family", family]);
        let got = params(&p(Path::new(&out), "model.json"));
        for (g, t) in got.iter().zip(&truth) {
            assert!(((g - t) / t).abs() < 0.05, "{family}: {got:?} vs {truth:?}");
        }
        let report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(p(Path::new(&out), "fit_report.json")).unwrap()).unwrap();
        assert!(report["log_likelihood"].as_f64().unwrap().is_finite());
        assert!(report["iterations"].as_u64().unwrap() > 0);
        assert!(report["truncated_fraction"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn too_few_points_is_a_data_error() {
    let tmp = TempDir::new().unwrap();
    let csv = p(tmp.path(), "five.csv");
    fs::write(
        &csv,
        "id,rbd,s1,label\na,1,1,negative\nb,2,2,negative\nc,1,2,negative\nd,2,1,negative\ne,3,3,negative\n",
    )
    .unwrap();
    let o = run(&["fit", "--out-dir", &p(tmp.path(), "out"), "--input", &csv, "--log-space", "--family", "negative"]);
    assert_eq!(o.code, 3, "{}", o.stderr);
}

#[test]
fn unknown_family_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let csv = emit(tmp.path(), "emit", 50, 0.0, 1);
    let o = run(&["fit", "--out-dir", &p(tmp.path(), "out"), "--input", &csv, "--log-space", "--family", "lognormal"]);
    assert_eq!(o.code, 2);
    assert!(o.stderr.contains("lognormal"));
    assert_eq!(run(&["fit", "--bogus-flag"]).code, 2);
}

#[test]
fn classify_modes() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let (pos, neg) = fixture_models(d);
    let csv = emit(d, "emit", 4000, 0.3, 5);
    let classify = |name: &str, extra: &[&str]| {
        let out = p(d, name);
        let mut args = vec![
            "classify",
            "--out-dir",
            &out,
            "--input",
            &csv,
            "--log-space",
            "--pos-model",
            &pos,
            "--neg-model",
            &neg,
        ];
        args.extend_from_slice(extra);
        let stdout = ok(&args);
        (stdout, p(Path::new(&out), "labels.csv"))
    };

    let (_, zero) = classify("zero", &["--mode", "binary", "--prevalence", "0"]);
    assert_eq!(label_counts(&zero), (0, 4000, 0));

    let (stdout, ternary) = classify("ternary", &["--mode", "ternary", "--p-lo", "0.01", "--p-hi", "0.9"]);
    let (tp, tn, th) = label_counts(&ternary);
    assert!(th > 0, "holdout count {th}");
    assert_eq!(tp + tn + th, 4000);
    assert!(stdout.contains(&format!("holdout: {th}")));

    let (_, binary) = classify("binary", &["--mode", "binary", "--prevalence", "0.3"]);
    let (_, collapsed) = classify("collapsed", &["--mode", "ternary", "--p-lo", "0.3", "--p-hi", "0.3"]);
    let b = fs::read_to_string(binary).unwrap();
    let c = fs::read_to_string(collapsed).unwrap();
    for (lb, lc) in b.lines().zip(c.lines()).skip(1) {
        let (lb, lc): (Vec<_>, Vec<_>) = (lb.split(',').collect(), lc.split(',').collect());
        assert_eq!(lb[0], lc[0]);
        // a zero score is a tie, which the two rules may resolve differently
        if lb[2].parse::<f64>().unwrap() != 0.0 {
            assert_eq!(lb[1], lc[1], "row {}", lb[0]);
        }
    }

    let bad = run(&[
        "classify",
        "--out-dir",
        &p(d, "bad"),
        "--input",
        &csv,
        "--log-space",
        "--pos-model",
        &pos,
        "--neg-model",
        &neg,
        "--p-lo",
        "0.9",
        "--p-hi",
        "0.1",
    ]);
    assert_eq!(bad.code, 2);
}

#[test]
fn estimate_recovers_prevalence() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let (pos, neg) = fixture_models(d);
    let s = 10_000;
    let csv = emit(d, "emit", s, 0.2, 21);
    let out = p(d, "est");
    ok(&["estimate", "--out-dir", &out, "--input", &csv, "--log-space", "--pos-model", &pos, "--neg-model", &neg]);
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(p(Path::new(&out), "estimate.json")).unwrap()).unwrap();
    let p_hat = doc["p_hat"].as_f64().unwrap();
    assert!((p_hat - 0.2).abs() <= 4.0 / (s as f64).sqrt(), "p_hat {p_hat}");
    assert!(!doc["estimates"].as_array().unwrap().is_empty());

    let single = p(d, "single");
    ok(&[
        "estimate",
        "--out-dir",
        &single,
        "--input",
        &csv,
        "--log-space",
        "--pos-model",
        &pos,
        "--neg-model",
        &neg,
        "--max-iter",
        "1",
    ]);
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(p(Path::new(&single), "estimate.json")).unwrap()).unwrap();
    assert_eq!(doc["estimates"].as_array().unwrap().len(), 1);

    let negatives = emit(d, "neg-only", 3000, 0.0, 4);
    let out = p(d, "est0");
    ok(&[
        "estimate",
        "--out-dir",
        &out,
        "--input",
        &negatives,
        "--log-space",
        "--pos-model",
        &pos,
        "--neg-model",
        &neg,
    ]);
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(p(Path::new(&out), "estimate.json")).unwrap()).unwrap();
    assert!(doc["p_hat"].as_f64().unwrap() < 0.01);
}

#[test]
fn estimate_with_identical_models_fails_numerically_with_trace() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let (_, neg) = fixture_models(d);
    let csv = emit(d, "emit", 500, 0.2, 2);
    let out = p(d, "est");
    let o =
        run(&["estimate", "--out-dir", &out, "--input", &csv, "--log-space", "--pos-model", &neg, "--neg-model", &neg]);
    assert_eq!(o.code, 4, "{}", o.stderr);
    assert!(Path::new(&p(Path::new(&out), "estimate.json")).exists());
}

#[test]
fn sweep_minimum_sits_at_true_prevalence() {
    let tmp = TempDir::new().unwrap();
    let out = p(tmp.path(), "sweep");
    ok(&["sweep", "--out-dir", &out, "--true-p", "0.1"]);
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(p(Path::new(&out), "sweep.json")).unwrap()).unwrap();
    assert!((doc["argmin_q"].as_f64().unwrap() - 0.1).abs() < 1e-12);
    let rows = fs::read_to_string(p(Path::new(&out), "sweep.csv")).unwrap();
    assert_eq!(rows.lines().count(), 91);
}

#[test]
fn contour_emits_one_family_per_prevalence() {
    let tmp = TempDir::new().unwrap();
    let out = p(tmp.path(), "contour");
    ok(&["contour", "--out-dir", &out, "--prevalences", "0.5,0.1446,0.1,0.01,0.001"]);
    let text = fs::read_to_string(p(Path::new(&out), "contours.csv")).unwrap();
    let mut families: Vec<&str> = text.lines().skip(1).map(|l| l.split('/').next().unwrap()).collect();
    families.sort();
    families.dedup();
    assert_eq!(families, ["p=0.001", "p=0.01", "p=0.1", "p=0.1446", "p=0.5"]);
}

#[test]
fn simulate_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let args = |out: &str| -> Vec<String> {
        [
            "simulate",
            "--out-dir",
            out,
            "--trials",
            "1",
            "--seed",
            "7",
            "--prevalences",
            "0.1,0.5",
            "--sizes",
            "100,1000",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect()
    };
    let (a, b) = (p(tmp.path(), "a"), p(tmp.path(), "b"));
    for out in [&a, &b] {
        let v = args(out);
        ok(&v.iter().map(String::as_str).collect::<Vec<_>>());
    }
    let ma = read_manifest(&Path::new(&a).join(MANIFEST_FILE)).unwrap();
    let mb = read_manifest(&Path::new(&b).join(MANIFEST_FILE)).unwrap();
    let digests =
        |m: &seroclass::cli::manifest::RunManifest| m.outputs.iter().map(|f| f.sha256.clone()).collect::<Vec<_>>();
    assert_eq!(digests(&ma), digests(&mb));
    assert_eq!(ma.seeds, mb.seeds);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = TempDir::new().unwrap();
    let cfg = p(tmp.path(), "sweep.json");
    fs::write(&cfg, r#"{"true_p": 0.5, "q_grid": [0.1, 0.2, 0.5]}"#).unwrap();
    let out = p(tmp.path(), "a");
    ok(&["sweep", "--config", &cfg, "--out-dir", &out]);
    let m = read_manifest(&Path::new(&out).join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.config["true_p"], 0.5);
    let out = p(tmp.path(), "b");
    ok(&["sweep", "--config", &cfg, "--out-dir", &out, "--true-p", "0.2"]);
    let m = read_manifest(&Path::new(&out).join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.config["true_p"], 0.2);
    assert_eq!(m.config["q_grid"].as_array().unwrap().len(), 3);

    fs::write(&cfg, r#"{"true_p": 0.5, "typo": 1}"#).unwrap();
    assert_eq!(run(&["sweep", "--config", &cfg, "--out-dir", &p(tmp.path(), "c")]).code, 2);
}

#[test]
fn replay_detects_changed_inputs() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let (pos, neg) = fixture_models(d);
    let csv = emit(d, "emit", 300, 0.3, 9);
    let out = p(d, "cl");
    ok(&[
        "classify",
        "--out-dir",
        &out,
        "--input",
        &csv,
        "--log-space",
        "--pos-model",
        &pos,
        "--neg-model",
        &neg,
        "--prevalence",
        "0.3",
    ]);
    let manifest = p(Path::new(&out), MANIFEST_FILE);
    ok(&["replay", "--manifest", &manifest, "--out-dir", &p(d, "again")]);
    fs::write(&csv, fs::read_to_string(&csv).unwrap().replacen("s0,", "s0x,", 1)).unwrap();
    assert_eq!(run(&["replay", "--manifest", &manifest, "--out-dir", &p(d, "changed")]).code, 3);
}
