//! End-to-end behaviour of the `t2av` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use t2av_core::embedset::{read_manifest, write_embeddings};
use t2av_core::stats::{fit, GaussianStats};
use t2av_core::{EmbeddingSet, MetricReport};

fn t2av(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_t2av")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, set: &EmbeddingSet) -> String {
    let path = dir.join(name);
    write_embeddings(set, &path).unwrap();
    path.to_str().unwrap().to_string()
}

fn sample(n: usize, d: usize, shift: f32) -> EmbeddingSet {
    let data = (0..n * d).map(|i| ((i * 7919 % 1000) as f32 / 500.0 - 1.0) + shift * (i % d) as f32).collect();
    EmbeddingSet::new(d, 0, data).unwrap()
}

fn synth(dir: &Path) -> PathBuf {
    let out = dir.join("pop");
    let o = t2av(&["synth", "--seed", "1", "--clips", "40", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn frechet_of_a_file_with_itself_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let x = write(dir.path(), "x.emb", &sample(50, 3, 0.0));
    let out = t2av(&["frechet", "--a", &x, "--b", &x]);
    assert_eq!(out.status.code(), Some(0));
    let report: MetricReport = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(report.value, 0.0);

    let table = stdout(&t2av(&["frechet", "--a", &x, "--b", &x, "--format", "table"]));
    assert_eq!(table.lines().count(), 2);
    assert!(table.lines().nth(1).unwrap().contains("0.0000"));
}

#[test]
fn missing_file_exits_with_data_error_naming_path() {
    let dir = tempfile::tempdir().unwrap();
    let x = write(dir.path(), "x.emb", &sample(10, 2, 0.0));
    let missing = dir.path().join("missing.emb");
    let out = t2av(&["frechet", "--a", missing.to_str().unwrap(), "--b", &x]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.emb"));
    assert!(out.stdout.is_empty());
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(t2av(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(t2av(&["frechet", "--b", "x.emb"]).status.code(), Some(1));
    assert_eq!(t2av(&["bench", "visual", "--grid", "500"]).status.code(), Some(1));
    assert_eq!(t2av(&["frechet", "--format", "xml"]).status.code(), Some(1));
    assert_eq!(t2av(&["--help"]).status.code(), Some(0));
}

#[test]
fn malformed_file_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.emb");
    fs::write(&bad, b"NOTEMB00 and then some").unwrap();
    let out = t2av(&["stats", "--a", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stats_output_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let set = sample(30, 4, 0.5);
    let x = write(dir.path(), "x.emb", &set);
    let out = t2av(&["stats", "--a", &x]);
    assert!(out.status.success());
    let parsed = GaussianStats::<f64>::from_json(&stdout(&out)).unwrap();
    let direct = fit::<f64>(&set).unwrap();
    assert_eq!(parsed.count(), 30);
    for (a, b) in parsed.mean().iter().zip(direct.mean()) {
        assert!((a - b).abs() <= 1e-15 * b.abs().max(1.0));
    }
    let single = write(dir.path(), "one.emb", &sample(1, 4, 0.0));
    let one = stdout(&t2av(&["stats", "--a", &single]));
    assert!(one.contains("\"cov\":null"));
}

#[test]
fn metrics_on_a_synthetic_population() {
    let dir = tempfile::tempdir().unwrap();
    let pop = synth(dir.path());
    let p = |n: &str| pop.join(n).to_str().unwrap().to_string();
    let manifest = read_manifest(pop.join("audio.pairs.json")).unwrap();
    assert_eq!(manifest.pairs.len(), 80);

    let favd = t2av(&["metric", "favd", "--audio", &p("audio.emb"), "--video", &p("video.emb")]);
    assert!(favd.status.success());
    let report: MetricReport = serde_json::from_str(stdout(&favd).trim()).unwrap();
    assert!(report.value > 0.0);
    assert_eq!(report.adapter.as_deref(), Some("pad_truncate:16"));

    let favtd = t2av(&[
        "metric", "favtd", "--audio", &p("video.emb"), "--video", &p("video.emb"), "--text", &p("video.emb"),
    ]);
    let report: MetricReport = serde_json::from_str(stdout(&favtd).trim()).unwrap();
    assert_eq!(report.value, 0.0);
}

#[test]
fn adapters_reconcile_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let wide = write(dir.path(), "wide.emb", &sample(40, 6, 0.0));
    let narrow = write(dir.path(), "narrow.emb", &sample(40, 4, 0.0));
    assert_eq!(t2av(&["frechet", "--a", &wide, "--b", &narrow]).status.code(), Some(2));
    let padded = t2av(&["frechet", "--a", &wide, "--b", &narrow, "--adapter", "pad"]);
    assert!(padded.status.success());
    assert!(stdout(&padded).contains("pad_truncate:4"));

    let rows: Vec<Vec<f32>> = (0..6).map(|r| (0..4).map(|c| if r == c { 1.0 } else { 0.0 }).collect()).collect();
    let m = write(dir.path(), "m.emb", &EmbeddingSet::from_rows(&rows).unwrap());
    let adapter = format!("matrix:{m}");
    let mapped = t2av(&["frechet", "--a", &wide, "--b", &narrow, "--adapter", &adapter]);
    assert!(mapped.status.success());
    assert!(stdout(&mapped).contains("matrix:6x4"));
    assert_eq!(stdout(&mapped), stdout(&padded).replace("pad_truncate:4", "matrix:6x4"));
    assert_eq!(t2av(&["frechet", "--a", &wide, "--b", &narrow, "--adapter", "lanczos"]).status.code(), Some(1));
}

#[test]
fn classifier_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let probs = EmbeddingSet::from_rows(&[vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
    let p = write(dir.path(), "p.emb", &probs);
    let is: MetricReport = serde_json::from_str(stdout(&t2av(&["is", "--a", &p])).trim()).unwrap();
    assert!((is.value - 1.2408).abs() < 1e-4);
    let kl: MetricReport = serde_json::from_str(stdout(&t2av(&["kl", "--a", &p, "--b", &p])).trim()).unwrap();
    assert_eq!(kl.value, 0.0);
    let other = write(dir.path(), "q.emb", &EmbeddingSet::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap());
    let forward: MetricReport =
        serde_json::from_str(stdout(&t2av(&["kl", "--a", &p, "--b", &other])).trim()).unwrap();
    let reverse: MetricReport = serde_json::from_str(
        stdout(&t2av(&["kl", "--a", &p, "--b", &other, "--direction", "gen-ref"])).trim(),
    )
    .unwrap();
    assert!((forward.value - 2f64.ln() / 2.0).abs() < 1e-9);
    assert!(reverse.value > forward.value);
}

#[test]
fn bench_formats_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.csv");
    let o = t2av(&[
        "bench", "visual", "--clips", "300", "--grid", "100:0,100:100", "--seeds", "2", "--format", "csv", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let csv = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "true_count,false_count,metric,value,seed");
    assert_eq!(lines.len(), 1 + 2 * 3 * 2);
    assert!(lines[1].starts_with("100,0,FAVD,") && lines[1].ends_with(",0"));
    assert!(lines[2].starts_with("100,0,FATD,") && lines[2].ends_with(",0"));
    assert!(lines[4].starts_with("100,0,FAVD,") && lines[4].ends_with(",1"));
    assert!(lines[7].starts_with("100,100,FAVD,"));

    let too_big = t2av(&["bench", "visual", "--clips", "100", "--grid", "100:100"]);
    assert_eq!(too_big.status.code(), Some(2));
}

#[test]
fn config_file_supplies_defaults_and_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"grid": "50:0,50:50", "format": "csv", "seed": 3, "population": {"n_clips": 120}}"#,
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    let from_file = stdout(&t2av(&["bench", "visual", "--config", c]));
    assert!(from_file.starts_with("true_count,false_count,metric,value,seed\n50,0,FAVD,"));
    assert!(from_file.lines().nth(1).unwrap().ends_with(",3"));
    let overridden = stdout(&t2av(&["bench", "visual", "--config", c, "--seed", "4"]));
    assert!(overridden.lines().nth(1).unwrap().ends_with(",4"));

    fs::write(&cfg, r#"{"gird": "50:0"}"#).unwrap();
    assert_eq!(t2av(&["bench", "visual", "--config", c]).status.code(), Some(1));
    fs::write(&cfg, r#"{"population": {"n_clip": 5}}"#).unwrap();
    assert_eq!(t2av(&["bench", "visual", "--config", c]).status.code(), Some(1));
}

#[test]
fn mechanism_commands() {
    let vclap: serde_json::Value = serde_json::from_str(&stdout(&t2av(&["mech", "vclap", "--seed", "5"]))).unwrap();
    assert!(vclap["max_rel_err"].as_f64().unwrap() < 1e-4);
    assert_eq!(vclap["seed"], 5);
    assert!(vclap["loss"].as_f64().unwrap() > 0.0);

    let ddpm: serde_json::Value = serde_json::from_str(&stdout(&t2av(&["mech", "ddpm"]))).unwrap();
    assert_eq!(ddpm["loss"], 0.0);
    let zero: serde_json::Value =
        serde_json::from_str(&stdout(&t2av(&["mech", "ddpm", "--predictor", "zero", "--timestep", "0"]))).unwrap();
    assert!((zero["loss"].as_f64().unwrap() - 1.0).abs() < 0.05);

    let dir = tempfile::tempdir().unwrap();
    let seq = write(dir.path(), "seq.emb", &EmbeddingSet::from_rows(&[vec![1.0, 2.0, 3.0, 4.0]]).unwrap());
    let attn: serde_json::Value = serde_json::from_str(&stdout(&t2av(&[
        "mech", "attn", "--a", &seq, "--heads", "2", "--depth", "3", "--no-residual",
    ])))
    .unwrap();
    assert_eq!(attn["values"], serde_json::json!([[1.0, 2.0, 3.0, 4.0]]));
    let bad_heads = t2av(&["mech", "attn", "--a", &seq, "--heads", "3"]);
    assert_eq!(bad_heads.status.code(), Some(2));
}

#[test]
fn thread_count_does_not_change_output() {
    let args = ["bench", "temporal", "--clips", "200", "--grid", "80:0,0:80", "--seeds", "4", "--format", "csv"];
    let one = t2av(&[&args[..], &["--threads", "1"]].concat());
    let four = t2av(&[&args[..], &["--threads", "4"]].concat());
    assert!(one.status.success());
    assert_eq!(one.stdout, four.stdout);
}
