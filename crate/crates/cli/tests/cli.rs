use std::path::Path;
use std::process::{Command, Output};

use hwnas_core::analysis::{ecdf_from_csv, ecdf_to_csv, PowerLawFit, RfeRanking};
use hwnas_core::bench::{hv_from_csv, surfaces_from_csv, Dataset, SurrogateBundle};
use hwnas_core::metrics::CorrelationMatrix;
use hwnas_core::moo::RunResult;
use hwnas_core::pareto::surfaces_to_csv;
use hwnas_core::surrogate::{Persist, TABLE_COLUMNS};
use hwnas_core::ArchConfig;

fn hwnas(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hwnas"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = hwnas(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn space_count_prints_exact_cardinality() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ok(dir.path(), &["space", "count", "--space", "gpt-s"]).trim(), "1903784282946");
    assert_eq!(ok(dir.path(), &["--space", "toy", "space", "count"]).trim(), "80");
}

#[test]
fn space_sample_emits_valid_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(dir.path(), &["space", "sample", "--space", "toy", "--n", "80", "--unique", "--seed", "4"]);
    let archs: Vec<ArchConfig> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let mut unique = archs.clone();
    unique.sort();
    unique.dedup();
    assert_eq!(unique.len(), 80);
    let again = ok(dir.path(), &["space", "sample", "--space", "toy", "--n", "80", "--unique", "--seed", "4"]);
    assert_eq!(text, again);
}

#[test]
fn dataset_generation_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        vec!["dataset", "generate", "--space", "gpt-s", "--n", "200", "--seed", "1", "--k-lat", "3", "--k-energy", "3", "--out", out]
    };
    ok(dir.path(), &args("a.jsonl"));
    ok(dir.path(), &args("b.jsonl"));
    let a = read(dir.path(), "a.jsonl");
    assert_eq!(a, read(dir.path(), "b.jsonl"));
    let d = Dataset::from_jsonl(&a).unwrap();
    assert_eq!(d.records.len(), 200);
    assert_eq!(d.header.devices.len(), 13);
    assert_eq!(d.to_jsonl().unwrap(), a);
}

#[test]
fn surrogate_pipeline_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(p, &["dataset", "generate", "--n", "150", "--k-lat", "3", "--k-energy", "4", "--devices", "rtx2080", "--out", "d.jsonl"]);
    ok(p, &["surrogate", "fit", "--data", "d.jsonl", "--epochs", "20", "--trees", "8", "--out", "m.json"]);
    let bundle_text = read(p, "m.json");
    let bundle = SurrogateBundle::from_json(&bundle_text).unwrap();
    assert_eq!(bundle.to_json().unwrap(), bundle_text);
    assert_eq!(bundle.hardware.len(), 2);

    let table = ok(p, &["surrogate", "eval", "--data", "d.jsonl", "--model", "m.json"]);
    let header = table.lines().next().unwrap();
    for col in TABLE_COLUMNS {
        assert!(header.contains(col), "missing {col}");
    }
    assert_eq!(table.lines().count(), 4);

    ok(p, &[
        "run", "--method", "rsbo", "--predictor", "surrogate", "--model", "m.json", "--objectives",
        "perplexity,latency/rtx2080", "--budget", "15", "--seeds", "0,1", "--out", "sr",
    ]);
    assert!(p.join("sr/run_rsbo_seed1.json").exists());
}

#[test]
fn run_and_eaf_outputs_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let stdout = ok(p, &[
        "run", "--method", "nsga2", "--objectives", "perplexity,latency/rtx2080", "--budget", "40", "--seeds",
        "0,1,2,3", "--out", "runs",
    ]);
    assert!(stdout.contains("median final HV"));
    let mut files = Vec::new();
    for seed in 0..4 {
        let name = format!("runs/run_nsga2_seed{seed}.json");
        let text = read(p, &name);
        let r = RunResult::from_json(&text).unwrap();
        assert_eq!(r.to_json().unwrap(), text);
        assert_eq!(r.history.len(), 40);
        files.push(name);
    }
    let hv = hv_from_csv(&read(p, "runs/hv.csv")).unwrap();
    assert_eq!(hv.len(), 160);

    let eaf = read(p, "runs/eaf.csv");
    let surfaces = surfaces_from_csv(&eaf).unwrap();
    assert_eq!(surfaces.len(), 3);
    assert_eq!(surfaces_to_csv(&surfaces), eaf);

    let mut args = vec!["eaf"];
    args.extend(files.iter().map(String::as_str));
    assert_eq!(ok(p, &args), eaf);
}

#[test]
fn analyses_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(p, &["--space", "toy", "dataset", "generate", "--n", "60", "--k-lat", "3", "--k-energy", "3", "--devices", "a100", "--out", "t.jsonl"]);

    let table = ok(p, &["analyze", "powerlaw", "--data", "t.jsonl", "--out", "pl.json"]);
    assert!(table.contains("P>|t|"));
    let pl = read(p, "pl.json");
    let fit: PowerLawFit = serde_json::from_str(&pl).unwrap();
    assert_eq!(serde_json::to_string_pretty(&fit).unwrap(), pl);

    let corr = ok(p, &["analyze", "corr", "--data", "t.jsonl", "--method", "spearman"]);
    assert_eq!(CorrelationMatrix::from_csv(&corr).unwrap().to_csv(), corr);

    let ecdf = ok(p, &["analyze", "ecdf", "--data", "t.jsonl", "--stratum", "layers=max", "--stratum", "embed=min&bias=true"]);
    let curves = ecdf_from_csv(&ecdf).unwrap();
    assert_eq!(curves.len(), 2);
    assert_eq!(ecdf_to_csv(&curves), ecdf);

    std::fs::write(p.join("c.toml"), "rfe_trees = 10\nrfe_drop_per_round = 2\n").unwrap();
    let rfe = ok(p, &["--config", "c.toml", "analyze", "rfe", "--data", "t.jsonl"]);
    let ranking = RfeRanking::from_csv(&rfe).unwrap();
    assert_eq!(ranking.to_csv(), rfe);
}

#[test]
fn errors_exit_nonzero_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let bad_flag = hwnas(p, &["space", "count", "--bogus"]);
    assert!(!bad_flag.status.success());
    assert!(String::from_utf8_lossy(&bad_flag.stderr).contains("Usage"));

    let unknown = hwnas(p, &["run", "--method", "moasha", "--objectives", "perplexity,params", "--out", "x"]);
    assert!(!unknown.status.success());
    let msg = String::from_utf8_lossy(&unknown.stderr);
    assert!(msg.contains("moasha") && msg.contains("nsga2"), "{msg}");

    let preset = hwnas(p, &["space", "count", "--space", "gpt-xxl"]);
    assert!(!preset.status.success());
    assert!(String::from_utf8_lossy(&preset.stderr).contains("gpt-xxl"));

    let no_model = hwnas(p, &["run", "--method", "rs", "--predictor", "surrogate", "--out", "x"]);
    assert!(!no_model.status.success());
}
