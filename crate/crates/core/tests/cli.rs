use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use harmtrace::synth::{generate, SynthConfig};

fn harmtrace(args: &[&str], extra: &[&Path]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_harmtrace"))
        .arg("--quiet")
        .args(args)
        .args(extra)
        .env_remove("HARMTRACE_OUTPUT")
        .env_remove("HARMTRACE_MAX_DISTANCE")
        .output()
        .expect("binary runs")
}

fn fixture(dir: &Path, n_papers: usize) -> PathBuf {
    generate(&SynthConfig {
        seed: 5,
        n_papers,
        ..SynthConfig::default()
    })
    .unwrap()
    .write_to(&dir.join("data"))
    .unwrap()
}

fn stage(name: &str, manifest: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_harmtrace"))
        .args(["--quiet", name, "--manifest"])
        .arg(manifest)
        .arg("--output")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stderr_json(output: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&output.stderr);
    let line = text.lines().last().expect("stderr has a line");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("{e}: {text}"))
}

const CONTENT_FILES: &[&str] = &[
    "ingest_report.json",
    "graph_report.json",
    "frontiers.csv",
    "harm.csv",
    "field.csv",
    "field.json",
    "distance.csv",
    "distance.json",
    "distance_dedup.csv",
    "distance_dedup.json",
    "if.csv",
    "if.json",
    "prepost.csv",
    "prepost.json",
];

#[test]
fn all_emits_every_family_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = fixture(dir.path(), 1000);
    let out = dir.path().join("out");
    let result = stage("all", &manifest, &out);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    for name in CONTENT_FILES.iter().chain(&["run_manifest.json", "graph.bin"]) {
        assert!(out.join(name).is_file(), "{name} missing");
    }
    let run: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("run_manifest.json")).unwrap()).unwrap();
    assert_eq!(run["stage"], "all");
    assert_eq!(run["max_distance"], 6);
    assert_eq!(run["inputs"].as_object().unwrap().len(), 4);
    for entry in run["inputs"].as_object().unwrap().values() {
        assert_eq!(entry["sha256"].as_str().unwrap().len(), 64);
    }
    assert!(run["drop_counters"]["graph"].is_object());
}

#[test]
fn staged_run_matches_all() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = fixture(dir.path(), 600);
    let staged = dir.path().join("staged");
    let whole = dir.path().join("whole");
    for name in ["ingest", "build", "frontiers", "harm", "stats"] {
        let result = stage(name, &manifest, &staged);
        assert!(result.status.success(), "{name}: {}", String::from_utf8_lossy(&result.stderr));
    }
    assert!(stage("all", &manifest, &whole).status.success());
    for name in CONTENT_FILES {
        assert_eq!(
            std::fs::read(staged.join(name)).unwrap(),
            std::fs::read(whole.join(name)).unwrap(),
            "{name} differs"
        );
    }
}

#[test]
fn stats_before_harm_is_a_dependency_error() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = fixture(dir.path(), 200);
    let out = dir.path().join("out");
    assert!(stage("ingest", &manifest, &out).status.success());
    let result = stage("stats", &manifest, &out);
    assert_eq!(result.status.code(), Some(2));
    let err = stderr_json(&result);
    assert_eq!(err["error"]["kind"], "config");
    assert!(err["error"]["message"].as_str().unwrap().contains("harm.csv"));
}

#[test]
fn stale_cache_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = fixture(dir.path(), 200);
    let out = dir.path().join("out");
    assert!(stage("build", &manifest, &out).status.success());
    let citations = dir.path().join("data/citations.csv");
    let mut text = std::fs::read_to_string(&citations).unwrap();
    text.push_str("999999,888888\n");
    std::fs::write(&citations, text).unwrap();
    let result = stage("frontiers", &manifest, &out);
    assert_eq!(result.status.code(), Some(2));
    assert!(stderr_json(&result)["error"]["message"]
        .as_str()
        .unwrap()
        .contains("run build first"));
}

#[test]
fn bad_manifest_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.toml");
    std::fs::write(&manifest, "publications = \"p.jsonl\"\nbogus = 1\n").unwrap();
    let result = harmtrace(&["all", "--manifest"], &[&manifest]);
    assert_eq!(result.status.code(), Some(2));
    assert_eq!(stderr_json(&result)["error"]["exit_code"], 2);

    let missing = harmtrace(&["all", "--manifest"], &[&dir.path().join("absent.toml")]);
    assert_eq!(missing.status.code(), Some(2));

    let flag = harmtrace(&["all", "--no-such-flag"], &[]);
    assert_eq!(flag.status.code(), Some(2));
}

#[test]
fn out_of_range_distance_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = fixture(dir.path(), 100);
    let out = dir.path().join("out");
    let result = Command::new(env!("CARGO_BIN_EXE_harmtrace"))
        .args(["--quiet", "all", "--max-distance", "9", "--manifest"])
        .arg(&manifest)
        .arg("--output")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(result.status.code(), Some(2));
}

#[test]
fn unreadable_citations_are_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = fixture(dir.path(), 100);
    std::fs::write(dir.path().join("data/citations.csv"), "from,to\n1,2\n").unwrap();
    let result = stage("ingest", &manifest, &dir.path().join("out"));
    assert_eq!(result.status.code(), Some(3), "{}", String::from_utf8_lossy(&result.stderr));
    assert_eq!(stderr_json(&result)["error"]["kind"], "data");
}

#[test]
fn verify_default_seed_passes() {
    let dir = tempfile::tempdir().unwrap();
    let result = harmtrace(&["verify", "--output"], &[dir.path()]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    let report: serde_json::Value = serde_json::from_slice(&result.stdout).unwrap();
    assert_eq!(report["passed"], true);
    assert!(dir.path().join("out/verify_report.json").is_file());
}

#[test]
fn verify_with_overrides_passes() {
    let dir = tempfile::tempdir().unwrap();
    let result = Command::new(env!("CARGO_BIN_EXE_harmtrace"))
        .args([
            "--quiet",
            "verify",
            "--seed",
            "9",
            "--max-distance",
            "3",
            "--dedup",
            "dedup-only",
            "--no-self-exclude",
            "--output",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stdout));
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for target in [&a, &b] {
        let result = harmtrace(&["synth", "--seed", "17", "--papers", "300", "--output"], &[target]);
        assert!(result.status.success());
    }
    for name in ["publications.jsonl", "citations.csv", "retractions.csv", "journal_if.csv", "manifest.toml"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn dedup_only_skips_repeat_tables() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = fixture(dir.path(), 300);
    let out = dir.path().join("out");
    let result = Command::new(env!("CARGO_BIN_EXE_harmtrace"))
        .args(["--quiet", "all", "--manifest"])
        .arg(&manifest)
        .arg("--output")
        .arg(&out)
        .env("HARMTRACE_DEDUP", "dedup-only")
        .output()
        .unwrap();
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    assert!(!out.join("distance.csv").exists());
    assert!(out.join("distance_dedup.csv").is_file());
    let frontiers = std::fs::read_to_string(out.join("frontiers.csv")).unwrap();
    assert!(frontiers.lines().skip(1).all(|l| l.ends_with(",1")));
}
