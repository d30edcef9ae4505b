//! End-to-end runs of the `csistat` binary on a small fixed-seed corpus.
//!
//! Golden outputs live in `tests/golden`; set `UPDATE_GOLDEN=1` to rewrite
//! them after an intentional output change.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_csistat"));
    c.env_remove("CSI_STAT_OUT");
    c
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().expect("spawn csistat")
}

fn ok(args: &[&str], cwd: &Path) {
    let out = run(args, cwd);
    assert!(
        out.status.success(),
        "csistat {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

const SYNTH: &[&str] = &["synth", "--n-sc", "64", "--frames", "60", "--seed", "7", "--out", "corpus"];

/// Synthesizes the corpus and runs every analysis subcommand on it.
fn full_run(dir: &Path) {
    ok(SYNTH, dir);
    let c = dir.join("corpus");
    ok(&["pipeline", "--trace", "S1.csv", "--metadata", "S1.json", "--out", "../pipeline"], &c);
    ok(&["distance", "S1.quantized.csv", "S2.quantized.csv", "S3.quantized.csv", "--out", "../distance"], &c);
    ok(&["distance", "--thesis-style", "S1.quantized.csv", "S2.quantized.csv", "S3.quantized.csv", "--out", "../thesis"], &c);
    ok(&["hist", "--input", "S2.quantized.csv", "--reference", "S1.quantized.csv", "--bins", "20", "--out", "../hist"], &c);
    ok(&["autocorr", "--input", "S3.quantized.csv", "--subcarrier", "5", "--max-lag", "10", "--out", "../autocorr"], &c);
    ok(&["heatmap", "--a", "S1.quantized.csv", "--b", "S2.quantized.csv", "--out", "../heatmap"], &c);
    ok(&["mi", "--reference", "S1.quantized.csv", "--model", "S1.model.json", "--out", "../mi"], &c);
    ok(&["mi", "--reference", "S1.quantized.csv", "--model", "S1.model.json", "--other", "S2.quantized.csv", "--out", "../mi"], &c);
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

/// Outputs small enough to keep as golden files.
const GOLDEN: &[&str] = &[
    "corpus/suite.json",
    "corpus/S1.json",
    "corpus/S2.model.json",
    "pipeline/S1.model.json",
    "pipeline/S1.hist_q4.csv",
    "distance/distance.csv",
    "distance/distance_std.csv",
    "thesis/distance.csv",
    "hist/S1_vs_S2.whd_hist.csv",
    "hist/S1_vs_S2.whd_hist.json",
    "autocorr/S3.autocorr.csv",
    "autocorr/S3.autocorr.json",
    "heatmap/S1_vs_S2.heatmap.json",
    "mi/S1.mi_internal.csv",
    "mi/S1_vs_S2.mi_external.json",
];

#[test]
fn outputs_match_golden_files() {
    let tmp = TempDir::new().unwrap();
    full_run(tmp.path());
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for rel in GOLDEN {
        let got = fs::read_to_string(tmp.path().join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"));
        let path = golden.join(rel.replace('/', "__"));
        if update {
            fs::create_dir_all(&golden).unwrap();
            fs::write(&path, &got).unwrap();
            continue;
        }
        let want = fs::read_to_string(&path)
            .unwrap_or_else(|e| panic!("{}: {e} (run with UPDATE_GOLDEN=1)", path.display()));
        assert_eq!(got, want, "{rel} differs from golden copy");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    full_run(a.path());
    full_run(b.path());
    let files = files_under(a.path());
    assert_eq!(files, files_under(b.path()));
    assert!(files.len() > 30, "only {} files written", files.len());
    for f in files {
        assert_eq!(fs::read(a.path().join(&f)).unwrap(), fs::read(b.path().join(&f)).unwrap(), "{}", f.display());
    }
}

#[test]
fn jobs_flag_does_not_change_results() {
    let tmp = TempDir::new().unwrap();
    ok(SYNTH, tmp.path());
    let c = tmp.path().join("corpus");
    let inputs = ["S1.quantized.csv", "S2.quantized.csv", "S3.quantized.csv"];
    let mut one = vec!["distance", "--jobs", "1", "--out", "../one"];
    one.extend(inputs);
    let mut four = vec!["distance", "--jobs", "4", "--out", "../four"];
    four.extend(inputs);
    ok(&one, &c);
    ok(&four, &c);
    for f in ["distance.csv", "distance_std.csv", "distance.json"] {
        assert_eq!(fs::read(tmp.path().join("one").join(f)).unwrap(), fs::read(tmp.path().join("four").join(f)).unwrap());
    }
}

#[test]
fn help_lists_every_subcommand() {
    let out = run(&["--help"], Path::new("."));
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for cmd in ["pipeline", "distance", "hist", "autocorr", "heatmap", "mi", "synth"] {
        assert!(text.contains(cmd), "--help does not mention {cmd}");
    }
}

#[test]
fn missing_inputs_is_a_usage_error() {
    let out = run(&["distance"], Path::new("."));
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["pipeline", "--trace", "x.csv"], Path::new("."));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn out_of_range_q_inc_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let out = run(&["synth", "--q-inc", "7", "--out", "x"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_metadata_reports_the_stage() {
    let tmp = TempDir::new().unwrap();
    ok(SYNTH, tmp.path());
    let out = run(&["pipeline", "--trace", "S1.csv", "--metadata", "absent.json"], &tmp.path().join("corpus"));
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error: metadata:"), "{err}");
}

#[test]
fn malformed_trace_reports_ingest_stage() {
    let tmp = TempDir::new().unwrap();
    ok(SYNTH, tmp.path());
    let c = tmp.path().join("corpus");
    fs::write(c.join("bad.csv"), "1,2,3\n4,five,6\n").unwrap();
    let out = run(&["pipeline", "--trace", "bad.csv", "--metadata", "S1.json"], &c);
    assert_ne!(out.status.code(), Some(0));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error: ingest:"), "{err}");
}

#[test]
fn environment_overrides_out_flag() {
    let tmp = TempDir::new().unwrap();
    let env_dir = tmp.path().join("from-env");
    let out = bin()
        .args(["synth", "--n-sc", "8", "--frames", "5", "--sigma", "1", "--out", "from-flag"])
        .env("CSI_STAT_OUT", &env_dir)
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(env_dir.join("suite.json").is_file());
    assert!(!tmp.path().join("from-flag").exists());
}

#[test]
fn pipeline_recovers_synthetic_grid() {
    let tmp = TempDir::new().unwrap();
    ok(SYNTH, tmp.path());
    let c = tmp.path().join("corpus");
    ok(&["pipeline", "--trace", "S2.csv", "--metadata", "S2.json", "--out", "p"], &c);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(c.join("p/S2.report.json")).unwrap()).unwrap();
    assert_eq!(report["frames"], 60);
    assert_eq!(report["subcarriers"], 64);
    assert_eq!(report["q_inc"], 4);
    let sigma = report["sigma_mle"].as_f64().unwrap();
    assert!(sigma > 0.0 && sigma < 0.1, "sigma {sigma}");
    for q in 3..=5 {
        assert!(c.join(format!("p/S2.hist_q{q}.csv")).is_file());
    }
}
