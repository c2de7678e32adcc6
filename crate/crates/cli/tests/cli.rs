use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use colts::harness::evaluate;
use serde_json::Value;

fn colts(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_colts"))
        .args(args)
        .env_remove("COLTS_CONFIG")
        .output()
        .expect("binary runs")
}

fn summary(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

fn write_corpus(path: &Path, sentences: usize) {
    let tags = ["DT", "NN", "VB", "JJ", "IN"];
    let mut text = String::new();
    for s in 0..sentences {
        for w in 0..8 {
            let word = (s * 7 + w * 13) % 97;
            text.push_str(&format!("w{word}\t{}\n", tags[word % tags.len()]));
        }
        text.push('\n');
    }
    fs::write(path, text).unwrap();
}

#[test]
fn run_writes_summary_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = colts(&["run", "--inflate", "none", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert!(s.get("inflated").is_none());
    let original = &s["original"];
    assert_eq!(original["viable"], true);
    let runs = original["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 5);
    for run in runs {
        for key in [
            "wlevel",
            "plevel",
            "clevel",
            "positions",
            "delta",
            "dacsr",
            "icsr",
            "lcsr",
        ] {
            assert!(!run[key].is_null(), "{key} missing in {run}");
        }
        assert!(out.join(run["csv"].as_str().unwrap()).exists());
    }
    assert!(out
        .join("plots/original_arithmetic_anchored_backbone.dat")
        .exists());
}

#[test]
fn inflate_adds_the_inflated_frame() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = colts(&["run", "--inflate", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    let inflated = &s["inflated"];
    assert_eq!(inflated["iota"], 1.0);
    assert_eq!(inflated["levels"], s["original"]["levels"]);
    assert!(out.join("runs/inflated_geometric.csv").exists());
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = colts(&[
            "run",
            "--noise",
            "0.3",
            "--seed",
            "11",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for entry in fs::read_dir(a.join("runs")).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(
            fs::read(a.join("runs").join(&name)).unwrap(),
            fs::read(b.join("runs").join(&name)).unwrap(),
            "{name:?}"
        );
    }
}

#[test]
fn summary_is_recomputable_from_the_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert!(colts(&["run", "--out", out.to_str().unwrap()])
        .status
        .success());
    let s = summary(&out);
    for variant in ["original", "inflated"] {
        let frame = &s[variant];
        let plevel = frame["levels"]["plevel"].as_u64().unwrap() as usize;
        let eta = frame["eta"].as_u64().unwrap();
        let table = |run: &Value| -> (Vec<u64>, usize) {
            let csv = fs::read_to_string(out.join(run["csv"].as_str().unwrap())).unwrap();
            let mut positions = Vec::new();
            let mut clevel = 0;
            for line in csv.lines().skip(1) {
                let cols: Vec<&str> = line.split(',').collect();
                positions.push(cols[1].parse().unwrap());
                if cols[12] == "true" {
                    clevel = cols[0].parse().unwrap();
                }
            }
            (positions, clevel)
        };
        let runs = frame["runs"].as_array().unwrap();
        let (base_positions, base_cl) = table(&runs[0]);
        for run in runs {
            let (positions, cl) = table(run);
            assert_eq!(cl as u64, run["clevel"].as_u64().unwrap());
            let m = evaluate(&positions, cl, &base_positions, base_cl, plevel, eta).unwrap();
            assert_eq!(m.delta, run["delta"].as_i64().unwrap());
            for (key, value) in [("dacsr", m.dacsr), ("icsr", m.icsr), ("lcsr", m.lcsr)] {
                assert_eq!(value, run[key].as_f64().unwrap(), "{variant} {key}");
            }
        }
    }
}

#[test]
fn validate_reports_each_problem() {
    let o = colts(&["validate"]);
    assert!(o.status.success());
    let o = colts(&["validate", "--psi", "0.5,1.5", "--kernel", "2000000"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("PORT out of (0,1]"), "{err}");
    assert!(err.contains("kernel exceeds corpus"), "{err}");
    let o = colts(&["validate", "--tau", "abc"]);
    assert_eq!(o.status.code(), Some(1));
    let o = colts(&["run", "--scope-end", "2000000"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn validate_checks_the_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.tsv");
    write_corpus(&corpus, 200);
    let c = corpus.to_str().unwrap();
    let ok = colts(&[
        "validate",
        "--corpus",
        c,
        "--learner",
        "baseline",
        "--kernel",
        "100",
        "--scope-end",
        "none",
    ]);
    assert!(
        ok.status.success(),
        "{}",
        String::from_utf8_lossy(&ok.stderr)
    );
    let o = colts(&[
        "validate",
        "--corpus",
        c,
        "--learner",
        "baseline",
        "--folds",
        "500",
        "--kernel",
        "100",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("folds"));
    let bad = dir.path().join("bad.tsv");
    fs::write(&bad, "word without tag\n").unwrap();
    let o = colts(&["validate", "--corpus", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}

#[test]
fn config_file_and_environment_layer_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("colts.conf");
    fs::write(
        &config,
        "# experiment\nkernel = 7000\ninflate = none\nschedules = arithmetic,colts\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = Command::new(env!("CARGO_BIN_EXE_colts"))
        .args(["run", "--config", config.to_str().unwrap(), "--psi", "0.5"])
        .env("COLTS_OUT", &out)
        .env("COLTS_KERNEL", "6000")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert_eq!(s["config"]["kernel"], 6000);
    assert_eq!(s["config"]["psi"], serde_json::json!([0.5]));
    let labels: Vec<&str> = s["original"]["runs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["label"].as_str().unwrap())
        .collect();
    assert_eq!(labels, ["arithmetic", "colts_psi0.5"]);
    fs::write(&config, "flavour = 1\n").unwrap();
    let o = colts(&["validate", "--config", config.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn corpus_runs_use_cross_validation() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.tsv");
    write_corpus(&corpus, 1500);
    let out = dir.path().join("out");
    let o = colts(&[
        "run",
        "--corpus",
        corpus.to_str().unwrap(),
        "--curve",
        "50,0.4,97",
        "--kernel",
        "400",
        "--eta",
        "400",
        "--scope-end",
        "none",
        "--tau",
        "0.5",
        "--folds",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    let base = &s["original"]["runs"][0];
    let positions = base["positions"].as_array().unwrap();
    assert!(
        positions.iter().all(|p| p.as_u64().unwrap() % 8 == 0),
        "sentence aligned"
    );
}
