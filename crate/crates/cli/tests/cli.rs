use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn segfuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_segfuse")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, extra: &[&str]) {
    let mut args = vec!["synth", "--out", p(dir), "--cases", "2", "--shape", "20", "--seed", "4"];
    args.extend_from_slice(extra);
    let o = segfuse(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn synth_fuse_eval_rank_report() {
    let tmp = TempDir::new().unwrap();
    let s = tmp.path().join("s");
    synth(&s, &[]);
    assert!(s.join("pipeline.json").is_file());

    let o = segfuse(&["fuse", "--config", p(&s.join("pipeline.json")), "--jobs", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("fused 2 case(s)"));
    let fused = s.join("fused");
    for f in ["case_000.nii", "case_001_staple.json", "fuse_report.json", "eval/metrics.csv"] {
        assert!(fused.join(f).is_file(), "{f}");
    }

    let ev = tmp.path().join("ev");
    let o = segfuse(&["eval", "--pred", p(&fused), "--gt", p(&s.join("gt")), "--out", p(&ev)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        fs::read(ev.join("metrics.csv")).unwrap(),
        fs::read(fused.join("eval/metrics.csv")).unwrap()
    );
    assert!(stdout(&o).contains("Mean"));

    let o = segfuse(&["report", p(&ev.join("metrics.csv")), "--json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["cases"], 2);

    let m0 = tmp.path().join("m0");
    let o = segfuse(&["eval", "--pred", p(&s.join("models/model0")), "--gt", p(&s.join("gt")), "--out", p(&m0)]);
    assert_eq!(code(&o), 0);
    let rk = tmp.path().join("rank");
    let o = segfuse(&[
        "rank",
        &format!("single={}", p(&m0.join("metrics.csv"))),
        &format!("fused={}", p(&ev.join("metrics.csv"))),
        "--out",
        p(&rk),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let ranking: serde_json::Value = serde_json::from_slice(&fs::read(rk.join("ranking.json")).unwrap()).unwrap();
    assert_eq!(ranking["models"].as_array().unwrap().len(), 2);
    assert!(rk.join("ranking.txt").is_file());
}

#[test]
fn fuse_from_model_flags_matches_config() {
    let tmp = TempDir::new().unwrap();
    let s = tmp.path().join("s");
    synth(&s, &[]);
    let o = segfuse(&["fuse", "--config", p(&s.join("pipeline.json"))]);
    assert_eq!(code(&o), 0);
    let out = tmp.path().join("flags");
    let models: Vec<String> = (0..3)
        .map(|k| format!("model{k}={}", p(&s.join(format!("models/model{k}")))))
        .collect();
    let mut args = vec!["fuse", "--out", p(&out)];
    for m in &models {
        args.extend(["--model", m.as_str()]);
    }
    let o = segfuse(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for case in ["case_000.nii", "case_001.nii"] {
        assert_eq!(fs::read(out.join(case)).unwrap(), fs::read(s.join("fused").join(case)).unwrap());
    }
}

#[test]
fn partial_failure_exits_two() {
    let tmp = TempDir::new().unwrap();
    let s = tmp.path().join("s");
    synth(&s, &[]);
    let pred = tmp.path().join("pred");
    fs::create_dir(&pred).unwrap();
    fs::copy(s.join("gt/case_000.nii"), pred.join("case_000.nii")).unwrap();
    fs::copy(s.join("gt/case_000.nii"), pred.join("stray.nii")).unwrap();
    let o = segfuse(&["eval", "--pred", p(&pred), "--gt", p(&s.join("gt")), "--out", p(&tmp.path().join("e"))]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("case_001") && err.contains("stray"), "{err}");
}

#[test]
fn config_errors_exit_one() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("absent.json");
    let o = segfuse(&["fuse", "--config", p(&missing)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("absent.json"));

    let s = tmp.path().join("s");
    synth(&s, &[]);
    fs::remove_file(s.join("models/model2/case_001.nii")).unwrap();
    let o = segfuse(&["fuse", "--config", p(&s.join("pipeline.json"))]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("case_001.nii"));

    let o = segfuse(&["fuse", "--config", p(&s.join("pipeline.json")), "--jobs", "0"]);
    assert_eq!(code(&o), 1);
    let o = segfuse(&["tiling-plan", "--shape", "10,10"]);
    assert_eq!(code(&o), 1);
    let o = segfuse(&["no-such-command"]);
    assert_eq!(code(&o), 1);
    let o = segfuse(&["--help"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn tiled_folds_and_stride() {
    let tmp = TempDir::new().unwrap();
    let s = tmp.path().join("s");
    synth(&s, &["--folds", "2", "--raters", "2"]);
    let o = segfuse(&["fuse", "--config", p(&s.join("pipeline.json")), "--weighting", "uniform"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(s.join("fused/case_001.nii").is_file());
}

#[test]
fn tiling_plan_prints_twelve_windows() {
    let o = segfuse(&["tiling-plan", "--shape", "192,224,160", "--stride", "64"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["windows"].as_array().unwrap().len(), 12);
}

#[test]
fn preprocess_and_postprocess_files() {
    let tmp = TempDir::new().unwrap();
    let s = tmp.path().join("s");
    synth(&s, &[]);
    let out = tmp.path().join("norm.nii");
    let o = segfuse(&[
        "preprocess",
        "--input",
        p(&s.join("images/case_000.nii")),
        "--output",
        p(&out),
        "--crop-nonzero",
        "--augment",
        "3",
        "--seed",
        "1",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(out.is_file());
    let aug: serde_json::Value = serde_json::from_str(stderr(&o).lines().next().unwrap()).unwrap();
    assert!(aug.is_object());

    let pp = tmp.path().join("pp.nii");
    let o = segfuse(&[
        "postprocess",
        "--input",
        p(&s.join("gt/case_000.nii")),
        "--output",
        p(&pp),
        "--et-threshold",
        "100000",
    ]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).ends_with("-> 0\n"), "{}", stdout(&o));
}
