mod common;

use std::fs;
use std::path::{Path, PathBuf};

use common::dice_ref;
use segfuse::fusion::argmax_labels;
use segfuse::metrics::EvalConfig;
use segfuse::nifti::{load_labels, load_probmap, save_labels};
use segfuse::pipeline::{
    read_metrics_csv, run_eval, run_fuse, run_rank, run_report, run_synth, save_tiled_probmap, tiling_plan,
    ModelInput, PipelineConfig, RankInput, SynthConfig,
};
use segfuse::postprocess::et_threshold_relabel;
use segfuse::{Error, LabelMap};
use tempfile::TempDir;

fn synth(dir: &Path, seed: u64, f: impl FnOnce(&mut SynthConfig)) -> PipelineConfig {
    let mut cfg = SynthConfig::new(seed);
    cfg.cases = 2;
    cfg.shape = [24; 3];
    f(&mut cfg);
    run_synth(dir, &cfg).unwrap()
}

fn wt(m: &LabelMap) -> Vec<bool> {
    m.data().iter().map(|&l| l != 0).collect()
}

/// Every regular file under `dir`, relative path and contents.
fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn single_model_single_fold_is_postprocessed_argmax() {
    let tmp = TempDir::new().unwrap();
    let cfg = synth(tmp.path(), 21, |c| {
        c.raters = 1;
        c.folds = 1;
    });
    let report = run_fuse(&cfg).unwrap();
    assert_eq!(report.fused, ["case_000", "case_001"]);
    assert!(report.failures.is_empty());
    for case in &report.fused {
        let p = load_probmap(&cfg.models[0].folds[0].join(format!("{case}.json"))).unwrap();
        let want = et_threshold_relabel(&argmax_labels(&p), 200);
        let got = load_labels(&cfg.output_dir.join(format!("{case}.nii"))).unwrap();
        assert_eq!(got, want);
        let diag: serde_json::Value =
            serde_json::from_slice(&fs::read(cfg.output_dir.join(format!("{case}_staple.json"))).unwrap()).unwrap();
        assert!(diag["staple"].is_null());
    }
}

#[test]
fn three_light_raters_fuse_above_095_wt() {
    let tmp = TempDir::new().unwrap();
    let cfg = synth(tmp.path(), 5, |c| {
        c.shape = [32; 3];
        c.rate = 0.05;
    });
    let report = run_fuse(&cfg).unwrap();
    let gt_dir = cfg.gt_dir.clone().unwrap();
    for case in &report.fused {
        let gt = load_labels(&gt_dir.join(format!("{case}.nii"))).unwrap();
        let fused = load_labels(&cfg.output_dir.join(format!("{case}.nii"))).unwrap();
        let d = dice_ref(&wt(&fused), &wt(&gt));
        assert!(d > 0.95, "{case}: WT dice {d}");
    }
}

#[test]
fn missing_model_file_names_the_path() {
    let tmp = TempDir::new().unwrap();
    let cfg = synth(tmp.path(), 2, |_| {});
    let gone = cfg.models[1].labels_dir.as_ref().unwrap().join("case_001.nii");
    fs::remove_file(&gone).unwrap();
    match run_fuse(&cfg) {
        Err(Error::MissingFile(p)) => assert_eq!(p, gone),
        other => panic!("expected MissingFile, got {other:?}"),
    }
    assert!(!cfg.output_dir.exists());
}

#[test]
fn missing_directory_is_missing_file() {
    let tmp = TempDir::new().unwrap();
    let model = ModelInput {
        name: "m".into(),
        labels_dir: Some(tmp.path().join("nope")),
        folds: Vec::new(),
    };
    let cfg = PipelineConfig::new(vec![model], tmp.path().join("out"));
    assert!(matches!(run_fuse(&cfg), Err(Error::MissingFile(_))));
}

#[test]
fn eval_of_ground_truth_against_itself() {
    let tmp = TempDir::new().unwrap();
    let cfg = synth(tmp.path(), 8, |_| {});
    let gt = cfg.gt_dir.unwrap();
    let out = tmp.path().join("self");
    let report = run_eval(&gt, &gt, &out, &EvalConfig::default(), None).unwrap();
    assert_eq!(report.metrics.len(), 2);
    for m in &report.metrics {
        assert_eq!([m.dsc_et, m.dsc_tc, m.dsc_wt], [1.0; 3]);
        assert_eq!([m.hd95_et, m.hd95_tc, m.hd95_wt], [0.0; 3]);
    }
    assert!(report.failures.is_empty());
    assert_eq!(read_metrics_csv(&out.join("metrics.csv")).unwrap(), report.metrics);
    for f in ["metrics.json", "summary.json", "summary.txt", "eval_failures.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn disjoint_stems_are_all_unpaired() {
    let tmp = TempDir::new().unwrap();
    let cfg = synth(tmp.path(), 8, |_| {});
    let gt = cfg.gt_dir.unwrap();
    let pred = tmp.path().join("pred");
    fs::create_dir(&pred).unwrap();
    let m = load_labels(&gt.join("case_000.nii")).unwrap();
    save_labels(&pred.join("other_a.nii"), &m).unwrap();
    save_labels(&pred.join("other_b.nii"), &m).unwrap();
    let report = run_eval(&pred, &gt, &tmp.path().join("e"), &EvalConfig::default(), Some(2)).unwrap();
    assert!(report.metrics.is_empty());
    assert!(report.summary.is_none());
    let cases: Vec<&str> = report.failures.iter().map(|f| f.case.as_str()).collect();
    assert_eq!(cases, ["case_000", "case_001", "other_a", "other_b"]);
    assert!(report.failures.iter().all(|f| f.error.contains("no matching") && f.error.contains(&f.case)));
}

#[test]
fn golden_metrics_csv() {
    let tmp = TempDir::new().unwrap();
    let cfg = synth(tmp.path(), 2024, |c| {
        c.cases = 3;
        c.shape = [32; 3];
    });
    run_fuse(&cfg).unwrap();
    let out = tmp.path().join("eval");
    run_eval(&cfg.output_dir, cfg.gt_dir.as_ref().unwrap(), &out, &cfg.eval(), None).unwrap();
    let got = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden_metrics.csv");
    if std::env::var_os("SEGFUSE_BLESS").is_some() {
        fs::write(&fixture, &got).unwrap();
    }
    assert_eq!(got, fs::read_to_string(&fixture).unwrap());
}

#[test]
fn tiled_manifests_fuse_like_whole_ones() {
    let tmp = TempDir::new().unwrap();
    let cfg = synth(tmp.path(), 13, |c| {
        c.folds = 2;
        c.raters = 2;
    });
    let whole = run_fuse(&cfg).unwrap();

    let plan = tiling_plan([24; 3], [16; 3], Some([8; 3])).unwrap();
    let mut tiled = cfg.clone();
    tiled.output_dir = tmp.path().join("fused_tiled");
    tiled.stride = Some([8; 3]);
    for m in &mut tiled.models {
        for fold in &mut m.folds {
            let dst = fold.with_file_name(format!("{}_tiled", fold.file_name().unwrap().to_string_lossy()));
            fs::create_dir_all(&dst).unwrap();
            for case in &whole.fused {
                let p = load_probmap(&fold.join(format!("{case}.json"))).unwrap();
                save_tiled_probmap(&dst, case, &p, &plan).unwrap();
            }
            *fold = dst;
        }
    }
    let report = run_fuse(&tiled).unwrap();
    assert_eq!(report.fused, whole.fused);
    for case in &whole.fused {
        let a = load_labels(&cfg.output_dir.join(format!("{case}.nii"))).unwrap();
        let b = load_labels(&tiled.output_dir.join(format!("{case}.nii"))).unwrap();
        assert_eq!(a, b, "{case}");
    }

    tiled.stride = Some([12; 3]);
    tiled.output_dir = tmp.path().join("fused_bad");
    let report = run_fuse(&tiled).unwrap();
    assert!(report.fused.is_empty());
    assert!(report.failures.iter().all(|f| f.error.contains("stride")));
}

#[test]
fn rank_and_report_from_eval_outputs() {
    let tmp = TempDir::new().unwrap();
    let cfg = synth(tmp.path(), 31, |_| {});
    let gt = cfg.gt_dir.clone().unwrap();
    let mut inputs = Vec::new();
    for m in &cfg.models {
        let out = tmp.path().join("eval").join(&m.name);
        run_eval(m.labels_dir.as_ref().unwrap(), &gt, &out, &cfg.eval(), None).unwrap();
        inputs.push(RankInput::parse(&out.join("metrics.csv").to_string_lossy()));
    }
    run_fuse(&cfg).unwrap();
    let out = tmp.path().join("eval").join("fused");
    run_eval(&cfg.output_dir, &gt, &out, &cfg.eval(), None).unwrap();
    inputs.push(RankInput::parse(&format!("ensemble={}", out.join("metrics.csv").display())));

    let report = run_rank(&inputs).unwrap();
    let names: Vec<&str> = report.models.iter().map(|m| m.name.as_str()).collect();
    assert_eq!(names, ["model0", "model1", "model2", "ensemble"]);
    assert_eq!(report.ranking.rank_of("ensemble"), Some(1));
    assert!(report.to_table().contains("ensemble"));

    let stats = run_report(&out.join("metrics.csv")).unwrap();
    assert_eq!(stats.cases, 2);
    let mean_wt = report.models[3].dsc.wt;
    assert!((stats.dsc.wt.mean - mean_wt).abs() < 1e-12);

    inputs.push(inputs[0].clone());
    assert!(matches!(run_rank(&inputs), Err(Error::Config(_))));
}

#[test]
fn fuse_and_eval_are_deterministic_across_runs_and_jobs() {
    let tmp = TempDir::new().unwrap();
    let cfg = synth(tmp.path(), 77, |c| c.cases = 4);
    let mut snaps = Vec::new();
    for (k, jobs) in [None, Some(1), Some(4), None].into_iter().enumerate() {
        let mut c = cfg.clone();
        c.jobs = jobs;
        c.output_dir = tmp.path().join(format!("run{k}"));
        run_fuse(&c).unwrap();
        run_eval(&c.output_dir, c.gt_dir.as_ref().unwrap(), &c.output_dir.join("eval"), &c.eval(), jobs).unwrap();
        snaps.push(snapshot(&c.output_dir));
    }
    assert!(snaps[0].len() > 10);
    for s in &snaps[1..] {
        assert_eq!(s, &snaps[0]);
    }
}

#[test]
fn config_file_round_trip_and_rejects_unknown_keys() {
    let tmp = TempDir::new().unwrap();
    let cfg = synth(tmp.path(), 1, |_| {});
    let again = PipelineConfig::load(&tmp.path().join("pipeline.json")).unwrap();
    assert_eq!(again, cfg);
    assert!(cfg.output_dir.starts_with(tmp.path()));

    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"models": [], "output_dir": "x", "colour": 1}"#).unwrap();
    assert!(matches!(PipelineConfig::load(&bad), Err(Error::Config(_))));
    assert!(matches!(
        PipelineConfig::load(&tmp.path().join("absent.json")),
        Err(Error::MissingFile(_))
    ));
}
