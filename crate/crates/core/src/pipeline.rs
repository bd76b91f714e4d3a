//! File-level orchestration: fusion of model predictions, evaluation against
//! ground truth, ranking, and synthetic fixture generation.
//!
//! Layout conventions:
//! - a label-map model is a directory of `<case>.nii` files;
//! - a probability model is one directory per fold, each holding a
//!   `<case>.json` manifest (see [`crate::nifti::save_probmap`]) or a tiled
//!   manifest with a `plan` and one window manifest per plan window.
//!
//! Cases are paired across inputs by file stem and always processed and
//! reported in sorted case-id order.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{argmax_labels, average_probs, staple_multilabel, StapleConfig, StapleDiagnostics};
use crate::metrics::{evaluate_case_with, CaseMetrics, EvalConfig, EMPTY_HD95_PENALTY};
use crate::nifti::{load_labels, load_probmap, save_labels, save_probmap, save_volume};
use crate::postprocess::{et_threshold_relabel, DEFAULT_ET_THRESHOLD};
use crate::report::{model_summary, rank_models, ranking_table, summarize, ModelRanking, ModelSummary, SummaryStats};
use crate::synth::{corrupt_labels, make_phantom, noisy_probmap, PhantomSpec};
use crate::tiling::{extract, plan_tiling, stitch, TilingPlan, Weighting};
use crate::volume::{LabelMap, ProbMap, Shape};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInput {
    pub name: String,
    /// Directory of `<case>.nii` label maps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels_dir: Option<PathBuf>,
    /// One directory of `<case>.json` probability manifests per fold.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub folds: Vec<PathBuf>,
}

impl ModelInput {
    fn dirs(&self) -> Vec<&Path> {
        match &self.labels_dir {
            Some(d) => vec![d.as_path()],
            None => self.folds.iter().map(PathBuf::as_path).collect(),
        }
    }

    fn extension(&self) -> &'static str {
        if self.labels_dir.is_some() {
            "nii"
        } else {
            "json"
        }
    }
}

fn default_et_threshold() -> usize {
    DEFAULT_ET_THRESHOLD
}
fn default_tol() -> f64 {
    crate::fusion::DEFAULT_TOL
}
fn default_max_iters() -> usize {
    crate::fusion::DEFAULT_MAX_ITERS
}
fn default_penalty() -> f64 {
    EMPTY_HD95_PENALTY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub models: Vec<ModelInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    #[serde(default = "default_et_threshold")]
    pub et_threshold: usize,
    #[serde(default = "default_tol")]
    pub staple_tol: f64,
    #[serde(default = "default_max_iters")]
    pub staple_max_iters: usize,
    /// When set, tiled manifests must use this stride.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<Shape>,
    #[serde(default)]
    pub weighting: Weighting,
    #[serde(default = "default_penalty")]
    pub empty_penalty: f64,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; `None` uses all cores.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
}

impl PipelineConfig {
    pub fn new(models: Vec<ModelInput>, output_dir: PathBuf) -> Self {
        PipelineConfig {
            models,
            gt_dir: None,
            output_dir,
            et_threshold: DEFAULT_ET_THRESHOLD,
            staple_tol: default_tol(),
            staple_max_iters: default_max_iters(),
            stride: None,
            weighting: Weighting::default(),
            empty_penalty: EMPTY_HD95_PENALTY,
            seed: 0,
            jobs: None,
        }
    }

    /// Reads a JSON config; relative paths are taken relative to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => Error::io(path, e),
        })?;
        let mut cfg: PipelineConfig = serde_json::from_slice(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for m in &mut cfg.models {
            m.labels_dir.iter_mut().for_each(fix);
            m.folds.iter_mut().for_each(fix);
        }
        cfg.gt_dir.iter_mut().for_each(fix);
        fix(&mut cfg.output_dir);
        Ok(cfg)
    }

    pub fn staple(&self) -> StapleConfig {
        StapleConfig {
            tol: self.staple_tol,
            max_iters: self.staple_max_iters,
            ..StapleConfig::default()
        }
    }

    pub fn eval(&self) -> EvalConfig {
        EvalConfig {
            empty_penalty: self.empty_penalty,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::Config("no models configured".into()));
        }
        let mut names = BTreeSet::new();
        for m in &self.models {
            if !names.insert(&m.name) {
                return Err(Error::Config(format!("duplicate model name {:?}", m.name)));
            }
            if m.labels_dir.is_some() == !m.folds.is_empty() {
                return Err(Error::Config(format!(
                    "model {:?} needs exactly one of labels_dir or folds",
                    m.name
                )));
            }
            for d in m.dirs() {
                if !d.is_dir() {
                    return Err(Error::MissingFile(d.to_path_buf()));
                }
            }
        }
        if let Some(gt) = &self.gt_dir {
            if !gt.is_dir() {
                return Err(Error::MissingFile(gt.clone()));
            }
        }
        if !(self.staple_tol > 0.0 && self.staple_tol.is_finite()) || self.staple_max_iters == 0 {
            return Err(Error::Config(format!(
                "staple tol must be positive and max_iters at least 1, got {} and {}",
                self.staple_tol, self.staple_max_iters
            )));
        }
        if let Some(s) = self.stride {
            if s.contains(&0) {
                return Err(Error::Config(format!("stride must be positive, got {s:?}")));
            }
        }
        if let Weighting::Gaussian { sigma_frac } = self.weighting {
            if !(sigma_frac > 0.0 && sigma_frac.is_finite()) {
                return Err(Error::Config(format!("sigma_frac must be positive, got {sigma_frac}")));
            }
        }
        if !(self.empty_penalty >= 0.0) {
            return Err(Error::Config(format!(
                "empty_penalty must be nonnegative, got {}",
                self.empty_penalty
            )));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        Ok(())
    }
}

/// A case that could not be processed; the run continues with the others.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseFailure {
    pub case: String,
    pub error: String,
}

fn failure(case: &str, e: &Error) -> CaseFailure {
    CaseFailure {
        case: case.to_string(),
        error: e.to_string(),
    }
}

/// Sorted stems of files with `ext` directly inside `dir`.
pub fn case_stems(dir: &Path, ext: &str) -> Result<BTreeSet<String>> {
    let entries = fs::read_dir(dir).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(dir.to_path_buf()),
        _ => Error::io(dir, e),
    })?;
    let mut out = BTreeSet::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|x| x == ext) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.insert(stem.to_string());
            }
        }
    }
    Ok(out)
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Window manifests plus the plan they were cut with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiledManifest {
    pub plan: TilingPlan,
    pub windows: Vec<PathBuf>,
}

/// Cuts `p` into plan windows, writes them as channel manifests under
/// `<stem>_windows/`, and writes the tiled manifest `<stem>.json`.
pub fn save_tiled_probmap(dir: &Path, stem: &str, p: &ProbMap, plan: &TilingPlan) -> Result<PathBuf> {
    let sub = PathBuf::from(format!("{stem}_windows"));
    create_dir(&dir.join(&sub))?;
    let mut windows = Vec::with_capacity(plan.windows.len());
    for i in 0..plan.windows.len() {
        let patch = extract(p, plan, i)?;
        save_probmap(&dir.join(&sub), &format!("w{i}"), &patch)?;
        windows.push(sub.join(format!("w{i}.json")));
    }
    let path = dir.join(format!("{stem}.json"));
    write_json(
        &path,
        &TiledManifest {
            plan: plan.clone(),
            windows,
        },
    )?;
    Ok(path)
}

/// Loads a plain or tiled probability manifest, stitching the latter.
pub fn load_case_probs(path: &Path, stride: Option<Shape>, weighting: Weighting) -> Result<ProbMap> {
    let text = fs::read(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_slice(&text)?;
    if value.get("plan").is_none() {
        return load_probmap(path);
    }
    let tiled: TiledManifest = serde_json::from_value(value)?;
    if let Some(s) = stride {
        if s != tiled.plan.stride {
            return Err(Error::PlanMismatch(format!(
                "manifest stride {:?}, configured stride {s:?}",
                tiled.plan.stride
            )));
        }
    }
    let base = path.parent().unwrap_or(Path::new(""));
    let patches = tiled
        .windows
        .iter()
        .map(|w| load_probmap(&base.join(w)))
        .collect::<Result<Vec<_>>>()?;
    stitch(&patches, &tiled.plan, weighting)
}

/// Per-case sidecar written next to the fused label map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuseDiagnostics {
    pub case: String,
    pub models: Vec<String>,
    /// ET, TC and WT runs; absent when a single model needs no fusion.
    pub staple: Option<Vec<StapleDiagnostics>>,
    pub et_voxels_before: usize,
    pub et_relabelled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuseReport {
    pub fused: Vec<String>,
    pub failures: Vec<CaseFailure>,
}

fn model_labels(cfg: &PipelineConfig, m: &ModelInput, case: &str) -> Result<LabelMap> {
    if let Some(dir) = &m.labels_dir {
        return load_labels(&dir.join(format!("{case}.nii")));
    }
    let folds = m
        .folds
        .iter()
        .map(|f| load_case_probs(&f.join(format!("{case}.json")), cfg.stride, cfg.weighting))
        .collect::<Result<Vec<_>>>()?;
    Ok(argmax_labels(&average_probs(&folds)?))
}

/// One case: per-model labels, STAPLE across models, small-ET relabelling.
pub fn fuse_case(cfg: &PipelineConfig, case: &str) -> Result<(LabelMap, FuseDiagnostics)> {
    let maps = cfg
        .models
        .iter()
        .map(|m| model_labels(cfg, m, case))
        .collect::<Result<Vec<_>>>()?;
    let (fused, staple) = if maps.len() == 1 {
        (maps.into_iter().next().expect("one model"), None)
    } else {
        let st = staple_multilabel(&maps, &cfg.staple())?;
        let diag = st.regions.iter().map(|r| r.diagnostics()).collect();
        (st.labels, Some(diag))
    };
    let before = fused.count(4);
    let out = et_threshold_relabel(&fused, cfg.et_threshold);
    let diag = FuseDiagnostics {
        case: case.to_string(),
        models: cfg.models.iter().map(|m| m.name.clone()).collect(),
        staple,
        et_voxels_before: before,
        et_relabelled: out.count(4) != before,
    };
    Ok((out, diag))
}

/// Fuses every case and writes `<case>.nii`, `<case>_staple.json` and
/// `fuse_report.json` into the output directory. Missing inputs are config
/// errors; per-case processing errors are collected in the report.
pub fn run_fuse(cfg: &PipelineConfig) -> Result<FuseReport> {
    cfg.validate()?;
    let mut cases = BTreeSet::new();
    for m in &cfg.models {
        for d in m.dirs() {
            cases.extend(case_stems(d, m.extension())?);
        }
    }
    for case in &cases {
        for m in &cfg.models {
            for d in m.dirs() {
                let path = d.join(format!("{case}.{}", m.extension()));
                if !path.is_file() {
                    return Err(Error::MissingFile(path));
                }
            }
        }
    }
    create_dir(&cfg.output_dir)?;
    let cases: Vec<String> = cases.into_iter().collect();
    let results: Vec<Result<()>> = with_pool(cfg.jobs, || {
        cases
            .par_iter()
            .map(|case| {
                let (labels, diag) = fuse_case(cfg, case)?;
                save_labels(&cfg.output_dir.join(format!("{case}.nii")), &labels)?;
                write_json(&cfg.output_dir.join(format!("{case}_staple.json")), &diag)
            })
            .collect()
    })?;
    let mut report = FuseReport {
        fused: Vec::new(),
        failures: Vec::new(),
    };
    for (case, r) in cases.iter().zip(results) {
        match r {
            Ok(()) => report.fused.push(case.clone()),
            Err(e) => report.failures.push(failure(case, &e.in_case(case))),
        }
    }
    write_json(&cfg.output_dir.join("fuse_report.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metrics: Vec<CaseMetrics>,
    pub summary: Option<SummaryStats>,
    pub failures: Vec<CaseFailure>,
}

/// Writes per-case metrics as CSV with the standard header.
pub fn write_metrics_csv(path: &Path, metrics: &[CaseMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for m in metrics {
        w.serialize(m)?;
    }
    if metrics.is_empty() {
        w.write_record(CaseMetrics::CSV_HEADER)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<CaseMetrics>> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Pairs `<case>.nii` files in the two directories by stem and evaluates each
/// pair. Writes `metrics.csv`, `metrics.json`, `summary.json`, `summary.txt`
/// and `eval_failures.json` into `out_dir`.
pub fn run_eval(
    pred_dir: &Path,
    gt_dir: &Path,
    out_dir: &Path,
    config: &EvalConfig,
    jobs: Option<usize>,
) -> Result<EvalReport> {
    if jobs == Some(0) {
        return Err(Error::Config("jobs must be at least 1".into()));
    }
    let preds = case_stems(pred_dir, "nii")?;
    let gts = case_stems(gt_dir, "nii")?;
    let paired: Vec<&String> = preds.intersection(&gts).collect();
    let mut failures: Vec<CaseFailure> = preds
        .symmetric_difference(&gts)
        .map(|c| failure(c, &Error::UnpairedCase(c.clone())))
        .collect();

    let results: Vec<Result<CaseMetrics>> = with_pool(jobs, || {
        paired
            .par_iter()
            .map(|case| {
                let pred = load_labels(&pred_dir.join(format!("{case}.nii")))?;
                let gt = load_labels(&gt_dir.join(format!("{case}.nii")))?;
                evaluate_case_with(&pred, &gt, case, config)
            })
            .collect()
    })?;
    let mut metrics = Vec::new();
    for (case, r) in paired.iter().zip(results) {
        match r {
            Ok(m) => metrics.push(m),
            Err(e) => failures.push(failure(case, &e.in_case(case))),
        }
    }
    failures.sort_by(|a, b| a.case.cmp(&b.case));

    create_dir(out_dir)?;
    write_metrics_csv(&out_dir.join("metrics.csv"), &metrics)?;
    write_json(&out_dir.join("metrics.json"), &metrics)?;
    let summary = summarize(&metrics).ok();
    if let Some(s) = &summary {
        write_json(&out_dir.join("summary.json"), s)?;
        write_text(&out_dir.join("summary.txt"), &s.to_table())?;
    }
    write_json(&out_dir.join("eval_failures.json"), &failures)?;
    Ok(EvalReport {
        metrics,
        summary,
        failures,
    })
}

/// A row of a model summary CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub model: String,
    #[serde(rename = "DSC_ET")]
    pub dsc_et: f64,
    #[serde(rename = "DSC_TC")]
    pub dsc_tc: f64,
    #[serde(rename = "DSC_WT")]
    pub dsc_wt: f64,
    #[serde(rename = "HD95_ET")]
    pub hd95_et: f64,
    #[serde(rename = "HD95_TC")]
    pub hd95_tc: f64,
    #[serde(rename = "HD95_WT")]
    pub hd95_wt: f64,
}

impl ModelRow {
    pub fn summary(&self) -> ModelSummary {
        model_summary(
            &self.model,
            [self.dsc_et, self.dsc_tc, self.dsc_wt],
            [self.hd95_et, self.hd95_tc, self.hd95_wt],
        )
    }
}

/// Input to [`run_rank`]: either a model summary CSV (with a `model` column)
/// or a per-case `metrics.csv` whose means become one model named `name`
/// (default: the parent directory name).
#[derive(Debug, Clone, PartialEq)]
pub struct RankInput {
    pub name: Option<String>,
    pub path: PathBuf,
}

impl RankInput {
    /// Parses `name=path` or a bare path.
    pub fn parse(s: &str) -> Self {
        match s.split_once('=') {
            Some((name, path)) if !name.is_empty() => RankInput {
                name: Some(name.to_string()),
                path: PathBuf::from(path),
            },
            _ => RankInput {
                name: None,
                path: PathBuf::from(s),
            },
        }
    }
}

fn load_rank_input(input: &RankInput) -> Result<Vec<ModelSummary>> {
    let path = &input.path;
    if !path.is_file() {
        return Err(Error::MissingFile(path.clone()));
    }
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().any(|h| h == "model") {
        return r
            .deserialize::<ModelRow>()
            .map(|row| Ok(row?.summary()))
            .collect();
    }
    let cases = read_metrics_csv(path)?;
    let name = input.name.clone().unwrap_or_else(|| {
        path.parent()
            .and_then(|p| p.file_name())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "model".into())
    });
    Ok(vec![ModelSummary::from_cases(&name, &cases)?])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub models: Vec<ModelSummary>,
    pub ranking: ModelRanking,
}

impl RankReport {
    pub fn to_table(&self) -> String {
        ranking_table(&self.models, &self.ranking)
    }
}

pub fn run_rank(inputs: &[RankInput]) -> Result<RankReport> {
    let mut models = Vec::new();
    for input in inputs {
        models.extend(load_rank_input(input)?);
    }
    let mut seen = BTreeSet::new();
    for m in &models {
        if !seen.insert(m.name.as_str()) {
            return Err(Error::Config(format!("model {:?} listed twice", m.name)));
        }
    }
    let ranking = rank_models(&models)?;
    Ok(RankReport { models, ranking })
}

/// Summary statistics of a per-case metrics CSV.
pub fn run_report(metrics_csv: &Path) -> Result<SummaryStats> {
    summarize(&read_metrics_csv(metrics_csv)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub cases: usize,
    pub shape: Shape,
    /// Number of simulated models.
    pub raters: usize,
    pub rate: f64,
    pub seed: u64,
    /// Write models as averaged-softmax folds instead of label maps.
    #[serde(default)]
    pub folds: usize,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
}

fn default_temperature() -> f64 {
    0.5
}

impl SynthConfig {
    pub fn new(seed: u64) -> Self {
        SynthConfig {
            cases: 4,
            shape: [32; 3],
            raters: 3,
            rate: 0.1,
            seed,
            folds: 0,
            temperature: default_temperature(),
        }
    }
}

/// SplitMix64 finaliser, used to derive independent sub-seeds.
pub fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Writes `gt/`, `images/` and one input directory per simulated model into
/// `out_dir`, plus a `pipeline.json` that fuses them into `out_dir/fused`.
/// Label-map models are corrupted copies of the ground truth; with
/// `folds > 0` each fold is a noisy softmax of such a copy.
pub fn run_synth(out_dir: &Path, cfg: &SynthConfig) -> Result<PipelineConfig> {
    if cfg.cases == 0 || cfg.raters == 0 {
        return Err(Error::Config("synth needs at least one case and one rater".into()));
    }
    let gt_dir = out_dir.join("gt");
    let img_dir = out_dir.join("images");
    create_dir(&gt_dir)?;
    create_dir(&img_dir)?;
    let mut models = Vec::new();
    for k in 0..cfg.raters {
        let name = format!("model{k}");
        let dir = PathBuf::from("models").join(&name);
        if cfg.folds == 0 {
            create_dir(&out_dir.join(&dir))?;
            models.push(ModelInput {
                name,
                labels_dir: Some(dir),
                folds: Vec::new(),
            });
        } else {
            let folds: Vec<PathBuf> = (0..cfg.folds).map(|f| dir.join(format!("fold{f}"))).collect();
            for f in &folds {
                create_dir(&out_dir.join(f))?;
            }
            models.push(ModelInput {
                name,
                labels_dir: None,
                folds,
            });
        }
    }

    for i in 0..cfg.cases {
        let case = format!("case_{i:03}");
        let spec = PhantomSpec::new(cfg.shape, mix_seed(cfg.seed, i as u64, 0));
        let (gt, image) = make_phantom(&spec)?;
        save_labels(&gt_dir.join(format!("{case}.nii")), &gt)?;
        save_volume(&img_dir.join(format!("{case}.nii")), &image)?;
        for (k, m) in models.iter().enumerate() {
            let rater_seed = mix_seed(cfg.seed, i as u64, k as u64 + 1);
            let noisy = corrupt_labels(&gt, cfg.rate, rater_seed);
            match &m.labels_dir {
                Some(d) => save_labels(&out_dir.join(d).join(format!("{case}.nii")), &noisy)?,
                None => {
                    for (f, fold) in m.folds.iter().enumerate() {
                        let p = noisy_probmap(&noisy, cfg.temperature, mix_seed(rater_seed, f as u64, 1));
                        save_probmap(&out_dir.join(fold), &case, &p)?;
                    }
                }
            }
        }
    }

    let mut pipeline = PipelineConfig::new(models, PathBuf::from("fused"));
    pipeline.gt_dir = Some(PathBuf::from("gt"));
    pipeline.seed = cfg.seed;
    write_json(&out_dir.join("pipeline.json"), &pipeline)?;
    PipelineConfig::load(&out_dir.join("pipeline.json"))
}

/// Dry run: the window plan for a volume.
pub fn tiling_plan(volume_shape: Shape, patch: Shape, stride: Option<Shape>) -> Result<TilingPlan> {
    plan_tiling(volume_shape, patch, stride.unwrap_or(crate::tiling::default_stride(patch)))
}
