use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use segfuse::nifti::{load_labels, load_volume, save_labels, save_volume};
use segfuse::pipeline::{
    run_eval, run_fuse, run_rank, run_report, run_synth, tiling_plan, ModelInput, PipelineConfig,
    RankInput, SynthConfig,
};
use segfuse::postprocess::{et_threshold_relabel, DEFAULT_ET_THRESHOLD};
use segfuse::preprocess::{sample_augmentation, znorm, AugmentSpec};
use segfuse::tiling::{Weighting, DEFAULT_PATCH, DEFAULT_SIGMA_FRAC};
use segfuse::{crop, metrics::EvalConfig, Shape, Spatial};

#[derive(Parser)]
#[command(name = "segfuse", version, about = "Ensemble fusion and evaluation for brain-tumour segmentations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Average fold softmaxes, STAPLE across models, relabel small ET.
    Fuse(FuseArgs),
    /// Dice and HD95 of predictions against ground truth, paired by file stem.
    Eval(EvalArgs),
    /// Rank models by average DSC, then HD95.
    Rank(RankArgs),
    /// Summary table of a per-case metrics CSV.
    Report(ReportArgs),
    /// Write a synthetic phantom fixture set.
    Synth(SynthArgs),
    /// Z-score normalisation, optional nonzero crop and seeded augmentation.
    Preprocess(PreprocessArgs),
    /// Relabel ET as necrosis when the ET volume is below the threshold.
    Postprocess(PostprocessArgs),
    /// Print the sliding-window plan for a volume as JSON.
    TilingPlan(TilingPlanArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightingArg {
    Uniform,
    Gaussian,
}

#[derive(Args)]
struct FuseArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Label-map model as NAME=DIR; repeatable.
    #[arg(long = "model", value_name = "NAME=DIR")]
    models: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also evaluate the fused maps against this directory.
    #[arg(long)]
    gt: Option<PathBuf>,
    #[arg(long)]
    et_threshold: Option<usize>,
    #[arg(long)]
    staple_tol: Option<f64>,
    #[arg(long)]
    staple_max_iters: Option<usize>,
    /// Required stride of tiled manifests, e.g. 64 or 64,64,32.
    #[arg(long, value_parser = parse_shape)]
    stride: Option<Shape>,
    #[arg(long, value_enum)]
    weighting: Option<WeightingArg>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    jobs: Option<usize>,
    /// HD95 assigned when exactly one of prediction and truth is empty.
    #[arg(long)]
    empty_penalty: Option<f64>,
}

#[derive(Args)]
struct RankArgs {
    /// Model summary CSVs or per-case metrics CSVs as [NAME=]PATH.
    #[arg(required = true)]
    inputs: Vec<String>,
    /// Write ranking.json and ranking.txt here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    metrics: PathBuf,
    /// Print JSON instead of the table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 4)]
    cases: usize,
    #[arg(long, default_value = "32", value_parser = parse_shape)]
    shape: Shape,
    #[arg(long, default_value_t = 3)]
    raters: usize,
    #[arg(long, default_value_t = 0.1)]
    rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Emit each model as this many softmax folds instead of label maps.
    #[arg(long, default_value_t = 0)]
    folds: usize,
    #[arg(long, default_value_t = 0.5)]
    temperature: f64,
}

#[derive(Args)]
struct PreprocessArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Crop to the bounding box of nonzero voxels before normalising.
    #[arg(long)]
    crop_nonzero: bool,
    /// Apply the seeded augmentation with this draw index.
    #[arg(long)]
    augment: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PostprocessArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ET_THRESHOLD)]
    et_threshold: usize,
}

#[derive(Args)]
struct TilingPlanArgs {
    #[arg(long, value_parser = parse_shape)]
    shape: Shape,
    #[arg(long, value_parser = parse_shape)]
    patch: Option<Shape>,
    #[arg(long, value_parser = parse_shape)]
    stride: Option<Shape>,
}

fn parse_shape(s: &str) -> Result<Shape, String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts.as_slice() {
        [n] => Ok([*n; 3]),
        [x, y, z] => Ok([*x, *y, *z]),
        _ => Err(format!("expected N or X,Y,Z, got {s:?}")),
    }
}

enum Outcome {
    Ok,
    Partial,
}

fn write_json(path: &Path, value: &segfuse::pipeline::RankReport) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn fuse(a: FuseArgs) -> Result<Outcome> {
    let mut cfg = match &a.config {
        Some(path) => PipelineConfig::load(path)?,
        None => {
            let Some(out) = a.out.clone() else {
                bail!("--out is required without --config");
            };
            let mut models = Vec::new();
            for spec in &a.models {
                let Some((name, dir)) = spec.split_once('=') else {
                    bail!("--model expects NAME=DIR, got {spec:?}");
                };
                models.push(ModelInput {
                    name: name.to_string(),
                    labels_dir: Some(PathBuf::from(dir)),
                    folds: Vec::new(),
                });
            }
            PipelineConfig::new(models, out)
        }
    };
    if a.config.is_some() && !a.models.is_empty() {
        bail!("--model cannot be combined with --config");
    }
    if let Some(out) = a.out {
        cfg.output_dir = out;
    }
    if let Some(gt) = a.gt {
        cfg.gt_dir = Some(gt);
    }
    if let Some(t) = a.et_threshold {
        cfg.et_threshold = t;
    }
    if let Some(t) = a.staple_tol {
        cfg.staple_tol = t;
    }
    if let Some(n) = a.staple_max_iters {
        cfg.staple_max_iters = n;
    }
    if let Some(s) = a.stride {
        cfg.stride = Some(s);
    }
    match a.weighting {
        Some(WeightingArg::Uniform) => cfg.weighting = Weighting::Uniform,
        Some(WeightingArg::Gaussian) => {
            if !matches!(cfg.weighting, Weighting::Gaussian { .. }) {
                cfg.weighting = Weighting::Gaussian {
                    sigma_frac: DEFAULT_SIGMA_FRAC,
                };
            }
        }
        None => {}
    }
    if a.jobs.is_some() {
        cfg.jobs = a.jobs;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }

    let report = run_fuse(&cfg)?;
    println!("fused {} case(s) into {}", report.fused.len(), cfg.output_dir.display());
    let mut partial = !report.failures.is_empty();
    for f in &report.failures {
        eprintln!("error: {}", f.error);
    }
    if let Some(gt) = &cfg.gt_dir {
        let eval_dir = cfg.output_dir.join("eval");
        let ev = run_eval(&cfg.output_dir, gt, &eval_dir, &cfg.eval(), cfg.jobs)?;
        if let Some(s) = &ev.summary {
            print!("{}", s.to_table());
        }
        // fused cases that failed have no output to pair; already reported
        let skipped: Vec<&String> = report.failures.iter().map(|f| &f.case).collect();
        for f in ev.failures.iter().filter(|f| !skipped.contains(&&f.case)) {
            eprintln!("error: {}", f.error);
            partial = true;
        }
    }
    Ok(if partial { Outcome::Partial } else { Outcome::Ok })
}

fn eval(a: EvalArgs) -> Result<Outcome> {
    let mut config = EvalConfig::default();
    if let Some(p) = a.empty_penalty {
        if !(p >= 0.0) {
            bail!("--empty-penalty must be nonnegative");
        }
        config.empty_penalty = p;
    }
    let report = run_eval(&a.pred, &a.gt, &a.out, &config, a.jobs)?;
    println!("evaluated {} case(s); results in {}", report.metrics.len(), a.out.display());
    if let Some(s) = &report.summary {
        print!("{}", s.to_table());
    }
    for f in &report.failures {
        eprintln!("error: {}", f.error);
    }
    Ok(if report.failures.is_empty() {
        Outcome::Ok
    } else {
        Outcome::Partial
    })
}

fn rank(a: RankArgs) -> Result<Outcome> {
    let inputs: Vec<RankInput> = a.inputs.iter().map(|s| RankInput::parse(s)).collect();
    let report = run_rank(&inputs)?;
    let table = report.to_table();
    print!("{table}");
    if let Some(out) = a.out {
        std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        write_json(&out.join("ranking.json"), &report)?;
        std::fs::write(out.join("ranking.txt"), &table)?;
    }
    Ok(Outcome::Ok)
}

fn report(a: ReportArgs) -> Result<Outcome> {
    let s = run_report(&a.metrics)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&s)?);
    } else {
        print!("{}", s.to_table());
    }
    Ok(Outcome::Ok)
}

fn synth(a: SynthArgs) -> Result<Outcome> {
    let cfg = SynthConfig {
        cases: a.cases,
        shape: a.shape,
        raters: a.raters,
        rate: a.rate,
        seed: a.seed,
        folds: a.folds,
        temperature: a.temperature,
    };
    run_synth(&a.out, &cfg)?;
    println!(
        "wrote {} case(s) to {}; run `segfuse fuse --config {}`",
        a.cases,
        a.out.display(),
        a.out.join("pipeline.json").display()
    );
    Ok(Outcome::Ok)
}

fn preprocess(a: PreprocessArgs) -> Result<Outcome> {
    let mut v = load_volume(&a.input)?;
    if a.crop_nonzero {
        let bbox = segfuse::nonzero_bbox(&v)?;
        v = crop(&v, &bbox)?;
    }
    let mut v = znorm(&v)?;
    if let Some(draw) = a.augment {
        let aug = sample_augmentation(&AugmentSpec::new(a.seed), draw)?;
        v = aug.apply(&v);
        eprintln!("{}", serde_json::to_string(&aug)?);
    }
    save_volume(&a.output, &v)?;
    println!("wrote {} with shape {:?}", a.output.display(), v.shape());
    Ok(Outcome::Ok)
}

fn postprocess(a: PostprocessArgs) -> Result<Outcome> {
    let m = load_labels(&a.input)?;
    let out = et_threshold_relabel(&m, a.et_threshold);
    save_labels(&a.output, &out)?;
    println!("ET voxels: {} -> {}", m.count(4), out.count(4));
    Ok(Outcome::Ok)
}

fn plan(a: TilingPlanArgs) -> Result<Outcome> {
    let p = tiling_plan(a.shape, a.patch.unwrap_or(DEFAULT_PATCH), a.stride)?;
    println!("{}", serde_json::to_string_pretty(&p)?);
    Ok(Outcome::Ok)
}

fn main() -> ExitCode {
    // usage errors are config errors (1); clap's own default would be 2
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(u8::from(e.use_stderr()));
        }
    };
    let result = match cli.command {
        Command::Fuse(a) => fuse(a),
        Command::Eval(a) => eval(a),
        Command::Rank(a) => rank(a),
        Command::Report(a) => report(a),
        Command::Synth(a) => synth(a),
        Command::Preprocess(a) => preprocess(a),
        Command::Postprocess(a) => postprocess(a),
        Command::TilingPlan(a) => plan(a),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
