//! `detkit` command-line entry point.
//!
//! Exit codes: 0 success, 1 validation/data error, 2 usage or configuration
//! error. Diagnostics go to stderr; data goes to stdout or `--out`.

pub mod config;
pub mod report;

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::augment::{augment_batch, AugmentInput, LabeledBox, Sample};
use crate::bench::{run_stages, Stage, Workload, DEFAULT_WARMUP};
use crate::dataset::{
    drop_videos, parse_coco, read_manifest, serialize_coco, split_by_video, write_yolo_labels, yolo_label_path,
    yolo_label_text, DetDataset, GroundTruthBox, ImageRecord,
};
use crate::eval::{confusion, evaluate, suppress_per_image, EvalReport, Normalization};
use crate::exec::Execution;
use crate::geometry::{parse_detections, Detection};
use crate::trainctl::{build_plan, read_metric_history, simulate, RoundSchedule};
use crate::{Error, Result};

use config::RunConfig;
use report::{emit_report, summary_text, write_files, Format};

#[derive(Debug, Parser)]
#[command(name = "detkit", version, about = "Detection dataset toolkit and COCO-protocol evaluation harness")]
pub struct Cli {
    /// Seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML configuration file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file or directory (per subcommand).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format for data documents.
    #[arg(long, global = true, value_parser = parse_format)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

fn parse_format(s: &str) -> std::result::Result<Format, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write YOLO label files for a COCO annotation file.
    Convert(InputArgs),
    /// Drop excluded videos and split the rest into train/test by video.
    Split(SplitArgs),
    /// Run the augmentation pipeline and write PNG + YOLO labels.
    Augment(AugmentArgs),
    /// Evaluate detections against ground truth.
    Evaluate(EvalArgs),
    /// Print the background-aware confusion matrix as CSV.
    Confusion(EvalArgs),
    /// Print the epoch plan, or replay a metric series through early stopping.
    Schedule(ScheduleArgs),
    /// Measure post-processing throughput.
    Bench(BenchArgs),
    /// Evaluate and write every report artifact into `--out`.
    Report(EvalArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// COCO ground-truth file.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// `video_id,file_name` CSV manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub train_videos: usize,
    #[arg(long)]
    pub test_videos: usize,
    /// Video ids removed before splitting.
    #[arg(long, value_delimiter = ',')]
    pub exclude: Vec<String>,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Directory the COCO `file_name`s are relative to.
    #[arg(long)]
    pub images: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub epoch: usize,
    #[arg(long)]
    pub epochs_total: Option<usize>,
    #[arg(long)]
    pub mosaic_cutoff: Option<usize>,
    #[arg(long)]
    pub flip_prob: Option<f64>,
    /// `lo,hi`
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub scale: Option<Vec<f64>>,
    #[arg(long)]
    pub rotate_max: Option<f64>,
    /// `h,s,v`
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub hsv: Option<Vec<f64>>,
    #[arg(long)]
    pub size: Option<u32>,
    #[arg(long)]
    pub no_laterality_swap: bool,
    /// Process at most this many images.
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// COCO results file.
    #[arg(long)]
    pub dets: Option<PathBuf>,
    /// IoU for P/R/F1 and PR curves (for `confusion`: pairing IoU).
    #[arg(long)]
    pub iou: Option<f64>,
    /// Minimum detection score for P/R/F1 and the confusion matrix.
    #[arg(long)]
    pub conf: Option<f64>,
    /// IoU for confusion-matrix pairing.
    #[arg(long)]
    pub confusion_iou: Option<f64>,
    /// row | column | none
    #[arg(long)]
    pub normalize: Option<Normalization>,
    /// Apply class-aware NMS at this IoU before evaluating.
    #[arg(long)]
    pub nms: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    /// `epoch,metric` CSV to replay through the early stopper.
    #[arg(long)]
    pub simulate: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub lr0: Option<f64>,
    #[arg(long)]
    pub lr_final_fraction: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub mosaic_cutoff: Option<usize>,
    /// One cosine over all rounds instead of restarting each round.
    #[arg(long)]
    pub continuous: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 200)]
    pub frames: usize,
    #[arg(long, default_value_t = DEFAULT_WARMUP)]
    pub warmup: usize,
    /// Stage to time; all stages when omitted.
    #[arg(long, value_enum)]
    pub stage: Option<Stage>,
    /// Candidate boxes per synthetic frame.
    #[arg(long, default_value_t = 1000)]
    pub boxes: usize,
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match dispatch(cli, &mut out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command, writing stdout data to `stdout`.
pub fn dispatch(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let format = cli.format.unwrap_or(Format::Json);
    let out = cli.out.clone();
    match cli.command {
        Command::Convert(a) => {
            apply_input(&mut cfg, &a);
            let cfg = cfg.finalize()?;
            let dir = out.ok_or_else(|| Error::Usage("convert needs --out <dir>".into()))?;
            let ds = load_dataset(&cfg)?;
            let files = write_yolo_labels(&ds, &dir)?;
            write_json(stdout, &serde_json::json!({ "files_written": files }))
        }
        Command::Split(a) => {
            apply_input(&mut cfg, &a.input);
            let cfg = cfg.finalize()?;
            run_split(&cfg, &a, out.as_deref(), stdout)
        }
        Command::Augment(a) => {
            apply_input(&mut cfg, &a.input);
            apply_augment(&mut cfg, &a)?;
            let cfg = cfg.finalize()?;
            run_augment(&cfg, &a, out.as_deref(), stdout)
        }
        Command::Evaluate(a) => {
            apply_eval(&mut cfg, &a);
            let cfg = cfg.finalize()?;
            let report = run_evaluation(&cfg, a.nms)?;
            if let Some(dir) = out {
                let mut files = emit_report(&report, Format::Json);
                files.extend(emit_report(&report, Format::Csv));
                write_files(&dir, &files)?;
            }
            let primary = emit_report(&report, format).swap_remove(0);
            stdout.write_all(&primary.bytes).map_err(stdout_err)
        }
        Command::Confusion(a) => {
            if let Some(iou) = a.iou {
                cfg.eval.confusion_iou = iou;
            }
            apply_eval(&mut cfg, &EvalArgs { iou: None, ..a });
            let cfg = cfg.finalize()?;
            let ds = load_dataset(&cfg)?;
            let dets = load_detections(&cfg, None)?;
            let m = confusion(&ds, &dets, cfg.eval.confusion_iou, cfg.eval.conf, cfg.eval.normalization)?;
            let text = m.to_csv();
            match out {
                Some(path) => std::fs::write(&path, &text).map_err(|e| Error::io(path, e)),
                None => stdout.write_all(text.as_bytes()).map_err(stdout_err),
            }
        }
        Command::Report(a) => {
            apply_eval(&mut cfg, &a);
            let cfg = cfg.finalize()?;
            let dir = out.ok_or_else(|| Error::Usage("report needs --out <dir>".into()))?;
            let report = run_evaluation(&cfg, a.nms)?;
            let mut files = emit_report(&report, Format::Json);
            files.extend(emit_report(&report, Format::Csv));
            write_files(&dir, &files)?;
            stdout.write_all(summary_text(&report).as_bytes()).map_err(stdout_err)
        }
        Command::Schedule(a) => {
            apply_schedule(&mut cfg, &a);
            let cfg = cfg.finalize()?;
            let body = match &a.simulate {
                Some(path) => {
                    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
                    let outcome = simulate(cfg.train.patience, &read_metric_history(file)?)?;
                    json_bytes(&outcome)
                }
                None => build_plan(&cfg.train)?.to_csv().into_bytes(),
            };
            emit_to(out.as_deref(), &body, stdout)
        }
        Command::Bench(a) => {
            let cfg = cfg.finalize()?;
            if a.frames == 0 {
                return Err(Error::Usage("--frames must be positive".into()));
            }
            let stages = match a.stage {
                Some(s) => vec![s],
                None => vec![Stage::Letterbox, Stage::Nms, Stage::Match, Stage::E2e],
            };
            let workload = Workload::synthetic(cfg.seed, 16, a.boxes);
            let report = run_stages(&workload, &stages, a.frames, a.warmup)?;
            emit_to(out.as_deref(), &json_bytes(&report), stdout)
        }
    }
}

fn stdout_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("outputs always serialize");
    v.push(b'\n');
    v
}

fn write_json<T: Serialize>(stdout: &mut dyn Write, value: &T) -> Result<()> {
    stdout.write_all(&json_bytes(value)).map_err(stdout_err)
}

fn emit_to(path: Option<&Path>, body: &[u8], stdout: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, body).map_err(|e| Error::io(p, e)),
        None => stdout.write_all(body).map_err(stdout_err),
    }
}

fn apply_input(cfg: &mut RunConfig, a: &InputArgs) {
    if a.gt.is_some() {
        cfg.paths.gt.clone_from(&a.gt);
    }
    if a.manifest.is_some() {
        cfg.paths.manifest.clone_from(&a.manifest);
    }
}

fn apply_eval(cfg: &mut RunConfig, a: &EvalArgs) {
    apply_input(cfg, &a.input);
    if a.dets.is_some() {
        cfg.paths.dets.clone_from(&a.dets);
    }
    let e = &mut cfg.eval;
    e.iou = a.iou.unwrap_or(e.iou);
    e.conf = a.conf.unwrap_or(e.conf);
    e.confusion_iou = a.confusion_iou.unwrap_or(e.confusion_iou);
    e.normalization = a.normalize.unwrap_or(e.normalization);
}

fn apply_augment(cfg: &mut RunConfig, a: &AugmentArgs) -> Result<()> {
    if a.images.is_some() {
        cfg.paths.images.clone_from(&a.images);
    }
    if let Some(n) = a.epochs_total {
        cfg.train.epochs = n;
    }
    if let Some(n) = a.mosaic_cutoff {
        cfg.train.mosaic_cutoff = n;
    }
    let g = &mut cfg.augment;
    g.flip_prob = a.flip_prob.unwrap_or(g.flip_prob);
    g.rotate_deg_max = a.rotate_max.unwrap_or(g.rotate_deg_max);
    g.target_size = a.size.unwrap_or(g.target_size);
    if a.no_laterality_swap {
        g.swap_laterality = false;
    }
    if let Some(s) = &a.scale {
        g.scale_range = (s[0], s[1]);
    }
    if let Some(h) = &a.hsv {
        g.hsv_gains = (h[0], h[1], h[2]);
    }
    Ok(())
}

fn apply_schedule(cfg: &mut RunConfig, a: &ScheduleArgs) {
    let t = &mut cfg.train;
    t.epochs = a.epochs.unwrap_or(t.epochs);
    t.rounds = a.rounds.unwrap_or(t.rounds);
    t.lr0 = a.lr0.unwrap_or(t.lr0);
    t.lr_final_fraction = a.lr_final_fraction.unwrap_or(t.lr_final_fraction);
    t.patience = a.patience.unwrap_or(t.patience);
    t.mosaic_cutoff = a.mosaic_cutoff.unwrap_or(t.mosaic_cutoff);
    if a.continuous {
        t.round_schedule = RoundSchedule::Continuous;
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn load_dataset(cfg: &RunConfig) -> Result<DetDataset> {
    let gt = cfg
        .paths
        .gt
        .as_deref()
        .ok_or_else(|| Error::Usage("missing --gt <coco.json>".into()))?;
    let ds = parse_coco(&read_file(gt)?)?;
    match cfg.paths.manifest.as_deref() {
        Some(m) => {
            let file = std::fs::File::open(m).map_err(|e| Error::io(m, e))?;
            Ok(ds.with_manifest(&read_manifest(file)?))
        }
        None => Ok(ds),
    }
}

fn load_detections(cfg: &RunConfig, nms_iou: Option<f64>) -> Result<Vec<Detection>> {
    let path = cfg
        .paths
        .dets
        .as_deref()
        .ok_or_else(|| Error::Usage("missing --dets <results.json>".into()))?;
    let dets = parse_detections(&read_file(path)?)?;
    Ok(match nms_iou {
        Some(t) if (0.0..=1.0).contains(&t) => suppress_per_image(&dets, t, Execution::default()),
        Some(t) => return Err(Error::Usage(format!("--nms {t} outside [0, 1]"))),
        None => dets,
    })
}

fn run_evaluation(cfg: &RunConfig, nms_iou: Option<f64>) -> Result<EvalReport> {
    let ds = load_dataset(cfg)?;
    let dets = load_detections(cfg, nms_iou)?;
    evaluate(&ds, &dets, &cfg.eval, Execution::default())
}

#[derive(Serialize)]
struct SplitSummary {
    dropped: crate::dataset::DropSummary,
    train_videos: Vec<String>,
    test_videos: Vec<String>,
    train_images: usize,
    test_images: usize,
    train_annotations: usize,
    test_annotations: usize,
}

fn run_split(cfg: &RunConfig, a: &SplitArgs, out: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    let ds = load_dataset(cfg)?;
    let excluded: BTreeSet<String> = a.exclude.iter().filter(|s| !s.is_empty()).cloned().collect();
    let (kept, dropped) = drop_videos(&ds, &excluded)?;
    let (train, test) = split_by_video(&kept, a.train_videos, a.test_videos, cfg.seed)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, part) in [("train.json", &train), ("test.json", &test)] {
            let path = dir.join(name);
            std::fs::write(&path, serialize_coco(part)).map_err(|e| Error::io(&path, e))?;
        }
    }
    write_json(
        stdout,
        &SplitSummary {
            dropped,
            train_videos: train.video_ids().into_iter().collect(),
            test_videos: test.video_ids().into_iter().collect(),
            train_images: train.images().len(),
            test_images: test.images().len(),
            train_annotations: train.annotations().len(),
            test_annotations: test.annotations().len(),
        },
    )
}

fn run_augment(cfg: &RunConfig, a: &AugmentArgs, out: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    let out = out.ok_or_else(|| Error::Usage("augment needs --out <dir>".into()))?;
    let root = cfg
        .paths
        .images
        .as_deref()
        .ok_or_else(|| Error::Usage("missing --images <dir>".into()))?;
    let ds = load_dataset(cfg)?;
    let by_image = ds.annotations_by_image();
    let count = a.limit.unwrap_or(usize::MAX).min(ds.images().len());
    let samples: Vec<Sample> = ds.images()[..count]
        .iter()
        .map(|img| {
            let boxes = by_image
                .get(&img.image_id)
                .map(|v| v.iter().map(|g| LabeledBox { category_id: g.category_id, bbox: g.bbox }).collect())
                .unwrap_or_default();
            Sample::load_png(&root.join(&img.file_name), boxes)
        })
        .collect::<Result<_>>()?;
    let inputs: Vec<AugmentInput> = (0..samples.len())
        .map(|i| {
            let pick = |k: usize| samples[(i + k) % samples.len()].clone();
            AugmentInput::Quad(Box::new([pick(0), pick(1), pick(2), pick(3)]))
        })
        .collect();
    let outputs = augment_batch(
        &inputs,
        &cfg.augment,
        a.epoch,
        cfg.train.epochs,
        cfg.train.mosaic_cutoff,
        0,
        Execution::default(),
    )?;

    for (img, sample) in ds.images()[..count].iter().zip(&outputs) {
        let label_rel = yolo_label_path(&img.file_name)?;
        let label_path = out.join(&label_rel);
        if let Some(parent) = label_path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        sample.save_png(&label_path.with_extension("png"))?;
        let single = sample_dataset(&ds, img, sample)?;
        let text = yolo_label_text(&single, &single.images()[0])?;
        std::fs::write(&label_path, text).map_err(|e| Error::io(&label_path, e))?;
    }
    write_json(stdout, &serde_json::json!({ "samples_written": outputs.len(), "epoch": a.epoch }))
}

/// One-image dataset describing an augmented sample, for label emission.
fn sample_dataset(ds: &DetDataset, img: &ImageRecord, sample: &Sample) -> Result<DetDataset> {
    let dims = sample.dims();
    let record = ImageRecord {
        width: dims.width,
        height: dims.height,
        ..img.clone()
    };
    let anns = sample
        .boxes
        .iter()
        .enumerate()
        .map(|(i, b)| GroundTruthBox {
            ann_id: i as u64,
            image_id: img.image_id,
            category_id: b.category_id,
            bbox: b.bbox,
        })
        .collect();
    DetDataset::new(ds.taxonomy().clone(), vec![record], anns)
}
