//! Frames-per-second and latency measurement of the post-processing stages.
//!
//! These numbers cover only what this crate does per frame (resize,
//! suppression, matching). Network inference is not part of any stage.

use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{letterbox, Sample};
use crate::dataset::GroundTruthBox;
use crate::eval::match_detections;
use crate::geometry::{nms, BBox, Detection};
use crate::seed::rng_for;
use crate::Result;

pub const DEFAULT_WARMUP: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageReport {
    pub stage: String,
    pub frames: usize,
    pub wall_time_s: f64,
    pub fps: f64,
    pub latency_p50_ms: f64,
    pub latency_p95_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub stages: Vec<StageReport>,
}

/// Nearest-rank percentile (`p` in `(0, 100]`) of an ascending slice.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

impl StageReport {
    /// Builds a report from per-frame latencies and the total wall time.
    pub fn from_timings(stage: &str, latencies: &[Duration], wall: Duration) -> Self {
        let mut ms: Vec<f64> = latencies.iter().map(|d| d.as_secs_f64() * 1e3).collect();
        ms.sort_by(f64::total_cmp);
        let wall_time_s = wall.as_secs_f64();
        let frames = latencies.len();
        StageReport {
            stage: stage.to_string(),
            frames,
            wall_time_s,
            fps: if wall_time_s > 0.0 { frames as f64 / wall_time_s } else { f64::INFINITY },
            latency_p50_ms: nearest_rank(&ms, 50.0),
            latency_p95_ms: nearest_rank(&ms, 95.0),
        }
    }
}

/// Times `stage` over `frames` calls after `warmup` untimed calls. The
/// closure receives the frame index (warmup frames included).
pub fn measure<F: FnMut(usize)>(name: &str, frames: usize, warmup: usize, mut stage: F) -> StageReport {
    for i in 0..warmup {
        stage(i);
    }
    let mut latencies = Vec::with_capacity(frames);
    let start = Instant::now();
    for i in 0..frames {
        let t = Instant::now();
        stage(warmup + i);
        latencies.push(t.elapsed());
    }
    StageReport::from_timings(name, &latencies, start.elapsed())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Letterbox,
    Nms,
    Match,
    E2e,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Letterbox => "letterbox",
            Stage::Nms => "nms",
            Stage::Match => "match",
            Stage::E2e => "e2e",
        }
    }
}

/// Synthetic per-frame inputs: a camera frame, raw candidate boxes and the
/// frame's ground truth.
#[derive(Debug, Clone)]
pub struct Workload {
    pub frame: Sample,
    pub candidates: Vec<Vec<Detection>>,
    pub ground_truth: Vec<Vec<GroundTruthBox>>,
    pub target: u32,
    pub nms_iou: f64,
    pub match_iou: f64,
}

/// Random boxes clustered around a few hand-sized objects per frame, so
/// suppression has real overlap to work through.
pub fn synthetic_candidates(seed: u64, frame: u64, count: usize, width: f64, height: f64) -> Vec<Detection> {
    let mut rng = rng_for(seed, "bench", &[frame]);
    let objects: Vec<(f64, f64)> = (0..4)
        .map(|_| (rng.random_range(0.0..width - 120.0), rng.random_range(0.0..height - 120.0)))
        .collect();
    (0..count)
        .map(|i| {
            let (ox, oy) = objects[i % objects.len()];
            Detection {
                image_id: frame,
                category_id: (i % 2) as u32,
                score: rng.random_range(0.0..1.0),
                bbox: BBox::coco(
                    ox + rng.random_range(-20.0..20.0),
                    oy + rng.random_range(-20.0..20.0),
                    rng.random_range(60.0..120.0),
                    rng.random_range(60.0..120.0),
                ),
            }
        })
        .collect()
}

impl Workload {
    /// `distinct_frames` pre-generated frames of `boxes_per_frame`
    /// candidates; measurement cycles through them.
    pub fn synthetic(seed: u64, distinct_frames: usize, boxes_per_frame: usize) -> Self {
        let (w, h) = (1280u32, 720u32);
        let image = image::RgbImage::from_fn(w, h, |x, y| image::Rgb([(x % 251) as u8, (y % 241) as u8, ((x ^ y) % 256) as u8]));
        let candidates: Vec<Vec<Detection>> = (0..distinct_frames.max(1))
            .map(|f| synthetic_candidates(seed, f as u64, boxes_per_frame, f64::from(w), f64::from(h)))
            .collect();
        let ground_truth = candidates
            .iter()
            .map(|dets| {
                nms(dets, 0.45, true)
                    .iter()
                    .take(4)
                    .enumerate()
                    .map(|(i, d)| GroundTruthBox {
                        ann_id: i as u64,
                        image_id: d.image_id,
                        category_id: d.category_id,
                        bbox: d.bbox,
                    })
                    .collect()
            })
            .collect();
        Workload {
            frame: Sample::new(image, Vec::new()),
            candidates,
            ground_truth,
            target: 416,
            nms_iou: 0.45,
            match_iou: 0.5,
        }
    }

    fn slot(&self, i: usize) -> usize {
        i % self.candidates.len()
    }

    pub fn run_letterbox(&self) -> Result<Sample> {
        letterbox(&self.frame, self.target)
    }

    pub fn run_nms(&self, i: usize) -> Vec<Detection> {
        nms(&self.candidates[self.slot(i)], self.nms_iou, true)
    }

    pub fn run_match(&self, i: usize, dets: &[Detection]) -> usize {
        match_detections(&self.ground_truth[self.slot(i)], dets, self.match_iou, true).true_positives()
    }

    /// Runs one stage once for frame `i`.
    pub fn run(&self, stage: Stage, i: usize) -> Result<()> {
        match stage {
            Stage::Letterbox => {
                std::hint::black_box(self.run_letterbox()?);
            }
            Stage::Nms => {
                std::hint::black_box(self.run_nms(i));
            }
            Stage::Match => {
                let kept = &self.candidates[self.slot(i)];
                std::hint::black_box(self.run_match(i, kept));
            }
            Stage::E2e => {
                std::hint::black_box(self.run_letterbox()?);
                let kept = self.run_nms(i);
                std::hint::black_box(self.run_match(i, &kept));
            }
        }
        Ok(())
    }
}

/// Measures each requested stage on `workload`.
pub fn run_stages(workload: &Workload, stages: &[Stage], frames: usize, warmup: usize) -> Result<BenchReport> {
    let mut reports = Vec::new();
    for &stage in stages {
        let mut failure = None;
        let report = measure(stage.name(), frames, warmup, |i| {
            if let Err(e) = workload.run(stage, i) {
                failure.get_or_insert(e);
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        reports.push(report);
    }
    Ok(BenchReport { stages: reports })
}
