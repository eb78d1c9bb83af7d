//! Seeded synthetic datasets and detections for benchmarks and tests.

use rand::Rng;

use crate::dataset::{CategoryTaxonomy, DetDataset, GroundTruthBox, ImageRecord};
use crate::geometry::{BBox, Detection};
use crate::seed::rng_for;

/// Shape of a synthetic evaluation problem.
#[derive(Debug, Clone, Copy)]
pub struct SynthShape {
    pub images: usize,
    pub max_gt_per_image: usize,
    pub max_dets_per_image: usize,
    pub videos: usize,
    pub width: u32,
    pub height: u32,
}

impl Default for SynthShape {
    fn default() -> Self {
        SynthShape {
            images: 100,
            max_gt_per_image: 6,
            max_dets_per_image: 8,
            videos: 5,
            width: 416,
            height: 416,
        }
    }
}

fn random_box(rng: &mut impl Rng, w: f64, h: f64) -> BBox {
    let bw = rng.random_range(8.0..w / 3.0);
    let bh = rng.random_range(8.0..h / 3.0);
    BBox::coco(rng.random_range(0.0..w - bw), rng.random_range(0.0..h - bh), bw, bh)
}

/// Ground truth with left/right hands; detections are jittered copies of
/// ground truth (some with swapped laterality) mixed with random false
/// positives.
pub fn dataset_and_detections(seed: u64, spec: SynthShape) -> (DetDataset, Vec<Detection>) {
    let mut rng = rng_for(seed, "synth", &[]);
    let (w, h) = (f64::from(spec.width), f64::from(spec.height));
    let mut images = Vec::with_capacity(spec.images);
    let mut anns = Vec::new();
    let mut dets = Vec::new();
    for i in 0..spec.images {
        let video = i * spec.videos.max(1) / spec.images.max(1);
        let image_id = i as u64 + 1;
        images.push(ImageRecord {
            image_id,
            file_name: format!("video{video:02}/{i:06}.png"),
            width: spec.width,
            height: spec.height,
            video_id: format!("video{video:02}"),
        });
        let n_gt = rng.random_range(0..=spec.max_gt_per_image);
        let mut frame_gt = Vec::new();
        for _ in 0..n_gt {
            let gt = GroundTruthBox {
                ann_id: anns.len() as u64 + 1,
                image_id,
                category_id: rng.random_range(0..2),
                bbox: random_box(&mut rng, w, h),
            };
            frame_gt.push(gt.clone());
            anns.push(gt);
        }
        let n_det = rng.random_range(0..=spec.max_dets_per_image);
        for k in 0..n_det {
            let (category_id, bbox) = match frame_gt.get(k) {
                Some(g) if rng.random_bool(0.8) => {
                    let [x, y, bw, bh] = g.bbox.values();
                    let j = |rng: &mut _, s: f64| s * Rng::random_range(rng, -0.15..0.15);
                    let nx = (x + j(&mut rng, bw)).max(0.0);
                    let ny = (y + j(&mut rng, bh)).max(0.0);
                    let nw = (bw + j(&mut rng, bw)).clamp(1.0, w - nx);
                    let nh = (bh + j(&mut rng, bh)).clamp(1.0, h - ny);
                    let cat = if rng.random_bool(0.15) { 1 - g.category_id } else { g.category_id };
                    (cat, BBox::coco(nx, ny, nw, nh))
                }
                _ => (rng.random_range(0..2), random_box(&mut rng, w, h)),
            };
            dets.push(Detection {
                image_id,
                category_id,
                score: rng.random_range(0.0..1.0),
                bbox,
            });
        }
    }
    let ds = DetDataset::new(CategoryTaxonomy::default(), images, anns).expect("synthetic dataset is valid");
    (ds, dets)
}
