//! Shared fixtures and a brute-force reference evaluator for the
//! integration tests. The evaluator deliberately shares no code with the
//! library: plain tuples in, plain numbers out.
#![allow(dead_code)]

use detkit::dataset::{CategoryTaxonomy, DetDataset, GroundTruthBox, ImageRecord};
use detkit::geometry::{BBox, Detection};
use rand::seq::SliceRandom;
use rand::Rng;

pub const CLASSES: [u32; 2] = [0, 1];

/// An evaluation problem as plain data. Image `i` of `image_ids` is the
/// `i`-th dataset image.
#[derive(Debug, Clone)]
pub struct Instance {
    pub image_ids: Vec<u64>,
    /// `(ann_id, image position, class, [x, y, w, h])`
    pub gts: Vec<(u64, usize, u32, [f64; 4])>,
    /// `(image position, class, score, [x, y, w, h])`
    pub dets: Vec<(usize, u32, f64, [f64; 4])>,
}

impl Instance {
    pub fn dataset(&self) -> DetDataset {
        let images = self
            .image_ids
            .iter()
            .enumerate()
            .map(|(i, &id)| ImageRecord {
                image_id: id,
                file_name: format!("v{}/f{i}.png", i % 2),
                width: 100,
                height: 100,
                video_id: format!("v{}", i % 2),
            })
            .collect();
        let anns = self
            .gts
            .iter()
            .map(|&(ann_id, img, cat, [x, y, w, h])| GroundTruthBox {
                ann_id,
                image_id: self.image_ids[img],
                category_id: cat,
                bbox: BBox::coco(x, y, w, h),
            })
            .collect();
        DetDataset::new(CategoryTaxonomy::default(), images, anns).unwrap()
    }

    pub fn detections(&self) -> Vec<Detection> {
        self.dets
            .iter()
            .map(|&(img, cat, score, [x, y, w, h])| Detection {
                image_id: self.image_ids[img],
                category_id: cat,
                score,
                bbox: BBox::coco(x, y, w, h),
            })
            .collect()
    }
}

fn random_box(rng: &mut impl Rng, grid: bool) -> [f64; 4] {
    if grid {
        // Integer coordinates make exact IoU ties and exact threshold hits common.
        let w = rng.random_range(1..=40) as f64;
        let h = rng.random_range(1..=40) as f64;
        [rng.random_range(0..=(100 - w as i32)) as f64, rng.random_range(0..=(100 - h as i32)) as f64, w, h]
    } else {
        let w = rng.random_range(1.0..40.0);
        let h = rng.random_range(1.0..40.0);
        [rng.random_range(0.0..100.0 - w), rng.random_range(0.0..100.0 - h), w, h]
    }
}

fn near(rng: &mut impl Rng, b: [f64; 4], grid: bool) -> [f64; 4] {
    let mut j = |v: f64| {
        if grid {
            v + rng.random_range(-4..=4) as f64
        } else {
            v + rng.random_range(-4.0..4.0)
        }
    };
    let (x, y) = (j(b[0]).clamp(0.0, 99.0), j(b[1]).clamp(0.0, 99.0));
    let (w, h) = (j(b[2]).clamp(1.0, 100.0 - x), j(b[3]).clamp(1.0, 100.0 - y));
    [x, y, w, h]
}

/// Random instance with at most `max_images` images, `max_gt` ground-truth
/// boxes and `max_dets` detections per image.
pub fn random_instance(rng: &mut impl Rng, max_images: usize, max_gt: usize, max_dets: usize) -> Instance {
    let grid = rng.random_bool(0.5);
    let coarse_scores = rng.random_bool(0.5);
    let n_images = rng.random_range(1..=max_images);
    let mut image_ids: Vec<u64> = (1..=20).collect();
    image_ids.shuffle(rng);
    image_ids.truncate(n_images);

    let mut gts = Vec::new();
    let mut dets = Vec::new();
    for img in 0..n_images {
        let mut here = Vec::new();
        for _ in 0..rng.random_range(0..=max_gt) {
            let b = random_box(rng, grid);
            here.push(b);
            gts.push((0, img, CLASSES[rng.random_range(0..2)], b));
        }
        for _ in 0..rng.random_range(0..=max_dets) {
            let b = match here.len() {
                0 => random_box(rng, grid),
                n if rng.random_bool(0.7) => {
                    let anchor = here[rng.random_range(0..n)];
                    near(rng, anchor, grid)
                }
                _ => random_box(rng, grid),
            };
            let score = if coarse_scores {
                rng.random_range(0..=10) as f64 / 10.0
            } else {
                rng.random_range(0.0..=1.0)
            };
            dets.push((img, CLASSES[rng.random_range(0..2)], score, b));
        }
    }
    // Annotation ids in shuffled order so the lower-id tie rule is exercised
    // independently of storage order.
    let mut ids: Vec<u64> = (1..=gts.len() as u64).map(|i| i * 7).collect();
    ids.shuffle(rng);
    for (g, id) in gts.iter_mut().zip(ids) {
        g.0 = id;
    }
    Instance { image_ids, gts, dets }
}

pub fn oracle_iou(a: [f64; 4], b: [f64; 4]) -> f64 {
    let ix = ((a[0] + a[2]).min(b[0] + b[2]) - a[0].max(b[0])).max(0.0);
    let iy = ((a[1] + a[3]).min(b[1] + b[3]) - a[1].max(b[1])).max(0.0);
    let inter = ix * iy;
    let union = a[2] * a[3] + b[2] * b[3] - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Interpolated precision at each of the 101 recall levels, by direct
/// search over every rank (no running envelope).
pub fn oracle_ap(ranked_tp: &[bool], gt_count: usize) -> f64 {
    if gt_count == 0 {
        return if ranked_tp.is_empty() { 1.0 } else { 0.0 };
    }
    let mut total = 0.0;
    for level in 0..=100usize {
        let mut best = 0.0f64;
        for k in 0..ranked_tp.len() {
            let tp = ranked_tp[..=k].iter().filter(|&&t| t).count();
            if tp * 100 >= level * gt_count {
                best = best.max(tp as f64 / (k + 1) as f64);
            }
        }
        total += best;
    }
    total / 101.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub map_50: f64,
    pub map_50_95: f64,
    /// `(class, AP at each of the ten thresholds)` for classes with ground truth.
    pub per_class: Vec<(u32, [f64; 10])>,
}

/// Brute-force COCO-protocol evaluation: per image and class, detections in
/// score order (input order on ties, top 100) each take the free ground
/// truth with the highest IoU at or above the threshold (lower ann_id on
/// ties); outcomes are pooled across images in image order and ranked by
/// score.
pub fn oracle_map(inst: &Instance) -> OracleResult {
    let mut per_class = Vec::new();
    for &cat in &CLASSES {
        let gt_count = inst.gts.iter().filter(|g| g.2 == cat).count();
        if gt_count == 0 {
            continue;
        }
        let mut aps = [0.0; 10];
        for (t, ap) in aps.iter_mut().enumerate() {
            let thr = (50 + 5 * t) as f64 / 100.0;
            // (score, image, rank within image, true positive)
            let mut pooled: Vec<(f64, usize, usize, bool)> = Vec::new();
            for img in 0..inst.image_ids.len() {
                let gts: Vec<_> = inst.gts.iter().filter(|g| g.1 == img && g.2 == cat).collect();
                let mut dets: Vec<_> = inst.dets.iter().filter(|d| d.0 == img && d.1 == cat).collect();
                dets.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap());
                dets.truncate(100);
                let mut used = vec![false; gts.len()];
                for (rank, d) in dets.iter().enumerate() {
                    let mut candidates: Vec<(f64, u64, usize)> = gts
                        .iter()
                        .enumerate()
                        .filter(|(gi, _)| !used[*gi])
                        .map(|(gi, g)| (oracle_iou(d.3, g.3), g.0, gi))
                        .filter(|c| c.0 >= thr)
                        .collect();
                    candidates.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
                    let tp = if let Some(&(_, _, gi)) = candidates.first() {
                        used[gi] = true;
                        true
                    } else {
                        false
                    };
                    pooled.push((d.2, img, rank, tp));
                }
            }
            pooled.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            let ranked: Vec<bool> = pooled.iter().map(|p| p.3).collect();
            *ap = oracle_ap(&ranked, gt_count);
        }
        per_class.push((cat, aps));
    }
    if per_class.is_empty() {
        return OracleResult {
            map_50: 0.0,
            map_50_95: 0.0,
            per_class,
        };
    }
    let k = per_class.len() as f64;
    let map_50 = per_class.iter().map(|c| c.1[0]).sum::<f64>() / k;
    let map_50_95 = per_class.iter().map(|c| c.1.iter().sum::<f64>() / 10.0).sum::<f64>() / k;
    OracleResult {
        map_50,
        map_50_95,
        per_class,
    }
}

/// Largest absolute difference between the library's summary and the oracle,
/// or `None` if the per-class tables do not line up.
pub fn oracle_gap(summary: &detkit::eval::MapSummary, oracle: &OracleResult) -> Option<f64> {
    if summary.per_class.len() != oracle.per_class.len() {
        return None;
    }
    let mut gap = (summary.map_50 - oracle.map_50).abs().max((summary.map_50_95 - oracle.map_50_95).abs());
    for (c, (cat, aps)) in summary.per_class.iter().zip(&oracle.per_class) {
        if c.category_id != *cat {
            return None;
        }
        for (a, b) in c.ap.iter().zip(aps) {
            gap = gap.max((a - b).abs());
        }
    }
    Some(gap)
}
