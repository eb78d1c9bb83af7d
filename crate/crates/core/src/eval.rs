//! COCO-protocol detection evaluation.
//!
//! Greedy score-ordered matching at ten IoU thresholds (0.50:0.05:0.95),
//! 101-point interpolated AP, macro-averaged over classes that have ground
//! truth, plus precision/recall/F1 and a confusion matrix with an explicit
//! background row and column.
//!
//! All per-image work is independent and runs through [`Execution`]; the
//! per-class accumulation afterwards is sequential and order-stable, so the
//! sequential and parallel paths produce identical reports.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::{DetDataset, GroundTruthBox};
use crate::exec::Execution;
use crate::geometry::{iou_corners, Detection};
use crate::{Error, Result};

/// Number of IoU thresholds in the 0.50:0.95 sweep.
pub const NUM_IOU_THRESHOLDS: usize = 10;
/// Recall sampling points for interpolated AP.
pub const RECALL_POINTS: usize = 101;
/// Detections kept per image and class, highest score first.
pub const MAX_DETS: usize = 100;

/// `0.50, 0.55, ..., 0.95`, each the double nearest the decimal value.
pub fn iou_thresholds() -> [f64; NUM_IOU_THRESHOLDS] {
    std::array::from_fn(|i| (50 + 5 * i) as f64 / 100.0)
}

/// One detection's outcome in score order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DetMatch {
    /// Index into the detection slice given to [`match_detections`].
    pub det_index: usize,
    pub gt_ann_id: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatchResult {
    /// Detections in descending score order.
    pub detections: Vec<DetMatch>,
    /// Aligned with the ground-truth slice.
    pub gt_matched: Vec<bool>,
}

impl MatchResult {
    pub fn true_positives(&self) -> usize {
        self.detections.iter().filter(|m| m.gt_ann_id.is_some()).count()
    }

    pub fn false_positives(&self) -> usize {
        self.detections.len() - self.true_positives()
    }

    pub fn false_negatives(&self) -> usize {
        self.gt_matched.iter().filter(|m| !**m).count()
    }
}

/// Greedy one-to-one assignment. Detections are visited in `det_order`;
/// each claims the free, eligible ground truth with the highest IoU at or
/// above `threshold`, preferring the lower ann_id on equal IoU.
fn greedy_assign<F>(
    det_order: &[usize],
    gt_ann_ids: &[u64],
    iou_of: impl Fn(usize, usize) -> f64,
    eligible: F,
    threshold: f64,
) -> Vec<Option<usize>>
where
    F: Fn(usize, usize) -> bool,
{
    let mut taken = vec![false; gt_ann_ids.len()];
    det_order
        .iter()
        .map(|&d| {
            let mut best: Option<(usize, f64)> = None;
            for g in 0..gt_ann_ids.len() {
                if taken[g] || !eligible(d, g) {
                    continue;
                }
                let v = iou_of(d, g);
                if v < threshold {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((b, bv)) => v > bv || (v == bv && gt_ann_ids[g] < gt_ann_ids[b]),
                };
                if better {
                    best = Some((g, v));
                }
            }
            let g = best.map(|(g, _)| g);
            if let Some(g) = g {
                taken[g] = true;
            }
            g
        })
        .collect()
}

/// Matches the detections of one image against its ground truth.
///
/// With `class_aware` a detection can only claim ground truth of its own
/// category; otherwise any ground truth is eligible.
pub fn match_detections(
    gts: &[GroundTruthBox],
    dets: &[Detection],
    iou_threshold: f64,
    class_aware: bool,
) -> MatchResult {
    let order = score_order_stable(dets);
    let gt_corners: Vec<[f64; 4]> = gts.iter().map(|g| g.bbox.corners()).collect();
    let det_corners: Vec<[f64; 4]> = dets.iter().map(|d| d.bbox.corners()).collect();
    let ids: Vec<u64> = gts.iter().map(|g| g.ann_id).collect();
    let assigned = greedy_assign(
        &order,
        &ids,
        |d, g| iou_corners(det_corners[d], gt_corners[g]),
        |d, g| !class_aware || dets[d].category_id == gts[g].category_id,
        iou_threshold,
    );
    let mut gt_matched = vec![false; gts.len()];
    let detections = order
        .iter()
        .zip(&assigned)
        .map(|(&d, g)| {
            if let Some(g) = *g {
                gt_matched[g] = true;
            }
            DetMatch {
                det_index: d,
                gt_ann_id: g.map(|g| gts[g].ann_id),
            }
        })
        .collect();
    MatchResult {
        detections,
        gt_matched,
    }
}

/// Descending score, ties by input index.
fn score_order_stable(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&i, &j| dets[j].score.total_cmp(&dets[i].score).then(i.cmp(&j)));
    order
}

/// A scored detection outcome pooled across images.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredMatch {
    pub score: f64,
    pub true_positive: bool,
}

/// 101-point interpolated average precision.
///
/// Outcomes are ranked by descending score (stable for ties). At each
/// recall level `r in {0, 0.01, ..., 1}` the interpolated precision is the
/// maximum precision over ranks whose recall reaches `r`, or 0 if none does.
/// With no ground truth, AP is 1 when there are also no detections and 0
/// otherwise.
pub fn average_precision(matches: &[ScoredMatch], gt_count: usize) -> f64 {
    if gt_count == 0 {
        return if matches.is_empty() { 1.0 } else { 0.0 };
    }
    let mut ranked: Vec<&ScoredMatch> = matches.iter().collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score));

    let mut tp_cum = Vec::with_capacity(ranked.len());
    let mut precision = Vec::with_capacity(ranked.len());
    let mut tp = 0usize;
    for (rank, m) in ranked.iter().enumerate() {
        tp += usize::from(m.true_positive);
        tp_cum.push(tp);
        precision.push(tp as f64 / (rank + 1) as f64);
    }
    for i in (1..precision.len()).rev() {
        if precision[i] > precision[i - 1] {
            precision[i - 1] = precision[i];
        }
    }

    // Recall reaches level r/100 iff 100 * tp >= r * gt_count; exact in integers.
    let sum: f64 = (0..RECALL_POINTS)
        .map(|r| {
            let first = tp_cum.partition_point(|&t| 100 * t < r * gt_count);
            precision.get(first).copied().unwrap_or(0.0)
        })
        .sum();
    sum / RECALL_POINTS as f64
}

/// Per-(image, class) matching outcome at every threshold of a sweep.
#[derive(Debug, Default)]
struct ImageClassOutcome {
    scores: Vec<f64>,
    /// `true_positive[t][rank]`
    true_positive: Vec<Vec<bool>>,
    gt_count: usize,
}

fn evaluate_image_class(
    gts: &[&GroundTruthBox],
    dets: &[&Detection],
    thresholds: &[f64],
    max_dets: Option<usize>,
) -> ImageClassOutcome {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&i, &j| dets[j].score.total_cmp(&dets[i].score).then(i.cmp(&j)));
    if let Some(m) = max_dets {
        order.truncate(m);
    }
    let gt_corners: Vec<[f64; 4]> = gts.iter().map(|g| g.bbox.corners()).collect();
    let ids: Vec<u64> = gts.iter().map(|g| g.ann_id).collect();
    let ious: Vec<Vec<f64>> = order
        .iter()
        .map(|&d| {
            let c = dets[d].bbox.corners();
            gt_corners.iter().map(|&g| iou_corners(c, g)).collect()
        })
        .collect();
    let ranks: Vec<usize> = (0..order.len()).collect();
    let true_positive = thresholds
        .iter()
        .map(|&t| {
            greedy_assign(&ranks, &ids, |d, g| ious[d][g], |_, _| true, t)
                .into_iter()
                .map(|g| g.is_some())
                .collect()
        })
        .collect();
    ImageClassOutcome {
        scores: order.iter().map(|&d| dets[d].score).collect(),
        true_positive,
        gt_count: gts.len(),
    }
}

/// Detections grouped per dataset image (in dataset image order), after
/// checking that every detection refers to a known image and category.
fn group_detections<'a>(ds: &DetDataset, dets: &'a [Detection]) -> Result<Vec<Vec<&'a Detection>>> {
    let index: HashMap<u64, usize> = ds
        .images()
        .iter()
        .enumerate()
        .map(|(i, img)| (img.image_id, i))
        .collect();
    let mut grouped = vec![Vec::new(); ds.images().len()];
    for d in dets {
        let &slot = index.get(&d.image_id).ok_or_else(|| {
            Error::Validation(format!("detection references unknown image_id {}", d.image_id))
        })?;
        if ds.taxonomy().index_of(d.category_id).is_none() {
            return Err(Error::Validation(format!(
                "detection on image {} has unknown category_id {}",
                d.image_id, d.category_id
            )));
        }
        grouped[slot].push(d);
    }
    Ok(grouped)
}

fn group_ground_truth(ds: &DetDataset) -> Vec<Vec<&GroundTruthBox>> {
    let by_image = ds.annotations_by_image();
    ds.images()
        .iter()
        .map(|img| by_image.get(&img.image_id).cloned().unwrap_or_default())
        .collect()
}

/// Runs class-wise matching for every image, returning `[class][image]`.
fn sweep(
    ds: &DetDataset,
    dets: &[Detection],
    thresholds: &[f64],
    max_dets: Option<usize>,
    exec: Execution,
) -> Result<Vec<Vec<ImageClassOutcome>>> {
    let det_groups = group_detections(ds, dets)?;
    let gt_groups = group_ground_truth(ds);
    let classes: Vec<u32> = ds.taxonomy().classes().iter().map(|c| c.id).collect();
    let per_image: Vec<Vec<ImageClassOutcome>> = exec.map_range(ds.images().len(), |i| {
        classes
            .iter()
            .map(|&c| {
                let g: Vec<&GroundTruthBox> =
                    gt_groups[i].iter().copied().filter(|g| g.category_id == c).collect();
                let d: Vec<&Detection> =
                    det_groups[i].iter().copied().filter(|d| d.category_id == c).collect();
                evaluate_image_class(&g, &d, thresholds, max_dets)
            })
            .collect()
    });
    // Transpose to [class][image].
    let mut by_class: Vec<Vec<ImageClassOutcome>> = classes.iter().map(|_| Vec::new()).collect();
    for image in per_image {
        for (c, outcome) in image.into_iter().enumerate() {
            by_class[c].push(outcome);
        }
    }
    Ok(by_class)
}

/// Pools one class's per-image outcomes at threshold index `t`, in image
/// order then rank order.
fn pooled(outcomes: &[ImageClassOutcome], t: usize) -> (Vec<ScoredMatch>, usize) {
    let mut matches = Vec::new();
    let mut gt_count = 0;
    for o in outcomes {
        gt_count += o.gt_count;
        matches.extend(o.scores.iter().zip(&o.true_positive[t]).map(|(&score, &tp)| ScoredMatch {
            score,
            true_positive: tp,
        }));
    }
    (matches, gt_count)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassAp {
    pub category_id: u32,
    pub name: String,
    pub gt_count: usize,
    /// AP at each threshold of [`iou_thresholds`].
    pub ap: [f64; NUM_IOU_THRESHOLDS],
    pub ap_50: f64,
    pub ap_50_95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapSummary {
    pub map_50: f64,
    pub map_50_95: f64,
    /// Classes with at least one ground-truth box, in taxonomy order.
    pub per_class: Vec<ClassAp>,
}

/// mAP@0.5 and mAP@[0.5:0.95] over the dataset's ground truth.
///
/// Classes without ground truth are excluded from the macro average; if no
/// class has ground truth both values are 0.
pub fn map_suite(ds: &DetDataset, dets: &[Detection]) -> Result<MapSummary> {
    map_suite_with(ds, dets, Execution::default())
}

pub fn map_suite_with(ds: &DetDataset, dets: &[Detection], exec: Execution) -> Result<MapSummary> {
    let thresholds = iou_thresholds();
    let by_class = sweep(ds, dets, &thresholds, Some(MAX_DETS), exec)?;
    let mut per_class = Vec::new();
    for (cat, outcomes) in ds.taxonomy().classes().iter().zip(&by_class) {
        let gt_count: usize = outcomes.iter().map(|o| o.gt_count).sum();
        if gt_count == 0 {
            continue;
        }
        let ap: [f64; NUM_IOU_THRESHOLDS] = std::array::from_fn(|t| {
            let (m, n) = pooled(outcomes, t);
            average_precision(&m, n)
        });
        per_class.push(ClassAp {
            category_id: cat.id,
            name: cat.name.clone(),
            gt_count,
            ap_50: ap[0],
            ap_50_95: ap.iter().sum::<f64>() / NUM_IOU_THRESHOLDS as f64,
            ap,
        });
    }
    let (map_50, map_50_95) = if per_class.is_empty() {
        (0.0, 0.0)
    } else {
        let k = per_class.len() as f64;
        (
            per_class.iter().map(|c| c.ap_50).sum::<f64>() / k,
            per_class.iter().map(|c| c.ap_50_95).sum::<f64>() / k,
        )
    };
    Ok(MapSummary {
        map_50,
        map_50_95,
        per_class,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrF1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl PrF1 {
    /// Precision is 0 without detections; F1 is 0 when P + R is 0.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        PrF1 {
            precision,
            recall,
            f1: f1_score(precision, recall),
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
        }
    }
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Class-aware precision, recall and F1 at one IoU threshold, counting only
/// detections scoring at least `score_cutoff`.
pub fn pr_f1(ds: &DetDataset, dets: &[Detection], iou_threshold: f64, score_cutoff: f64) -> Result<PrF1> {
    pr_f1_with(ds, dets, iou_threshold, score_cutoff, Execution::default())
}

pub fn pr_f1_with(
    ds: &DetDataset,
    dets: &[Detection],
    iou_threshold: f64,
    score_cutoff: f64,
    exec: Execution,
) -> Result<PrF1> {
    let kept: Vec<Detection> = dets.iter().filter(|d| d.score >= score_cutoff).copied().collect();
    let by_class = sweep(ds, &kept, &[iou_threshold], None, exec)?;
    let (mut tp, mut fp, mut gt) = (0, 0, 0);
    for outcome in by_class.iter().flatten() {
        let hits = outcome.true_positive[0].iter().filter(|t| **t).count();
        tp += hits;
        fp += outcome.scores.len() - hits;
        gt += outcome.gt_count;
    }
    Ok(PrF1::from_counts(tp, fp, gt - tp))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrPoint {
    pub score: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Operating points of one class, one per distinct score, from the highest
/// cutoff down.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrCurve {
    pub category_id: u32,
    pub iou_threshold: f64,
    pub points: Vec<PrPoint>,
}

impl PrCurve {
    /// `score,precision,recall,f1` with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("score,precision,recall,f1\n");
        for p in &self.points {
            writeln!(out, "{},{},{},{}", p.score, p.precision, p.recall, p.f1).unwrap();
        }
        out
    }
}

fn curve_from(category_id: u32, iou_threshold: f64, mut matches: Vec<ScoredMatch>, gt_count: usize) -> PrCurve {
    matches.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut points = Vec::new();
    let mut tp = 0usize;
    for (i, m) in matches.iter().enumerate() {
        tp += usize::from(m.true_positive);
        let last_of_score = matches.get(i + 1).is_none_or(|n| n.score != m.score);
        if !last_of_score {
            continue;
        }
        let precision = tp as f64 / (i + 1) as f64;
        let recall = if gt_count == 0 { 0.0 } else { tp as f64 / gt_count as f64 };
        points.push(PrPoint {
            score: m.score,
            precision,
            recall,
            f1: f1_score(precision, recall),
        });
    }
    PrCurve {
        category_id,
        iou_threshold,
        points,
    }
}

/// Per-class PR/F1 curves at one IoU threshold.
pub fn pr_curves(ds: &DetDataset, dets: &[Detection], iou_threshold: f64, exec: Execution) -> Result<Vec<PrCurve>> {
    let by_class = sweep(ds, dets, &[iou_threshold], None, exec)?;
    Ok(ds
        .taxonomy()
        .classes()
        .iter()
        .zip(&by_class)
        .map(|(cat, outcomes)| {
            let (m, n) = pooled(outcomes, 0);
            curve_from(cat.id, iou_threshold, m, n)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Each predicted-class row sums to 1.
    Row,
    /// Each true-class column sums to 1.
    #[default]
    Column,
    None,
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "row" => Ok(Normalization::Row),
            "column" => Ok(Normalization::Column),
            "none" => Ok(Normalization::None),
            other => Err(Error::Usage(format!("unknown normalization {other:?}"))),
        }
    }
}

/// `(K+1) x (K+1)` matrix indexed `[predicted][true]`, where index `K` is
/// background. The background/background cell is always 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionMatrix {
    /// Class labels in index order, `"background"` last.
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    pub normalization: Normalization,
    pub values: Vec<Vec<f64>>,
}

impl ConfusionMatrix {
    fn from_counts(labels: Vec<String>, counts: Vec<Vec<u64>>, normalization: Normalization) -> Self {
        let n = counts.len();
        let values = match normalization {
            Normalization::None => counts
                .iter()
                .map(|row| row.iter().map(|&c| c as f64).collect())
                .collect(),
            Normalization::Row => counts
                .iter()
                .map(|row| {
                    let total: u64 = row.iter().sum();
                    row.iter()
                        .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
                        .collect()
                })
                .collect(),
            Normalization::Column => {
                let totals: Vec<u64> = (0..n).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
                counts
                    .iter()
                    .map(|row| {
                        row.iter()
                            .zip(&totals)
                            .map(|(&c, &t)| if t == 0 { 0.0 } else { c as f64 / t as f64 })
                            .collect()
                    })
                    .collect()
            }
        };
        ConfusionMatrix {
            labels,
            counts,
            normalization,
            values,
        }
    }

    pub fn background(&self) -> usize {
        self.labels.len() - 1
    }

    /// `predicted\true,<labels...>` header, then one row per predicted label.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("predicted\\true");
        for l in &self.labels {
            write!(out, ",{l}").unwrap();
        }
        out.push('\n');
        for (label, row) in self.labels.iter().zip(&self.values) {
            out.push_str(label);
            for v in row {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Background-aware confusion matrix.
///
/// Detections scoring at least `score_cutoff` are matched to ground truth
/// ignoring class, so that laterality swaps show up off the diagonal.
/// A matched pair counts at `(predicted, true)`, an unmatched detection at
/// `(predicted, background)`, a missed ground truth at `(background, true)`.
pub fn confusion(
    ds: &DetDataset,
    dets: &[Detection],
    iou_threshold: f64,
    score_cutoff: f64,
    normalization: Normalization,
) -> Result<ConfusionMatrix> {
    confusion_with(ds, dets, iou_threshold, score_cutoff, normalization, Execution::default())
}

pub fn confusion_with(
    ds: &DetDataset,
    dets: &[Detection],
    iou_threshold: f64,
    score_cutoff: f64,
    normalization: Normalization,
    exec: Execution,
) -> Result<ConfusionMatrix> {
    let kept: Vec<Detection> = dets.iter().filter(|d| d.score >= score_cutoff).copied().collect();
    let det_groups = group_detections(ds, &kept)?;
    let gt_groups = group_ground_truth(ds);
    let tax = ds.taxonomy();
    let k = tax.len();
    let slot = |cat: u32| tax.index_of(cat).expect("categories validated");

    let per_image: Vec<Vec<Vec<u64>>> = exec.map_range(ds.images().len(), |i| {
        let gts: Vec<GroundTruthBox> = gt_groups[i].iter().map(|g| (*g).clone()).collect();
        let dets: Vec<Detection> = det_groups[i].iter().map(|d| **d).collect();
        let result = match_detections(&gts, &dets, iou_threshold, false);
        let mut counts = vec![vec![0u64; k + 1]; k + 1];
        for m in &result.detections {
            let pred = slot(dets[m.det_index].category_id);
            let truth = match m.gt_ann_id {
                Some(id) => slot(gts.iter().find(|g| g.ann_id == id).unwrap().category_id),
                None => k,
            };
            counts[pred][truth] += 1;
        }
        for (g, matched) in gts.iter().zip(&result.gt_matched) {
            if !matched {
                counts[k][slot(g.category_id)] += 1;
            }
        }
        counts
    });

    let mut counts = vec![vec![0u64; k + 1]; k + 1];
    for image in per_image {
        for (row, add) in counts.iter_mut().zip(image) {
            for (c, a) in row.iter_mut().zip(add) {
                *c += a;
            }
        }
    }
    let mut labels: Vec<String> = tax.classes().iter().map(|c| c.name.clone()).collect();
    labels.push("background".into());
    Ok(ConfusionMatrix::from_counts(labels, counts, normalization))
}

/// Thresholds for the single-operating-point parts of a report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalParams {
    /// IoU for precision/recall/F1 and the PR curves.
    pub iou: f64,
    /// Minimum score for precision/recall/F1 and the confusion matrix.
    pub conf: f64,
    /// IoU for confusion-matrix pairing.
    pub confusion_iou: f64,
    pub normalization: Normalization,
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams {
            iou: 0.5,
            conf: 0.25,
            confusion_iou: 0.45,
            normalization: Normalization::Column,
        }
    }
}

impl EvalParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("iou", self.iou), ("conf", self.conf), ("confusion_iou", self.confusion_iou)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} = {v} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EvalCounts {
    pub images: usize,
    pub ground_truths: usize,
    pub detections: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub counts: EvalCounts,
    pub params: EvalParams,
    pub map_50: f64,
    pub map_50_95: f64,
    pub per_class: Vec<ClassAp>,
    pub pr_f1: PrF1,
    pub pr_curves: Vec<PrCurve>,
    pub confusion: ConfusionMatrix,
}

/// Full evaluation: mAP suite, operating-point P/R/F1, PR curves and the
/// confusion matrix.
pub fn evaluate(ds: &DetDataset, dets: &[Detection], params: &EvalParams, exec: Execution) -> Result<EvalReport> {
    params.validate()?;
    let summary = map_suite_with(ds, dets, exec)?;
    Ok(EvalReport {
        counts: EvalCounts {
            images: ds.images().len(),
            ground_truths: ds.annotations().len(),
            detections: dets.len(),
        },
        params: *params,
        map_50: summary.map_50,
        map_50_95: summary.map_50_95,
        per_class: summary.per_class,
        pr_f1: pr_f1_with(ds, dets, params.iou, params.conf, exec)?,
        pr_curves: pr_curves(ds, dets, params.iou, exec)?,
        confusion: confusion_with(ds, dets, params.confusion_iou, params.conf, params.normalization, exec)?,
    })
}

/// NMS helper for callers that evaluate raw, unsuppressed predictions.
pub fn suppress_per_image(dets: &[Detection], iou_threshold: f64, exec: Execution) -> Vec<Detection> {
    let mut groups: Vec<(u64, Vec<Detection>)> = Vec::new();
    let mut slot: HashMap<u64, usize> = HashMap::new();
    for d in dets {
        let i = *slot.entry(d.image_id).or_insert_with(|| {
            groups.push((d.image_id, Vec::new()));
            groups.len() - 1
        });
        groups[i].1.push(*d);
    }
    let frames: Vec<Vec<Detection>> = groups.into_iter().map(|(_, g)| g).collect();
    crate::geometry::nms_batch(&frames, iou_threshold, true, exec)
        .into_iter()
        .flatten()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{CategoryTaxonomy, ImageRecord};
    use crate::geometry::BBox;

    fn gt(ann_id: u64, image_id: u64, category_id: u32, b: [f64; 4]) -> GroundTruthBox {
        GroundTruthBox {
            ann_id,
            image_id,
            category_id,
            bbox: BBox::coco(b[0], b[1], b[2], b[3]),
        }
    }

    fn det(image_id: u64, category_id: u32, score: f64, b: [f64; 4]) -> Detection {
        Detection {
            image_id,
            category_id,
            score,
            bbox: BBox::coco(b[0], b[1], b[2], b[3]),
        }
    }

    fn dataset(images: u64, anns: Vec<GroundTruthBox>) -> DetDataset {
        let imgs = (0..images)
            .map(|i| ImageRecord {
                image_id: i,
                file_name: format!("v/{i}.png"),
                width: 100,
                height: 100,
                video_id: "v".into(),
            })
            .collect();
        DetDataset::new(CategoryTaxonomy::default(), imgs, anns).unwrap()
    }

    #[test]
    fn thresholds_are_exact_decimals() {
        let t = iou_thresholds();
        assert_eq!(t[0], 0.5);
        assert_eq!(t[2], 0.6);
        assert_eq!(t[9], 0.95);
    }

    #[test]
    fn single_perfect_match() {
        let g = [gt(1, 0, 0, [0.0, 0.0, 10.0, 10.0])];
        let d = [det(0, 0, 0.9, [0.0, 0.0, 10.0, 10.0])];
        let r = match_detections(&g, &d, 0.5, true);
        assert_eq!(r.detections[0].gt_ann_id, Some(1));
        assert_eq!(r.gt_matched, vec![true]);
    }

    #[test]
    fn coincident_duplicates_single_use() {
        let g = [gt(1, 0, 0, [0.0, 0.0, 10.0, 10.0])];
        let d = [det(0, 0, 0.8, [0.0, 0.0, 10.0, 10.0]), det(0, 0, 0.9, [0.0, 0.0, 10.0, 10.0])];
        let r = match_detections(&g, &d, 0.5, true);
        assert_eq!(r.detections[0], DetMatch { det_index: 1, gt_ann_id: Some(1) });
        assert_eq!(r.detections[1], DetMatch { det_index: 0, gt_ann_id: None });
        assert_eq!((r.true_positives(), r.false_positives(), r.false_negatives()), (1, 1, 0));
    }

    #[test]
    fn equal_iou_prefers_lower_ann_id() {
        let g = [gt(9, 0, 0, [0.0, 0.0, 10.0, 10.0]), gt(3, 0, 0, [0.0, 0.0, 10.0, 10.0])];
        let d = [det(0, 0, 0.9, [0.0, 0.0, 10.0, 10.0])];
        assert_eq!(match_detections(&g, &d, 0.5, true).detections[0].gt_ann_id, Some(3));
    }

    #[test]
    fn class_aware_flag() {
        let g = [gt(1, 0, 0, [0.0, 0.0, 10.0, 10.0])];
        let d = [det(0, 1, 0.9, [0.0, 0.0, 10.0, 10.0])];
        assert_eq!(match_detections(&g, &d, 0.5, true).true_positives(), 0);
        assert_eq!(match_detections(&g, &d, 0.5, false).true_positives(), 1);
    }

    #[test]
    fn ap_edge_cases() {
        assert_eq!(average_precision(&[], 0), 1.0);
        assert_eq!(average_precision(&[ScoredMatch { score: 0.5, true_positive: false }], 0), 0.0);
        assert_eq!(average_precision(&[], 3), 0.0);
        assert_eq!(average_precision(&[ScoredMatch { score: 0.5, true_positive: true }], 1), 1.0);
    }

    #[test]
    fn ap_half_recall() {
        let ap = average_precision(&[ScoredMatch { score: 0.9, true_positive: true }], 2);
        assert!((ap - 51.0 / 101.0).abs() < 1e-12);
    }

    #[test]
    fn map_perfect_and_empty() {
        let anns = vec![gt(1, 0, 0, [10.0, 10.0, 20.0, 20.0]), gt(2, 1, 1, [30.0, 30.0, 10.0, 40.0])];
        let ds = dataset(2, anns.clone());
        let dets: Vec<Detection> = anns
            .iter()
            .map(|a| Detection { image_id: a.image_id, category_id: a.category_id, score: 1.0, bbox: a.bbox })
            .collect();
        let s = map_suite(&ds, &dets).unwrap();
        assert_eq!((s.map_50, s.map_50_95), (1.0, 1.0));
        let none = map_suite(&ds, &[]).unwrap();
        assert_eq!((none.map_50, none.map_50_95), (0.0, 0.0));
    }

    #[test]
    fn unknown_image_is_rejected() {
        let ds = dataset(1, vec![]);
        let err = map_suite(&ds, &[det(42, 0, 0.5, [0.0, 0.0, 1.0, 1.0])]).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn pr_f1_cases() {
        let ds = dataset(1, vec![gt(1, 0, 0, [0.0, 0.0, 10.0, 10.0])]);
        let perfect = pr_f1(&ds, &[det(0, 0, 0.9, [0.0, 0.0, 10.0, 10.0])], 0.5, 0.25).unwrap();
        assert_eq!((perfect.precision, perfect.recall, perfect.f1), (1.0, 1.0, 1.0));
        let none = pr_f1(&ds, &[], 0.5, 0.25).unwrap();
        assert_eq!((none.precision, none.recall, none.f1), (0.0, 0.0, 0.0));
        let below = pr_f1(&ds, &[det(0, 0, 0.1, [0.0, 0.0, 10.0, 10.0])], 0.5, 0.25).unwrap();
        assert_eq!(below.true_positives, 0);
        assert!((f1_score(0.85, 0.60) - 0.703_448_275_862_069).abs() < 1e-12);
    }

    #[test]
    fn confusion_perfect_is_identity() {
        let anns = vec![gt(1, 0, 0, [0.0, 0.0, 10.0, 10.0]), gt(2, 0, 1, [50.0, 50.0, 10.0, 10.0])];
        let ds = dataset(1, anns);
        let dets = [det(0, 0, 0.9, [0.0, 0.0, 10.0, 10.0]), det(0, 1, 0.9, [50.0, 50.0, 10.0, 10.0])];
        let m = confusion(&ds, &dets, 0.45, 0.25, Normalization::Column).unwrap();
        assert_eq!(m.values[0], vec![1.0, 0.0, 0.0]);
        assert_eq!(m.values[1], vec![0.0, 1.0, 0.0]);
        assert_eq!(m.values[2], vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn confusion_missed_left_hand() {
        let ds = dataset(1, vec![gt(1, 0, 0, [0.0, 0.0, 10.0, 10.0])]);
        let m = confusion(&ds, &[], 0.45, 0.25, Normalization::Column).unwrap();
        assert_eq!(m.values[2][0], 1.0);
        assert_eq!(m.counts[2][2], 0);
    }

    #[test]
    fn confusion_sees_laterality_swap_and_false_positive() {
        let ds = dataset(1, vec![gt(1, 0, 0, [0.0, 0.0, 10.0, 10.0])]);
        let dets = [det(0, 1, 0.9, [0.0, 0.0, 10.0, 10.0]), det(0, 0, 0.8, [60.0, 60.0, 10.0, 10.0])];
        let m = confusion(&ds, &dets, 0.45, 0.25, Normalization::None).unwrap();
        assert_eq!(m.counts[1][0], 1);
        assert_eq!(m.counts[0][2], 1);
        let rows = confusion(&ds, &dets, 0.45, 0.25, Normalization::Row).unwrap();
        assert_eq!(rows.values[0], vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn pr_curve_recall_grows_as_cutoff_drops() {
        let ds = dataset(1, vec![gt(1, 0, 0, [0.0, 0.0, 10.0, 10.0]), gt(2, 0, 0, [50.0, 50.0, 10.0, 10.0])]);
        let dets = [
            det(0, 0, 0.9, [0.0, 0.0, 10.0, 10.0]),
            det(0, 0, 0.7, [80.0, 80.0, 10.0, 10.0]),
            det(0, 0, 0.5, [50.0, 50.0, 10.0, 10.0]),
        ];
        let curves = pr_curves(&ds, &dets, 0.5, Execution::Sequential).unwrap();
        let recalls: Vec<f64> = curves[0].points.iter().map(|p| p.recall).collect();
        assert_eq!(recalls, vec![0.5, 0.5, 1.0]);
        assert!(curves[1].points.is_empty());
    }
}
