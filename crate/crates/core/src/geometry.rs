//! Axis-aligned box algebra: coordinate conventions, IoU, clipping and
//! greedy non-maximum suppression.

use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::{Error, Result};

/// Coordinate convention a [`BBox`] is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Convention {
    /// `[x, y, w, h]` in pixels, top-left origin.
    CocoXywh,
    /// `[x1, y1, x2, y2]` in pixels.
    Xyxy,
    /// `[cx, cy, w, h]` normalized by image width and height.
    YoloNorm,
}

/// Image size in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub width: u32,
    pub height: u32,
}

impl Dims {
    pub fn new(width: u32, height: u32) -> Self {
        Dims { width, height }
    }

    fn wh(self) -> (f64, f64) {
        (f64::from(self.width), f64::from(self.height))
    }
}

/// One axis-aligned rectangle tagged with its coordinate convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    values: [f64; 4],
    convention: Convention,
}

impl BBox {
    pub fn new(convention: Convention, values: [f64; 4]) -> Self {
        BBox { values, convention }
    }

    pub fn coco(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self::new(Convention::CocoXywh, [x, y, w, h])
    }

    pub fn xyxy(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self::new(Convention::Xyxy, [x1, y1, x2, y2])
    }

    pub fn yolo(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self::new(Convention::YoloNorm, [cx, cy, w, h])
    }

    pub fn values(&self) -> [f64; 4] {
        self.values
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    /// `(x1, y1, x2, y2)` in the box's own coordinate space.
    pub fn corners(&self) -> [f64; 4] {
        let [a, b, c, d] = self.values;
        match self.convention {
            Convention::CocoXywh => [a, b, a + c, b + d],
            Convention::Xyxy => [a, b, c, d],
            Convention::YoloNorm => [a - c / 2.0, b - d / 2.0, a + c / 2.0, b + d / 2.0],
        }
    }

    pub fn width(&self) -> f64 {
        match self.convention {
            Convention::Xyxy => self.values[2] - self.values[0],
            _ => self.values[2],
        }
    }

    pub fn height(&self) -> f64 {
        match self.convention {
            Convention::Xyxy => self.values[3] - self.values[1],
            _ => self.values[3],
        }
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    /// Non-negative extent, and normalized values inside `[0, 1]` for YOLO boxes.
    pub fn is_valid(&self) -> bool {
        let finite = self.values.iter().all(|v| v.is_finite());
        let sized = self.width() >= 0.0 && self.height() >= 0.0;
        let normalized = self.convention != Convention::YoloNorm
            || self.values.iter().all(|v| (0.0..=1.0).contains(v));
        finite && sized && normalized
    }

    /// Builds a box of `convention` from pixel-space corners.
    fn from_pixel_corners(c: [f64; 4], convention: Convention, dims: Option<Dims>) -> Result<Self> {
        let [x1, y1, x2, y2] = c;
        Ok(match convention {
            Convention::CocoXywh => BBox::coco(x1, y1, x2 - x1, y2 - y1),
            Convention::Xyxy => BBox::xyxy(x1, y1, x2, y2),
            Convention::YoloNorm => {
                let (w, h) = require_dims(dims)?.wh();
                let (bw, bh) = (x2 - x1, y2 - y1);
                BBox::yolo((x1 + bw / 2.0) / w, (y1 + bh / 2.0) / h, bw / w, bh / h)
            }
        })
    }

    /// Pixel-space corners; normalized boxes need the image size.
    fn pixel_corners(&self, dims: Option<Dims>) -> Result<[f64; 4]> {
        match self.convention {
            Convention::YoloNorm => {
                let (w, h) = require_dims(dims)?.wh();
                let [cx, cy, bw, bh] = self.values;
                let (pw, ph) = (bw * w, bh * h);
                let (x1, y1) = (cx * w - pw / 2.0, cy * h - ph / 2.0);
                Ok([x1, y1, x1 + pw, y1 + ph])
            }
            _ => Ok(self.corners()),
        }
    }

    /// Same box as pixel-space `[x, y, w, h]`.
    pub fn to_coco(&self, dims: Option<Dims>) -> Result<[f64; 4]> {
        match self.convention {
            Convention::CocoXywh => Ok(self.values),
            _ => convert(self, Convention::CocoXywh, dims).map(|b| b.values),
        }
    }
}

fn require_dims(dims: Option<Dims>) -> Result<Dims> {
    match dims {
        Some(d) if d.width > 0 && d.height > 0 => Ok(d),
        Some(d) => Err(Error::Usage(format!(
            "image dimensions must be positive, got {}x{}",
            d.width, d.height
        ))),
        None => Err(Error::Usage(
            "normalized boxes require image dimensions".into(),
        )),
    }
}

/// Re-expresses `b` in `target`. Image dims are needed whenever either side
/// is [`Convention::YoloNorm`].
pub fn convert(b: &BBox, target: Convention, dims: Option<Dims>) -> Result<BBox> {
    if b.convention == target {
        return Ok(*b);
    }
    if b.convention == Convention::CocoXywh && target == Convention::YoloNorm {
        // Direct route avoids the x + w - x cancellation of the corner path.
        let (w, h) = require_dims(dims)?.wh();
        let [x, y, bw, bh] = b.values;
        return Ok(BBox::yolo((x + bw / 2.0) / w, (y + bh / 2.0) / h, bw / w, bh / h));
    }
    if b.convention == Convention::YoloNorm && target == Convention::CocoXywh {
        let (w, h) = require_dims(dims)?.wh();
        let [cx, cy, bw, bh] = b.values;
        let (pw, ph) = (bw * w, bh * h);
        return Ok(BBox::coco(cx * w - pw / 2.0, cy * h - ph / 2.0, pw, ph));
    }
    let corners = b.pixel_corners(dims)?;
    BBox::from_pixel_corners(corners, target, dims)
}

/// IoU of two corner boxes. Zero when the union is empty.
pub fn iou_corners(a: [f64; 4], b: [f64; 4]) -> f64 {
    let iw = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let ih = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = iw * ih;
    let area_a = (a[2] - a[0]).max(0.0) * (a[3] - a[1]).max(0.0);
    let area_b = (b[2] - b[0]).max(0.0) * (b[3] - b[1]).max(0.0);
    let union = area_a + area_b - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Intersection over union of two boxes sharing a convention.
pub fn iou(a: &BBox, b: &BBox) -> Result<f64> {
    if a.convention != b.convention {
        return Err(Error::Usage(format!(
            "iou operands use different conventions ({:?} vs {:?})",
            a.convention, b.convention
        )));
    }
    Ok(iou_corners(a.corners(), b.corners()))
}

/// Intersects `b` with the image rectangle. `None` when nothing remains.
pub fn clip(b: &BBox, dims: Dims) -> Option<BBox> {
    let (w, h) = match b.convention {
        Convention::YoloNorm => (1.0, 1.0),
        _ => dims.wh(),
    };
    let [x1, y1, x2, y2] = b.corners();
    let (cx1, cy1) = (x1.max(0.0), y1.max(0.0));
    let (cx2, cy2) = (x2.min(w), y2.min(h));
    if cx2 <= cx1 || cy2 <= cy1 {
        return None;
    }
    if [cx1, cy1, cx2, cy2] == [x1, y1, x2, y2] {
        return Some(*b);
    }
    Some(match b.convention {
        Convention::CocoXywh => BBox::coco(cx1, cy1, cx2 - cx1, cy2 - cy1),
        Convention::Xyxy => BBox::xyxy(cx1, cy1, cx2, cy2),
        Convention::YoloNorm => {
            let (bw, bh) = (cx2 - cx1, cy2 - cy1);
            BBox::yolo(cx1 + bw / 2.0, cy1 + bh / 2.0, bw, bh)
        }
    })
}

/// A predicted box for one image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub image_id: u64,
    pub category_id: u32,
    pub score: f64,
    pub bbox: BBox,
}

/// One entry of a COCO results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub image_id: u64,
    pub category_id: u32,
    pub bbox: [f64; 4],
    pub score: f64,
}

impl From<&Detection> for DetectionRecord {
    fn from(d: &Detection) -> Self {
        let bbox = d
            .bbox
            .to_coco(None)
            .expect("pixel-space detections convert without dims");
        DetectionRecord {
            image_id: d.image_id,
            category_id: d.category_id,
            bbox,
            score: d.score,
        }
    }
}

impl TryFrom<DetectionRecord> for Detection {
    type Error = Error;

    fn try_from(r: DetectionRecord) -> Result<Self> {
        if !(0.0..=1.0).contains(&r.score) {
            return Err(Error::Validation(format!(
                "detection on image {} has score {} outside [0, 1]",
                r.image_id, r.score
            )));
        }
        let bbox = BBox::coco(r.bbox[0], r.bbox[1], r.bbox[2], r.bbox[3]);
        if !bbox.is_valid() {
            return Err(Error::Validation(format!(
                "detection on image {} has invalid bbox {:?}",
                r.image_id, r.bbox
            )));
        }
        Ok(Detection {
            image_id: r.image_id,
            category_id: r.category_id,
            score: r.score,
            bbox,
        })
    }
}

/// Parses a COCO results document (JSON array of detections).
pub fn parse_detections(bytes: &[u8]) -> Result<Vec<Detection>> {
    let records: Vec<DetectionRecord> = serde_json::from_slice(bytes).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    records.into_iter().map(Detection::try_from).collect()
}

pub fn serialize_detections(dets: &[Detection]) -> Vec<u8> {
    let records: Vec<DetectionRecord> = dets.iter().map(DetectionRecord::from).collect();
    serde_json::to_vec(&records).expect("detection records always serialize")
}

/// Descending score, then lower category id, then lower input index.
pub(crate) fn score_order(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&i, &j| {
        dets[j]
            .score
            .total_cmp(&dets[i].score)
            .then(dets[i].category_id.cmp(&dets[j].category_id))
            .then(i.cmp(&j))
    });
    order
}

/// Greedy hard suppression over a precomputed visiting order.
///
/// Walks `order`; an item is kept unless some already-kept item `k` with
/// `competes(k, item)` has `overlap(k, item) > threshold`. Returns kept items
/// in visiting order.
pub fn greedy_suppress<O, C>(order: &[usize], threshold: f64, overlap: O, competes: C) -> Vec<usize>
where
    O: Fn(usize, usize) -> f64,
    C: Fn(usize, usize) -> bool,
{
    let mut kept: Vec<usize> = Vec::new();
    for &i in order {
        let suppressed = kept
            .iter()
            .any(|&k| competes(k, i) && overlap(k, i) > threshold);
        if !suppressed {
            kept.push(i);
        }
    }
    kept
}

/// Greedy score-descending non-maximum suppression.
///
/// A box is removed when a higher-ranked kept box (of the same class, when
/// `class_aware`) overlaps it with IoU strictly above `iou_threshold`. Boxes
/// are compared in their own coordinate space, so all inputs should share
/// one convention. Output is sorted by descending score.
pub fn nms(dets: &[Detection], iou_threshold: f64, class_aware: bool) -> Vec<Detection> {
    let corners: Vec<[f64; 4]> = dets.iter().map(|d| d.bbox.corners()).collect();
    let order = score_order(dets);
    let kept = greedy_suppress(
        &order,
        iou_threshold,
        |k, i| iou_corners(corners[k], corners[i]),
        |k, i| !class_aware || dets[k].category_id == dets[i].category_id,
    );
    kept.into_iter().map(|i| dets[i]).collect()
}

/// Runs [`nms`] independently over many frames.
pub fn nms_batch(
    frames: &[Vec<Detection>],
    iou_threshold: f64,
    class_aware: bool,
    exec: Execution,
) -> Vec<Vec<Detection>> {
    exec.map(frames, |_, dets| nms(dets, iou_threshold, class_aware))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn det(score: f64, category_id: u32, bbox: BBox) -> Detection {
        Detection {
            image_id: 0,
            category_id,
            score,
            bbox,
        }
    }

    #[test]
    fn iou_examples() {
        let a = BBox::coco(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        assert_eq!(iou(&a, &BBox::coco(20.0, 20.0, 5.0, 5.0)).unwrap(), 0.0);
        let third = iou(&a, &BBox::coco(5.0, 0.0, 10.0, 10.0)).unwrap();
        assert!((third - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn iou_rejects_mixed_conventions() {
        let a = BBox::coco(0.0, 0.0, 10.0, 10.0);
        let b = BBox::xyxy(0.0, 0.0, 10.0, 10.0);
        assert!(matches!(iou(&a, &b), Err(Error::Usage(_))));
    }

    #[test]
    fn degenerate_boxes_have_zero_iou() {
        let p = BBox::coco(3.0, 3.0, 0.0, 0.0);
        assert_eq!(iou(&p, &p).unwrap(), 0.0);
        assert_eq!(iou(&p, &BBox::coco(0.0, 0.0, 10.0, 10.0)).unwrap(), 0.0);
    }

    #[test]
    fn convert_examples() {
        let d = Some(Dims::new(416, 416));
        let y = convert(&BBox::coco(104.0, 104.0, 208.0, 208.0), Convention::YoloNorm, d).unwrap();
        assert_eq!(y.values(), [0.5, 0.5, 0.5, 0.5]);
        let c = convert(&BBox::xyxy(0.0, 0.0, 10.0, 10.0), Convention::CocoXywh, None).unwrap();
        assert_eq!(c.values(), [0.0, 0.0, 10.0, 10.0]);
        assert!(matches!(
            convert(&BBox::coco(1.0, 1.0, 2.0, 2.0), Convention::YoloNorm, None),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn clip_examples() {
        let d = Dims::new(100, 50);
        let inside = BBox::coco(10.0, 10.0, 20.0, 20.0);
        assert_eq!(clip(&inside, d), Some(inside));
        let straddle = clip(&BBox::coco(90.0, 10.0, 30.0, 20.0), d).unwrap();
        let [x, _, w, _] = straddle.values();
        assert_eq!(x + w, 100.0);
        assert_eq!(clip(&BBox::coco(200.0, 10.0, 5.0, 5.0), d), None);
        let y = clip(&BBox::yolo(0.9, 0.5, 0.4, 0.2), d).unwrap();
        assert!((y.corners()[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn nms_coincident_and_disjoint() {
        let b = BBox::coco(0.0, 0.0, 10.0, 10.0);
        let kept = nms(&[det(0.8, 0, b), det(0.9, 0, b)], 0.5, true);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].score, 0.9);

        let far = BBox::coco(50.0, 50.0, 10.0, 10.0);
        assert_eq!(nms(&[det(0.9, 0, b), det(0.8, 0, far)], 0.5, true).len(), 2);
    }

    #[test]
    fn nms_class_aware_keeps_other_classes() {
        let b = BBox::coco(0.0, 0.0, 10.0, 10.0);
        let dets = [det(0.9, 0, b), det(0.8, 1, b)];
        assert_eq!(nms(&dets, 0.5, true).len(), 2);
        assert_eq!(nms(&dets, 0.5, false).len(), 1);
    }

    #[test]
    fn nms_ties_prefer_lower_category_then_index() {
        let b = BBox::coco(0.0, 0.0, 10.0, 10.0);
        let dets = [det(0.5, 1, b), det(0.5, 0, b), det(0.5, 0, b)];
        let kept = nms(&dets, 0.5, false);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].category_id, 0);
        assert_eq!(score_order(&dets), vec![1, 2, 0]);
    }

    /// Overlap matrix A-B 0.6, B-C 0.6, A-C 0.0 traced by hand: A kept, B
    /// suppressed by A, C only competes with kept A (0.0), so C kept.
    #[test]
    fn greedy_chain_trace() {
        let m = [[1.0, 0.6, 0.0], [0.6, 1.0, 0.6], [0.0, 0.6, 1.0]];
        let kept = greedy_suppress(&[0, 1, 2], 0.5, |a, b| m[a][b], |_, _| true);
        assert_eq!(kept, vec![0, 2]);
    }

    proptest! {
        #[test]
        fn coco_yolo_round_trip(
            x in 0.0f64..500.0, y in 0.0f64..500.0,
            w in 0.0f64..500.0, h in 0.0f64..500.0,
            iw in 1u32..2000, ih in 1u32..2000,
        ) {
            let d = Some(Dims::new(iw, ih));
            let b = BBox::coco(x, y, w, h);
            for target in [Convention::YoloNorm, Convention::Xyxy] {
                let back = convert(&convert(&b, target, d).unwrap(), Convention::CocoXywh, d).unwrap();
                for (u, v) in back.values().iter().zip(b.values()) {
                    prop_assert!((u - v).abs() <= 1e-9);
                }
            }
        }

        #[test]
        fn clip_never_grows(
            x in -200.0f64..300.0, y in -200.0f64..300.0,
            w in 0.0f64..400.0, h in 0.0f64..400.0,
        ) {
            let b = BBox::coco(x, y, w, h);
            if let Some(c) = clip(&b, Dims::new(200, 100)) {
                prop_assert!(c.area() <= b.area() + 1e-9);
                let [x1, y1, x2, y2] = c.corners();
                prop_assert!(x1 >= 0.0 && y1 >= 0.0 && x2 <= 200.0 && y2 <= 100.0);
            }
        }
    }
}
