//! Seeded image-and-label augmentation.
//!
//! Every transform takes a [`Sample`] (RGB pixels plus pixel-space COCO
//! boxes) and returns a new one whose boxes lie inside the new image. Boxes
//! are never created; clipping may drop them.
//!
//! Randomness in [`pipeline`] is drawn from a stream keyed by
//! `(seed, epoch, sample index)`, so batches can be processed in any order
//! or in parallel with identical results.

use std::path::Path;

use image::imageops;
use image::{Rgb, RgbImage};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::dataset::{LEFT_HAND, RIGHT_HAND};
use crate::exec::Execution;
use crate::geometry::{clip, BBox, Dims};
use crate::seed::rng_for;
use crate::trainctl::mosaic_active;
use crate::{Error, Result};

/// Canvas fill for padding and uncovered regions.
pub const PAD_GRAY: Rgb<u8> = Rgb([114, 114, 114]);
/// Boxes cut below this fraction of their area by rotate/mosaic are dropped.
pub const DEFAULT_MIN_AREA_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledBox {
    pub category_id: u32,
    /// Pixel `[x, y, w, h]`.
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: RgbImage,
    pub boxes: Vec<LabeledBox>,
}

impl Sample {
    /// Builds a sample, clipping boxes to the image and dropping empty ones.
    pub fn new(image: RgbImage, boxes: Vec<LabeledBox>) -> Self {
        let dims = Dims::new(image.width(), image.height());
        let boxes = boxes
            .into_iter()
            .filter_map(|b| clip(&b.bbox, dims).map(|bbox| LabeledBox { bbox, ..b }))
            .collect();
        Sample { image, boxes }
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.image.width(), self.image.height())
    }

    pub fn load_png(path: &Path, boxes: Vec<LabeledBox>) -> Result<Self> {
        let img = image::open(path)?.to_rgb8();
        Ok(Sample::new(img, boxes))
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.image
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(Error::from)
    }

    /// Every box inside the image with positive extent.
    pub fn boxes_inside(&self) -> bool {
        let (w, h) = (f64::from(self.image.width()), f64::from(self.image.height()));
        self.boxes.iter().all(|b| {
            let [x1, y1, x2, y2] = b.bbox.corners();
            x1 >= 0.0 && y1 >= 0.0 && x2 <= w && y2 <= h && x2 > x1 && y2 > y1
        })
    }
}

fn map_boxes(boxes: &[LabeledBox], f: impl Fn(&LabeledBox) -> Option<LabeledBox>) -> Vec<LabeledBox> {
    boxes.iter().filter_map(f).collect()
}

/// Source taps and weight of the second tap for each destination index,
/// with pixel centers at half-integers.
fn bilinear_taps(src: u32, dst: u32) -> Vec<(usize, usize, f32)> {
    let ratio = f64::from(src) / f64::from(dst);
    let last = src as usize - 1;
    (0..dst)
        .map(|d| {
            let pos = ((f64::from(d) + 0.5) * ratio - 0.5).clamp(0.0, last as f64);
            let lo = pos.floor() as usize;
            (lo, (lo + 1).min(last), (pos - lo as f64) as f32)
        })
        .collect()
}

/// Plain bilinear resize (no low-pass prefilter on downscaling).
pub fn resize_bilinear(src: &RgbImage, width: u32, height: u32) -> RgbImage {
    if src.dimensions() == (width, height) {
        return src.clone();
    }
    let xs = bilinear_taps(src.width(), width);
    let ys = bilinear_taps(src.height(), height);
    let stride = src.width() as usize * 3;
    let data = src.as_raw();
    let mut out = Vec::with_capacity(width as usize * height as usize * 3);
    let mut row = vec![0f32; stride];
    for &(y0, y1, fy) in &ys {
        let (r0, r1) = (&data[y0 * stride..][..stride], &data[y1 * stride..][..stride]);
        for ((v, &a), &b) in row.iter_mut().zip(r0).zip(r1) {
            *v = f32::from(a) + (f32::from(b) - f32::from(a)) * fy;
        }
        for &(x0, x1, fx) in &xs {
            for c in 0..3 {
                let (a, b) = (row[x0 * 3 + c], row[x1 * 3 + c]);
                out.push((a + (b - a) * fx).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    RgbImage::from_raw(width, height, out).expect("buffer matches dimensions")
}

/// Clips to `rect` (corners) and applies the survival rule against `area`.
fn clip_survivor(bbox: [f64; 4], rect: [f64; 4], original_area: f64, min_fraction: f64) -> Option<BBox> {
    let x1 = bbox[0].max(rect[0]);
    let y1 = bbox[1].max(rect[1]);
    let x2 = bbox[2].min(rect[2]);
    let y2 = bbox[3].min(rect[3]);
    if x2 <= x1 || y2 <= y1 {
        return None;
    }
    let area = (x2 - x1) * (y2 - y1);
    (area >= min_fraction * original_area).then(|| BBox::coco(x1, y1, x2 - x1, y2 - y1))
}

/// Mirrors about the vertical axis. With `swap_laterality`, left and right
/// hand labels trade places.
pub fn hflip(s: &Sample, swap_laterality: bool) -> Sample {
    let width = f64::from(s.image.width());
    let boxes = map_boxes(&s.boxes, |b| {
        let [x, y, w, h] = b.bbox.values();
        let category_id = match b.category_id {
            LEFT_HAND if swap_laterality => RIGHT_HAND,
            RIGHT_HAND if swap_laterality => LEFT_HAND,
            c => c,
        };
        Some(LabeledBox {
            category_id,
            bbox: BBox::coco(width - x - w, y, w, h),
        })
    });
    Sample {
        image: imageops::flip_horizontal(&s.image),
        boxes,
    }
}

/// Resizes by `factor` (bilinear). Image dims are rounded to whole pixels;
/// boxes are scaled exactly and then clipped.
pub fn scale(s: &Sample, factor: f64) -> Result<Sample> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::Usage(format!("scale factor {factor} must be positive")));
    }
    if factor == 1.0 {
        return Ok(s.clone());
    }
    let w = ((f64::from(s.image.width()) * factor).round() as u32).max(1);
    let h = ((f64::from(s.image.height()) * factor).round() as u32).max(1);
    let image = resize_bilinear(&s.image, w, h);
    let dims = Dims::new(w, h);
    let boxes = map_boxes(&s.boxes, |b| {
        let [x, y, bw, bh] = b.bbox.values();
        let scaled = BBox::coco(x * factor, y * factor, bw * factor, bh * factor);
        clip(&scaled, dims).map(|bbox| LabeledBox { bbox, ..*b })
    });
    Ok(Sample { image, boxes })
}

/// Center-crops or gray-pads to `dims`, keeping the content centered.
/// Boxes losing more than the survival fraction are dropped.
pub fn recanvas(s: &Sample, dims: Dims, min_area_fraction: f64) -> Sample {
    let (sw, sh) = (s.image.width() as i64, s.image.height() as i64);
    let (tw, th) = (dims.width as i64, dims.height as i64);
    if (sw, sh) == (tw, th) {
        return s.clone();
    }
    let (ox, oy) = ((tw - sw) / 2, (th - sh) / 2);
    let mut image = RgbImage::from_pixel(dims.width, dims.height, PAD_GRAY);
    for y in 0..th {
        let sy = y - oy;
        if !(0..sh).contains(&sy) {
            continue;
        }
        for x in 0..tw {
            let sx = x - ox;
            if (0..sw).contains(&sx) {
                image.put_pixel(x as u32, y as u32, *s.image.get_pixel(sx as u32, sy as u32));
            }
        }
    }
    let rect = [0.0, 0.0, tw as f64, th as f64];
    let boxes = map_boxes(&s.boxes, |b| {
        let [x1, y1, x2, y2] = b.bbox.corners();
        let shifted = [x1 + ox as f64, y1 + oy as f64, x2 + ox as f64, y2 + oy as f64];
        clip_survivor(shifted, rect, b.bbox.area(), min_area_fraction).map(|bbox| LabeledBox { bbox, ..*b })
    });
    Sample { image, boxes }
}

/// Bilinear sample at continuous coordinates (pixel centers at `i + 0.5`);
/// out-of-image neighbours read as [`PAD_GRAY`].
fn sample_bilinear(img: &RgbImage, u: f64, v: f64) -> Rgb<u8> {
    let (x, y) = (u - 0.5, v - 0.5);
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (w, h) = (img.width() as i64, img.height() as i64);
    let fetch = |xi: i64, yi: i64| -> [f64; 3] {
        if (0..w).contains(&xi) && (0..h).contains(&yi) {
            let p = img.get_pixel(xi as u32, yi as u32).0;
            [f64::from(p[0]), f64::from(p[1]), f64::from(p[2])]
        } else {
            let p = PAD_GRAY.0;
            [f64::from(p[0]), f64::from(p[1]), f64::from(p[2])]
        }
    };
    let (xi, yi) = (x0 as i64, y0 as i64);
    let (p00, p10, p01, p11) = (fetch(xi, yi), fetch(xi + 1, yi), fetch(xi, yi + 1), fetch(xi + 1, yi + 1));
    let mut out = [0u8; 3];
    for c in 0..3 {
        let top = p00[c] * (1.0 - fx) + p10[c] * fx;
        let bottom = p01[c] * (1.0 - fx) + p11[c] * fx;
        out[c] = (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8;
    }
    Rgb(out)
}

/// Rotates `p` by `degrees` about `center`, clockwise on screen (y down).
pub fn rotate_point(p: (f64, f64), center: (f64, f64), degrees: f64) -> (f64, f64) {
    let (sin, cos) = degrees.to_radians().sin_cos();
    let (dx, dy) = (p.0 - center.0, p.1 - center.1);
    (center.0 + cos * dx - sin * dy, center.1 + sin * dx + cos * dy)
}

pub fn rotate(s: &Sample, degrees: f64) -> Result<Sample> {
    rotate_with(s, degrees, DEFAULT_MIN_AREA_FRACTION)
}

/// Rotates the image about its center on a same-size canvas. Each box is
/// replaced by the axis-aligned hull of its rotated corners, clipped, and
/// dropped if less than `min_area_fraction` of its original area remains.
pub fn rotate_with(s: &Sample, degrees: f64, min_area_fraction: f64) -> Result<Sample> {
    if degrees.is_nan() || degrees.abs() > 180.0 {
        return Err(Error::Usage(format!("rotation {degrees} outside [-180, 180]")));
    }
    if degrees == 0.0 {
        return Ok(s.clone());
    }
    let (w, h) = (s.image.width(), s.image.height());
    let center = (f64::from(w) / 2.0, f64::from(h) / 2.0);
    let image = RgbImage::from_fn(w, h, |x, y| {
        let (u, v) = rotate_point((f64::from(x) + 0.5, f64::from(y) + 0.5), center, -degrees);
        sample_bilinear(&s.image, u, v)
    });
    let rect = [0.0, 0.0, f64::from(w), f64::from(h)];
    let boxes = map_boxes(&s.boxes, |b| {
        let [x1, y1, x2, y2] = b.bbox.corners();
        let pts = [(x1, y1), (x2, y1), (x2, y2), (x1, y2)].map(|p| rotate_point(p, center, degrees));
        let hull = [
            pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
            pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min),
            pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max),
            pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
        ];
        clip_survivor(hull, rect, b.bbox.area(), min_area_fraction).map(|bbox| LabeledBox { bbox, ..*b })
    });
    Ok(Sample { image, boxes })
}

/// Applied jitter: additive hue shift (fraction of a full turn) and
/// multiplicative saturation and value gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsvGains {
    pub hue: f64,
    pub saturation: f64,
    pub value: f64,
}

impl HsvGains {
    pub const IDENTITY: HsvGains = HsvGains {
        hue: 0.0,
        saturation: 1.0,
        value: 1.0,
    };

    pub fn is_identity(&self) -> bool {
        self.hue == 0.0 && self.saturation == 1.0 && self.value == 1.0
    }
}

fn rgb_to_hsv(p: [u8; 3]) -> (f64, f64, f64) {
    let [r, g, b] = p.map(|c| f64::from(c) / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / delta).rem_euclid(6.0) / 6.0
    } else if max == g {
        ((b - r) / delta + 2.0) / 6.0
    } else {
        ((r - g) / delta + 4.0) / 6.0
    };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    (h, s, max)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let h6 = h.rem_euclid(1.0) * 6.0;
    let sector = h6.floor();
    let f = h6 - sector;
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - s * f), v * (1.0 - s * (1.0 - f)));
    let (r, g, b) = match sector as u8 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    [r, g, b].map(|c| (c * 255.0).round().clamp(0.0, 255.0) as u8)
}

/// Color jitter in HSV space with clamping. Boxes are untouched.
pub fn hsv_jitter(s: &Sample, gains: HsvGains) -> Sample {
    if gains.is_identity() {
        return s.clone();
    }
    let mut image = s.image.clone();
    for px in image.pixels_mut() {
        let (h, sat, v) = rgb_to_hsv(px.0);
        let h = (h + gains.hue).rem_euclid(1.0);
        let sat = (sat * gains.saturation).clamp(0.0, 1.0);
        let v = (v * gains.value).clamp(0.0, 1.0);
        px.0 = hsv_to_rgb(h, sat, v);
    }
    Sample {
        image,
        boxes: s.boxes.clone(),
    }
}

/// Geometry of an aspect-preserving fit into a `target x target` square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LetterboxGeometry {
    pub scale: f64,
    pub resized: Dims,
    pub pad_left: u32,
    pub pad_right: u32,
    pub pad_top: u32,
    pub pad_bottom: u32,
}

pub fn letterbox_geometry(src: Dims, target: u32) -> LetterboxGeometry {
    let (w, h) = (f64::from(src.width), f64::from(src.height));
    let t = f64::from(target);
    let scale = (t / w).min(t / h);
    let rw = ((w * scale).round() as u32).clamp(1, target);
    let rh = ((h * scale).round() as u32).clamp(1, target);
    let (px, py) = (target - rw, target - rh);
    LetterboxGeometry {
        scale,
        resized: Dims::new(rw, rh),
        pad_left: px / 2,
        pad_right: px - px / 2,
        pad_top: py / 2,
        pad_bottom: py - py / 2,
    }
}

/// Aspect-preserving resize into `target x target` with even gray padding
/// (the odd pixel goes to the right/bottom).
pub fn letterbox(s: &Sample, target: u32) -> Result<Sample> {
    if target == 0 {
        return Err(Error::Usage("letterbox target must be positive".into()));
    }
    let src = s.dims();
    if src == Dims::new(target, target) {
        return Ok(s.clone());
    }
    let g = letterbox_geometry(src, target);
    let resized = resize_bilinear(&s.image, g.resized.width, g.resized.height);
    let mut image = RgbImage::from_pixel(target, target, PAD_GRAY);
    imageops::replace(&mut image, &resized, i64::from(g.pad_left), i64::from(g.pad_top));
    let (sx_num, sx_den) = (f64::from(g.resized.width), f64::from(src.width));
    let (sy_num, sy_den) = (f64::from(g.resized.height), f64::from(src.height));
    let (ox, oy) = (f64::from(g.pad_left), f64::from(g.pad_top));
    let dims = Dims::new(target, target);
    let boxes = map_boxes(&s.boxes, |b| {
        let [x, y, w, h] = b.bbox.values();
        let mapped = BBox::coco(
            x * sx_num / sx_den + ox,
            y * sy_num / sy_den + oy,
            w * sx_num / sx_den,
            h * sy_num / sy_den,
        );
        clip(&mapped, dims).map(|bbox| LabeledBox { bbox, ..*b })
    });
    Ok(Sample { image, boxes })
}

/// Non-uniform resize to exactly `target x target`.
pub fn stretch(s: &Sample, target: u32) -> Result<Sample> {
    if target == 0 {
        return Err(Error::Usage("stretch target must be positive".into()));
    }
    let src = s.dims();
    if src == Dims::new(target, target) {
        return Ok(s.clone());
    }
    let image = resize_bilinear(&s.image, target, target);
    let t = f64::from(target);
    let (fx, fy) = (t / f64::from(src.width), t / f64::from(src.height));
    let dims = Dims::new(target, target);
    let boxes = map_boxes(&s.boxes, |b| {
        let [x, y, w, h] = b.bbox.values();
        clip(&BBox::coco(x * fx, y * fy, w * fx, h * fy), dims).map(|bbox| LabeledBox { bbox, ..*b })
    });
    Ok(Sample { image, boxes })
}

/// Draws the mosaic center uniformly from the middle half of the canvas.
pub fn mosaic_center(target: u32, seed: u64) -> (u32, u32) {
    let mut rng = rng_for(seed, "mosaic", &[]);
    let (lo, hi) = (target / 4, (3 * target) / 4);
    (rng.random_range(lo..=hi), rng.random_range(lo..=hi))
}

pub fn mosaic(samples: &[Sample], target: u32, seed: u64) -> Result<Sample> {
    mosaic_at(samples, target, mosaic_center(target, seed), DEFAULT_MIN_AREA_FRACTION)
}

/// 2x2 composition on a `target x target` canvas around `center`.
///
/// Each source is first scaled so its longer side equals `target`. Source 0
/// sits with its bottom-right corner on the center, source 1 bottom-left,
/// source 2 top-right, source 3 top-left; whatever falls outside its
/// quadrant is cut away.
pub fn mosaic_at(samples: &[Sample], target: u32, center: (u32, u32), min_area_fraction: f64) -> Result<Sample> {
    if samples.len() != 4 {
        return Err(Error::Usage(format!("mosaic needs 4 samples, got {}", samples.len())));
    }
    if target == 0 || center.0 > target || center.1 > target {
        return Err(Error::Usage(format!("mosaic center {center:?} outside a {target}px canvas")));
    }
    let t = i64::from(target);
    let (xc, yc) = (i64::from(center.0), i64::from(center.1));
    let mut canvas = RgbImage::from_pixel(target, target, PAD_GRAY);
    let mut boxes = Vec::new();
    for (q, src) in samples.iter().enumerate() {
        let longest = src.image.width().max(src.image.height());
        let src = if longest == target {
            src.clone()
        } else {
            scale(src, f64::from(target) / f64::from(longest))?
        };
        let (w, h) = (i64::from(src.image.width()), i64::from(src.image.height()));
        let (ox, oy) = match q {
            0 => (xc - w, yc - h),
            1 => (xc, yc - h),
            2 => (xc - w, yc),
            _ => (xc, yc),
        };
        let region = match q {
            0 => [(xc - w).max(0), (yc - h).max(0), xc, yc],
            1 => [xc, (yc - h).max(0), (xc + w).min(t), yc],
            2 => [(xc - w).max(0), yc, xc, (yc + h).min(t)],
            _ => [xc, yc, (xc + w).min(t), (yc + h).min(t)],
        };
        for y in region[1]..region[3] {
            for x in region[0]..region[2] {
                let p = *src.image.get_pixel((x - ox) as u32, (y - oy) as u32);
                canvas.put_pixel(x as u32, y as u32, p);
            }
        }
        let rect = region.map(|v| v as f64);
        let (fx, fy) = (ox as f64, oy as f64);
        boxes.extend(src.boxes.iter().filter_map(|b| {
            let [x1, y1, x2, y2] = b.bbox.corners();
            clip_survivor([x1 + fx, y1 + fy, x2 + fx, y2 + fy], rect, b.bbox.area(), min_area_fraction)
                .map(|bbox| LabeledBox { bbox, ..*b })
        }));
    }
    Ok(Sample { image: canvas, boxes })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResizeMode {
    #[default]
    Letterbox,
    Stretch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub flip_prob: f64,
    pub scale_range: (f64, f64),
    pub rotate_deg_max: f64,
    /// Hue shift range, saturation and value gain ranges (`1 +/- gain`).
    pub hsv_gains: (f64, f64, f64),
    pub mosaic_enabled: bool,
    pub target_size: u32,
    pub seed: u64,
    pub swap_laterality: bool,
    pub min_area_fraction: f64,
    pub resize: ResizeMode,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            flip_prob: 0.5,
            scale_range: (0.5, 1.5),
            rotate_deg_max: 10.0,
            hsv_gains: (0.015, 0.7, 0.4),
            mosaic_enabled: true,
            target_size: 416,
            seed: 0,
            swap_laterality: true,
            min_area_fraction: DEFAULT_MIN_AREA_FRACTION,
            resize: ResizeMode::Letterbox,
        }
    }
}

impl AugmentConfig {
    /// Settings under which [`pipeline`] reduces to a plain resize.
    pub fn identity(target_size: u32) -> Self {
        AugmentConfig {
            flip_prob: 0.0,
            scale_range: (1.0, 1.0),
            rotate_deg_max: 0.0,
            hsv_gains: (0.0, 0.0, 0.0),
            mosaic_enabled: false,
            target_size,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.scale_range;
        let (h, s, v) = self.hsv_gains;
        let ok = (0.0..=1.0).contains(&self.flip_prob)
            && lo > 0.0
            && lo <= hi
            && (0.0..=180.0).contains(&self.rotate_deg_max)
            && (0.0..=0.5).contains(&h)
            && (0.0..=1.0).contains(&s)
            && (0.0..=1.0).contains(&v)
            && self.target_size > 0
            && (0.0..=1.0).contains(&self.min_area_fraction);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid augmentation configuration: {self:?}")))
        }
    }
}

/// Pipeline input: one frame, or four frames when mosaic may apply.
#[derive(Debug, Clone)]
pub enum AugmentInput {
    Single(Sample),
    Quad(Box<[Sample; 4]>),
}

impl AugmentInput {
    fn primary(&self) -> &Sample {
        match self {
            AugmentInput::Single(s) => s,
            AugmentInput::Quad(q) => &q[0],
        }
    }
}

/// Random draws for one pipeline invocation, in a fixed consumption order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AugmentDraws {
    pub mosaic_seed: u64,
    pub flip: bool,
    pub scale: f64,
    pub rotate_deg: f64,
    pub gains: HsvGains,
}

impl AugmentDraws {
    pub fn draw(cfg: &AugmentConfig, epoch: usize, index: u64) -> Self {
        let mut rng = rng_for(cfg.seed, "augment", &[epoch as u64, index]);
        let mosaic_seed = rng.next_u64();
        let mut unit = || rng.random::<f64>();
        let signed = |u: f64| 2.0 * u - 1.0;
        let flip = unit() < cfg.flip_prob;
        let (lo, hi) = cfg.scale_range;
        let scale = lo + unit() * (hi - lo);
        let rotate_deg = signed(unit()) * cfg.rotate_deg_max;
        let (gh, gs, gv) = cfg.hsv_gains;
        let gains = HsvGains {
            hue: signed(unit()) * gh,
            saturation: 1.0 + signed(unit()) * gs,
            value: 1.0 + signed(unit()) * gv,
        };
        AugmentDraws {
            mosaic_seed,
            flip,
            scale,
            rotate_deg,
            gains,
        }
    }
}

/// Full training-time augmentation for sample `index` at `epoch`.
///
/// Mosaic (when enabled and `Quad` input is given) applies only while
/// `epoch < epochs_total - mosaic_cutoff`. Then flip, zoom (scale followed
/// by a center crop/pad back to the pre-scale size), rotation and HSV
/// jitter, then the final resize to `target_size`.
pub fn pipeline(
    input: &AugmentInput,
    cfg: &AugmentConfig,
    epoch: usize,
    epochs_total: usize,
    mosaic_cutoff: usize,
    index: u64,
) -> Result<Sample> {
    if epoch >= epochs_total {
        return Err(Error::Usage(format!("epoch {epoch} outside 0..{epochs_total}")));
    }
    let draws = AugmentDraws::draw(cfg, epoch, index);
    let use_mosaic = cfg.mosaic_enabled && mosaic_active(epoch, epochs_total, mosaic_cutoff);
    let mut s = match input {
        AugmentInput::Quad(q) if use_mosaic => mosaic_at(
            &q[..],
            cfg.target_size,
            mosaic_center(cfg.target_size, draws.mosaic_seed),
            cfg.min_area_fraction,
        )?,
        other => other.primary().clone(),
    };
    if draws.flip {
        s = hflip(&s, cfg.swap_laterality);
    }
    if draws.scale != 1.0 {
        let dims = s.dims();
        s = recanvas(&scale(&s, draws.scale)?, dims, cfg.min_area_fraction);
    }
    if draws.rotate_deg != 0.0 {
        s = rotate_with(&s, draws.rotate_deg, cfg.min_area_fraction)?;
    }
    s = hsv_jitter(&s, draws.gains);
    match cfg.resize {
        ResizeMode::Letterbox => letterbox(&s, cfg.target_size),
        ResizeMode::Stretch => stretch(&s, cfg.target_size),
    }
}

/// Runs [`pipeline`] over a batch; item `i` uses sample index `first_index + i`.
pub fn augment_batch(
    inputs: &[AugmentInput],
    cfg: &AugmentConfig,
    epoch: usize,
    epochs_total: usize,
    mosaic_cutoff: usize,
    first_index: u64,
    exec: Execution,
) -> Result<Vec<Sample>> {
    cfg.validate()?;
    exec.map(inputs, |i, input| {
        pipeline(input, cfg, epoch, epochs_total, mosaic_cutoff, first_index + i as u64)
    })
    .into_iter()
    .collect()
}
