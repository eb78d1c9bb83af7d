//! COCO / YOLO annotation handling that keeps track of source videos.
//!
//! Frames extracted from a video keep a `video_id` so that train/test splits
//! can be made at whole-video granularity. The id comes from, in order: a
//! `video_id` key on the COCO image record, a `video_id,file_name` CSV
//! manifest, or the first directory component of `file_name`.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::io::Read;
use std::path::{Component, Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::geometry::{clip, convert, BBox, Convention, Dims};
use crate::seed::rng_for;
use crate::{Error, Result};

pub const LEFT_HAND: u32 = 0;
pub const RIGHT_HAND: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub id: u32,
    pub name: String,
}

/// Ordered foreground classes. Background is implicit and has no id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryTaxonomy {
    classes: Vec<Category>,
}

impl Default for CategoryTaxonomy {
    fn default() -> Self {
        CategoryTaxonomy {
            classes: vec![
                Category {
                    id: LEFT_HAND,
                    name: "left_hand".into(),
                },
                Category {
                    id: RIGHT_HAND,
                    name: "right_hand".into(),
                },
            ],
        }
    }
}

impl CategoryTaxonomy {
    pub fn new(classes: Vec<Category>) -> Result<Self> {
        let mut ids = HashSet::new();
        let mut names = HashSet::new();
        for c in &classes {
            if c.name.is_empty() {
                return Err(Error::Validation(format!("category {} has an empty name", c.id)));
            }
            if !ids.insert(c.id) {
                return Err(Error::Validation(format!("duplicate category id {}", c.id)));
            }
            if !names.insert(c.name.as_str()) {
                return Err(Error::Validation(format!("duplicate category name {:?}", c.name)));
            }
        }
        Ok(CategoryTaxonomy { classes })
    }

    pub fn classes(&self) -> &[Category] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Position of `id` in the taxonomy; this is the YOLO class index.
    pub fn index_of(&self, id: u32) -> Option<usize> {
        self.classes.iter().position(|c| c.id == id)
    }

    pub fn name_of(&self, id: u32) -> Option<&str> {
        self.classes
            .iter()
            .find(|c| c.id == id)
            .map(|c| c.name.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRecord {
    pub image_id: u64,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
    pub video_id: String,
}

impl ImageRecord {
    pub fn dims(&self) -> Dims {
        Dims::new(self.width, self.height)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthBox {
    pub ann_id: u64,
    pub image_id: u64,
    pub category_id: u32,
    /// Pixel `[x, y, w, h]`.
    pub bbox: BBox,
}

/// Images, boxes and taxonomy. Immutable once validated.
#[derive(Debug, Clone, PartialEq)]
pub struct DetDataset {
    taxonomy: CategoryTaxonomy,
    images: Vec<ImageRecord>,
    annotations: Vec<GroundTruthBox>,
}

impl DetDataset {
    /// Validates and assembles a dataset.
    pub fn new(
        taxonomy: CategoryTaxonomy,
        images: Vec<ImageRecord>,
        annotations: Vec<GroundTruthBox>,
    ) -> Result<Self> {
        let mut image_ids = HashSet::new();
        for img in &images {
            if !image_ids.insert(img.image_id) {
                return Err(Error::Validation(format!("duplicate image id {}", img.image_id)));
            }
            if img.width == 0 || img.height == 0 {
                return Err(Error::Validation(format!(
                    "image {} has non-positive size {}x{}",
                    img.image_id, img.width, img.height
                )));
            }
            if img.video_id.is_empty() {
                return Err(Error::Validation(format!("image {} has an empty video id", img.image_id)));
            }
        }

        let dangling: Vec<u64> = annotations
            .iter()
            .filter(|a| !image_ids.contains(&a.image_id))
            .map(|a| a.ann_id)
            .collect();
        if !dangling.is_empty() {
            return Err(Error::Referential { ann_ids: dangling });
        }

        let mut ann_ids = HashSet::new();
        for a in &annotations {
            if !ann_ids.insert(a.ann_id) {
                return Err(Error::Validation(format!("duplicate annotation id {}", a.ann_id)));
            }
            if taxonomy.index_of(a.category_id).is_none() {
                return Err(Error::Validation(format!(
                    "annotation {} has unknown category {}",
                    a.ann_id, a.category_id
                )));
            }
            let valid = a.bbox.convention() == Convention::CocoXywh
                && a.bbox.values().iter().all(|v| v.is_finite())
                && a.bbox.width() > 0.0
                && a.bbox.height() > 0.0;
            if !valid {
                return Err(Error::Validation(format!(
                    "annotation {} has non-positive box dimensions {:?}",
                    a.ann_id,
                    a.bbox.values()
                )));
            }
        }

        Ok(DetDataset {
            taxonomy,
            images,
            annotations,
        })
    }

    pub fn empty(taxonomy: CategoryTaxonomy) -> Self {
        DetDataset {
            taxonomy,
            images: Vec::new(),
            annotations: Vec::new(),
        }
    }

    pub fn taxonomy(&self) -> &CategoryTaxonomy {
        &self.taxonomy
    }

    pub fn images(&self) -> &[ImageRecord] {
        &self.images
    }

    pub fn annotations(&self) -> &[GroundTruthBox] {
        &self.annotations
    }

    pub fn image(&self, image_id: u64) -> Option<&ImageRecord> {
        self.images.iter().find(|i| i.image_id == image_id)
    }

    /// Annotations grouped by image id.
    pub fn annotations_by_image(&self) -> HashMap<u64, Vec<&GroundTruthBox>> {
        let mut map: HashMap<u64, Vec<&GroundTruthBox>> = HashMap::new();
        for a in &self.annotations {
            map.entry(a.image_id).or_default().push(a);
        }
        map
    }

    pub fn video_ids(&self) -> BTreeSet<String> {
        self.images.iter().map(|i| i.video_id.clone()).collect()
    }

    /// Frames and boxes of the listed videos, preserving input order.
    pub fn restrict_to_videos(&self, videos: &BTreeSet<String>) -> DetDataset {
        let images: Vec<ImageRecord> = self
            .images
            .iter()
            .filter(|i| videos.contains(&i.video_id))
            .cloned()
            .collect();
        let kept: HashSet<u64> = images.iter().map(|i| i.image_id).collect();
        let annotations = self
            .annotations
            .iter()
            .filter(|a| kept.contains(&a.image_id))
            .cloned()
            .collect();
        DetDataset {
            taxonomy: self.taxonomy.clone(),
            images,
            annotations,
        }
    }

    /// Overrides video ids from a `file_name -> video_id` manifest. Images
    /// missing from the manifest keep their current id.
    pub fn with_manifest(&self, manifest: &HashMap<String, String>) -> DetDataset {
        let mut out = self.clone();
        for img in &mut out.images {
            if let Some(v) = manifest.get(&img.file_name) {
                img.video_id = v.clone();
            }
        }
        out
    }
}

/// First directory component of `file_name`; the whole name when there is
/// no directory.
pub fn video_id_from_path(file_name: &str) -> String {
    let parts: Vec<&str> = file_name
        .split(['/', '\\'])
        .filter(|p| !p.is_empty() && *p != ".")
        .collect();
    match parts.as_slice() {
        [] => file_name.to_string(),
        [only] => only.to_string(),
        [first, ..] => first.to_string(),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CocoDocument {
    images: Vec<CocoImage>,
    annotations: Vec<CocoAnnotation>,
    categories: Vec<Category>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CocoImage {
    id: u64,
    file_name: String,
    width: u32,
    height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    video_id: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CocoAnnotation {
    id: u64,
    image_id: u64,
    category_id: u32,
    bbox: [f64; 4],
    // Written for pycocotools compatibility, ignored on read.
    #[serde(default, skip_deserializing)]
    area: f64,
    #[serde(default, skip_deserializing)]
    iscrowd: u8,
}

/// Parses a COCO annotation document.
pub fn parse_coco(document: &[u8]) -> Result<DetDataset> {
    let doc: CocoDocument = serde_json::from_slice(document).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let taxonomy = CategoryTaxonomy::new(doc.categories)?;
    let images = doc
        .images
        .into_iter()
        .map(|i| ImageRecord {
            video_id: i.video_id.unwrap_or_else(|| video_id_from_path(&i.file_name)),
            image_id: i.id,
            file_name: i.file_name,
            width: i.width,
            height: i.height,
        })
        .collect();
    let annotations = doc
        .annotations
        .into_iter()
        .map(|a| GroundTruthBox {
            ann_id: a.id,
            image_id: a.image_id,
            category_id: a.category_id,
            bbox: BBox::coco(a.bbox[0], a.bbox[1], a.bbox[2], a.bbox[3]),
        })
        .collect();
    DetDataset::new(taxonomy, images, annotations)
}

/// Serializes to a COCO document. `video_id` is kept on each image record
/// so that the source video survives a round trip.
pub fn serialize_coco(ds: &DetDataset) -> Vec<u8> {
    let doc = CocoDocument {
        images: ds
            .images
            .iter()
            .map(|i| CocoImage {
                id: i.image_id,
                file_name: i.file_name.clone(),
                width: i.width,
                height: i.height,
                video_id: Some(i.video_id.clone()),
            })
            .collect(),
        annotations: ds
            .annotations
            .iter()
            .map(|a| {
                let bbox = a.bbox.values();
                CocoAnnotation {
                    id: a.ann_id,
                    image_id: a.image_id,
                    category_id: a.category_id,
                    bbox,
                    area: bbox[2] * bbox[3],
                    iscrowd: 0,
                }
            })
            .collect(),
        categories: ds.taxonomy.classes.clone(),
    };
    serde_json::to_vec_pretty(&doc).expect("COCO document always serializes")
}

/// Reads a `video_id,file_name` CSV manifest into `file_name -> video_id`.
pub fn read_manifest<R: Read>(reader: R) -> Result<HashMap<String, String>> {
    #[derive(Deserialize)]
    struct Row {
        video_id: String,
        file_name: String,
    }
    let mut rdr = csv::Reader::from_reader(reader);
    let mut map = HashMap::new();
    for row in rdr.deserialize() {
        let row: Row = row?;
        if row.video_id.is_empty() {
            return Err(Error::Validation(format!(
                "manifest entry for {:?} has an empty video_id",
                row.file_name
            )));
        }
        map.insert(row.file_name, row.video_id);
    }
    Ok(map)
}

/// YOLO label text for one image: `class cx cy w h` per box, six decimals,
/// LF endings. Boxes are clipped to the image before normalizing.
pub fn yolo_label_text(ds: &DetDataset, image: &ImageRecord) -> Result<String> {
    let dims = image.dims();
    let mut out = String::new();
    for a in ds.annotations.iter().filter(|a| a.image_id == image.image_id) {
        let class = ds
            .taxonomy
            .index_of(a.category_id)
            .expect("validated dataset has known categories");
        let clipped = clip(&a.bbox, dims).ok_or_else(|| {
            Error::Validation(format!(
                "annotation {} lies outside image {}",
                a.ann_id, image.image_id
            ))
        })?;
        let v = convert(&clipped, Convention::YoloNorm, Some(dims))?.values();
        if v.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::Validation(format!(
                "annotation {} normalizes outside [0, 1]: {v:?}",
                a.ann_id
            )));
        }
        writeln!(out, "{class} {:.6} {:.6} {:.6} {:.6}", v[0], v[1], v[2], v[3])
            .expect("writing to a String cannot fail");
    }
    Ok(out)
}

/// Relative label path for an image: its file path with a `.txt` extension.
pub fn yolo_label_path(file_name: &str) -> Result<PathBuf> {
    let path = Path::new(file_name);
    let safe = path
        .components()
        .all(|c| matches!(c, Component::Normal(_) | Component::CurDir));
    if !safe || path.file_stem().is_none() {
        return Err(Error::Validation(format!(
            "image file name {file_name:?} cannot be mapped to a label path"
        )));
    }
    Ok(path.with_extension("txt"))
}

/// Writes one label file per image under `out_dir`, mirroring the image's
/// relative directory. Returns the number of files written.
pub fn write_yolo_labels(ds: &DetDataset, out_dir: &Path) -> Result<usize> {
    let mut written = 0;
    for image in &ds.images {
        let text = yolo_label_text(ds, image)?;
        let path = out_dir.join(yolo_label_path(&image.file_name)?);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        written += 1;
    }
    Ok(written)
}

/// Parses YOLO label text back into `(category_id, pixel COCO box)` pairs.
pub fn parse_yolo_labels(
    text: &str,
    dims: Dims,
    taxonomy: &CategoryTaxonomy,
) -> Result<Vec<(u32, BBox)>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: &str| Error::Parse {
            line: lineno + 1,
            column: 1,
            message: msg.to_string(),
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(bad("expected `class cx cy w h`"));
        }
        let class: usize = fields[0].parse().map_err(|_| bad("class index is not an integer"))?;
        let category = taxonomy
            .classes()
            .get(class)
            .ok_or_else(|| bad("class index outside the taxonomy"))?;
        let mut v = [0.0; 4];
        for (slot, field) in v.iter_mut().zip(&fields[1..]) {
            *slot = field.parse().map_err(|_| bad("coordinate is not a number"))?;
        }
        let b = BBox::yolo(v[0], v[1], v[2], v[3]);
        if !b.is_valid() {
            return Err(bad("normalized coordinate outside [0, 1]"));
        }
        out.push((category.id, convert(&b, Convention::CocoXywh, Some(dims))?));
    }
    Ok(out)
}

/// Partitions whole videos into a train and a test dataset.
///
/// Distinct video ids are sorted, shuffled with a generator derived from
/// `seed`, and the first `train_videos` go to the training side.
pub fn split_by_video(
    ds: &DetDataset,
    train_videos: usize,
    test_videos: usize,
    seed: u64,
) -> Result<(DetDataset, DetDataset)> {
    let mut videos: Vec<String> = ds.video_ids().into_iter().collect();
    if train_videos + test_videos != videos.len() {
        return Err(Error::Config(format!(
            "requested {train_videos} train + {test_videos} test videos but the dataset has {}",
            videos.len()
        )));
    }
    videos.shuffle(&mut rng_for(seed, "split", &[]));
    let test: BTreeSet<String> = videos.split_off(train_videos).into_iter().collect();
    let train: BTreeSet<String> = videos.into_iter().collect();
    Ok((ds.restrict_to_videos(&train), ds.restrict_to_videos(&test)))
}

/// What [`drop_videos`] removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct DropSummary {
    pub videos: usize,
    pub images: usize,
    pub annotations: usize,
}

/// Removes every frame and box belonging to `excluded` videos.
pub fn drop_videos(ds: &DetDataset, excluded: &BTreeSet<String>) -> Result<(DetDataset, DropSummary)> {
    let present = ds.video_ids();
    let unknown: Vec<&String> = excluded.difference(&present).collect();
    if !unknown.is_empty() {
        return Err(Error::Config(format!("unknown video ids: {unknown:?}")));
    }
    let keep: BTreeSet<String> = present.difference(excluded).cloned().collect();
    let out = ds.restrict_to_videos(&keep);
    let summary = DropSummary {
        videos: excluded.len(),
        images: ds.images.len() - out.images.len(),
        annotations: ds.annotations.len() - out.annotations.len(),
    };
    Ok((out, summary))
}

/// Frame and box counts per video, for reporting.
pub fn video_counts(ds: &DetDataset) -> BTreeMap<String, (usize, usize)> {
    let by_image = ds.annotations_by_image();
    let mut counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for img in &ds.images {
        let e = counts.entry(img.video_id.clone()).or_default();
        e.0 += 1;
        e.1 += by_image.get(&img.image_id).map_or(0, Vec::len);
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "info": {"description": "ignored"},
        "images": [{"id": 1, "file_name": "vid01/000001.png", "width": 416, "height": 416}],
        "annotations": [{"id": 7, "image_id": 1, "category_id": 0, "bbox": [104, 104, 208, 208],
                         "iscrowd": 0, "segmentation": [[1, 2, 3]]}],
        "categories": [{"id": 0, "name": "left_hand"}, {"id": 1, "name": "right_hand"}]
    }"#;

    fn image(id: u64, video: &str) -> ImageRecord {
        ImageRecord {
            image_id: id,
            file_name: format!("{video}/{id:06}.png"),
            width: 416,
            height: 416,
            video_id: video.into(),
        }
    }

    fn multi_video(videos: usize, frames: usize) -> DetDataset {
        let mut images = Vec::new();
        let mut anns = Vec::new();
        for v in 0..videos {
            for f in 0..frames {
                let id = (v * frames + f) as u64;
                images.push(image(id, &format!("video{v:02}")));
                anns.push(GroundTruthBox {
                    ann_id: id,
                    image_id: id,
                    category_id: (f % 2) as u32,
                    bbox: BBox::coco(10.0, 10.0, 50.0, 60.0),
                });
            }
        }
        DetDataset::new(CategoryTaxonomy::default(), images, anns).unwrap()
    }

    #[test]
    fn parses_minimal_document() {
        let ds = parse_coco(MINIMAL.as_bytes()).unwrap();
        assert_eq!(ds.images().len(), 1);
        assert_eq!(ds.annotations().len(), 1);
        assert_eq!(ds.taxonomy(), &CategoryTaxonomy::default());
        assert_eq!(ds.images()[0].video_id, "vid01");
        assert_eq!(ds.annotations()[0].bbox.values(), [104.0, 104.0, 208.0, 208.0]);
    }

    #[test]
    fn dangling_image_reference_names_annotation() {
        let doc = MINIMAL.replace(r#""image_id": 1"#, r#""image_id": 99"#);
        match parse_coco(doc.as_bytes()) {
            Err(Error::Referential { ann_ids }) => assert_eq!(ann_ids, vec![7]),
            other => panic!("expected referential error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_document_reports_location() {
        let doc = "{\n  \"images\": [,]\n}";
        match parse_coco(doc.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_non_positive_box() {
        let doc = MINIMAL.replace("[104, 104, 208, 208]", "[104, 104, 0, 208]");
        assert!(matches!(parse_coco(doc.as_bytes()), Err(Error::Validation(_))));
    }

    #[test]
    fn empty_dataset_serializes_three_empty_arrays() {
        let bytes = serialize_coco(&DetDataset::empty(CategoryTaxonomy::new(vec![]).unwrap()));
        let v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(v["images"], serde_json::json!([]));
        assert_eq!(v["annotations"], serde_json::json!([]));
        assert_eq!(v["categories"], serde_json::json!([]));
    }

    #[test]
    fn serialized_bbox_matches_input() {
        let ds = parse_coco(MINIMAL.as_bytes()).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&serialize_coco(&ds)).unwrap();
        assert_eq!(v["annotations"][0]["bbox"], serde_json::json!([104.0, 104.0, 208.0, 208.0]));
    }

    #[test]
    fn yolo_line_for_centered_box() {
        let ds = parse_coco(MINIMAL.as_bytes()).unwrap();
        let text = yolo_label_text(&ds, &ds.images()[0]).unwrap();
        assert_eq!(text, "0 0.500000 0.500000 0.500000 0.500000\n");
    }

    #[test]
    fn empty_image_gets_empty_label_file() {
        let ds = DetDataset::new(CategoryTaxonomy::default(), vec![image(1, "v")], vec![]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(write_yolo_labels(&ds, dir.path()).unwrap(), 1);
        let text = std::fs::read_to_string(dir.path().join("v/000001.txt")).unwrap();
        assert!(text.is_empty());
    }

    #[test]
    fn box_outside_image_is_a_validation_error() {
        let ds = DetDataset::new(
            CategoryTaxonomy::default(),
            vec![image(1, "v")],
            vec![GroundTruthBox {
                ann_id: 1,
                image_id: 1,
                category_id: 0,
                bbox: BBox::coco(500.0, 10.0, 20.0, 20.0),
            }],
        )
        .unwrap();
        assert!(matches!(yolo_label_text(&ds, &ds.images()[0]), Err(Error::Validation(_))));
    }

    #[test]
    fn label_paths_reject_escapes() {
        assert!(yolo_label_path("../x.png").is_err());
        assert!(yolo_label_path("/abs/x.png").is_err());
        assert_eq!(yolo_label_path("v1/f.png").unwrap(), PathBuf::from("v1/f.txt"));
    }

    #[test]
    fn video_id_fallback() {
        assert_eq!(video_id_from_path("case03/frame_0001.jpg"), "case03");
        assert_eq!(video_id_from_path("./case03/a/b.png"), "case03");
        assert_eq!(video_id_from_path("frame.png"), "frame.png");
    }

    #[test]
    fn manifest_overrides_path_fallback() {
        let ds = parse_coco(MINIMAL.as_bytes()).unwrap();
        let manifest = read_manifest("video_id,file_name\nsurgery_A,vid01/000001.png\n".as_bytes()).unwrap();
        assert_eq!(ds.with_manifest(&manifest).images()[0].video_id, "surgery_A");
    }

    #[test]
    fn split_seventeen_into_fifteen_and_two() {
        let ds = multi_video(17, 3);
        let (train, test) = split_by_video(&ds, 15, 2, 42).unwrap();
        assert_eq!(train.video_ids().len(), 15);
        assert_eq!(test.video_ids().len(), 2);
        assert!(train.video_ids().is_disjoint(&test.video_ids()));
        assert_eq!(train.images().len() + test.images().len(), ds.images().len());
    }

    #[test]
    fn split_two_videos_one_each() {
        let ds = multi_video(2, 4);
        for seed in 0..20 {
            let (train, test) = split_by_video(&ds, 1, 1, seed).unwrap();
            assert_eq!(train.images().len(), 4);
            assert_eq!(test.images().len(), 4);
        }
    }

    #[test]
    fn split_is_deterministic() {
        let ds = multi_video(10, 2);
        let a = split_by_video(&ds, 7, 3, 5).unwrap();
        let b = split_by_video(&ds, 7, 3, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_count_mismatch_is_config_error() {
        let ds = multi_video(5, 1);
        assert!(matches!(split_by_video(&ds, 3, 3, 0), Err(Error::Config(_))));
    }

    #[test]
    fn drop_three_of_twenty() {
        let ds = multi_video(20, 2);
        let excluded: BTreeSet<String> = ["video03", "video11", "video17"].map(String::from).into();
        let (out, summary) = drop_videos(&ds, &excluded).unwrap();
        assert_eq!(out.video_ids().len(), 17);
        assert!(out.video_ids().is_disjoint(&excluded));
        assert_eq!(summary, DropSummary { videos: 3, images: 6, annotations: 6 });
    }

    #[test]
    fn drop_edge_cases() {
        let ds = multi_video(4, 2);
        assert_eq!(drop_videos(&ds, &BTreeSet::new()).unwrap().0, ds);
        let (empty, _) = drop_videos(&ds, &ds.video_ids()).unwrap();
        assert!(empty.images().is_empty() && empty.annotations().is_empty());
        let bogus: BTreeSet<String> = ["nope".to_string()].into();
        assert!(matches!(drop_videos(&ds, &bogus), Err(Error::Config(_))));
    }

    #[test]
    fn taxonomy_rejects_duplicates() {
        let dup = vec![
            Category { id: 0, name: "a".into() },
            Category { id: 0, name: "b".into() },
        ];
        assert!(CategoryTaxonomy::new(dup).is_err());
        let empty_name = vec![Category { id: 0, name: String::new() }];
        assert!(CategoryTaxonomy::new(empty_name).is_err());
    }
}
