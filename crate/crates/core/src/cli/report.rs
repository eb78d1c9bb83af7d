//! Serialization of evaluation reports for downstream tooling.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::eval::{iou_thresholds, EvalReport};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(Error::Usage(format!("unknown format {other:?} (expected json or csv)"))),
        }
    }
}

/// One named output document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmittedFile {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// Renders a report. JSON yields a single `report.json`; CSV yields
/// `summary.csv`, `per_class_ap.csv`, one `pr_<class>.csv` per class and
/// `confusion.csv`. The first file is the primary document.
pub fn emit_report(report: &EvalReport, format: Format) -> Vec<EmittedFile> {
    match format {
        Format::Json => {
            let mut bytes = serde_json::to_vec_pretty(report).expect("reports always serialize");
            bytes.push(b'\n');
            vec![EmittedFile {
                name: "report.json".into(),
                bytes,
            }]
        }
        Format::Csv => {
            let mut files = vec![
                EmittedFile {
                    name: "summary.csv".into(),
                    bytes: summary_csv(report).into_bytes(),
                },
                EmittedFile {
                    name: "per_class_ap.csv".into(),
                    bytes: per_class_csv(report).into_bytes(),
                },
            ];
            // Curves and confusion labels are both in taxonomy order.
            for (curve, label) in report.pr_curves.iter().zip(&report.confusion.labels) {
                files.push(EmittedFile {
                    name: format!("pr_{label}.csv"),
                    bytes: curve.to_csv().into_bytes(),
                });
            }
            files.push(EmittedFile {
                name: "confusion.csv".into(),
                bytes: report.confusion.to_csv().into_bytes(),
            });
            files
        }
    }
}

fn summary_csv(r: &EvalReport) -> String {
    let mut out = String::from("metric,value\n");
    let rows: [(&str, String); 8] = [
        ("images", r.counts.images.to_string()),
        ("ground_truths", r.counts.ground_truths.to_string()),
        ("detections", r.counts.detections.to_string()),
        ("map_50", r.map_50.to_string()),
        ("map_50_95", r.map_50_95.to_string()),
        ("precision", r.pr_f1.precision.to_string()),
        ("recall", r.pr_f1.recall.to_string()),
        ("f1", r.pr_f1.f1.to_string()),
    ];
    for (k, v) in rows {
        writeln!(out, "{k},{v}").unwrap();
    }
    out
}

fn per_class_csv(r: &EvalReport) -> String {
    let mut out = String::from("category_id,name,gt_count,ap_50,ap_50_95");
    for t in iou_thresholds() {
        write!(out, ",ap_{t:.2}").unwrap();
    }
    out.push('\n');
    for c in &r.per_class {
        write!(out, "{},{},{},{},{}", c.category_id, c.name, c.gt_count, c.ap_50, c.ap_50_95).unwrap();
        for ap in c.ap {
            write!(out, ",{ap}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Writes every file into `dir`, creating it if needed.
pub fn write_files(dir: &Path, files: &[EmittedFile]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for f in files {
        let path = dir.join(&f.name);
        std::fs::write(&path, &f.bytes).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Short human-readable summary.
pub fn summary_text(r: &EvalReport) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "images {}  ground truth {}  detections {}",
        r.counts.images, r.counts.ground_truths, r.counts.detections
    )
    .unwrap();
    writeln!(out, "mAP@0.5 {:.4}  mAP@[0.5:0.95] {:.4}", r.map_50, r.map_50_95).unwrap();
    writeln!(
        out,
        "P {:.4}  R {:.4}  F1 {:.4}  (IoU {}, conf {})",
        r.pr_f1.precision, r.pr_f1.recall, r.pr_f1.f1, r.params.iou, r.params.conf
    )
    .unwrap();
    for c in &r.per_class {
        writeln!(out, "  {:<12} AP50 {:.4}  AP50-95 {:.4}  (n={})", c.name, c.ap_50, c.ap_50_95, c.gt_count).unwrap();
    }
    out
}
