//! Detection dataset toolkit and evaluation harness for egocentric surgical
//! hand detection with left/right laterality.
//!
//! The crate covers everything around a detector except the network itself:
//! COCO/YOLO annotation handling with video-level splits, box geometry and
//! NMS, seeded label-aware augmentation, the COCO mAP protocol with a
//! background-aware confusion matrix, a training-schedule controller, and a
//! throughput harness for the post-processing stages.
//!
//! Data-parallel loops go through [`exec::Execution`]; with the `parallel`
//! feature (default) they run on rayon, otherwise sequentially.

pub mod augment;
pub mod bench;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod exec;
pub mod geometry;
pub mod seed;
pub mod synth;
pub mod trainctl;

pub use error::{Error, Result};
