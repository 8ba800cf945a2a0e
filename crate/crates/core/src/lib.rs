//! Radiographic bone loss (RBL) measurement and periodontitis staging from
//! dental segmentation masks.
//!
//! The crate is organised around the processing flow:
//!
//! 1. [`raster`] – mask/image primitives: smoothing, thresholding, connected
//!    components, Moore contour tracing, CEJ polyline walking, per-tooth
//!    instance extraction, overlays, heatmaps, resizing and augmentation.
//! 2. [`geometry`] – RBL measurement on one tooth instance (tooth/bone and
//!    tooth/CEJ contact segments, tooth axis, root apices, CEJ-to-crest and
//!    CEJ-to-apex lengths per side) and stage assignment from RBL thresholds.
//! 3. [`metrics`] – Dice, Jaccard, pixel accuracy, Cohen's kappa, one-vs-rest
//!    ROC-AUC, Student's two-sample t-test and majority voting.
//! 4. [`neural`] – a small reverse-mode autodiff engine with the layers needed
//!    for a toy U-Net segmenter and the stage classifier, Adam training,
//!    finite-difference gradient checks and a binary parameter format.
//! 5. [`phantom`] – parametric synthetic mask triples with analytic RBL truth.
//! 6. [`pipeline`] – end-to-end analysis, evaluation, report serialization and
//!    the HTTP service.
//!
//! Coordinates are `(row, col)` with row 0 at the top of the image.
//!
//! Runnable walkthroughs live in the crate's `examples/` directory, e.g.
//! `cargo run --release -p perio --example measure_phantom`.

pub mod error;
pub mod geometry;
pub mod metrics;
pub mod neural;
pub mod phantom;
pub mod pipeline;
pub mod raster;

pub use error::{Error, Result};
pub use geometry::{assign_stage, measure_rbl, RblMeasurement, Stage, StageThresholds};
pub use pipeline::{analyze, AnalyzeOptions, StageReport};
pub use raster::{GrayImage, Mask};
