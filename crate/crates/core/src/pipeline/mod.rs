//! End-to-end analysis of mask triples, evaluation against phantom truth and
//! rater tables, training data assembly and the HTTP service.

mod analyze;
mod evaluate;
pub mod service;
mod training;

pub use analyze::{
    analyze, image_id, instances, overlay_png, postprocess, restage, AnalyzeOptions, StageReport, ToothFlags,
    ToothReport, CEJ_THRESHOLD, PIPELINE_VERSION,
};
pub use evaluate::{
    evaluate, evaluate_dirs, kappa_matrix, segmentation_row, EvalBundle, EvalItem, ItemKey, KappaMatrix,
    RaterSummary, RaterTable, SegmentationMean, SegmentationRow, StageAgreement,
};
pub use training::{
    balanced_stage_crops, classifier_dataset, matched_instances, shape_segmentation_dataset, stage_crops,
};
