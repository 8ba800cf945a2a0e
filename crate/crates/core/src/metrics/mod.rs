//! Segmentation overlap, rater agreement, ranking and significance statistics.

mod agreement;
mod auc;
mod overlap;
mod ttest;

pub use agreement::{cohens_kappa, majority_vote, ConfusionMatrix};
pub use auc::{binary_auc, roc_auc_ovr, OvrAuc, ScoredSample};
pub use overlap::{dice, jaccard, pixel_accuracy};
pub use ttest::{regularized_incomplete_beta, student_t_cdf, two_sample_t_test, TTest};
