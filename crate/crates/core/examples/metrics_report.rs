//! Overlap, agreement, ROC-AUC, t-test and majority vote on small inputs.

use perio::metrics::{
    binary_auc, cohens_kappa, dice, jaccard, majority_vote, pixel_accuracy, roc_auc_ovr, two_sample_t_test,
    ConfusionMatrix, ScoredSample,
};
use perio::{Mask, Stage};

fn main() -> perio::Result<()> {
    let a = Mask::from_fn(20, 20, |r, c| r < 12 && c < 12);
    let b = Mask::from_fn(20, 20, |r, c| r >= 4 && c >= 4 && r < 16 && c < 16);
    println!(
        "dice {:.4} jaccard {:.4} pixel accuracy {:.4}",
        dice(&a, &b)?,
        jaccard(&a, &b)?,
        pixel_accuracy(&a, &b)?
    );

    let truth = [0, 0, 1, 1, 1, 2, 2, 2, 2, 0];
    let rater = [0, 1, 1, 1, 2, 2, 2, 1, 2, 0];
    let cm = ConfusionMatrix::from_pairs(3, &truth, &rater)?;
    println!("confusion {:?}", cm.counts);
    println!("kappa {:.4}", cohens_kappa(&cm)?);

    let scores = [0.9, 0.8, 0.35, 0.6, 0.2, 0.1];
    let positive = [true, true, false, true, false, false];
    println!("binary auc {:?}", binary_auc(&scores, &positive));

    let samples: Vec<ScoredSample> = [
        (Stage::I, [0.7, 0.2, 0.1]),
        (Stage::I, [0.5, 0.4, 0.1]),
        (Stage::II, [0.2, 0.6, 0.2]),
        (Stage::II, [0.3, 0.3, 0.4]),
        (Stage::III, [0.1, 0.2, 0.7]),
        (Stage::III, [0.2, 0.5, 0.3]),
    ]
    .into_iter()
    .map(|(stage, probs)| ScoredSample {
        scores: probs.to_vec(),
        true_class: stage.index(),
    })
    .collect();
    let auc = roc_auc_ovr(&samples)?;
    println!("one-vs-rest auc {:?} macro {:.4}", auc.per_class, auc.macro_auc);

    let t = two_sample_t_test(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0])?;
    println!("t {:.3} df {} p {:.4}", t.t, t.df, t.p);

    println!("majority {:?}", majority_vote(&[Stage::II, Stage::III, Stage::II])?);
    Ok(())
}
