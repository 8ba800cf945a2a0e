use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample {
    pub scores: Vec<f64>,
    pub true_class: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvrAuc {
    /// `None` for classes lacking positives or negatives.
    pub per_class: Vec<Option<f64>>,
    pub macro_auc: f64,
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Computed from mid-ranks (Mann–Whitney U).
pub fn binary_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), positive.len());
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j+1 share their mean
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&k| positive[k]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Some((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// One-vs-rest AUC per class and their unweighted mean over the classes
/// that have both positives and negatives.
pub fn roc_auc_ovr(samples: &[ScoredSample]) -> Result<OvrAuc> {
    let k = samples.first().map_or(0, |s| s.scores.len());
    if samples.iter().any(|s| s.scores.len() != k) {
        return Err(Error::input("all samples need the same number of class scores"));
    }
    if let Some(s) = samples.iter().find(|s| s.true_class >= k) {
        return Err(Error::input(format!(
            "true class {} out of range for {k} scores",
            s.true_class
        )));
    }
    let per_class: Vec<Option<f64>> = (0..k)
        .map(|c| {
            let scores: Vec<f64> = samples.iter().map(|s| s.scores[c]).collect();
            let pos: Vec<bool> = samples.iter().map(|s| s.true_class == c).collect();
            binary_auc(&scores, &pos)
        })
        .collect();
    let evaluated: Vec<f64> = per_class.iter().flatten().copied().collect();
    if evaluated.is_empty() {
        return Err(Error::NoAuc);
    }
    Ok(OvrAuc {
        macro_auc: evaluated.iter().sum::<f64>() / evaluated.len() as f64,
        per_class,
    })
}
