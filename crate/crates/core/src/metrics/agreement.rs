use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `k x k` count table, rows are the reference rater, columns the other.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub k: usize,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = counts.len();
        if counts.iter().any(|r| r.len() != k) {
            return Err(Error::input("confusion matrix must be square"));
        }
        Ok(Self { k, counts })
    }

    /// Tallies paired class indices.
    pub fn from_pairs(k: usize, truth: &[usize], pred: &[usize]) -> Result<Self> {
        if truth.len() != pred.len() {
            return Err(Error::input(format!(
                "{} reference labels but {} predictions",
                truth.len(),
                pred.len()
            )));
        }
        let mut cm = Self::new(k);
        for (&t, &p) in truth.iter().zip(pred) {
            if t >= k || p >= k {
                return Err(Error::input(format!("class index out of range for k={k}")));
            }
            cm.counts[t][p] += 1;
        }
        Ok(cm)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|i| self.counts[i][i]).sum()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::new(self.k);
        for (i, row) in self.counts.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                t.counts[j][i] = v;
            }
        }
        t
    }

    /// Observed agreement `trace / total`.
    pub fn accuracy(&self) -> Option<f64> {
        let n = self.total();
        (n > 0).then(|| self.trace() as f64 / n as f64)
    }
}

/// Unweighted Cohen's kappa `(p_o - p_e) / (1 - p_e)`.
pub fn cohens_kappa(cm: &ConfusionMatrix) -> Result<f64> {
    let n = cm.total();
    if n == 0 {
        return Err(Error::input("kappa needs at least one rated item"));
    }
    let n = n as f64;
    let p_o = cm.trace() as f64 / n;
    let p_e: f64 = (0..cm.k)
        .map(|c| {
            let row: u64 = cm.counts[c].iter().sum();
            let col: u64 = cm.counts.iter().map(|r| r[c]).sum();
            row as f64 * col as f64
        })
        .sum::<f64>()
        / (n * n);
    if (1.0 - p_e).abs() < 1e-15 {
        return Err(Error::UndefinedKappa);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Most frequent label; ties go to the greatest (most severe) label.
pub fn majority_vote<T: Ord + Copy>(labels: &[T]) -> Result<T> {
    let mut sorted = labels.to_vec();
    sorted.sort();
    let mut best: Option<(usize, T)> = None;
    for run in sorted.chunk_by(|a, b| a == b) {
        // later runs hold larger labels, so >= prefers them on ties
        if best.is_none_or(|(n, _)| run.len() >= n) {
            best = Some((run.len(), run[0]));
        }
    }
    best.map(|(_, v)| v)
        .ok_or_else(|| Error::input("majority vote needs at least one label"))
}
