//! Brute-force K-nearest-neighbor classification of the state count.

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{CoreError, Result};

/// Lazy learner: training features and labels stored verbatim.
#[derive(Debug, Clone)]
pub struct KnnModel {
    pub features: Array2<f64>,
    pub labels: Vec<u32>,
    pub k: usize,
}

/// Actual-by-predicted counts over the sorted class values.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    pub class_values: Vec<u32>,
    pub counts: Array2<u64>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        (0..self.class_values.len())
            .map(|i| self.counts.row(i).iter().sum())
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct KnnEvaluation {
    pub accuracy: f64,
    /// Binomial standard error sqrt(p(1-p)/total).
    pub stderr: f64,
    pub confusion: ConfusionMatrix,
}

/// Store the training set. The model owns copies so later mutation of the
/// dataset cannot change predictions.
pub fn knn_fit(features: Array2<f64>, labels: Vec<u32>, k: usize) -> Result<KnnModel> {
    let d = features.nrows();
    if d == 0 {
        return Err(CoreError::invalid("training set must be non-empty"));
    }
    if labels.len() != d {
        return Err(CoreError::invalid(format!(
            "{} labels for {d} training rows",
            labels.len()
        )));
    }
    if k == 0 || k > d {
        return Err(CoreError::invalid(format!("k = {k} must be in 1..={d}")));
    }
    Ok(KnnModel { features, labels, k })
}

/// Majority label among the k nearest training rows (Euclidean distance).
/// Distance ties resolve toward the lower training index, vote ties toward
/// the smaller class value.
pub fn knn_predict(model: &KnnModel, query: &[f64]) -> Result<u32> {
    if query.len() != model.features.ncols() {
        return Err(CoreError::invalid(format!(
            "query has {} entries, training rows have {}",
            query.len(),
            model.features.ncols()
        )));
    }
    let mut neighbors: Vec<(f64, usize)> = model
        .features
        .rows()
        .into_iter()
        .enumerate()
        .map(|(idx, row)| {
            let d2: f64 = row
                .iter()
                .zip(query.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (d2, idx)
        })
        .collect();
    let k = model.k;
    neighbors.select_nth_unstable_by(k - 1, |a, b| {
        a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1))
    });
    let mut nearest = neighbors[..k].to_vec();
    nearest.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

    let mut votes: Vec<(u32, usize)> = Vec::new();
    for (_, idx) in &nearest {
        let label = model.labels[*idx];
        match votes.iter_mut().find(|(l, _)| *l == label) {
            Some((_, count)) => *count += 1,
            None => votes.push((label, 1)),
        }
    }
    votes.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(votes[0].0)
}

/// Accuracy, binomial standard error, and the actual-by-predicted confusion
/// matrix over a test set.
pub fn knn_evaluate(
    model: &KnnModel,
    test_features: &Array2<f64>,
    test_labels: &[u32],
) -> Result<KnnEvaluation> {
    let total = test_features.nrows();
    if total == 0 {
        return Err(CoreError::invalid("test set must be non-empty"));
    }
    if test_labels.len() != total {
        return Err(CoreError::invalid(format!(
            "{} labels for {total} test rows",
            test_labels.len()
        )));
    }
    let predictions: Result<Vec<u32>> = (0..total)
        .into_par_iter()
        .map(|i| knn_predict(model, test_features.row(i).as_slice().unwrap()))
        .collect();
    let predictions = predictions?;

    let mut class_values: Vec<u32> = test_labels
        .iter()
        .chain(predictions.iter())
        .cloned()
        .collect();
    class_values.sort_unstable();
    class_values.dedup();

    let index_of = |label: u32| class_values.binary_search(&label).unwrap();
    let c = class_values.len();
    let mut counts = Array2::<u64>::zeros((c, c));
    let mut correct = 0u64;
    for (actual, predicted) in test_labels.iter().zip(predictions.iter()) {
        counts[[index_of(*actual), index_of(*predicted)]] += 1;
        if actual == predicted {
            correct += 1;
        }
    }
    let accuracy = correct as f64 / total as f64;
    let stderr = (accuracy * (1.0 - accuracy) / total as f64).sqrt();
    Ok(KnnEvaluation {
        accuracy,
        stderr,
        confusion: ConfusionMatrix { class_values, counts },
    })
}
