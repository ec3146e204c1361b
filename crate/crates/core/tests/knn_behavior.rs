//! K-NN compared against an exhaustive brute-force reference and checked for
//! its documented tie-break and invariance properties.

use ndarray::Array2;
use proptest::prelude::*;
use qmodel_core::knn::{knn_evaluate, knn_fit, knn_predict};
use qmodel_core::rng::stream_rng;
use rand::Rng;

/// Reference classifier: fully enumerate distances, sort by (distance,
/// index), majority vote with smaller-label ties.
fn brute_force_predict(features: &Array2<f64>, labels: &[u32], k: usize, query: &[f64]) -> u32 {
    let mut scored: Vec<(f64, usize)> = features
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            let d: f64 = row
                .iter()
                .zip(query)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            (d, i)
        })
        .collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let mut counts: Vec<(u32, usize)> = Vec::new();
    for (_, idx) in &scored[..k] {
        match counts.iter_mut().find(|(l, _)| *l == labels[*idx]) {
            Some((_, c)) => *c += 1,
            None => counts.push((labels[*idx], 1)),
        }
    }
    counts.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    counts[0].0
}

#[test]
fn matches_brute_force_on_synthetic_cloud() {
    // 50 training points in 4 dimensions, labels 2..=5, many k values.
    let mut rng = stream_rng(31, "knn-cloud");
    let d = 50usize;
    let dim = 4usize;
    let features = Array2::from_shape_simple_fn((d, dim), || rng.gen_range(0.0..1.0));
    let labels: Vec<u32> = (0..d).map(|_| rng.gen_range(2..=5)).collect();

    for &k in &[1usize, 3, 5, 7, 11] {
        let model = knn_fit(features.clone(), labels.clone(), k).unwrap();
        for _ in 0..40 {
            let query: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect();
            let got = knn_predict(&model, &query).unwrap();
            let expected = brute_force_predict(&features, &labels, k, &query);
            assert_eq!(got, expected, "k={k} query={query:?}");
        }
    }
}

#[test]
fn every_training_point_classifies_to_itself_at_k1() {
    let mut rng = stream_rng(77, "knn-self");
    let features = Array2::from_shape_simple_fn((30, 6), || rng.gen_range(0.0..1.0));
    let labels: Vec<u32> = (0..30).map(|i| 2 + (i % 4) as u32).collect();
    let model = knn_fit(features.clone(), labels.clone(), 1).unwrap();
    let eval = knn_evaluate(&model, &features, &labels).unwrap();
    assert_eq!(eval.accuracy, 1.0);
}

#[test]
fn confusion_row_sums_match_class_counts() {
    let mut rng = stream_rng(5, "knn-rows");
    let train = Array2::from_shape_simple_fn((40, 3), || rng.gen_range(0.0..1.0));
    let train_labels: Vec<u32> = (0..40).map(|_| rng.gen_range(2..=4)).collect();
    let test = Array2::from_shape_simple_fn((25, 3), || rng.gen_range(0.0..1.0));
    let test_labels: Vec<u32> = (0..25).map(|_| rng.gen_range(2..=4)).collect();
    let model = knn_fit(train, train_labels, 3).unwrap();
    let eval = knn_evaluate(&model, &test, &test_labels).unwrap();

    let sums = eval.confusion.row_sums();
    for (ci, class) in eval.confusion.class_values.iter().enumerate() {
        let expected = test_labels.iter().filter(|l| *l == class).count() as u64;
        assert_eq!(sums[ci], expected);
    }
    assert_eq!(eval.confusion.total(), 25);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// With all-distinct pairwise distances, predictions are invariant under
    /// a permutation of the training rows.
    #[test]
    fn permutation_invariance_with_distinct_distances(seed in 0u64..10_000) {
        let mut rng = stream_rng(seed, "knn-perm");
        let d = 12usize;
        let dim = 3usize;
        // Continuous draws make distance ties measure-zero.
        let features = Array2::from_shape_simple_fn((d, dim), || rng.gen_range(0.0..1.0));
        let labels: Vec<u32> = (0..d).map(|_| rng.gen_range(2..=5)).collect();
        let query: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect();

        let model = knn_fit(features.clone(), labels.clone(), 3).unwrap();
        let base = knn_predict(&model, &query).unwrap();

        // Reverse the training order.
        let mut rev_rows: Vec<Vec<f64>> = features.rows().into_iter().map(|r| r.to_vec()).collect();
        rev_rows.reverse();
        let mut rev_labels = labels.clone();
        rev_labels.reverse();
        let flat: Vec<f64> = rev_rows.into_iter().flatten().collect();
        let rev_features = Array2::from_shape_vec((d, dim), flat).unwrap();
        let rev_model = knn_fit(rev_features, rev_labels, 3).unwrap();
        prop_assert_eq!(base, knn_predict(&rev_model, &query).unwrap());
    }
}
