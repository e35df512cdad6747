use ggrf_core::applications::{
    angular_distance, angular_error, clustering_error, kernel_kmeans, kernel_kmeans_restarts,
};
use ggrf_core::datasets::karate;
use ggrf_core::dense::DenseMatrix;
use proptest::prelude::*;

fn labels(n: usize, k: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..k, n)
}

fn unit_row() -> impl Strategy<Value = [f64; 3]> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
        .prop_filter("nonzero", |(a, b, c)| a.abs() + b.abs() + c.abs() > 1e-3)
        .prop_map(|(a, b, c)| [a, b, c])
}

proptest! {
    #[test]
    fn clustering_error_is_a_symmetric_fraction((a, b) in (2usize..30).prop_flat_map(|n| (labels(n, 4), labels(n, 4)))) {
        let e = clustering_error(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&e));
        prop_assert_eq!(e, clustering_error(&b, &a).unwrap());
        prop_assert_eq!(clustering_error(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn clustering_error_ignores_label_names(a in labels(25, 5), b in labels(25, 5), shift in 1usize..5) {
        let renamed: Vec<usize> = a.iter().map(|l| (l + shift) % 5 + 10).collect();
        prop_assert_eq!(clustering_error(&renamed, &a).unwrap(), 0.0);
        prop_assert_eq!(clustering_error(&renamed, &b).unwrap(), clustering_error(&a, &b).unwrap());
    }

    #[test]
    fn angular_error_ignores_positive_scaling(
        rows in prop::collection::vec((unit_row(), unit_row(), 0.01f64..100.0, 0.01f64..100.0, any::<bool>()), 1..20),
    ) {
        let pred: Vec<[f64; 3]> = rows.iter().map(|r| r.0).collect();
        let truth: Vec<[f64; 3]> = rows.iter().map(|r| r.1).collect();
        let mut mask: Vec<bool> = rows.iter().map(|r| r.4).collect();
        mask[0] = true;
        let scale = |v: &[f64; 3], s: f64| [v[0] * s, v[1] * s, v[2] * s];
        let sp: Vec<[f64; 3]> = rows.iter().map(|r| scale(&r.0, r.2)).collect();
        let st: Vec<[f64; 3]> = rows.iter().map(|r| scale(&r.1, r.3)).collect();
        let base = angular_error(&pred, &truth, &mask).unwrap();
        prop_assert!((0.0..=2.0).contains(&base));
        prop_assert!((angular_error(&sp, &st, &mask).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn single_row_distance_is_one_minus_cosine(v in unit_row(), s in 0.1f64..10.0) {
        prop_assert!(angular_distance(&[v[0] * s, v[1] * s, v[2] * s], &v).abs() < 1e-12);
        prop_assert!((angular_distance(&[-v[0], -v[1], -v[2]], &v) - 2.0).abs() < 1e-12);
    }
}

#[test]
fn kmeans_labels_are_a_partition_of_the_requested_size() {
    let n = 12;
    let k = DenseMatrix::from_fn(n, n, |i, j| if i / 4 == j / 4 { 1.0 } else { 0.1 });
    let r = kernel_kmeans(&k, 3, 300, 5).unwrap();
    assert!(r.converged);
    let mut seen: Vec<usize> = r.labels.clone();
    seen.sort_unstable();
    seen.dedup();
    assert_eq!(seen.len(), 3);
    let truth: Vec<usize> = (0..n).map(|i| i / 4).collect();
    assert_eq!(clustering_error(&r.labels, &truth).unwrap(), 0.0);
}

#[test]
fn restarts_keep_the_lowest_objective() {
    let g = karate();
    let k = DenseMatrix::from_fn(
        34,
        34,
        |i, j| if i == j { 1.2 } else { 0.2 * g.weight(i, j) },
    );
    for seed in 0..5 {
        let single = kernel_kmeans(&k, 3, 300, seed).unwrap();
        assert_eq!(kernel_kmeans_restarts(&k, 3, 300, seed, 1).unwrap(), single);
        let best = kernel_kmeans_restarts(&k, 3, 300, seed, 20).unwrap();
        assert!(best.objective <= single.objective);
    }
    assert!(kernel_kmeans_restarts(&k, 3, 300, 0, 0).is_err());
}

#[test]
fn objective_is_zero_for_separated_duplicates() {
    let k = DenseMatrix::from_fn(6, 6, |i, j| if i / 2 == j / 2 { 1.0 } else { 0.0 });
    let r = kernel_kmeans_restarts(&k, 3, 300, 1, 5).unwrap();
    assert!(r.objective.abs() < 1e-12);
}
