use ggrf_core::datasets::karate;
use ggrf_core::generate::erdos_renyi;
use ggrf_core::graph::normalized_adjacency;
use ggrf_core::modulation::{symmetric_modulation, KernelSpec};
use ggrf_core::oracle::normalized_kernel;
use ggrf_core::walker::{sample_feature_pair, WalkConfig};
use ggrf_core::{estimate_gram, kernel_matvec, relative_frobenius_error};
use proptest::prelude::*;

fn mean_error(spec: &KernelSpec, m: usize, seeds: u64) -> f64 {
    let g = karate();
    let wt = normalized_adjacency(&g).unwrap();
    let truth = normalized_kernel(&g, spec).unwrap();
    let f = symmetric_modulation(spec).unwrap();
    let total: f64 = (0..seeds)
        .map(|s| {
            let (a, b) =
                sample_feature_pair(&wt, &f, &f, &WalkConfig::new(0.5, m, 1.0, s)).unwrap();
            relative_frobenius_error(&truth, &estimate_gram(&a, &b, false).unwrap()).unwrap()
        })
        .sum();
    total / seeds as f64
}

#[test]
fn more_walks_reduce_error() {
    for spec in [
        KernelSpec::d_regularised_laplacian(2, 0.8),
        KernelSpec::p_step_random_walk(3, 3.0),
        KernelSpec::diffusion(1.0),
        KernelSpec::inverse_cosine(),
    ] {
        let coarse = mean_error(&spec, 4, 10);
        let fine = mean_error(&spec, 64, 10);
        assert!(fine < coarse, "{spec:?}: {fine} vs {coarse}");
    }
}

#[test]
fn matvec_matches_explicit_product_on_er20() {
    let g = normalized_adjacency(&erdos_renyi(20, 0.3, 11).unwrap()).unwrap();
    let f = symmetric_modulation(&KernelSpec::diffusion(1.0)).unwrap();
    let (a, b) = sample_feature_pair(&g, &f, &f, &WalkConfig::new(0.3, 16, 1.0, 4)).unwrap();
    let v: Vec<f64> = (0..20).map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0).collect();
    let fast = kernel_matvec(&a, &b, &v).unwrap();
    let slow = estimate_gram(&a, &b, false).unwrap().matvec(&v).unwrap();
    let scale = slow.iter().map(|x| x * x).sum::<f64>().sqrt();
    for (x, y) in fast.iter().zip(&slow) {
        assert!((x - y).abs() <= 1e-10 * scale);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn matvec_is_linear(
        seed in any::<u64>(),
        u in prop::collection::vec(-3.0f64..3.0, 15),
        v in prop::collection::vec(-3.0f64..3.0, 15),
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
    ) {
        let g = normalized_adjacency(&erdos_renyi(15, 0.3, seed % 97).unwrap()).unwrap();
        let f = symmetric_modulation(&KernelSpec::d_regularised_laplacian(2, 0.8)).unwrap();
        let (p1, p2) = sample_feature_pair(&g, &f, &f, &WalkConfig::new(0.4, 8, 1.0, seed)).unwrap();
        let mix: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        let lhs = kernel_matvec(&p1, &p2, &mix).unwrap();
        let ku = kernel_matvec(&p1, &p2, &u).unwrap();
        let kv = kernel_matvec(&p1, &p2, &v).unwrap();
        let scale = 1.0 + lhs.iter().chain(&ku).chain(&kv).fold(0.0f64, |m, x| m.max(x.abs()));
        for i in 0..15 {
            prop_assert!((lhs[i] - (a * ku[i] + b * kv[i])).abs() < 1e-10 * scale);
        }
    }
}
