use ggrf_core::dense::DenseMatrix;
use ggrf_core::generate::erdos_renyi;
use ggrf_core::graph::{normalized_adjacency, Graph};
use ggrf_core::modulation::KernelSpec;
use ggrf_core::neural::{loss_and_gradient, TensorPair};
use ggrf_core::oracle::normalized_kernel;
use ggrf_core::{train_modulation, ModParams, NeuralModParams, TrainConfig, TrainLoss};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small ER graph with the 2-regularised Laplacian target; the walker
/// absorbs the kernel's geometric ratio so that `f = 1` is unbiased.
fn small_er_setup(graph_seed: u64) -> (Graph, DenseMatrix, f64) {
    let spec = KernelSpec::d_regularised_laplacian(2, 0.8);
    let g = erdos_renyi(20, 0.3, graph_seed).unwrap();
    let target = normalized_kernel(&g, &spec).unwrap();
    (
        normalized_adjacency(&g).unwrap(),
        target,
        spec.power_ratio(),
    )
}

fn random_params(rng: &mut ChaCha8Rng) -> NeuralModParams {
    NeuralModParams::new(
        rng.gen_range(-1.5..1.0),
        rng.gen_range(-1.0..2.0),
        rng.gen_range(-1.5..1.5),
        rng.gen_range(-1.0..1.0),
    )
}

fn check_gradients(tensors: &TensorPair, params: &ModParams, loss: &TrainLoss) {
    let (_, grad) = loss_and_gradient(tensors, params, loss).unwrap();
    let theta = params.to_vec();
    let h = 1e-5;
    let fd: Vec<f64> = (0..theta.len())
        .map(|k| {
            let mut up = theta.clone();
            let mut down = theta.clone();
            up[k] += h;
            down[k] -= h;
            let lu = loss_and_gradient(tensors, &params.with_values(&up), loss)
                .unwrap()
                .0;
            let ld = loss_and_gradient(tensors, &params.with_values(&down), loss)
                .unwrap()
                .0;
            (lu - ld) / (2.0 * h)
        })
        .collect();
    let diff: f64 = grad
        .iter()
        .zip(&fd)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = grad.iter().map(|a| a * a).sum::<f64>().sqrt();
    assert!(
        diff <= 1e-5 * norm.max(1e-8),
        "analytic {grad:?} vs differences {fd:?}"
    );
}

#[test]
fn gradients_match_central_differences() {
    let (g, target, sigma) = small_er_setup(1);
    let tensors = TensorPair::sample(&g, 16, 0.5, sigma, 3).unwrap();
    let frob = TrainLoss::Frobenius { target };
    let attrs: Vec<[f64; 3]> = (0..20)
        .map(|i| [(i as f64).cos(), (i as f64).sin(), 0.3])
        .collect();
    let mask: Vec<bool> = (0..20).map(|i| i % 4 == 1).collect();
    let angular = TrainLoss::Angular { attrs, mask };
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for point in 0..20 {
        let params = if point % 2 == 0 {
            ModParams::Symmetric(random_params(&mut rng))
        } else {
            ModParams::Pair(random_params(&mut rng), random_params(&mut rng))
        };
        let loss = if point < 10 { &frob } else { &angular };
        check_gradients(&tensors, &params, loss);
    }
}

#[test]
fn many_walks_recover_the_unbiased_function() {
    let spec = KernelSpec::d_regularised_laplacian(2, 0.8);
    let g = erdos_renyi(8, 0.5, 1).unwrap();
    let target = normalized_kernel(&g, &spec).unwrap();
    let mut cfg = TrainConfig::new(
        TrainLoss::Frobenius { target },
        4096,
        0.5,
        spec.power_ratio(),
        5,
    );
    // Without decay the optimiser has the step budget to reach the optimum.
    cfg.gamma = 1.0;
    let result = train_modulation(&normalized_adjacency(&g).unwrap(), &cfg).unwrap();
    let f = result.params.first();
    for l in 0..=5 {
        assert!((f.eval(l) - 1.0).abs() < 0.05, "f({l}) = {}", f.eval(l));
    }
}

#[test]
fn training_loss_trends_down() {
    let (g, target, sigma) = small_er_setup(1);
    let improved = (0..10u64)
        .filter(|&seed| {
            let cfg = TrainConfig::new(
                TrainLoss::Frobenius {
                    target: target.clone(),
                },
                16,
                0.5,
                sigma,
                seed,
            );
            let trace = train_modulation(&g, &cfg).unwrap().trace;
            let head = trace[..50].iter().sum::<f64>() / 50.0;
            let tail = trace[trace.len() - 50..].iter().sum::<f64>() / 50.0;
            tail < head
        })
        .count();
    assert!(improved >= 8, "{improved} of 10");
}

/// `f(l) / mean_{l <= 5} f`, which removes the `(c f1, f2 / c)` degeneracy
/// the estimator cannot see.
fn shape(f: &NeuralModParams) -> Vec<f64> {
    let v: Vec<f64> = (0..=5).map(|l| f.eval(l)).collect();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.into_iter().map(|x| x / mean).collect()
}

fn shape_distance(a: &NeuralModParams, b: &NeuralModParams) -> f64 {
    shape(a)
        .iter()
        .zip(shape(b))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn asymmetric_pair_becomes_similar() {
    let (g, target, sigma) = small_er_setup(1);
    let mut distances = Vec::new();
    for seed in 0..3u64 {
        let mut cfg = TrainConfig::new(
            TrainLoss::Frobenius {
                target: target.clone(),
            },
            16,
            0.5,
            sigma,
            seed,
        )
        .asymmetric();
        cfg.learning_rate = 0.05;
        cfg.gamma = 0.995;
        let start = shape_distance(&cfg.init.first(), &cfg.init.second());
        let p = train_modulation(&g, &cfg).unwrap().params;
        let end = shape_distance(&p.first(), &p.second());
        assert!(end < start / 5.0, "{end} from {start}");
        distances.push(end);
    }
    let mean = distances.iter().sum::<f64>() / distances.len() as f64;
    assert!(mean < 0.2, "{distances:?}");
}

#[test]
fn same_seed_gives_identical_parameters() {
    let (g, target, sigma) = small_er_setup(2);
    let mut cfg = TrainConfig::new(TrainLoss::Frobenius { target }, 16, 0.5, sigma, 9);
    cfg.epochs = 200;
    let a = train_modulation(&g, &cfg).unwrap();
    let b = train_modulation(&g, &cfg).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.trace, b.trace);
}
