use ggrf_core::generate::erdos_renyi;
use ggrf_core::graph::{laplacian_as_operator, AffineOperator, Graph};
use ggrf_core::ode::{
    relative_l2_error, simulate_exact, simulate_grf, Drive, GrfOdeConfig, OdeProblem,
};

fn diffusion_problem(n: usize, gseed: u64, samples: usize) -> OdeProblem {
    let g = erdos_renyi(n, 0.4, gseed).unwrap();
    let op = laplacian_as_operator(&g).unwrap().negated();
    let mut y = vec![0.0; n];
    y[0] = 1.0;
    OdeProblem::new(op, Drive::Constant(y), 1.0, samples).unwrap()
}

/// Entrywise mean and summed variance of `simulate_grf` over seeds.
fn moments(p: &OdeProblem, m: usize, seeds: u64) -> (Vec<f64>, Vec<f64>, f64) {
    let n = p.operator.num_nodes();
    let runs: Vec<Vec<f64>> = (0..seeds)
        .map(|s| {
            simulate_grf(
                p,
                &GrfOdeConfig {
                    m,
                    p_halt: 0.3,
                    seed: s,
                },
                None,
            )
            .unwrap()
        })
        .collect();
    let k = seeds as f64;
    let mean: Vec<f64> = (0..n)
        .map(|i| runs.iter().map(|r| r[i]).sum::<f64>() / k)
        .collect();
    let var: Vec<f64> = (0..n)
        .map(|i| runs.iter().map(|r| (r[i] - mean[i]).powi(2)).sum::<f64>() / (k - 1.0))
        .collect();
    let se = var.iter().map(|v| (v / k).sqrt()).collect();
    let total = var.iter().sum();
    (mean, se, total)
}

#[test]
fn monte_carlo_solution_is_unbiased() {
    let p = diffusion_problem(8, 3, 4);
    let exact = simulate_exact(&p, 4000, None).unwrap();
    let (mean, se, _) = moments(&p, 8, 300);
    for i in 0..8 {
        assert!(
            (mean[i] - exact[i]).abs() <= 4.0 * se[i] + 1e-6,
            "node {i}: {} vs {}",
            mean[i],
            exact[i]
        );
    }
}

#[test]
fn drive_kernel_path_is_unbiased() {
    let g = erdos_renyi(6, 0.5, 8).unwrap();
    let op = laplacian_as_operator(&g).unwrap().negated();
    let y: Vec<f64> = (0..6).map(|i| 0.5 + i as f64 * 0.1).collect();
    let p = OdeProblem::new(op, Drive::Constant(y), 0.8, 3).unwrap();
    let spec = ggrf_core::KernelSpec::diffusion(0.6);
    let exact = simulate_exact(&p, 4000, Some(&spec)).unwrap();
    let runs: Vec<Vec<f64>> = (0..300)
        .map(|s| {
            simulate_grf(
                &p,
                &GrfOdeConfig {
                    m: 8,
                    p_halt: 0.3,
                    seed: s,
                },
                Some(&spec),
            )
            .unwrap()
        })
        .collect();
    for i in 0..6 {
        let mean = runs.iter().map(|r| r[i]).sum::<f64>() / 300.0;
        let var = runs.iter().map(|r| (r[i] - mean).powi(2)).sum::<f64>() / 299.0;
        assert!((mean - exact[i]).abs() <= 4.0 * (var / 300.0).sqrt() + 1e-6);
    }
}

#[test]
fn variance_falls_with_samples_and_walks() {
    let (_, _, few_samples) = moments(&diffusion_problem(8, 5, 2), 8, 200);
    let (_, _, many_samples) = moments(&diffusion_problem(8, 5, 16), 8, 200);
    assert!(
        many_samples < few_samples,
        "{many_samples} vs {few_samples}"
    );
    let p = diffusion_problem(8, 5, 8);
    let (_, _, few_walks) = moments(&p, 4, 200);
    let (_, _, many_walks) = moments(&p, 64, 200);
    assert!(many_walks < few_walks, "{many_walks} vs {few_walks}");
}

#[test]
fn scalar_case_converges_to_analytic_value() {
    let op = AffineOperator {
        identity_coeff: -1.0,
        adjacency_coeff: 1.0,
        adjacency: Graph::empty(1),
    };
    let want = 1.0 - (-1.0f64).exp();
    let mut last = f64::INFINITY;
    for samples in [100, 10_000] {
        let p = OdeProblem::new(op.clone(), Drive::Constant(vec![1.0]), 1.0, samples).unwrap();
        let errs: Vec<f64> = (0..20)
            .map(|s| {
                (simulate_grf(
                    &p,
                    &GrfOdeConfig {
                        m: 4,
                        p_halt: 0.5,
                        seed: s,
                    },
                    None,
                )
                .unwrap()[0]
                    - want)
                    .abs()
            })
            .collect();
        let mean = errs.iter().sum::<f64>() / 20.0;
        assert!(mean < last);
        last = mean;
    }
    assert!(last < 0.01);
}

#[test]
fn error_metric_examples() {
    assert_eq!(relative_l2_error(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
    assert_eq!(relative_l2_error(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 1.0);
    assert!(relative_l2_error(&[1.0], &[0.0]).is_err());
}
