use ggrf_core::modulation::{
    closed_form_modulation, convolve, convolve_slices, min_batch_size, symmetric_from_coeffs,
    symmetric_sequence, taylor_coeffs, CoeffSeq, KernelSpec, ModulationFn,
};
use proptest::prelude::*;

fn closed_form_specs() -> Vec<KernelSpec> {
    vec![
        KernelSpec::d_regularised_laplacian(1, 0.7),
        KernelSpec::d_regularised_laplacian(2, 0.25),
        KernelSpec::d_regularised_laplacian(5, 1.3),
        KernelSpec::p_step_random_walk(2, 20.0),
        KernelSpec::p_step_random_walk(5, 3.0),
        KernelSpec::diffusion(0.25),
        KernelSpec::diffusion(2f64.sqrt()),
    ]
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn diffusion_self_convolution_is_inverse_factorial() {
    let f = closed_form_modulation(&KernelSpec::diffusion(2f64.sqrt())).unwrap();
    let c = convolve(&f, &f, 20);
    let mut fact = 1.0;
    for (k, v) in c.iter().enumerate() {
        if k > 0 {
            fact *= k as f64;
        }
        assert!(rel_close(*v, 1.0 / fact, 1e-12), "k={k}");
    }
}

#[test]
fn binomial_self_convolution_is_vandermonde() {
    let f = ModulationFn::tabulated(vec![1.0, 1.0]);
    assert_eq!(convolve(&f, &f, 4), vec![1.0, 2.0, 1.0, 0.0, 0.0]);
}

#[test]
fn closed_forms_convolve_to_taylor_coefficients() {
    for spec in closed_form_specs() {
        let f = closed_form_modulation(&spec).unwrap();
        let alpha = taylor_coeffs(&spec, 30);
        let c = convolve(&f, &f, 30);
        for (k, (got, want)) in c.iter().zip(alpha.values()).enumerate() {
            assert!(
                rel_close(*got, *want, 1e-10) || (got - want).abs() < 1e-14,
                "{spec:?} k={k}: {got} vs {want}"
            );
        }
    }
}

#[test]
fn negated_solution_also_convolves_to_alpha() {
    for spec in closed_form_specs() {
        let alpha = taylor_coeffs(&spec, 25);
        let f = symmetric_from_coeffs(&alpha).unwrap();
        assert_eq!(f.eval(0), 1.0);
        let neg: Vec<f64> = f.prefix(26).iter().map(|v| -v).collect();
        let c = convolve_slices(&neg, &neg);
        for (got, want) in c.iter().zip(alpha.values()) {
            assert!(rel_close(*got, *want, 1e-10) || (got - want).abs() < 1e-14);
        }
    }
}

#[test]
fn iterative_solver_matches_closed_forms() {
    for spec in closed_form_specs() {
        let closed = closed_form_modulation(&spec).unwrap().prefix(31);
        let iter = symmetric_from_coeffs(&taylor_coeffs(&spec, 30))
            .unwrap()
            .prefix(31);
        for (i, (a, b)) in iter.iter().zip(&closed).enumerate() {
            assert!(
                (a - b).abs() <= 1e-10 * b.abs().max(1e-3),
                "{spec:?} i={i}: {a} vs {b}"
            );
        }
    }
}

/// All ways of writing `total` as `sum_j j * k_j` with `j >= 1`.
fn partitions(total: usize, max_part: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if total == 0 {
        out.push(current.clone());
        return;
    }
    for part in (1..=max_part.min(total)).rev() {
        current.push(part);
        partitions(total - part, part, current, out);
        current.pop();
    }
}

fn binom_half(n: usize) -> f64 {
    (0..n).map(|j| (0.5 - j as f64) / (j + 1) as f64).product()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|j| j as f64).product()
}

/// The composition-sum expansion of the symmetric solution.
fn conditional_sum(alpha: &[f64], i: usize) -> f64 {
    if i == 0 {
        return 1.0;
    }
    let mut parts = Vec::new();
    partitions(i, i, &mut Vec::new(), &mut parts);
    parts
        .iter()
        .map(|p| {
            let n = p.len();
            let mut counts = vec![0usize; i + 1];
            for j in p {
                counts[*j] += 1;
            }
            let multinomial = factorial(n) / counts.iter().map(|k| factorial(*k)).product::<f64>();
            let prod: f64 = p.iter().map(|j| alpha[*j]).product();
            binom_half(n) * multinomial * prod
        })
        .sum()
}

#[test]
fn iterative_solver_matches_composition_expansion() {
    let sequences = [
        vec![1.0, 0.3, -0.2, 0.5, 0.1, -0.4, 0.25, 0.05, -0.15],
        taylor_coeffs(&KernelSpec::inverse_cosine(), 8)
            .values()
            .to_vec(),
        taylor_coeffs(&KernelSpec::d_regularised_laplacian(3, 0.6), 8)
            .values()
            .to_vec(),
    ];
    for alpha in sequences {
        let f = symmetric_sequence(&alpha).unwrap();
        for i in 0..=8 {
            let want = conditional_sum(&alpha, i);
            assert!(
                (f[i] - want).abs() < 1e-12 * want.abs().max(1.0),
                "i={i}: {} vs {want}",
                f[i]
            );
        }
    }
}

#[test]
fn regulariser_is_absorbed_geometrically() {
    // alpha_k(sigma) = alpha_k(sigma_0) * (r(sigma) / r(sigma_0))^k
    let a = KernelSpec::d_regularised_laplacian(3, 0.4);
    let b = KernelSpec::d_regularised_laplacian(3, 1.1);
    let ratio = a.power_ratio() / b.power_ratio();
    for (k, (x, y)) in taylor_coeffs(&a, 25)
        .values()
        .iter()
        .zip(taylor_coeffs(&b, 25).values())
        .enumerate()
    {
        assert!(rel_close(*x, y * ratio.powi(k as i32), 1e-12));
    }
    let fa = closed_form_modulation(&a).unwrap();
    let fb = closed_form_modulation(&b).unwrap().scaled(ratio);
    for (x, y) in fa.prefix(20).iter().zip(&fb.prefix(20)) {
        assert!(rel_close(*x, *y, 1e-12));
    }
}

#[test]
fn inverse_cosine_has_no_closed_form() {
    assert!(closed_form_modulation(&KernelSpec::inverse_cosine()).is_err());
    assert!(CoeffSeq::new(vec![0.9]).is_err());
}

proptest! {
    #[test]
    fn batch_size_is_the_smallest_valid_length(m in 1usize..100_000, p in 0.01f64..0.99, delta in 1e-6f64..0.99) {
        let b = min_batch_size(m, p, delta).unwrap();
        let ok = |b: usize| (m as f64) * (-(1.0 - p).powi(b as i32)).ln_1p() >= (1.0 - delta).ln();
        prop_assert!(ok(b));
        prop_assert!(b == 1 || !ok(b - 1));
    }

    #[test]
    fn convolution_is_commutative(a in prop::collection::vec(-2.0f64..2.0, 1..12), b in prop::collection::vec(-2.0f64..2.0, 1..12)) {
        let x = convolve_slices(&a, &b);
        let y = convolve_slices(&b, &a);
        for (u, v) in x.iter().zip(&y) {
            prop_assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_solution_round_trips(tail in prop::collection::vec(-1.0f64..1.0, 0..15)) {
        let mut alpha = vec![1.0];
        alpha.extend(tail);
        let f = symmetric_sequence(&alpha).unwrap();
        let back = convolve_slices(&f, &f);
        for (u, v) in back.iter().zip(&alpha) {
            prop_assert!((u - v).abs() < 1e-9 * (1.0 + v.abs()));
        }
    }
}
