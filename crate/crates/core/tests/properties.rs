use delayrobust::constant_delay::{char_eval_scalar, crossing_curve};
use delayrobust::ddesim::fit_decay_series;
use delayrobust::linalg::{certify_envelope, decay_envelope, mat_exp, spectral_abscissa, spectral_norm};
use delayrobust::margin::{
    closed_loop_margin, closed_loop_system, contraction_gain, max_epsilon, scalar_bound,
};
use delayrobust::{Matrix, PlantModel};
use num_complex::Complex64;
use proptest::prelude::*;

fn square(n: usize, range: f64) -> impl Strategy<Value = Matrix> {
    proptest::collection::vec(-range..range, n * n).prop_map(move |d| Matrix::new(n, n, d).unwrap())
}

/// Random matrix shifted so its spectral abscissa is at most `-0.2`.
fn hurwitz(n: usize) -> impl Strategy<Value = Matrix> {
    square(n, 2.0).prop_map(move |m| {
        let alpha = spectral_abscissa(&m).unwrap();
        m.shift_diag(-(alpha.max(0.0) + 0.2))
    })
}

fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            worst = worst.max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exponential_semigroup(m in square(3, 1.5), s in 0.0f64..1.5, t in 0.0f64..1.5) {
        let lhs = mat_exp(&m, s + t).unwrap();
        let rhs = mat_exp(&m, s).unwrap().matmul(&mat_exp(&m, t).unwrap());
        let scale = lhs.max_abs().max(1.0);
        prop_assert!(max_abs_diff(&lhs, &rhs) <= 1e-10 * scale);
    }

    #[test]
    fn exponential_inverse(m in square(2, 3.0), t in 0.0f64..2.0) {
        let prod = mat_exp(&m, t).unwrap().matmul(&mat_exp(&m, -t).unwrap());
        let scale = mat_exp(&m, t).unwrap().max_abs() * mat_exp(&m, -t).unwrap().max_abs();
        prop_assert!(max_abs_diff(&prod, &Matrix::identity(2)) <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn spectral_norm_is_submultiplicative(a in square(3, 4.0), b in square(3, 4.0)) {
        let ab = spectral_norm(&a.matmul(&b)).unwrap();
        let bound = spectral_norm(&a).unwrap() * spectral_norm(&b).unwrap();
        prop_assert!(ab <= bound * (1.0 + 1e-12) + 1e-14);
        prop_assert!(spectral_norm(&a).unwrap() <= a.norm_frobenius() * (1.0 + 1e-12));
    }

    #[test]
    fn lyapunov_envelope_bounds_exponential(m in hurwitz(3), frac in 0.1f64..0.95) {
        let mu = -spectral_abscissa(&m).unwrap() * frac;
        let env = decay_envelope(&m, mu).unwrap();
        prop_assert!(env.theta >= 1.0);
        prop_assert_eq!(env.lambda, mu);
        prop_assert!(certify_envelope(&m, &env, 120).unwrap() <= 1.0 + 1e-9);
    }

    #[test]
    fn scalar_margin_matches_closed_form(p in 1.1f64..8.0) {
        let model = PlantModel::scalar_example(p).unwrap();
        let found = max_epsilon(&model).unwrap();
        let exact = scalar_bound(p).unwrap();
        prop_assert!((found.epsilon - exact).abs() < 1e-9, "{} vs {}", found.epsilon, exact);
    }

    #[test]
    fn feasibility_is_monotone_in_epsilon(p in 1.2f64..6.0, frac in 0.0f64..0.99) {
        let model = PlantModel::scalar_example(p).unwrap();
        let eps_max = scalar_bound(p).unwrap();
        let below = closed_loop_margin(&model, frac * eps_max, None).unwrap();
        prop_assert!(below.feasible);
        let above = closed_loop_margin(&model, (eps_max * (1.01 + frac)).min(1.0), None).unwrap();
        prop_assert!(!above.feasible);
    }

    #[test]
    fn contraction_gain_increases_with_rate(p in 1.2f64..6.0, a in 0.0f64..0.99, b in 0.0f64..0.99) {
        let model = PlantModel::scalar_example(p).unwrap();
        let sys = closed_loop_system(&model, None).unwrap();
        let eps = 0.5 * scalar_bound(p).unwrap();
        let lambda = sys.envelope().lambda;
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let d_lo = contraction_gain(&sys, eps, lo * lambda, true).unwrap();
        let d_hi = contraction_gain(&sys, eps, hi * lambda, true).unwrap();
        prop_assert!(d_lo <= d_hi * (1.0 + 1e-12));
    }

    #[test]
    fn crossings_are_imaginary_roots(p in 1.05f64..8.0) {
        let window = crossing_curve(p).unwrap();
        prop_assert!(window.tau_min < 1.0 && 1.0 < window.tau_max);
        for c in &window.crossings {
            let value = char_eval_scalar(p, c.tau, Complex64::new(0.0, c.omega));
            prop_assert!(value.norm() < 1e-8 * (1.0 + p), "{:?} -> {}", c, value);
        }
    }

    #[test]
    fn characteristic_function_is_conjugate_symmetric(p in 1.05f64..8.0, tau in 0.0f64..5.0,
                                                     re in -3.0f64..3.0, im in -20.0f64..20.0) {
        let s = Complex64::new(re, im);
        let a = char_eval_scalar(p, tau, s);
        let b = char_eval_scalar(p, tau, s.conj());
        prop_assert!((a.conj() - b).norm() <= 1e-12 * (1.0 + a.norm()));
    }

    #[test]
    fn fit_recovers_exponential_rate(rate in 0.05f64..3.0, amp in 0.1f64..10.0) {
        let times: Vec<f64> = (0..=400).map(|i| i as f64 * 0.025).collect();
        let s: Vec<f64> = times.iter().map(|t| amp * (-rate * t).exp()).collect();
        let fit = fit_decay_series(&times, &s, 2.0).unwrap();
        prop_assert!((fit.sigma_hat - rate).abs() < 1e-9);
        prop_assert!(fit.estimate_holds);
        prop_assert!((fit.q_hat - 1.0).abs() < 1e-8);
    }
}
