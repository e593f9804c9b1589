//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line.
//!
//! Runs without the libtest harness so the lines show for passing checks too.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use delayrobust::constant_delay::{
    char_eval_scalar, crossing_curve, figure1_sweep, p_grid, rightmost_root, DelayPencil,
};
use delayrobust::ddesim::{
    fit_comparison_decay, fit_decay, make_compatible_history, simulate_closed_loop,
    simulate_comparison, simulate_derivative_form, DelaySignal, Signal, SimTrace,
};
use delayrobust::linalg::{certify_envelope, decay_envelope, mat_exp, spectral_abscissa, vec_norm};
use delayrobust::margin::{certify_sigma, max_epsilon, scalar_bound};
use delayrobust::{ComparisonSystem, DecayEnvelope, Matrix, PlantModel};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

static FAILURES: AtomicUsize = AtomicUsize::new(0);

fn report(criterion: u32, ok: bool, detail: String) {
    println!(
        "criterion {criterion}: {} ({detail})",
        if ok { "PASS" } else { "FAIL" }
    );
    if !ok {
        FAILURES.fetch_add(1, Ordering::SeqCst);
    }
}

fn example(p: f64) -> PlantModel {
    PlantModel::scalar_example(p).unwrap()
}

fn sweep_grid() -> Vec<f64> {
    p_grid(1.5, 5.0, 8).unwrap()
}

fn criterion_01_closed_form_consistency() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for p in [1.5, 2.0, 3.0, 5.0] {
        let bisected = max_epsilon(&example(p)).unwrap().epsilon;
        let closed = scalar_bound(p).unwrap();
        worst = worst.max((bisected - closed).abs() / closed);
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        worst <= 1e-8 && secs < 1.0,
        format!("max relative gap {worst:.2e}, {secs:.3} s"),
    );
}

fn criterion_02_figure1_reproduction() {
    let start = Instant::now();
    let rows = figure1_sweep(&sweep_grid()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let contained = rows.iter().all(|r| r.red_inside_blue());
    let symmetric = rows
        .iter()
        .map(|r| ((1.0 - r.red_tau_min) - (r.red_tau_max - 1.0)).abs())
        .fold(0.0, f64::max);
    let asym = rows
        .iter()
        .map(|r| ((1.0 - r.blue_tau_min) - (r.blue_tau_max - 1.0)).abs())
        .fold(0.0, f64::max);
    let ratios: Vec<f64> = rows.iter().map(|r| r.width_ratio()).collect();
    let ratio_ok = ratios.iter().all(|q| (0.35..=0.65).contains(q));
    for r in &rows {
        println!(
            "  p = {:.3}: red ({:.6}, {:.6}) blue ({:.6}, {:.6}) ratio {:.4}",
            r.p,
            r.red_tau_min,
            r.red_tau_max,
            r.blue_tau_min,
            r.blue_tau_max,
            r.width_ratio()
        );
    }
    report(
        2,
        rows.len() == 8 && contained && symmetric <= 1e-12 && asym > 1e-6 && ratio_ok && secs < 30.0,
        format!(
            "contained {contained}, red asymmetry {symmetric:.1e}, blue asymmetry {asym:.3e}, \
             ratios {:.3}..{:.3}, {secs:.2} s",
            ratios.iter().copied().fold(f64::INFINITY, f64::min),
            ratios.iter().copied().fold(0.0, f64::max)
        ),
    );
}

fn criterion_03_crossing_validity() {
    let mut worst_chi: f64 = 0.0;
    let mut worst_circle: f64 = 0.0;
    let mut count = 0;
    for p in sweep_grid() {
        let w = crossing_curve(p).unwrap();
        for c in &w.crossings {
            let chi = char_eval_scalar(p, c.tau, Complex64::new(0.0, c.omega)).norm();
            worst_chi = worst_chi.max(chi);
            worst_circle = worst_circle.max(c.circle_residual.abs());
            count += 1;
        }
    }
    report(
        3,
        count > 0 && worst_chi <= 1e-6 && worst_circle <= 1e-9,
        format!("{count} crossings, max |chi| {worst_chi:.2e}, max circle residual {worst_circle:.2e}"),
    );
}

fn criterion_04_spectral_cross_check() {
    const N: usize = 48;
    let re = |p: f64, tau: f64| {
        rightmost_root(&DelayPencil::scalar(p, tau).unwrap(), N)
            .unwrap()
            .root
            .re
    };
    let mut ok = true;
    let mut worst_boundary: f64 = 0.0;
    for p in sweep_grid() {
        let w = crossing_curve(p).unwrap();
        for (tau, inside) in [(w.tau_min, 1e-3), (w.tau_max, -1e-3)] {
            let at = re(p, tau);
            worst_boundary = worst_boundary.max(at.abs());
            let stable_side = re(p, tau + inside);
            let unstable_side = re(p, tau - inside);
            ok &= at.abs() <= 1e-4 && stable_side < 0.0 && unstable_side > 0.0;
        }
    }
    let model = example(2.0);
    let nominal = rightmost_root(&DelayPencil::scalar(2.0, model.r()).unwrap(), N).unwrap();
    let alpha = spectral_abscissa(&model.closed_loop()).unwrap();
    let gap = (nominal.root.re - alpha).abs();
    report(
        4,
        ok && gap <= 1e-6,
        format!("max |Re| at boundaries {worst_boundary:.2e}, sign flips {ok}, nominal gap {gap:.2e}"),
    );
}

fn criterion_05_envelope_certificate() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let n = 2 + i % 3;
        let data: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let raw = Matrix::new(n, n, data).unwrap();
        let alpha = spectral_abscissa(&raw).unwrap();
        let m = raw.shift_diag(-alpha - rng.gen_range(0.1..2.0));
        let decay = -spectral_abscissa(&m).unwrap();
        let env = decay_envelope(&m, rng.gen_range(0.2..0.9) * decay).unwrap();
        worst = worst.max(certify_envelope(&m, &env, 200).unwrap());
    }
    report(
        5,
        worst <= 1.0 + 1e-9,
        format!("max |exp(Mt)| / bound {worst:.12}"),
    );
}

fn predictor_run(dt: f64, eps: f64, t_final: f64) -> (PlantModel, SimTrace) {
    let model = example(2.0);
    let d = DelaySignal::new(Signal::sinusoid(0.5, 0.0).unwrap(), eps).unwrap();
    let hist = make_compatible_history(&model, eps, &[1.0], |t| vec![(3.0 * t).sin()], dt).unwrap();
    let trace = simulate_closed_loop(&model, &d, &hist, t_final, dt).unwrap();
    (model, trace)
}

fn criterion_06_predictor_identity() {
    let errors: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
        .iter()
        .map(|&dt| {
            let (model, trace) = predictor_run(dt, 0.04, 10.0);
            trace
                .u
                .iter()
                .zip(&trace.p)
                .map(|(u, p)| (u[0] - model.k().mul_vec(p)[0]).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let ratios = [errors[0] / errors[1], errors[1] / errors[2]];
    report(
        6,
        ratios.iter().all(|q| (3.5..=4.5).contains(q)),
        format!("errors {errors:?}, ratios {ratios:.3?}"),
    );
}

fn nominal_gap(dt: f64) -> f64 {
    let (model, trace) = predictor_run(dt, 0.0, 8.0);
    let r_index = (model.r() / dt).round() as usize;
    let pr = trace.p[r_index].clone();
    let closed = model.closed_loop();
    let mut worst: f64 = 0.0;
    for i in r_index..trace.times.len() {
        let t = trace.times[i];
        let exact = mat_exp(&closed, t - model.r()).unwrap().mul_vec(&pr);
        let rel = (vec_norm(&trace.p[i]) - vec_norm(&exact)).abs() / vec_norm(&exact);
        worst = worst.max(rel);
    }
    worst
}

fn criterion_07_nominal_finite_spectrum() {
    let worst = nominal_gap(1e-3);
    let coarse = nominal_gap(2e-3);
    report(
        7,
        worst <= 1e-6,
        format!(
            "max relative gap on [r, 8] {worst:.2e} at dt 1e-3, {coarse:.2e} at dt 2e-3 (ratio {:.2})",
            coarse / worst
        ),
    );
}

fn criterion_08_robust_decay() {
    let start = Instant::now();
    let model = example(2.0);
    let eps = 0.5 * max_epsilon(&model).unwrap().epsilon;
    let dt = 0.01;
    let hist = make_compatible_history(&model, eps, &[1.0], |_| vec![0.0], dt).unwrap();
    let mut failures = Vec::new();
    let mut worst_ratio: f64 = 0.0;
    for seed in 0..100u64 {
        let d = DelaySignal::new(Signal::piecewise_constant(seed, 0.05).unwrap(), eps).unwrap();
        let trace = simulate_closed_loop(&model, &d, &hist, 20.0, dt).unwrap();
        let fit = fit_decay(&trace, 2.0 * trace.window).unwrap();
        let s = delayrobust::ddesim::closed_loop_size(&trace);
        let ratio = s[s.len() - 1] / s[0];
        worst_ratio = worst_ratio.max(ratio);
        if !fit.estimate_holds || ratio > 1e-3 {
            failures.push(seed);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        8,
        failures.is_empty() && secs < 120.0,
        format!("eps {eps:.6}, failing seeds {failures:?}, max s(20)/s(0) {worst_ratio:.2e}, {secs:.2} s"),
    );
}

fn criterion_09_comparison_decay() {
    let p = 2.0;
    let e = std::f64::consts::E;
    let sys = ComparisonSystem::new(
        Matrix::scalar(1.0 - p),
        Matrix::scalar(-p * e),
        1.0,
        DecayEnvelope::new(1.0, p - 1.0).unwrap(),
    )
    .unwrap();
    let eps = 0.04;
    let sigma = certify_sigma(&sys, eps).unwrap().sigma;
    let mut worst = f64::INFINITY;
    for seed in 0..50u64 {
        let d = Signal::piecewise_constant(seed, 0.05).unwrap();
        let q = Signal::piecewise_constant(seed + 1000, 0.1).unwrap();
        let trace =
            simulate_comparison(&sys, eps, &d, &q, |t| vec![1.0 + 0.5 * t], 25.0, 0.01).unwrap();
        let fit = fit_comparison_decay(&trace, 2.0 * trace.window).unwrap();
        worst = worst.min(fit.sigma_hat);
    }
    report(
        9,
        worst >= 0.8 * sigma,
        format!("certified sigma {sigma:.4}, smallest fitted rate {worst:.4}"),
    );
}

fn criterion_10_formulation_equivalence() {
    let model = example(2.0);
    let eps = 0.04;
    let d = DelaySignal::new(Signal::sinusoid(0.5, 0.0).unwrap(), eps).unwrap();
    let gaps: Vec<f64> = [4e-3, 2e-3, 1e-3]
        .iter()
        .map(|&dt| {
            let hist =
                make_compatible_history(&model, eps, &[1.0], |t| vec![(3.0 * t).sin()], dt).unwrap();
            let a = simulate_closed_loop(&model, &d, &hist, 5.0, dt).unwrap();
            let b = simulate_derivative_form(&model, &d, &hist, 5.0, dt).unwrap();
            a.x.iter()
                .zip(&b.x)
                .chain(a.u.iter().zip(&b.u))
                .map(|(x, y)| (x[0] - y[0]).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let ratios = [gaps[0] / gaps[1], gaps[1] / gaps[2]];
    report(
        10,
        gaps[2] <= 1e-4 && ratios.iter().all(|q| (3.0..=5.0).contains(q)),
        format!("gaps {gaps:?}, ratios {ratios:.3?}"),
    );
}

fn main() {
    let criteria: [(u32, fn()); 10] = [
        (1, criterion_01_closed_form_consistency),
        (2, criterion_02_figure1_reproduction),
        (3, criterion_03_crossing_validity),
        (4, criterion_04_spectral_cross_check),
        (5, criterion_05_envelope_certificate),
        (6, criterion_06_predictor_identity),
        (7, criterion_07_nominal_finite_spectrum),
        (8, criterion_08_robust_decay),
        (9, criterion_09_comparison_decay),
        (10, criterion_10_formulation_equivalence),
    ];
    for (n, check) in criteria {
        if catch_unwind(AssertUnwindSafe(check)).is_err() {
            println!("criterion {n}: FAIL (panicked)");
            FAILURES.fetch_add(1, Ordering::SeqCst);
        }
    }
    let failed = FAILURES.load(Ordering::SeqCst);
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
