use super::closed_loop::rk4_step;
use super::history::history_nodes;
use super::{ComparisonTrace, GridSeries, PartialTrace, Signal, BLOW_UP_GUARD};
use crate::error::{Error, Result};
use crate::linalg::vec_norm;
use crate::margin::ComparisonSystem;

/// Simulates `ẋ = Âx + q(t)C(x(t-r-εd(t)) - x(t-r))` from the history
/// `x_history` on `[-r-ε, 0]` by RK4 with linearly interpolated delayed reads.
pub fn simulate_comparison<F>(
    sys: &ComparisonSystem,
    epsilon: f64,
    d: &Signal,
    q: &Signal,
    x_history: F,
    t_final: f64,
    dt: f64,
) -> Result<ComparisonTrace>
where
    F: Fn(f64) -> Vec<f64>,
{
    let (n, r) = (sys.n(), sys.r());
    if !(epsilon >= 0.0 && epsilon <= r) {
        return Err(Error::Precondition(format!(
            "epsilon must lie in [0, r = {r}], got {epsilon}"
        )));
    }
    if !(dt > 0.0 && dt <= r) {
        return Err(Error::validation(format!("time step must lie in (0, r], got {dt}")));
    }
    let window = r + epsilon;
    if !(t_final >= window) || !t_final.is_finite() {
        return Err(Error::validation(format!(
            "t_final = {t_final} must be at least r + epsilon = {window}"
        )));
    }
    let steps = (t_final / dt).round() as usize;
    let before = history_nodes(window, dt);

    let mut record = GridSeries::with_capacity(-(before as f64) * dt, dt, n, before + steps + 1);
    for j in (0..=before).rev() {
        let t = -(j as f64) * dt;
        let v = x_history(t);
        if v.len() != n || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::validation(format!(
                "history must return {n} finite entries (failed at t = {t})"
            )));
        }
        record.push(&v);
    }

    let mut trace = ComparisonTrace {
        dt,
        window,
        times: Vec::with_capacity(steps + 1),
        x: Vec::with_capacity(steps + 1),
        record,
    };
    let mut x = trace.record.node(before).to_vec();
    trace.times.push(0.0);
    trace.x.push(x.clone());

    let (ahat, c) = (sys.ahat(), sys.c());
    let mut delayed = vec![0.0; n];
    let mut nominal = vec![0.0; n];
    let mut stage = vec![0.0; n];
    let mut ks = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];

    for i in 0..steps {
        let t = i as f64 * dt;
        {
            let record = &trace.record;
            let mut rhs = |tau: f64, s: &[f64], out: &mut [f64]| -> Result<()> {
                record.interp_clamped_into(tau - r - epsilon * d.eval(tau), &mut delayed)?;
                record.interp_clamped_into(tau - r, &mut nominal)?;
                for (dv, nv) in delayed.iter_mut().zip(&nominal) {
                    *dv -= nv;
                }
                ahat.mul_vec_into(s, out);
                c.mul_vec_acc(&delayed, q.eval(tau), out);
                Ok(())
            };
            rk4_step(&mut rhs, t, dt, &mut x, &mut stage, &mut ks)?;
        }
        let t_next = (i + 1) as f64 * dt;
        if !(vec_norm(&x) <= BLOW_UP_GUARD) {
            return Err(Error::Divergence {
                t: t_next,
                partial: Box::new(PartialTrace::Comparison(trace)),
            });
        }
        trace.record.push(&x);
        trace.times.push(t_next);
        trace.x.push(x.clone());
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{mat_exp, DecayEnvelope, Matrix};

    fn system(c: f64) -> ComparisonSystem {
        ComparisonSystem::new(
            Matrix::from_rows(&[[-1.0, 0.5], [0.0, -2.0]]).unwrap(),
            Matrix::from_rows(&[[c, 0.0], [0.3 * c, c]]).unwrap(),
            1.0,
            DecayEnvelope::new(2.0, 0.5).unwrap(),
        )
        .unwrap()
    }

    fn ode_error(trace: &ComparisonTrace, ahat: &Matrix, x0: &[f64]) -> f64 {
        trace
            .times
            .iter()
            .zip(&trace.x)
            .map(|(&t, x)| {
                let exact = mat_exp(ahat, t).unwrap().mul_vec(x0);
                exact.iter().zip(x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn zero_coupling_is_pure_ode() {
        let sys = system(0.0);
        let d = Signal::piecewise_constant(3, 0.1).unwrap();
        let q = Signal::sinusoid(0.7, 0.2).unwrap();
        let x0 = [1.0, -1.0];
        let trace = simulate_comparison(&sys, 0.3, &d, &q, |_| x0.to_vec(), 5.0, 0.01).unwrap();
        assert!(ode_error(&trace, sys.ahat(), &x0) < 1e-9);
    }

    #[test]
    fn zero_epsilon_cancels_delayed_difference() {
        let sys = system(3.0);
        let d = Signal::piecewise_constant(9, 0.05).unwrap();
        let q = Signal::constant(1.0).unwrap();
        let x0 = [0.5, 2.0];
        let hist = |t: f64| vec![x0[0] * (1.0 + t), x0[1] * (2.0 * t).cos()];
        let trace = simulate_comparison(&sys, 0.0, &d, &q, hist, 5.0, 0.01).unwrap();
        assert!(ode_error(&trace, sys.ahat(), &x0) < 1e-9);
    }

    #[test]
    fn rejects_bad_arguments() {
        let sys = system(1.0);
        let s = Signal::constant(0.0).unwrap();
        assert!(simulate_comparison(&sys, 1.5, &s, &s, |_| vec![0.0; 2], 5.0, 0.01).is_err());
        assert!(simulate_comparison(&sys, 0.1, &s, &s, |_| vec![0.0; 2], 0.5, 0.01).is_err());
        assert!(simulate_comparison(&sys, 0.1, &s, &s, |_| vec![0.0; 3], 5.0, 0.01).is_err());
    }
}
