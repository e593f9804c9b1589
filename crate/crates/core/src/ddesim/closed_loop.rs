use super::kernel::{delay_steps, PredictorKernel};
use super::{DelaySignal, GridSeries, HistoryFunction, PartialTrace, SimTrace, BLOW_UP_GUARD};
use crate::error::{Error, Result};
use crate::linalg::{mat_exp, vec_norm, Matrix};
use crate::margin::PlantModel;

/// Predictor feedback `u(t) = k exp(Ar)x(t) + k∫_{t-r}^{t} exp(A(t-θ))Bu(θ)dθ`
/// by the composite trapezoid rule on the grid of `u_history`, reading `u`
/// by linear interpolation.
pub fn predictor_control(
    model: &PlantModel,
    x_now: &[f64],
    u_history: &GridSeries,
    t: f64,
) -> Result<Vec<f64>> {
    if x_now.len() != model.n() || u_history.dim() != model.m() {
        return Err(Error::dimension("state or input history does not match the model"));
    }
    let h = u_history.step();
    let steps = delay_steps(model.r(), h)?;
    let (a, b, k) = (model.a(), model.b(), model.k());
    let exp_ah = mat_exp(a, h)?;
    let mut u = (k * &mat_exp(a, model.r())?).mul_vec(x_now);
    let mut power = Matrix::identity(model.n());
    let mut buf = vec![0.0; model.m()];
    for j in 0..=steps {
        u_history.interp_into(t - j as f64 * h, &mut buf)?;
        let w = if j == 0 || j == steps { 0.5 } else { 1.0 };
        (k * &(&power * b)).mul_vec_acc(&buf, w * h, &mut u);
        power = &power * &exp_ah;
    }
    Ok(u)
}

fn check_run(model: &PlantModel, signal: &DelaySignal, history: &HistoryFunction, t_final: f64, dt: f64) -> Result<usize> {
    if (history.step() - dt).abs() > 1e-12 * dt.max(1.0) {
        return Err(Error::validation(format!(
            "simulation step {dt} must equal the history step {}",
            history.step()
        )));
    }
    if (signal.epsilon - history.epsilon).abs() > 1e-15 || signal.epsilon > model.r() {
        return Err(Error::Precondition(format!(
            "signal epsilon {} must match the history epsilon {} and not exceed r = {}",
            signal.epsilon,
            history.epsilon,
            model.r()
        )));
    }
    if history.x0.len() != model.n() || history.u.dim() != model.m() {
        return Err(Error::dimension("history does not match the model dimensions"));
    }
    let window = model.r() + signal.epsilon;
    if history.u.start() > -window + 1e-9 * dt {
        return Err(Error::Coverage {
            t: -window,
            start: history.u.start(),
            end: 0.0,
        });
    }
    if !(t_final >= window) || !t_final.is_finite() {
        return Err(Error::validation(format!(
            "t_final = {t_final} must be at least r + epsilon = {window}"
        )));
    }
    Ok((t_final / dt).round() as usize)
}

/// Shared bookkeeping of both closed-loop formulations.
struct Recorder {
    trace: SimTrace,
}

impl Recorder {
    fn new(model: &PlantModel, signal: &DelaySignal, history: &HistoryFunction, steps: usize) -> Self {
        let dt = history.step();
        let mut u_record = GridSeries::with_capacity(
            history.u.start(),
            dt,
            model.m(),
            history.u.len() + steps,
        );
        for node in history.u.nodes() {
            u_record.push(node);
        }
        Self {
            trace: SimTrace {
                dt,
                window: model.r() + signal.epsilon,
                times: Vec::with_capacity(steps + 1),
                x: Vec::with_capacity(steps + 1),
                u: Vec::with_capacity(steps + 1),
                p: Vec::with_capacity(steps + 1),
                u_record,
            },
        }
    }

    fn origin(&self) -> usize {
        self.trace.u_record.len() - 1
    }

    fn record(&mut self, kernel: &PredictorKernel, t: f64, x: Vec<f64>, u: Vec<f64>, push_u: bool) {
        if push_u {
            self.trace.u_record.push(&u);
        }
        let gi = self.trace.u_record.len() - 1;
        let p = kernel.predictor_state(&x, &self.trace.u_record, gi);
        self.trace.times.push(t);
        self.trace.x.push(x);
        self.trace.u.push(u);
        self.trace.p.push(p);
    }

    fn diverged(self, t: f64) -> Error {
        Error::Divergence {
            t,
            partial: Box::new(PartialTrace::ClosedLoop(self.trace)),
        }
    }
}

/// Closed loop `ẋ = Ax + Bu(t-r-εd(t))` with predictor feedback in integral
/// form.
///
/// `x` advances by classical RK4 with the delayed input read from the growing
/// `u` record by linear interpolation. The control at each new node solves the
/// trapezoid-discretized feedback law (which contains `u(t)` itself through
/// the endpoint of the integral). The predictor state `p(t)` is recorded by
/// integrating the piecewise-linear record exactly, so `u - kp` measures the
/// controller's quadrature error.
pub fn simulate_closed_loop(
    model: &PlantModel,
    signal: &DelaySignal,
    history: &HistoryFunction,
    t_final: f64,
    dt: f64,
) -> Result<SimTrace> {
    let steps = check_run(model, signal, history, t_final, dt)?;
    let kernel = PredictorKernel::new(model, dt)?;
    let (a, b) = (model.a(), model.b());
    let (n, m, r) = (model.n(), model.m(), model.r());

    let mut rec = Recorder::new(model, signal, history, steps);
    rec.record(&kernel, 0.0, history.x0.clone(), history.u_at_zero().to_vec(), false);
    debug_assert_eq!(rec.origin(), history.u.len() - 1);

    let mut x = history.x0.clone();
    let mut ud = vec![0.0; m];
    let mut stage = vec![0.0; n];
    let mut ks = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];

    for i in 0..steps {
        let t = i as f64 * dt;
        {
            let u_record = &rec.trace.u_record;
            let mut rhs = |tau: f64, state: &[f64], out: &mut [f64]| -> Result<()> {
                u_record.interp_clamped_into(tau - signal.delay(r, tau), &mut ud)?;
                a.mul_vec_into(state, out);
                b.mul_vec_acc(&ud, 1.0, out);
                Ok(())
            };
            rk4_step(&mut rhs, t, dt, &mut x, &mut stage, &mut ks)?;
        }
        let t_next = (i + 1) as f64 * dt;
        if !(vec_norm(&x) <= BLOW_UP_GUARD) {
            return Err(rec.diverged(t_next));
        }
        let gi = rec.trace.u_record.len();
        let u = kernel.implicit_control(&x, &rec.trace.u_record, gi);
        rec.record(&kernel, t_next, x.clone(), u, true);
    }
    Ok(rec.trace)
}

/// Closed loop with the differentiated controller
/// `u̇ = k exp(Ar)(Ax + Bu(t-r-εd) - Bu(t-r)) + kA∫_{-r}^{0} exp(-As)Bu(t+s)ds + kBu`,
/// advancing `(x, u)` jointly by RK4. The distributed term is a trapezoid sum
/// over the `u` record (stage value at the current time).
pub fn simulate_derivative_form(
    model: &PlantModel,
    signal: &DelaySignal,
    history: &HistoryFunction,
    t_final: f64,
    dt: f64,
) -> Result<SimTrace> {
    let steps = check_run(model, signal, history, t_final, dt)?;
    let kernel = PredictorKernel::new(model, dt)?;
    let (a, b, k) = (model.a(), model.b(), model.k());
    let (n, m, r) = (model.n(), model.m(), model.r());
    let k_exp_ar_a = &kernel.k_exp_ar * a;
    let k_exp_ar_b = &kernel.k_exp_ar * b;
    let ka = k * a;
    let kb = k * b;

    let mut rec = Recorder::new(model, signal, history, steps);
    rec.record(&kernel, 0.0, history.x0.clone(), history.u_at_zero().to_vec(), false);

    let dim = n + m;
    let mut state: Vec<f64> = history.x0.iter().chain(history.u_at_zero()).copied().collect();
    let mut stage = vec![0.0; dim];
    let mut ks = [vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]];
    let mut ud = vec![0.0; m];
    let mut ur = vec![0.0; m];
    let mut buf = vec![0.0; m];
    let mut integral = vec![0.0; n];
    let mut ax_bud = vec![0.0; n];

    for i in 0..steps {
        let t = i as f64 * dt;
        {
            let u_record = &rec.trace.u_record;
            let mut rhs = |tau: f64, s: &[f64], out: &mut [f64]| -> Result<()> {
                let (xs, us) = s.split_at(n);
                let (dx, du) = out.split_at_mut(n);
                u_record.interp_clamped_into(tau - signal.delay(r, tau), &mut ud)?;
                u_record.interp_clamped_into(tau - r, &mut ur)?;

                a.mul_vec_into(xs, &mut ax_bud);
                b.mul_vec_acc(&ud, 1.0, &mut ax_bud);
                dx.copy_from_slice(&ax_bud);

                // ∫_{τ-r}^{τ} exp(A(τ-θ))Bu(θ)dθ, node j at θ = τ - jh
                integral.iter_mut().for_each(|v| *v = 0.0);
                kernel.g[0].mul_vec_acc(us, kernel.weight(0) * dt, &mut integral);
                for j in 1..=kernel.steps {
                    u_record.interp_clamped_into(tau - j as f64 * dt, &mut buf)?;
                    kernel.g[j].mul_vec_acc(&buf, kernel.weight(j) * dt, &mut integral);
                }

                k_exp_ar_a.mul_vec_into(xs, du);
                k_exp_ar_b.mul_vec_acc(&ud, 1.0, du);
                k_exp_ar_b.mul_vec_acc(&ur, -1.0, du);
                ka.mul_vec_acc(&integral, 1.0, du);
                kb.mul_vec_acc(us, 1.0, du);
                Ok(())
            };
            rk4_step(&mut rhs, t, dt, &mut state, &mut stage, &mut ks)?;
        }
        let t_next = (i + 1) as f64 * dt;
        let (xs, us) = state.split_at(n);
        if !(vec_norm(xs) <= BLOW_UP_GUARD) || us.iter().any(|v| !v.is_finite()) {
            return Err(rec.diverged(t_next));
        }
        rec.record(&kernel, t_next, xs.to_vec(), us.to_vec(), true);
    }
    Ok(rec.trace)
}

/// One classical RK4 step of `ẏ = f(t, y)` in place.
pub(crate) fn rk4_step<F>(
    f: &mut F,
    t: f64,
    h: f64,
    y: &mut [f64],
    stage: &mut [f64],
    ks: &mut [Vec<f64>; 4],
) -> Result<()>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let [k1, k2, k3, k4] = ks;
    f(t, y, k1)?;
    for ((s, yi), ki) in stage.iter_mut().zip(y.iter()).zip(k1.iter()) {
        *s = yi + 0.5 * h * ki;
    }
    f(t + 0.5 * h, stage, k2)?;
    for ((s, yi), ki) in stage.iter_mut().zip(y.iter()).zip(k2.iter()) {
        *s = yi + 0.5 * h * ki;
    }
    f(t + 0.5 * h, stage, k3)?;
    for ((s, yi), ki) in stage.iter_mut().zip(y.iter()).zip(k3.iter()) {
        *s = yi + h * ki;
    }
    f(t + h, stage, k4)?;
    for i in 0..y.len() {
        y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(())
}

/// State recovered from the predictor path:
/// `x(t) = exp(-Ar)p(t) - ∫_{t-r}^{t} exp(A(t-r-θ))Bk p(θ)dθ` (trapezoid on
/// the grid of `p_path`). Valid for `t ≥ r`.
pub fn recover_state(model: &PlantModel, p_path: &GridSeries, t: f64) -> Result<Vec<f64>> {
    if p_path.dim() != model.n() {
        return Err(Error::dimension("predictor path does not match the state dimension"));
    }
    let h = p_path.step();
    let steps = delay_steps(model.r(), h)?;
    let a = model.a();
    let bk = model.b() * model.k();
    let exp_neg_ar = mat_exp(a, -model.r())?;
    let exp_ah = mat_exp(a, h)?;

    let mut x = exp_neg_ar.mul_vec(&p_path.interp(t)?);
    let mut power = exp_neg_ar.clone();
    let mut buf = vec![0.0; model.n()];
    for j in 0..=steps {
        p_path.interp_into(t - j as f64 * h, &mut buf)?;
        let w = if j == 0 || j == steps { 0.5 } else { 1.0 };
        (&power * &bk).mul_vec_acc(&buf, -w * h, &mut x);
        power = &power * &exp_ah;
    }
    Ok(x)
}
