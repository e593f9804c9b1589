use super::kernel::PredictorKernel;
use super::GridSeries;
use crate::error::{Error, Result};
use crate::linalg::{vec_norm, Lu, Matrix};
use crate::margin::PlantModel;

/// Initial data `(x₀, u₀)` for the closed loop: `u₀` sampled on a uniform
/// grid covering `[-r-ε, 0]`, linear between nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryFunction {
    pub x0: Vec<f64>,
    pub u: GridSeries,
    pub epsilon: f64,
}

impl HistoryFunction {
    pub fn step(&self) -> f64 {
        self.u.step()
    }

    /// `u₀(0)`.
    pub fn u_at_zero(&self) -> &[f64] {
        self.u.node(self.u.len() - 1)
    }

    /// Zero state and zero input history.
    pub fn zero(model: &PlantModel, epsilon: f64, h: f64) -> Result<Self> {
        make_compatible_history(model, epsilon, &vec![0.0; model.n()], |_| vec![0.0; model.m()], h)
    }
}

pub(crate) fn history_nodes(span: f64, h: f64) -> usize {
    (span / h - 1e-9).ceil().max(0.0) as usize
}

/// Samples `u_shape` on the grid of step `h` over `[-r-ε, 0)` and replaces the
/// value at 0 so that `(x₀, u₀)` satisfies the compatibility condition
/// `u(0) = k exp(Ar)x₀ + k∫_{-r}^{0} exp(-As)Bu(s)ds` under the trapezoid rule.
///
/// The correction is blended linearly into the nodes of the last
/// `min(4h, r/10)` time units so the history stays free of a one-cell spike.
/// Since those nodes enter the integral, `u(0)` is found from one `m×m`
/// linear solve rather than by direct evaluation.
pub fn make_compatible_history<F>(
    model: &PlantModel,
    epsilon: f64,
    x0: &[f64],
    u_shape: F,
    h: f64,
) -> Result<HistoryFunction>
where
    F: Fn(f64) -> Vec<f64>,
{
    let kernel = PredictorKernel::new(model, h)?;
    let (n, m, r) = (model.n(), model.m(), model.r());
    if x0.len() != n {
        return Err(Error::dimension(format!("x0 must have {n} entries, got {}", x0.len())));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("x0 has non-finite entries"));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::validation(format!("epsilon must be >= 0, got {epsilon}")));
    }
    if epsilon > r {
        return Err(Error::Precondition(format!(
            "epsilon = {epsilon} exceeds the nominal delay r = {r}"
        )));
    }

    let before = history_nodes(r + epsilon, h).max(kernel.steps);
    let start = -(before as f64) * h;
    let sample = |t: f64| -> Result<Vec<f64>> {
        let v = u_shape(t);
        if v.len() != m {
            return Err(Error::dimension(format!(
                "history seed must return {m} entries, got {}",
                v.len()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::validation(format!("history seed is not finite at t = {t}")));
        }
        Ok(v)
    };

    let blend_len = (4.0 * h).min(r / 10.0);
    let blend = |t: f64| -> f64 { (1.0 + t / blend_len).max(0.0) };

    // Node j (counted back from 0) holds c_j + β_j·u(0).
    let shape0 = sample(0.0)?;
    let mut offsets = Vec::with_capacity(before + 1);
    let mut betas = Vec::with_capacity(before + 1);
    for j in 0..=before {
        let t = -(j as f64) * h;
        let beta = if j == 0 { 1.0 } else { blend(t) };
        let mut c = sample(t)?;
        if j == 0 {
            c.iter_mut().for_each(|v| *v = 0.0);
        } else {
            for (ci, s0) in c.iter_mut().zip(&shape0) {
                *ci -= beta * s0;
            }
        }
        offsets.push(c);
        betas.push(beta);
    }

    let mut lhs = Matrix::identity(m);
    let mut rhs = kernel.k_exp_ar.mul_vec(x0);
    for j in 0..=kernel.steps {
        let w = h * kernel.weight(j);
        if betas[j] != 0.0 {
            lhs = &lhs - &kernel.e[j].scale(w * betas[j]);
        }
        kernel.e[j].mul_vec_acc(&offsets[j], w, &mut rhs);
    }
    let u0 = Lu::new(&lhs)?.solve_vec(&rhs);

    let mut u = GridSeries::with_capacity(start, h, m, before + 1);
    for j in (0..=before).rev() {
        let node: Vec<f64> = offsets[j]
            .iter()
            .zip(&u0)
            .map(|(c, u0i)| c + betas[j] * u0i)
            .collect();
        u.push(&node);
    }
    Ok(HistoryFunction {
        x0: x0.to_vec(),
        u,
        epsilon,
    })
}

/// `|u(0) - k p(0)|`, where `p(0)` integrates the piecewise-linear history
/// exactly; zero (up to O(h²)) for compatible data.
pub fn compatibility_residual(model: &PlantModel, history: &HistoryFunction) -> Result<f64> {
    let kernel = PredictorKernel::new(model, history.step())?;
    let gi = history.u.len() - 1;
    let p0 = kernel.predictor_state(&history.x0, &history.u, gi);
    let kp = model.k().mul_vec(&p0);
    let diff: Vec<f64> = kp
        .iter()
        .zip(history.u_at_zero())
        .map(|(a, b)| a - b)
        .collect();
    Ok(vec_norm(&diff))
}
