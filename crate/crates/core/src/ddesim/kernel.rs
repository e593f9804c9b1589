use super::GridSeries;
use crate::error::{Error, Result};
use crate::linalg::{expm, mat_exp, Lu, Matrix};
use crate::margin::PlantModel;

/// Number of grid steps spanning the nominal delay; `r/h` must be an integer.
pub(crate) fn delay_steps(r: f64, h: f64) -> Result<usize> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::validation(format!("time step must be > 0, got {h}")));
    }
    let ratio = r / h;
    let steps = ratio.round();
    if steps < 1.0 || (ratio - steps).abs() > 1e-6 * steps.max(1.0) {
        return Err(Error::validation(format!(
            "time step {h} must divide the nominal delay r = {r}"
        )));
    }
    Ok(steps as usize)
}

/// Precomputed matrices for evaluating the predictor integral
/// `∫_{t-r}^{t} exp(A(t-θ))Bu(θ)dθ` on a grid of step `h`.
#[derive(Clone, Debug)]
pub(crate) struct PredictorKernel {
    pub h: f64,
    /// `r / h`.
    pub steps: usize,
    pub exp_ar: Matrix,
    /// `k exp(Ar)`.
    pub k_exp_ar: Matrix,
    /// `exp(A jh)B`, `j = 0..=steps`.
    pub g: Vec<Matrix>,
    /// `k exp(A jh)B`, `j = 0..=steps`.
    pub e: Vec<Matrix>,
    /// Exact weights of a piecewise-linear `u` on panel `j`: the panel
    /// `[t-(j+1)h, t-jh]` contributes `pa[j]·u(t-jh) + pb[j]·u(t-(j+1)h)`.
    pub pa: Vec<Matrix>,
    pub pb: Vec<Matrix>,
    /// LU of `I - (h/2) kB`, the implicit trapezoid controller.
    pub implicit: Lu,
}

impl PredictorKernel {
    pub fn new(model: &PlantModel, h: f64) -> Result<Self> {
        let steps = delay_steps(model.r(), h)?;
        let (a, b, k) = (model.a(), model.b(), model.k());
        let n = model.n();
        let m = model.m();

        let exp_ar = mat_exp(a, model.r())?;
        let k_exp_ar = k * &exp_ar;
        let exp_ah = mat_exp(a, h)?;

        // Ψ1 = ∫₀ʰ e^{Aσ}dσ and Ψ2 = ∫₀ʰ e^{Aσ}(h-σ)dσ from one augmented exponential.
        let mut aug = Matrix::zeros(3 * n, 3 * n);
        for i in 0..n {
            for j in 0..n {
                aug[(i, j)] = a[(i, j)] * h;
            }
            aug[(i, n + i)] = h;
            aug[(n + i, 2 * n + i)] = h;
        }
        let big = expm(&aug)?;
        let mut psi1 = Matrix::zeros(n, n);
        let mut psi2 = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                psi1[(i, j)] = big[(i, n + j)];
                psi2[(i, j)] = big[(i, 2 * n + j)];
            }
        }
        let near = &psi2.scale(1.0 / h) * b;
        let far = &(&psi1 - &psi2.scale(1.0 / h)) * b;

        let mut g = Vec::with_capacity(steps + 1);
        let mut pa = Vec::with_capacity(steps);
        let mut pb = Vec::with_capacity(steps);
        let mut power = Matrix::identity(n);
        for j in 0..=steps {
            g.push(&power * b);
            if j < steps {
                pa.push(&power * &near);
                pb.push(&power * &far);
            }
            power = &power * &exp_ah;
        }
        let e: Vec<Matrix> = g.iter().map(|gj| k * gj).collect();
        let implicit = Lu::new(&(&Matrix::identity(m) - &e[0].scale(0.5 * h)))?;

        Ok(Self {
            h,
            steps,
            exp_ar,
            k_exp_ar,
            g,
            e,
            pa,
            pb,
            implicit,
        })
    }

    /// Trapezoid weight of node `j` on `[0, steps]`.
    #[inline]
    pub fn weight(&self, j: usize) -> f64 {
        if j == 0 || j == self.steps {
            0.5
        } else {
            1.0
        }
    }

    /// Implicit trapezoid predictor control at record node `gi`, using the
    /// nodes `gi-steps..gi-1` already stored in `record`.
    pub fn implicit_control(&self, x: &[f64], record: &GridSeries, gi: usize) -> Vec<f64> {
        let m = record.dim();
        let mut rhs = self.k_exp_ar.mul_vec(x);
        for j in 1..=self.steps {
            self.e[j].mul_vec_acc(record.node(gi - j), self.h * self.weight(j), &mut rhs);
        }
        debug_assert_eq!(rhs.len(), m);
        self.implicit.solve_vec(&rhs)
    }

    /// Predictor state `exp(Ar)x + ∫_{t-r}^{t} exp(A(t-θ))Bu(θ)dθ` at record
    /// node `gi`, integrating the piecewise-linear record exactly.
    pub fn predictor_state(&self, x: &[f64], record: &GridSeries, gi: usize) -> Vec<f64> {
        let mut p = self.exp_ar.mul_vec(x);
        for j in 0..self.steps {
            self.pa[j].mul_vec_acc(record.node(gi - j), 1.0, &mut p);
            self.pb[j].mul_vec_acc(record.node(gi - j - 1), 1.0, &mut p);
        }
        p
    }
}
