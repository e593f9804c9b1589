use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::margin::PlantModel;

/// Which of the two equivalent reductions of the closed loop the
/// characteristic matrix is built from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CharForm {
    /// State dynamics, delayed coupling `Bk exp(Ar)`.
    ReducedX,
    /// Predictor dynamics, delayed coupling `exp(Ar)Bk`.
    ReducedP,
}

/// Characteristic matrix `Δ(s) = sI - L - M(e^{-τs} - e^{-rs})` of
/// `ẋ = Lx + M(x(t-τ) - x(t-r))`.
#[derive(Clone, Debug)]
pub struct DelayPencil {
    l: Matrix,
    m: Matrix,
    r: f64,
    tau: f64,
}

impl DelayPencil {
    pub fn new(l: Matrix, m: Matrix, r: f64, tau: f64) -> Result<Self> {
        let n = l.require_square("L")?;
        if m.rows() != n || m.cols() != n {
            return Err(Error::dimension(format!(
                "coupling must be {n}x{n}, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        if !(r >= 0.0 && r.is_finite()) || !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::validation(format!(
                "delays must be finite and >= 0, got r = {r}, tau = {tau}"
            )));
        }
        Ok(Self { l, m, r, tau })
    }

    pub fn from_model(model: &PlantModel, tau: f64, form: CharForm) -> Result<Self> {
        let exp_ar = crate::linalg::mat_exp(model.a(), model.r())?;
        let bk = model.b() * model.k();
        let m = match form {
            CharForm::ReducedX => &bk * &exp_ar,
            CharForm::ReducedP => &exp_ar * &bk,
        };
        Self::new(model.closed_loop(), m, model.r(), tau)
    }

    /// `s + (p-1) + pe^{1-τs} - pe^{1-s}`, the single-state example.
    pub fn scalar(p: f64, tau: f64) -> Result<Self> {
        Self::from_model(&PlantModel::scalar_example(p)?, tau, CharForm::ReducedX)
    }

    pub fn n(&self) -> usize {
        self.l.rows()
    }

    pub fn l(&self) -> &Matrix {
        &self.l
    }

    pub fn m(&self) -> &Matrix {
        &self.m
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `Δ(s)` in row-major order.
    pub fn matrix(&self, s: Complex64) -> Vec<Complex64> {
        let n = self.n();
        let f = (-self.tau * s).exp() - (-self.r * s).exp();
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                let mut v = -f * self.m[(i, j)] - self.l[(i, j)];
                if i == j {
                    v += s;
                }
                out[i * n + j] = v;
            }
        }
        out
    }

    /// `Δ'(s) = I + M(τe^{-τs} - re^{-rs})`.
    pub fn derivative(&self, s: Complex64) -> Vec<Complex64> {
        let n = self.n();
        let g = self.tau * (-self.tau * s).exp() - self.r * (-self.r * s).exp();
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = g * self.m[(i, j)] + if i == j { 1.0 } else { 0.0 };
            }
        }
        out
    }

    pub fn det(&self, s: Complex64) -> Complex64 {
        ComplexLu::new(self.matrix(s), self.n()).det()
    }

    /// Newton step `det Δ / (det Δ)'`, i.e. `1 / tr(Δ⁻¹Δ')`; `None` when
    /// `Δ(s)` is exactly singular.
    pub(crate) fn newton_step(&self, s: Complex64) -> Option<Complex64> {
        let n = self.n();
        let lu = ComplexLu::new(self.matrix(s), n);
        if lu.singular {
            return None;
        }
        let d = self.derivative(s);
        let mut trace = Complex64::new(0.0, 0.0);
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            for i in 0..n {
                col[i] = d[i * n + j];
            }
            lu.solve_in_place(&mut col);
            trace += col[j];
        }
        if trace == Complex64::new(0.0, 0.0) {
            return None;
        }
        Some(trace.inv())
    }
}

/// `det Δ(s)` for the closed loop of `model` under a constant delay `τ`.
pub fn char_eval_matrix(model: &PlantModel, tau: f64, s: Complex64, form: CharForm) -> Result<Complex64> {
    Ok(DelayPencil::from_model(model, tau, form)?.det(s))
}

/// `s + (p-1) + pe^{1-τs} - pe^{1-s}`.
pub fn char_eval_scalar(p: f64, tau: f64, s: Complex64) -> Complex64 {
    let pe = p * std::f64::consts::E;
    s + (p - 1.0) + pe * (-tau * s).exp() - pe * (-s).exp()
}

/// Dense complex LU with partial pivoting.
pub(crate) struct ComplexLu {
    n: usize,
    lu: Vec<Complex64>,
    perm: Vec<usize>,
    sign: f64,
    singular: bool,
}

impl ComplexLu {
    pub fn new(mut a: Vec<Complex64>, n: usize) -> Self {
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let mut singular = false;
        for k in 0..n {
            let (piv, best) = (k..n)
                .map(|i| (i, a[i * n + k].norm()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best == 0.0 {
                singular = true;
                continue;
            }
            if piv != k {
                for j in 0..n {
                    a.swap(k * n + j, piv * n + j);
                }
                perm.swap(k, piv);
                sign = -sign;
            }
            let pivot = a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] / pivot;
                a[i * n + k] = f;
                for j in k + 1..n {
                    let v = a[k * n + j];
                    a[i * n + j] -= f * v;
                }
            }
        }
        Self {
            n,
            lu: a,
            perm,
            sign,
            singular,
        }
    }

    pub fn det(&self) -> Complex64 {
        (0..self.n).fold(Complex64::new(self.sign, 0.0), |acc, i| acc * self.lu[i * self.n + i])
    }

    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let n = self.n;
        let mut y: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let v = self.lu[i * n + j] * y[j];
                y[i] -= v;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let v = self.lu[i * n + j] * y[j];
                y[i] -= v;
            }
            y[i] /= self.lu[i * n + i];
        }
        b.copy_from_slice(&y);
    }
}
