use std::f64::consts::PI;

use num_complex::Complex64;

use super::DelayPencil;
use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, Matrix};

/// Smallest accepted polynomial degree.
pub const MIN_NODES: usize = 16;
/// Target `|det Δ(s)|` of the Newton refinement.
pub const NEWTON_TOL: f64 = 1e-9;
const NEWTON_MAX_ITER: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RightmostRoot {
    /// Refined root, or the collocation estimate when refinement failed.
    pub root: Complex64,
    pub estimate: Complex64,
    /// `|det Δ(root)|`.
    pub residual: f64,
    pub refined: bool,
}

impl RightmostRoot {
    pub fn is_stable(&self) -> bool {
        self.root.re < 0.0
    }
}

/// Chebyshev points `cos(jπ/N)` and the differentiation matrix on `[-1, 1]`.
fn chebyshev(n: usize) -> (Vec<f64>, Matrix) {
    let x: Vec<f64> = (0..=n).map(|j| (j as f64 * PI / n as f64).cos()).collect();
    let c: Vec<f64> = (0..=n)
        .map(|j| {
            let e = if j == 0 || j == n { 2.0 } else { 1.0 };
            if j % 2 == 0 {
                e
            } else {
                -e
            }
        })
        .collect();
    let mut d = Matrix::zeros(n + 1, n + 1);
    for i in 0..=n {
        let mut row = 0.0;
        for j in 0..=n {
            if i != j {
                let v = c[i] / c[j] / (x[i] - x[j]);
                d[(i, j)] = v;
                row += v;
            }
        }
        // negative-sum trick keeps rows exact on constants
        d[(i, i)] = -row;
    }
    (x, d)
}

/// Lagrange basis at `xi` for Chebyshev points, by the barycentric formula.
fn lagrange_row(x: &[f64], xi: f64) -> Vec<f64> {
    let n = x.len() - 1;
    if let Some(k) = x.iter().position(|&xj| (xj - xi).abs() < 1e-14) {
        let mut out = vec![0.0; n + 1];
        out[k] = 1.0;
        return out;
    }
    let w: Vec<f64> = (0..=n)
        .map(|j| {
            let half = if j == 0 || j == n { 0.5 } else { 1.0 };
            if j % 2 == 0 {
                half
            } else {
                -half
            }
        })
        .collect();
    let terms: Vec<f64> = (0..=n).map(|j| w[j] / (xi - x[j])).collect();
    let total: f64 = terms.iter().sum();
    terms.iter().map(|t| t / total).collect()
}

/// Collocation matrix of the generator of `ẋ = Lx + M(x(t-τ) - x(t-r))` on
/// `[-max(τ, r), 0]` with `degree + 1` Chebyshev nodes.
pub fn collocation_matrix(pencil: &DelayPencil, degree: usize) -> Result<Matrix> {
    if degree < MIN_NODES {
        return Err(Error::validation(format!(
            "collocation needs at least {MIN_NODES} intervals, got {degree}"
        )));
    }
    let n = pencil.n();
    let span = pencil.tau().max(pencil.r());
    if !(span > 0.0) {
        return Err(Error::validation("both delays are zero"));
    }
    let (x, d) = chebyshev(degree);
    let size = n * (degree + 1);
    let mut g = Matrix::zeros(size, size);
    let scale = 2.0 / span;
    for i in 1..=degree {
        for j in 0..=degree {
            let v = scale * d[(i, j)];
            if v != 0.0 {
                for a in 0..n {
                    g[(i * n + a, j * n + a)] = v;
                }
            }
        }
    }
    let to_unit = |theta: f64| 2.0 * theta / span + 1.0;
    let at_tau = lagrange_row(&x, to_unit(-pencil.tau()));
    let at_r = lagrange_row(&x, to_unit(-pencil.r()));
    let (l, m) = (pencil.l(), pencil.m());
    for a in 0..n {
        for b in 0..n {
            g[(a, b)] += l[(a, b)];
            for j in 0..=degree {
                g[(a, j * n + b)] += m[(a, b)] * (at_tau[j] - at_r[j]);
            }
        }
    }
    Ok(g)
}

/// Rightmost characteristic root: collocation estimate refined by Newton's
/// method on `det Δ(s)`.
pub fn rightmost_root(pencil: &DelayPencil, degree: usize) -> Result<RightmostRoot> {
    let g = collocation_matrix(pencil, degree)?;
    let estimate = eigenvalues(&g)?
        .into_iter()
        .filter(|z| z.re.is_finite() && z.im.is_finite())
        .map(|z| if z.im < 0.0 { z.conj() } else { z })
        .max_by(|a, b| a.re.total_cmp(&b.re).then(b.im.total_cmp(&a.im)))
        .ok_or(Error::NoConvergence {
            what: "collocation spectrum",
            iterations: 0,
        })?;

    let mut s = estimate;
    let mut refined = false;
    for _ in 0..NEWTON_MAX_ITER {
        let Some(step) = pencil.newton_step(s) else {
            refined = pencil.det(s).norm() <= NEWTON_TOL;
            break;
        };
        s -= step;
        if !(s.re.is_finite() && s.im.is_finite()) {
            break;
        }
        if step.norm() <= 1e-15 * s.norm().max(1.0) {
            refined = true;
            break;
        }
    }
    let residual = pencil.det(s).norm();
    // a Newton path that wandered off to a different root does not count
    let close = (s - estimate).norm() <= 1e-3 * estimate.norm().max(1.0);
    if refined || residual <= NEWTON_TOL {
        refined = close && residual <= NEWTON_TOL;
    }
    if refined {
        if s.im.abs() < 1e-13 * s.norm().max(1.0) {
            s.im = 0.0;
        }
        Ok(RightmostRoot {
            root: if s.im < 0.0 { s.conj() } else { s },
            estimate,
            residual,
            refined,
        })
    } else {
        Ok(RightmostRoot {
            root: estimate,
            estimate,
            residual: pencil.det(estimate).norm(),
            refined: false,
        })
    }
}
