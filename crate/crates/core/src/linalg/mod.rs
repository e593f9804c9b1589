//! Dense real linear algebra: matrices, matrix exponential, eigenvalues,
//! spectral norms, Hurwitz tests and Lyapunov-based decay envelopes.

mod eigen;
mod envelope;
mod expm;
mod lu;
mod lyapunov;
mod matrix;

pub use eigen::{eigenvalues, spectral_abscissa, symmetric_eigen, symmetric_eigenvalues};
pub use envelope::{
    certify_envelope, decay_envelope, optimize_envelope, DecayEnvelope, OptimizedEnvelope,
    ENVELOPE_MARGIN,
};
pub use expm::{expm, mat_exp};
pub use lu::{inverse, solve, Lu};
pub use lyapunov::solve_lyapunov;
pub use matrix::{vec_norm, Matrix};

use crate::error::{Error, Result};

/// Induced 2-norm (largest singular value).
pub fn spectral_norm(m: &Matrix) -> Result<f64> {
    if !m.is_finite() {
        return Err(Error::validation("matrix has non-finite entries"));
    }
    if m.rows() == 0 || m.cols() == 0 {
        return Ok(0.0);
    }
    let scale = m.max_abs();
    if scale == 0.0 {
        return Ok(0.0);
    }
    // Work with the smaller Gram matrix; scale first to avoid overflow.
    let s = m.scale(1.0 / scale);
    let gram = if s.rows() >= s.cols() {
        &s.transpose() * &s
    } else {
        &s * &s.transpose()
    };
    let largest = symmetric_eigenvalues(&gram)?
        .last()
        .copied()
        .unwrap_or(0.0)
        .max(0.0);
    Ok(scale * largest.sqrt())
}

/// Result of a Hurwitz test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HurwitzTest {
    pub hurwitz: bool,
    /// Largest real part over the spectrum.
    pub abscissa: f64,
}

pub fn is_hurwitz(m: &Matrix) -> Result<HurwitzTest> {
    let abscissa = spectral_abscissa(m)?;
    Ok(HurwitzTest {
        hurwitz: abscissa < 0.0,
        abscissa,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_norm_examples() {
        assert!((spectral_norm(&Matrix::identity(3)).unwrap() - 1.0).abs() < 1e-15);
        assert!((spectral_norm(&Matrix::scalar(3.0)).unwrap() - 3.0).abs() < 1e-15);
        // rank one: [[0,2],[0,0]] = 2 e1 e2ᵀ, single non-zero singular value 2
        let m = Matrix::from_rows(&[[0.0, 2.0], [0.0, 0.0]]).unwrap();
        assert!((spectral_norm(&m).unwrap() - 2.0).abs() < 1e-14);
        // non-square: [[3, 4]] has norm 5
        let m = Matrix::from_rows(&[[3.0, 4.0]]).unwrap();
        assert!((spectral_norm(&m).unwrap() - 5.0).abs() < 1e-14);
    }

    #[test]
    fn hurwitz_examples() {
        let t = is_hurwitz(&Matrix::identity(2).scale(-1.0)).unwrap();
        assert!(t.hurwitz);
        assert!((t.abscissa + 1.0).abs() < 1e-14);

        let t = is_hurwitz(&Matrix::scalar(1.0)).unwrap();
        assert!(!t.hurwitz);
        assert_eq!(t.abscissa, 1.0);

        // A + Bk with A = B = 1, k = -2
        let t = is_hurwitz(&Matrix::scalar(1.0 - 2.0)).unwrap();
        assert!(t.hurwitz);
        assert_eq!(t.abscissa, -1.0);
    }
}
