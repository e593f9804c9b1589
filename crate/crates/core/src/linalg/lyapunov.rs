use super::lu::Lu;
use super::Matrix;
use crate::error::Result;

/// Solves the continuous Lyapunov equation `AᵀP + PA = -Q` for `P`.
///
/// The equation is vectorized column-major into the n²×n² system
/// `(I ⊗ Aᵀ + Aᵀ ⊗ I) vec(P) = -vec(Q)` and solved by dense LU. The result is
/// symmetrized. `A` must have no pair of eigenvalues summing to zero.
pub fn solve_lyapunov(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    let n = a.require_square("Lyapunov coefficient")?;
    let nn = n * n;
    let at = a.transpose();
    let mut kron = Matrix::zeros(nn, nn);
    // vec index of P[i][j] (column-major) is j*n + i.
    for j in 0..n {
        for i in 0..n {
            let row = j * n + i;
            // (AᵀP)[i][j] = Σ_k Aᵀ[i][k] P[k][j]
            for k in 0..n {
                kron[(row, j * n + k)] += at[(i, k)];
            }
            // (PA)[i][j] = Σ_k P[i][k] A[k][j]
            for k in 0..n {
                kron[(row, k * n + i)] += a[(k, j)];
            }
        }
    }
    let mut rhs = vec![0.0; nn];
    for j in 0..n {
        for i in 0..n {
            rhs[j * n + i] = -q[(i, j)];
        }
    }
    let sol = Lu::new(&kron)?.solve_vec(&rhs);
    let mut p = Matrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            p[(i, j)] = sol[j * n + i];
        }
    }
    Ok(p.symmetrize())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_vanishes() {
        let a = Matrix::from_rows(&[[-1.0, 5.0, 0.3], [0.0, -2.0, 1.0], [0.4, 0.0, -0.7]]).unwrap();
        let q = Matrix::identity(3);
        let p = solve_lyapunov(&a, &q).unwrap();
        let residual = &(&(&a.transpose() * &p) + &(&p * &a)) + &q;
        assert!(residual.max_abs() < 1e-12, "{residual:?}");
    }

    #[test]
    fn hand_solved_jordan_block() {
        // Aᵀ P + P A = -I with A = [[-1/2, 5], [0, -1/2]] gives
        // a = 1, 5a - b = 0, 10b - c = -1, i.e. P = [[1, 5], [5, 51]].
        let a = Matrix::from_rows(&[[-0.5, 5.0], [0.0, -0.5]]).unwrap();
        let p = solve_lyapunov(&a, &Matrix::identity(2)).unwrap();
        let expected = Matrix::from_rows(&[[1.0, 5.0], [5.0, 51.0]]).unwrap();
        assert!((&p - &expected).max_abs() < 1e-12);
    }
}
