//! Matrix exponential by scaling and squaring with diagonal Padé approximants
//! of degree 3, 5, 7, 9 and 13, selected from the 1-norm of the argument.

use super::lu::Lu;
use super::Matrix;
use crate::error::{Error, Result};

// Largest 1-norms for which the [m/m] approximant meets unit roundoff in
// backward error (double precision).
const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539398330063230e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// `exp(M t)`.
pub fn mat_exp(m: &Matrix, t: f64) -> Result<Matrix> {
    m.require_square("matrix exponential argument")?;
    if !t.is_finite() {
        return Err(Error::validation("exponential time argument must be finite"));
    }
    if !m.is_finite() {
        return Err(Error::validation("matrix has non-finite entries"));
    }
    expm(&m.scale(t))
}

/// `exp(A)`.
pub fn expm(a: &Matrix) -> Result<Matrix> {
    let n = a.require_square("matrix exponential argument")?;
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let norm = a.norm_one();
    if norm == 0.0 {
        return Ok(Matrix::identity(n));
    }

    for (theta, coeffs) in [
        (THETA_3, &B3[..]),
        (THETA_5, &B5[..]),
        (THETA_7, &B7[..]),
        (THETA_9, &B9[..]),
    ] {
        if norm <= theta {
            return pade_low(a, coeffs);
        }
    }

    let squarings = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = a.scale(0.5f64.powi(squarings));
    let mut result = pade13(&scaled)?;
    for _ in 0..squarings {
        result = &result * &result;
    }
    if !result.is_finite() {
        return Err(Error::validation("matrix exponential overflowed"));
    }
    Ok(result)
}

fn pade_low(a: &Matrix, b: &[f64]) -> Result<Matrix> {
    let n = a.rows();
    let ident = Matrix::identity(n);
    let a2 = a * a;
    let degree = b.len() - 1;

    // Even powers I, A², A⁴, ...
    let mut powers = vec![ident.clone()];
    for _ in 1..=degree / 2 {
        let next = powers.last().unwrap() * &a2;
        powers.push(next);
    }

    let mut u_inner = Matrix::zeros(n, n);
    let mut v = Matrix::zeros(n, n);
    for (k, pow) in powers.iter().enumerate() {
        u_inner = &u_inner + &pow.scale(b[2 * k + 1]);
        v = &v + &pow.scale(b[2 * k]);
    }
    let u = a * &u_inner;
    solve_pade(&u, &v)
}

fn pade13(a: &Matrix) -> Result<Matrix> {
    let b = &B13;
    let n = a.rows();
    let ident = Matrix::identity(n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let lin = |c6: f64, c4: f64, c2: f64, c0: f64| -> Matrix {
        let mut m = a6.scale(c6);
        m = &m + &a4.scale(c4);
        m = &m + &a2.scale(c2);
        if c0 != 0.0 {
            m = &m + &ident.scale(c0);
        }
        m
    };

    let u_hi = &a6 * &lin(b[13], b[11], b[9], 0.0);
    let u_inner = &u_hi + &lin(b[7], b[5], b[3], b[1]);
    let u = a * &u_inner;

    let v_hi = &a6 * &lin(b[12], b[10], b[8], 0.0);
    let v = &v_hi + &lin(b[6], b[4], b[2], b[0]);
    solve_pade(&u, &v)
}

fn solve_pade(u: &Matrix, v: &Matrix) -> Result<Matrix> {
    let p = v + u;
    let q = v - u;
    Ok(Lu::new(&q)?.solve(&p))
}
