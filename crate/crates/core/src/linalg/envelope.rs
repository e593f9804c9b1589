use serde::{Deserialize, Serialize};

use super::{is_hurwitz, mat_exp, solve_lyapunov, spectral_norm, symmetric_eigenvalues, Matrix};
use crate::error::{Error, Result};

/// Relative margin keeping the envelope rate strictly inside `(0, -α(M))`.
pub const ENVELOPE_MARGIN: f64 = 1e-6;

const SCAN_POINTS: usize = 33;
const GOLDEN_TOL: f64 = 1e-10;

/// Constants `(Θ, λ)` with `|exp(Mt)| ≤ Θ e^{-λt}` for all `t ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayEnvelope {
    pub theta: f64,
    pub lambda: f64,
}

impl DecayEnvelope {
    pub fn new(theta: f64, lambda: f64) -> Result<Self> {
        if !(theta >= 1.0 && theta.is_finite()) {
            return Err(Error::validation(format!("envelope theta must be >= 1, got {theta}")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::validation(format!("envelope lambda must be > 0, got {lambda}")));
        }
        Ok(Self { theta, lambda })
    }

    /// `Θ e^{-λt}`.
    pub fn bound(&self, t: f64) -> f64 {
        self.theta * (-self.lambda * t).exp()
    }
}

/// Envelope with rate `μ` from a Lyapunov certificate.
///
/// Solves `(M+μI)ᵀP + P(M+μI) = -I`, rescales `P` so that its smallest
/// eigenvalue is exactly one (so `P ⪰ I` and `PM + MᵀP + 2μP ⪯ 0`), and
/// returns `Θ = √|P|`, `λ = μ`.
pub fn decay_envelope(m: &Matrix, mu: f64) -> Result<DecayEnvelope> {
    m.require_square("envelope matrix")?;
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::validation(format!("envelope rate mu must be positive, got {mu}")));
    }
    let test = is_hurwitz(m)?;
    if !test.hurwitz {
        return Err(Error::Precondition(format!(
            "matrix is not Hurwitz (spectral abscissa {})",
            test.abscissa
        )));
    }
    if mu >= -test.abscissa {
        return Err(Error::Infeasible(format!(
            "envelope rate mu = {mu} must be below -abscissa = {}",
            -test.abscissa
        )));
    }
    let shifted = m.shift_diag(mu);
    let p = solve_lyapunov(&shifted, &Matrix::identity(m.rows()))?;
    let eig = symmetric_eigenvalues(&p)?;
    let (smallest, largest) = (eig[0], eig[eig.len() - 1]);
    if !(smallest > 0.0) {
        return Err(Error::Infeasible(format!(
            "Lyapunov solution is not positive definite at mu = {mu} (smallest eigenvalue {smallest})"
        )));
    }
    let theta = (largest / smallest).sqrt().max(1.0);
    DecayEnvelope::new(theta, mu)
}

/// Outcome of [`optimize_envelope`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizedEnvelope {
    pub envelope: DecayEnvelope,
    pub mu: f64,
    pub score: f64,
    /// True when the objective was non-finite at every probed rate.
    pub all_infeasible: bool,
}

/// Searches `μ ∈ (δ₀, -α(M)(1-δ₀))` for the envelope maximizing `objective`.
///
/// A uniform scan brackets the best rate, then golden-section search refines
/// it. Non-finite objective values count as infeasible.
pub fn optimize_envelope<F>(m: &Matrix, objective: F) -> Result<OptimizedEnvelope>
where
    F: Fn(&DecayEnvelope) -> f64,
{
    let test = is_hurwitz(m)?;
    if !test.hurwitz {
        return Err(Error::Precondition(format!(
            "matrix is not Hurwitz (spectral abscissa {})",
            test.abscissa
        )));
    }
    let lo = ENVELOPE_MARGIN;
    let hi = -test.abscissa * (1.0 - ENVELOPE_MARGIN);
    if !(hi > lo) {
        return Err(Error::Infeasible(format!(
            "spectral abscissa {} leaves no room for an envelope rate",
            test.abscissa
        )));
    }

    let eval = |mu: f64| -> Option<(DecayEnvelope, f64)> {
        let env = decay_envelope(m, mu).ok()?;
        let score = objective(&env);
        Some((env, if score.is_finite() { score } else { f64::NEG_INFINITY }))
    };

    let mut best: Option<(f64, DecayEnvelope, f64)> = None;
    let consider = |mu: f64, best: &mut Option<(f64, DecayEnvelope, f64)>| -> f64 {
        match eval(mu) {
            Some((env, score)) => {
                if best.is_none_or(|b| score > b.2) {
                    *best = Some((mu, env, score));
                }
                score
            }
            None => f64::NEG_INFINITY,
        }
    };

    let grid: Vec<f64> = (0..SCAN_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (SCAN_POINTS - 1) as f64)
        .collect();
    let scores: Vec<f64> = grid.iter().map(|&mu| consider(mu, &mut best)).collect();
    let best_idx = scores
        .iter()
        .enumerate()
        .fold(0, |bi, (i, &s)| if s > scores[bi] { i } else { bi });

    let mut a = grid[best_idx.saturating_sub(1)];
    let mut b = grid[(best_idx + 1).min(SCAN_POINTS - 1)];
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = consider(c, &mut best);
    let mut fd = consider(d, &mut best);
    while b - a > GOLDEN_TOL * hi {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = consider(c, &mut best);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = consider(d, &mut best);
        }
    }
    consider(a, &mut best);
    consider(b, &mut best);

    match best {
        Some((mu, envelope, score)) => Ok(OptimizedEnvelope {
            envelope,
            mu,
            score,
            all_infeasible: score == f64::NEG_INFINITY,
        }),
        None => Err(Error::Infeasible(
            "no envelope could be constructed on the admissible rate interval".into(),
        )),
    }
}

/// Largest ratio `|exp(Mt)| / (Θ e^{-λt})` over `samples` points of `[0, 20/λ]`.
///
/// The envelope is certified on the grid when the result is `≤ 1` (up to
/// rounding).
pub fn certify_envelope(m: &Matrix, env: &DecayEnvelope, samples: usize) -> Result<f64> {
    let samples = samples.max(2);
    let t_end = 20.0 / env.lambda;
    let mut worst: f64 = 0.0;
    for i in 0..samples {
        let t = t_end * i as f64 / (samples - 1) as f64;
        let norm = spectral_norm(&mat_exp(m, t)?)?;
        worst = worst.max(norm / env.bound(t));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_envelope_is_tight() {
        let m = Matrix::scalar(-1.0);
        let env = decay_envelope(&m, 1.0 - 1e-9).unwrap();
        assert_eq!(env.theta, 1.0);
        assert_eq!(env.lambda, 1.0 - 1e-9);
    }

    #[test]
    fn normal_matrix_has_unit_theta() {
        let m = Matrix::identity(2).scale(-1.0);
        let env = decay_envelope(&m, 0.5).unwrap();
        assert!((env.theta - 1.0).abs() < 1e-14);
        assert_eq!(env.lambda, 0.5);
    }

    #[test]
    fn jordan_block_theta_matches_hand_solution() {
        // P = [[1, 5], [5, 51]] (hand-solved Lyapunov equation for M + μI);
        // eigenvalues 26 ± √650, so Θ = √(λmax/λmin).
        let m = Matrix::from_rows(&[[-1.0, 5.0], [0.0, -1.0]]).unwrap();
        let env = decay_envelope(&m, 0.5).unwrap();
        let root = 650f64.sqrt();
        let expected = ((26.0 + root) / (26.0 - root)).sqrt();
        assert!(env.theta > 1.0);
        assert!((env.theta - expected).abs() < 1e-10 * expected, "{}", env.theta);
        assert!(certify_envelope(&m, &env, 200).unwrap() <= 1.0 + 1e-9);
    }

    #[test]
    fn infeasible_and_precondition_errors() {
        let m = Matrix::scalar(-1.0);
        assert!(matches!(decay_envelope(&m, 1.0), Err(Error::Infeasible(_))));
        assert!(matches!(decay_envelope(&m, 2.0), Err(Error::Infeasible(_))));
        let m = Matrix::scalar(0.5);
        assert!(matches!(decay_envelope(&m, 0.1), Err(Error::Precondition(_))));
    }

    #[test]
    fn optimizing_for_rate_pushes_to_abscissa() {
        let m = Matrix::scalar(-1.0);
        let best = optimize_envelope(&m, |e| e.lambda).unwrap();
        assert!(best.envelope.lambda > 1.0 - 1e-5 && best.envelope.lambda < 1.0);
        assert_eq!(best.envelope.theta, 1.0);

        let m = Matrix::identity(2).scale(-2.0);
        let best = optimize_envelope(&m, |e| e.lambda).unwrap();
        assert!(best.envelope.lambda > 2.0 - 1e-5 && best.envelope.lambda < 2.0);
        assert!(!best.all_infeasible);
    }

    #[test]
    fn all_infeasible_objective_is_flagged() {
        let m = Matrix::scalar(-1.0);
        let best = optimize_envelope(&m, |_| f64::NAN).unwrap();
        assert!(best.all_infeasible);
    }
}
