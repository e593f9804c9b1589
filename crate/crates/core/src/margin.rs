//! Small-gain robustness margins for predictor feedback under measurable
//! delay perturbations `r + εd(t)`, `|d(t)| ≤ 1`.
//!
//! The closed loop is analysed through its predictor-state comparison system
//! `ṗ = Âp + qC(p(t-r-εd(t)) - p(t-r))` with `Â = A+Bk` and `C = exp(Ar)Bk`.
//! Given an envelope `|exp(Ât)| ≤ Θe^{-λt}`, exponential stability is
//! certified whenever
//!
//! ```text
//! Θ|C|(e^{|Â|ε} - e^{-λε}) < λ                  (general)
//! 2|C|(1 - e^{-|Â|ε}) < |Â|                     (n = 1)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    decay_envelope, is_hurwitz, mat_exp, optimize_envelope, spectral_norm, DecayEnvelope, Matrix,
};

/// Margin applied to the contraction condition `δ < 1` so that the strict
/// inequality survives rounding.
pub const STRICTNESS_MARGIN: f64 = 1e-12;
/// Relative tolerance of the ε bisection.
pub const EPSILON_REL_TOL: f64 = 1e-10;
/// Absolute tolerance of the σ bisection.
pub const SIGMA_ABS_TOL: f64 = 1e-10;

/// Plant `ẋ = Ax + Bu(t - r - εd(t))` with predictor gain `k` and nominal delay `r`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantModel {
    a: Matrix,
    b: Matrix,
    k: Matrix,
    r: f64,
}

impl PlantModel {
    /// Validates dimensions, `r > 0` and that `A + Bk` is Hurwitz.
    pub fn new(a: Matrix, b: Matrix, k: Matrix, r: f64) -> Result<Self> {
        let n = a.require_square("A")?;
        if b.rows() != n {
            return Err(Error::dimension(format!(
                "B must have {n} rows to match A, got {}",
                b.rows()
            )));
        }
        let m = b.cols();
        if k.rows() != m || k.cols() != n {
            return Err(Error::dimension(format!(
                "K must be {m}x{n}, got {}x{}",
                k.rows(),
                k.cols()
            )));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::validation(format!("nominal delay r must be > 0, got {r}")));
        }
        let closed = &a + &(&b * &k);
        let test = is_hurwitz(&closed)?;
        if !test.hurwitz {
            return Err(Error::Precondition(format!(
                "A + BK is not Hurwitz (spectral abscissa {:.6e})",
                test.abscissa
            )));
        }
        Ok(Self { a, b, k, r })
    }

    /// Scalar plant `ẋ = x + u(t - 1 - εd(t))` with gain `k = -p`.
    pub fn scalar_example(p: f64) -> Result<Self> {
        Self::new(
            Matrix::scalar(1.0),
            Matrix::scalar(1.0),
            Matrix::scalar(-p),
            1.0,
        )
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn k(&self) -> &Matrix {
        &self.k
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.rows()
    }

    /// Input dimension.
    pub fn m(&self) -> usize {
        self.b.cols()
    }

    /// `A + Bk`.
    pub fn closed_loop(&self) -> Matrix {
        &self.a + &(&self.b * &self.k)
    }

    /// `exp(Ar)Bk`, the coupling matrix of the predictor-state dynamics.
    pub fn predictor_coupling(&self) -> Result<Matrix> {
        Ok(&mat_exp(&self.a, self.r)? * &(&self.b * &self.k))
    }
}

/// `ẋ = Âx + q(t)C(x(t-r-εd(t)) - x(t-r))` together with an envelope for `Â`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonSystem {
    ahat: Matrix,
    c: Matrix,
    r: f64,
    envelope: DecayEnvelope,
}

impl ComparisonSystem {
    pub fn new(ahat: Matrix, c: Matrix, r: f64, envelope: DecayEnvelope) -> Result<Self> {
        let n = ahat.require_square("comparison matrix")?;
        if c.rows() != n || c.cols() != n {
            return Err(Error::dimension(format!(
                "coupling matrix must be {n}x{n}, got {}x{}",
                c.rows(),
                c.cols()
            )));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::validation(format!("delay r must be > 0, got {r}")));
        }
        let test = is_hurwitz(&ahat)?;
        if !test.hurwitz {
            return Err(Error::Precondition(format!(
                "comparison matrix is not Hurwitz (spectral abscissa {:.6e})",
                test.abscissa
            )));
        }
        Ok(Self {
            ahat,
            c,
            r,
            envelope,
        })
    }

    pub fn ahat(&self) -> &Matrix {
        &self.ahat
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn envelope(&self) -> &DecayEnvelope {
        &self.envelope
    }

    pub fn n(&self) -> usize {
        self.ahat.rows()
    }

    pub fn with_envelope(&self, envelope: DecayEnvelope) -> Self {
        Self {
            envelope,
            ..self.clone()
        }
    }
}

/// Evaluated small-gain inequality at one ε.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub epsilon: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs < rhs`.
    pub feasible: bool,
    /// Largest certified ε for the same system, envelope and inequality.
    pub epsilon_max: f64,
    /// The inequality still holds at `ε = r`, so `epsilon_max` is capped at `r`.
    pub unconstrained: bool,
    /// Certified decay rate; zero when infeasible.
    pub sigma: f64,
    /// Contraction gain at `sigma` (below one when feasible).
    pub delta: f64,
    pub scalar_path: bool,
    pub theta: f64,
    pub lambda: f64,
}

/// Largest certified perturbation magnitude.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxEpsilon {
    pub epsilon: f64,
    /// Feasible at `ε = r`; the result is the cap, not a boundary.
    pub unconstrained: bool,
    pub scalar_path: bool,
}

/// Certified decay rate and contraction gain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaCertificate {
    pub sigma: f64,
    pub delta: f64,
}

fn check_epsilon(epsilon: f64, r: f64) -> Result<()> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::validation(format!(
            "perturbation magnitude must be finite and >= 0, got {epsilon}"
        )));
    }
    if epsilon > r {
        return Err(Error::Precondition(format!(
            "perturbation magnitude {epsilon} exceeds nominal delay r = {r}"
        )));
    }
    Ok(())
}

/// Norm data the inequalities need: `(|Â|, |C|, Θ, λ)` for the chosen path.
#[derive(Clone, Copy, Debug)]
struct GainData {
    ahat_norm: f64,
    c_norm: f64,
    theta: f64,
    lambda: f64,
    scalar: bool,
}

impl GainData {
    fn new(sys: &ComparisonSystem, scalar: bool) -> Result<Self> {
        if scalar && sys.n() != 1 {
            return Err(Error::validation(format!(
                "scalar inequality requires n = 1, system has n = {}",
                sys.n()
            )));
        }
        let ahat_norm = spectral_norm(&sys.ahat)?;
        let c_norm = spectral_norm(&sys.c)?;
        let (theta, lambda) = if scalar {
            // exact envelope of a stable scalar: Θ = 1, λ = |Â|
            (1.0, ahat_norm)
        } else {
            (sys.envelope.theta, sys.envelope.lambda)
        };
        Ok(Self {
            ahat_norm,
            c_norm,
            theta,
            lambda,
            scalar,
        })
    }

    fn sides(&self, eps: f64) -> (f64, f64) {
        if self.scalar {
            (
                -2.0 * self.c_norm * (-self.ahat_norm * eps).exp_m1(),
                self.ahat_norm,
            )
        } else {
            // e^{|Â|ε} - e^{-λε} = expm1(|Â|ε) - expm1(-λε)
            let diff = (self.ahat_norm * eps).exp_m1() - (-self.lambda * eps).exp_m1();
            (self.theta * self.c_norm * diff, self.lambda)
        }
    }

    fn feasible(&self, eps: f64) -> bool {
        let (lhs, rhs) = self.sides(eps);
        lhs < rhs
    }

    /// Contraction gain δ(σ) of the weighted small-gain loop.
    fn delta(&self, r: f64, eps: f64, sigma: f64) -> f64 {
        let gap = self.lambda - sigma;
        // (1 - e^{-gap·ε}) / gap, continuous at gap = 0
        let window = if gap == 0.0 {
            eps
        } else {
            -(-gap * eps).exp_m1() / gap
        };
        let growth = (sigma * (r + eps)).exp();
        if self.scalar {
            let tail = -(-self.ahat_norm * eps).exp_m1() / gap;
            self.c_norm * growth * (window + tail)
        } else {
            let tail = (self.ahat_norm * eps).exp_m1() / gap;
            growth * self.theta * self.c_norm * (window + tail)
        }
    }

    fn bisect_epsilon(&self, r: f64) -> MaxEpsilon {
        if self.feasible(r) {
            return MaxEpsilon {
                epsilon: r,
                unconstrained: true,
                scalar_path: self.scalar,
            };
        }
        let (mut lo, mut hi) = (0.0, r);
        for _ in 0..400 {
            if hi - lo <= EPSILON_REL_TOL * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.feasible(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        MaxEpsilon {
            epsilon: lo,
            unconstrained: false,
            scalar_path: self.scalar,
        }
    }

    fn certify(&self, r: f64, eps: f64) -> Result<SigmaCertificate> {
        let threshold = 1.0 - STRICTNESS_MARGIN;
        let at_zero = self.delta(r, eps, 0.0);
        if !(at_zero < threshold) {
            let (lhs, rhs) = self.sides(eps);
            return Err(Error::Precondition(format!(
                "small-gain inequality fails at epsilon = {eps}: lhs = {lhs:.12e}, rhs = {rhs:.12e}"
            )));
        }
        // δ is increasing in σ on [0, λ).
        let (mut lo, mut hi) = (0.0, self.lambda);
        while hi - lo > SIGMA_ABS_TOL {
            let mid = 0.5 * (lo + hi);
            if self.delta(r, eps, mid) < threshold {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(SigmaCertificate {
            sigma: lo,
            delta: self.delta(r, eps, lo),
        })
    }
}

/// Evaluates the general inequality, or the scalar one when `scalar_path`
/// is set (requires `n = 1`), and attaches ε_max, σ and δ.
pub fn small_gain_check(
    sys: &ComparisonSystem,
    epsilon: f64,
    scalar_path: bool,
) -> Result<MarginReport> {
    check_epsilon(epsilon, sys.r)?;
    let gains = GainData::new(sys, scalar_path)?;
    let (lhs, rhs) = gains.sides(epsilon);
    let feasible = lhs < rhs;
    let bound = gains.bisect_epsilon(sys.r);
    let (sigma, delta) = match gains.certify(sys.r, epsilon) {
        Ok(cert) if feasible => (cert.sigma, cert.delta),
        _ => (0.0, gains.delta(sys.r, epsilon, 0.0)),
    };
    Ok(MarginReport {
        epsilon,
        lhs,
        rhs,
        feasible,
        epsilon_max: bound.epsilon,
        unconstrained: bound.unconstrained,
        sigma,
        delta,
        scalar_path,
        theta: gains.theta,
        lambda: gains.lambda,
    })
}

/// Largest ε certified for `sys` on the chosen inequality.
pub fn comparison_max_epsilon(sys: &ComparisonSystem, scalar_path: bool) -> Result<MaxEpsilon> {
    Ok(GainData::new(sys, scalar_path)?.bisect_epsilon(sys.r))
}

/// Largest σ ∈ (0, λ) with `δ(σ) < 1`; uses the scalar gain when `n = 1`.
pub fn certify_sigma(sys: &ComparisonSystem, epsilon: f64) -> Result<SigmaCertificate> {
    certify_sigma_with(sys, epsilon, sys.n() == 1)
}

pub fn certify_sigma_with(
    sys: &ComparisonSystem,
    epsilon: f64,
    scalar_path: bool,
) -> Result<SigmaCertificate> {
    check_epsilon(epsilon, sys.r)?;
    GainData::new(sys, scalar_path)?.certify(sys.r, epsilon)
}

/// Contraction gain `δ(σ)` at a given rate, for re-verification.
pub fn contraction_gain(
    sys: &ComparisonSystem,
    epsilon: f64,
    sigma: f64,
    scalar_path: bool,
) -> Result<f64> {
    check_epsilon(epsilon, sys.r)?;
    let gains = GainData::new(sys, scalar_path)?;
    if !(sigma >= 0.0 && sigma < gains.lambda) {
        return Err(Error::validation(format!(
            "sigma must lie in [0, {}), got {sigma}",
            gains.lambda
        )));
    }
    Ok(gains.delta(sys.r, epsilon, sigma))
}

/// Comparison system of the closed loop: `Â = A+Bk`, `C = exp(Ar)Bk`.
///
/// The envelope is `decay_envelope(Â, μ)` when `mu` is given. Otherwise it is
/// the exact `(1, |Â|)` for scalar plants and, for `n ≥ 2`, the envelope that
/// maximizes the certified ε of the general inequality.
pub fn closed_loop_system(model: &PlantModel, mu: Option<f64>) -> Result<ComparisonSystem> {
    let ahat = model.closed_loop();
    let c = model.predictor_coupling()?;
    let r = model.r();
    let envelope = match mu {
        Some(mu) => decay_envelope(&ahat, mu)?,
        None if model.n() == 1 => DecayEnvelope::new(1.0, -ahat[(0, 0)])?,
        None => {
            let base = ComparisonSystem::new(ahat.clone(), c.clone(), r, DecayEnvelope::new(1.0, 1.0)?)?;
            optimize_envelope(&ahat, |env| {
                GainData::new(&base.with_envelope(*env), false)
                    .map(|g| g.bisect_epsilon(r).epsilon)
                    .unwrap_or(f64::NAN)
            })?
            .envelope
        }
    };
    ComparisonSystem::new(ahat, c, r, envelope)
}

/// Small-gain check for the closed loop; scalar plants use the sharper
/// scalar inequality.
pub fn closed_loop_margin(model: &PlantModel, epsilon: f64, mu: Option<f64>) -> Result<MarginReport> {
    check_epsilon(epsilon, model.r())?;
    let sys = closed_loop_system(model, mu)?;
    small_gain_check(&sys, epsilon, model.n() == 1)
}

/// Supremum of certified ε for the closed loop, capped at `r`.
pub fn max_epsilon(model: &PlantModel) -> Result<MaxEpsilon> {
    let sys = closed_loop_system(model, None)?;
    comparison_max_epsilon(&sys, model.n() == 1)
}

/// Closed-form ε bound of the scalar plant `ẋ = x + u(t-1-εd)` with `k = -p`:
/// `ln(2pe / (2pe - p + 1)) / (p - 1)`.
pub fn scalar_bound(p: f64) -> Result<f64> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::Domain(format!(
            "gain p must exceed 1 for a Hurwitz closed loop, got {p}"
        )));
    }
    let two_pe = 2.0 * p * std::f64::consts::E;
    let x = (p - 1.0) / (two_pe - p + 1.0);
    Ok(x.ln_1p() / (p - 1.0))
}
