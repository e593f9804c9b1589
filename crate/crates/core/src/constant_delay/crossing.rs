use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest delay enumerated when collecting crossing delays.
pub const TAU_CAP: f64 = 10.0;
/// Sign-change scan resolution on `(0, 2pe)`.
pub const SCAN_POINTS: usize = 20_000;
/// Absolute bisection tolerance for crossing frequencies.
pub const OMEGA_TOL: f64 = 1e-12;

/// A purely imaginary root `jω` of the scalar quasipolynomial at delay `τ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub omega: f64,
    pub phi: f64,
    pub tau: f64,
    /// `|(cos ω - (p-1)/(pe), sin ω + ω/(pe))| - 1`.
    pub circle_residual: f64,
}

/// Delay interval around the nominal `τ = 1` on which the scalar example
/// stays exponentially stable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityWindow {
    pub p: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    /// No crossing below 1; `tau_min` is then 0.
    pub lower_open: bool,
    /// No crossing in `(1, τ_cap]`; `tau_max` is then `τ_cap`.
    pub upper_open: bool,
    /// Crossings at `tau_min` and `tau_max`.
    pub boundary: Vec<Crossing>,
    /// Every crossing with `0 < τ ≤ τ_cap`, sorted by `τ`.
    pub crossings: Vec<Crossing>,
    /// The frequencies found in `(0, 2pe)`.
    pub frequencies: Vec<f64>,
}

impl StabilityWindow {
    pub fn contains(&self, tau: f64) -> bool {
        tau > self.tau_min && tau < self.tau_max
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.tau_max - self.tau_min)
    }

    /// `(1 - τ_min) - (τ_max - 1)`.
    pub fn asymmetry(&self) -> f64 {
        (1.0 - self.tau_min) - (self.tau_max - 1.0)
    }
}

fn frequency_equation(p: f64, w: f64) -> f64 {
    (p - 1.0) * w.cos() - w * w.sin() - ((p - 1.0).powi(2) + w * w) / (2.0 * p * E)
}

fn phase(p: f64, w: f64) -> (f64, f64) {
    let pe = p * E;
    let c = w.cos() - (p - 1.0) / pe;
    let s = w.sin() + w / pe;
    (s.atan2(c), c.hypot(s) - 1.0)
}

/// All roots of the frequency equation in `(0, 2pe)`.
pub fn crossing_frequencies(p: f64) -> Result<Vec<f64>> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Domain(format!("gain p must be finite and > 1, got {p}")));
    }
    let hi = 2.0 * p * E;
    let step = hi / SCAN_POINTS as f64;
    let f = |w: f64| frequency_equation(p, w);
    let mut roots = Vec::new();
    let mut a = step * 1e-6;
    let mut fa = f(a);
    for i in 1..=SCAN_POINTS {
        let b = if i == SCAN_POINTS { hi * (1.0 - 1e-12) } else { i as f64 * step };
        let fb = f(b);
        if fa == 0.0 {
            roots.push(a);
        } else if fa * fb < 0.0 {
            let (mut lo, mut up, mut flo) = (a, b, fa);
            while up - lo > OMEGA_TOL {
                let mid = 0.5 * (lo + up);
                let fm = f(mid);
                if fm == 0.0 {
                    lo = mid;
                    up = mid;
                    break;
                }
                if (fm < 0.0) == (flo < 0.0) {
                    lo = mid;
                    flo = fm;
                } else {
                    up = mid;
                }
            }
            roots.push(0.5 * (lo + up));
        }
        a = b;
        fa = fb;
    }
    Ok(roots)
}

/// Stability window of `s + (p-1) + pe^{1-τs} - pe^{1-s}` around `τ = 1`.
pub fn crossing_curve(p: f64) -> Result<StabilityWindow> {
    crossing_curve_with(p, TAU_CAP)
}

pub fn crossing_curve_with(p: f64, tau_cap: f64) -> Result<StabilityWindow> {
    if !(tau_cap > 1.0 && tau_cap.is_finite()) {
        return Err(Error::validation(format!("tau cap must exceed 1, got {tau_cap}")));
    }
    let frequencies = crossing_frequencies(p)?;
    let mut crossings = Vec::new();
    for &w in &frequencies {
        let (phi, circle_residual) = phase(p, w);
        let k_lo = (-phi / (2.0 * PI)).floor() as i64;
        let k_hi = ((tau_cap * w - phi) / (2.0 * PI)).ceil() as i64;
        for k in k_lo..=k_hi {
            let tau = (phi + 2.0 * PI * k as f64) / w;
            if tau > 0.0 && tau <= tau_cap {
                crossings.push(Crossing {
                    omega: w,
                    phi,
                    tau,
                    circle_residual,
                });
            }
        }
    }
    crossings.sort_by(|a, b| a.tau.total_cmp(&b.tau));

    let below = crossings.iter().rev().find(|c| c.tau < 1.0).copied();
    let above = crossings.iter().find(|c| c.tau > 1.0).copied();
    let boundary: Vec<Crossing> = below.into_iter().chain(above).collect();
    Ok(StabilityWindow {
        p,
        tau_min: below.map_or(0.0, |c| c.tau),
        tau_max: above.map_or(tau_cap, |c| c.tau),
        lower_open: below.is_none(),
        upper_open: above.is_none(),
        boundary,
        crossings,
        frequencies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constant_delay::char_eval_scalar;
    use num_complex::Complex64;

    #[test]
    fn crossings_are_roots_on_the_axis() {
        for p in [1.1, 1.5, 2.0, 3.0, 5.0, 9.0] {
            let w = crossing_curve(p).unwrap();
            assert!(!w.frequencies.is_empty());
            for c in &w.crossings {
                assert!(c.circle_residual.abs() <= 1e-9, "p = {p}: {c:?}");
                let chi = char_eval_scalar(p, c.tau, Complex64::new(0.0, c.omega));
                assert!(chi.norm() <= 1e-6, "p = {p}: {chi}");
            }
        }
    }

    #[test]
    fn window_brackets_nominal_delay() {
        let w = crossing_curve(2.0).unwrap();
        assert!(!w.lower_open && !w.upper_open);
        assert!(0.0 < w.tau_min && w.tau_min < 1.0 && 1.0 < w.tau_max);
        assert_eq!(w.boundary.len(), 2);
    }

    #[test]
    fn rejects_small_gain() {
        assert!(matches!(crossing_curve(1.0), Err(Error::Domain(_))));
        assert!(crossing_curve_with(2.0, 0.5).is_err());
    }
}
