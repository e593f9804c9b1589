use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{ComparisonTrace, GridSeries, SimTrace};
use crate::error::{Error, Result};
use crate::linalg::vec_norm;

/// Relative slack of the envelope check.
const ESTIMATE_SLACK: f64 = 1e-6;

/// Exponential fit `s(t) ≈ Q̂ e^{-σ̂t} s(0)` of a trajectory's size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Least-squares decay rate of `log s(t)` after the burn-in; `+∞` when
    /// the trace is identically zero there.
    pub sigma_hat: f64,
    /// Smallest constant with `s(t) ≤ Q̂ e^{-σ̂t} s(0)` over the whole trace.
    pub q_hat: f64,
    /// `σ̂ > 0` and the envelope re-verified at every grid time.
    pub estimate_holds: bool,
    pub exact_zero: bool,
    pub fitted_points: usize,
}

/// `max` of `|v|` over the trailing window of `width` time units ending at
/// each node `origin + i` of `record`, for `i = 0..count`.
fn trailing_max(record: &GridSeries, origin: usize, count: usize, width: f64) -> Vec<f64> {
    let span = (width / record.step() + 1e-9).floor() as usize;
    let norms: Vec<f64> = record.nodes().map(vec_norm).collect();
    let mut out = Vec::with_capacity(count);
    let mut deque: VecDeque<usize> = VecDeque::new();
    let first = origin.saturating_sub(span);
    let mut next = first;
    for i in 0..count {
        let gi = origin + i;
        while next <= gi {
            while deque.back().is_some_and(|&b| norms[b] <= norms[next]) {
                deque.pop_back();
            }
            deque.push_back(next);
            next += 1;
        }
        while deque.front().is_some_and(|&f| f + span < gi) {
            deque.pop_front();
        }
        out.push(norms[*deque.front().unwrap()]);
    }
    out
}

/// `s(t) = |x(t)| + max_{t-r-ε ≤ θ ≤ t} |u(θ)|` on the trace grid.
pub fn closed_loop_size(trace: &SimTrace) -> Vec<f64> {
    let origin = trace.u_record.len() - trace.times.len();
    let umax = trailing_max(&trace.u_record, origin, trace.times.len(), trace.window);
    trace
        .x
        .iter()
        .zip(umax)
        .map(|(x, u)| vec_norm(x) + u)
        .collect()
}

/// `‖x_t‖ = max_{t-r-ε ≤ θ ≤ t} |x(θ)|` on the trace grid.
pub fn comparison_size(trace: &ComparisonTrace) -> Vec<f64> {
    let origin = trace.record.len() - trace.times.len();
    trailing_max(&trace.record, origin, trace.times.len(), trace.window)
}

/// Fits the decay of the closed-loop size `s(t)` on `[burn_in, t_final]`.
pub fn fit_decay(trace: &SimTrace, burn_in: f64) -> Result<DecayFit> {
    fit_decay_series(&trace.times, &closed_loop_size(trace), burn_in)
}

pub fn fit_comparison_decay(trace: &ComparisonTrace, burn_in: f64) -> Result<DecayFit> {
    fit_decay_series(&trace.times, &comparison_size(trace), burn_in)
}

/// Least-squares fit of `log s(t)` against `t` over `t ≥ burn_in`.
///
/// `Q̂` is the largest `s(t)e^{σ̂t}/s(0)` over the whole series, so the
/// transient before the burn-in is absorbed into the overshoot constant
/// rather than into the rate.
pub fn fit_decay_series(times: &[f64], s: &[f64], burn_in: f64) -> Result<DecayFit> {
    if times.len() != s.len() || times.is_empty() {
        return Err(Error::validation("time and size series must be non-empty and equally long"));
    }
    let s0 = s[0];
    let window: Vec<(f64, f64)> = times
        .iter()
        .zip(s)
        .filter(|(&t, _)| t >= burn_in)
        .map(|(&t, &v)| (t, v))
        .collect();
    if window.len() < 2 {
        return Err(Error::validation(format!(
            "trace ends at t = {} and leaves fewer than two points after burn-in {burn_in}",
            times[times.len() - 1]
        )));
    }
    if window.iter().all(|&(_, v)| v == 0.0) {
        return Ok(DecayFit {
            sigma_hat: f64::INFINITY,
            q_hat: 0.0,
            estimate_holds: s.iter().all(|&v| v <= s0),
            exact_zero: true,
            fitted_points: 0,
        });
    }
    if !(s0 > 0.0) {
        return Err(Error::validation("initial size is zero but the trace is not"));
    }

    let pts: Vec<(f64, f64)> = window
        .iter()
        .filter(|&&(_, v)| v > 0.0)
        .map(|&(t, v)| (t, v.ln()))
        .collect();
    let count = pts.len() as f64;
    let mean_t = pts.iter().map(|p| p.0).sum::<f64>() / count;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / count;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_t).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_t) * (p.1 - mean_y)).sum();
    if !(sxx > 0.0) {
        return Err(Error::validation("fitting window has no time spread"));
    }
    let sigma_hat = -sxy / sxx;

    let q_hat = times
        .iter()
        .zip(s)
        .map(|(&t, &v)| v * (sigma_hat * t).exp() / s0)
        .fold(0.0, f64::max);
    let estimate_holds = sigma_hat > 0.0
        && times
            .iter()
            .zip(s)
            .all(|(&t, &v)| v <= q_hat * (-sigma_hat * t).exp() * s0 * (1.0 + ESTIMATE_SLACK));

    Ok(DecayFit {
        sigma_hat,
        q_hat,
        estimate_holds,
        exact_zero: false,
        fitted_points: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_exponential() {
        let times: Vec<f64> = (0..=200).map(|i| i as f64 * 0.05).collect();
        let s: Vec<f64> = times.iter().map(|t| 3.0 * (-0.7 * t).exp()).collect();
        let fit = fit_decay_series(&times, &s, 1.0).unwrap();
        assert!((fit.sigma_hat - 0.7).abs() < 1e-12);
        assert!((fit.q_hat - 1.0).abs() < 1e-10);
        assert!(fit.estimate_holds);
    }

    #[test]
    fn transient_raises_overshoot_constant() {
        let times: Vec<f64> = (0..=200).map(|i| i as f64 * 0.05).collect();
        let s: Vec<f64> = times
            .iter()
            .map(|&t| if t > 0.5 && t < 1.0 { 50.0 } else { (-0.7 * t).exp() })
            .collect();
        let fit = fit_decay_series(&times, &s, 2.0).unwrap();
        assert!((fit.sigma_hat - 0.7).abs() < 1e-12);
        assert!((fit.q_hat - 50.0 * (0.7f64 * 0.95).exp()).abs() < 1e-9);
        assert!(fit.estimate_holds);
    }

    #[test]
    fn growth_fails_the_estimate() {
        let times: Vec<f64> = (0..=200).map(|i| i as f64 * 0.05).collect();
        let s: Vec<f64> = times.iter().map(|t| (0.1 * t).exp()).collect();
        let fit = fit_decay_series(&times, &s, 1.0).unwrap();
        assert!(fit.sigma_hat < 0.0);
        assert!(!fit.estimate_holds);
    }

    #[test]
    fn zero_series_is_flagged() {
        let times = vec![0.0, 1.0, 2.0, 3.0];
        let fit = fit_decay_series(&times, &[0.0; 4], 1.0).unwrap();
        assert!(fit.exact_zero);
        assert_eq!(fit.sigma_hat, f64::INFINITY);
    }

    #[test]
    fn short_series_is_rejected() {
        assert!(fit_decay_series(&[0.0, 1.0], &[1.0, 0.5], 5.0).is_err());
    }

    #[test]
    fn trailing_max_window() {
        let mut g = GridSeries::new(-1.0, 0.5, 1);
        for v in [5.0, 1.0, 2.0, 0.5, 0.1, 0.2, 0.0] {
            g.push(&[v]);
        }
        // origin at t = 0 (index 2), window width 1 → three nodes
        let m = trailing_max(&g, 2, 5, 1.0);
        assert_eq!(m, vec![5.0, 2.0, 2.0, 0.5, 0.2]);
    }
}
