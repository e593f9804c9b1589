//! Fixed-step simulation of the perturbed closed loop and its comparison
//! system, plus trajectory diagnostics.

mod closed_loop;
mod comparison;
mod export;
mod fit;
mod history;
mod kernel;
mod series;
mod signal;

use serde::Serialize;

pub use closed_loop::{predictor_control, recover_state, simulate_closed_loop, simulate_derivative_form};
pub use comparison::simulate_comparison;
pub use export::{write_trace_csv, write_trace_csv_to};
pub use fit::{
    closed_loop_size, comparison_size, fit_comparison_decay, fit_decay, fit_decay_series, DecayFit,
};
pub use history::{compatibility_residual, make_compatible_history, HistoryFunction};
pub use series::GridSeries;
pub use signal::{DelaySignal, Signal};

/// Simulations stop with a divergence error once `|x|` exceeds this.
pub const BLOW_UP_GUARD: f64 = 1e12;

/// Closed-loop trajectory on the grid `t_i = i·dt`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimTrace {
    pub dt: f64,
    /// `r + ε`, the length of the input memory.
    pub window: f64,
    pub times: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    /// Predictor state, `u = kp` up to the controller's quadrature error.
    pub p: Vec<Vec<f64>>,
    /// The whole input record, history included.
    #[serde(skip)]
    pub u_record: GridSeries,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// `p` as a grid series starting at 0.
    pub fn p_series(&self) -> GridSeries {
        let dim = self.p.first().map_or(0, Vec::len);
        let mut g = GridSeries::with_capacity(0.0, self.dt, dim, self.p.len());
        for p in &self.p {
            g.push(p);
        }
        g
    }
}

/// Comparison-system trajectory; `record` also holds the history.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonTrace {
    pub dt: f64,
    pub window: f64,
    pub times: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    #[serde(skip)]
    pub record: GridSeries,
}

/// Trajectory computed up to the point where a simulation diverged.
#[derive(Clone, Debug, PartialEq)]
pub enum PartialTrace {
    ClosedLoop(SimTrace),
    Comparison(ComparisonTrace),
}

impl PartialTrace {
    pub fn times(&self) -> &[f64] {
        match self {
            PartialTrace::ClosedLoop(t) => &t.times,
            PartialTrace::Comparison(t) => &t.times,
        }
    }
}
