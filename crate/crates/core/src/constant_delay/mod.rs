//! Constant delay mismatch `τ ≠ r`: characteristic quasipolynomials,
//! rightmost roots and the stability window of the scalar example.

mod collocation;
mod crossing;
mod quasi;
mod sweep;

pub use collocation::{collocation_matrix, rightmost_root, RightmostRoot, MIN_NODES, NEWTON_TOL};
pub use crossing::{
    crossing_curve, crossing_curve_with, crossing_frequencies, Crossing, StabilityWindow, OMEGA_TOL,
    SCAN_POINTS, TAU_CAP,
};
pub use quasi::{char_eval_matrix, char_eval_scalar, CharForm, DelayPencil};
pub use sweep::{
    figure1_sweep, figure1_sweep_parallel, p_grid, write_sweep_csv, write_sweep_csv_to, SweepRow,
};
