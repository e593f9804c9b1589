use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::crossing_curve;
use crate::error::{Error, Result};
use crate::margin::scalar_bound;

/// One gain of the delay-window comparison: the certified window for
/// measurable perturbations against the exact window for constant ones.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p: f64,
    pub red_tau_min: f64,
    pub red_tau_max: f64,
    pub blue_tau_min: f64,
    pub blue_tau_max: f64,
    pub blue_lower_open: bool,
    pub blue_upper_open: bool,
}

impl SweepRow {
    pub fn red_inside_blue(&self) -> bool {
        self.blue_tau_min < self.red_tau_min && self.red_tau_max < self.blue_tau_max
    }

    /// `ε / half-width of the constant-delay window`.
    pub fn width_ratio(&self) -> f64 {
        (self.red_tau_max - self.red_tau_min) / (self.blue_tau_max - self.blue_tau_min)
    }
}

fn row(p: f64) -> Result<SweepRow> {
    let eps = scalar_bound(p)?;
    let w = crossing_curve(p)?;
    Ok(SweepRow {
        p,
        red_tau_min: 1.0 - eps,
        red_tau_max: 1.0 + eps,
        blue_tau_min: w.tau_min,
        blue_tau_max: w.tau_max,
        blue_lower_open: w.lower_open,
        blue_upper_open: w.upper_open,
    })
}

/// `steps` equally spaced gains from `pmin` to `pmax`.
pub fn p_grid(pmin: f64, pmax: f64, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::validation("sweep needs at least one point"));
    }
    if !(pmin > 1.0 && pmax >= pmin && pmax.is_finite()) {
        return Err(Error::Domain(format!("need 1 < pmin <= pmax, got {pmin}, {pmax}")));
    }
    if steps == 1 {
        if pmin != pmax {
            return Err(Error::validation("a single-point sweep needs pmin = pmax"));
        }
        return Ok(vec![pmin]);
    }
    let h = (pmax - pmin) / (steps - 1) as f64;
    Ok((0..steps)
        .map(|i| if i + 1 == steps { pmax } else { pmin + i as f64 * h })
        .collect())
}

/// Rows sorted by `p`.
pub fn figure1_sweep(p_grid: &[f64]) -> Result<Vec<SweepRow>> {
    figure1_sweep_parallel(p_grid, 1)
}

/// Same rows as [`figure1_sweep`], computed on up to `jobs` threads.
pub fn figure1_sweep_parallel(p_grid: &[f64], jobs: usize) -> Result<Vec<SweepRow>> {
    if let Some(&bad) = p_grid.iter().find(|&&p| !(p > 1.0 && p.is_finite())) {
        return Err(Error::Domain(format!("gain p must be finite and > 1, got {bad}")));
    }
    let mut ps = p_grid.to_vec();
    ps.sort_by(f64::total_cmp);
    let jobs = jobs.clamp(1, ps.len().max(1));
    let mut rows = if jobs == 1 {
        ps.iter().map(|&p| row(p)).collect::<Result<Vec<_>>>()?
    } else {
        let chunk = ps.len().div_ceil(jobs);
        std::thread::scope(|scope| {
            let handles: Vec<_> = ps
                .chunks(chunk)
                .map(|part| scope.spawn(move || part.iter().map(|&p| row(p)).collect::<Result<Vec<_>>>()))
                .collect();
            let mut out = Vec::with_capacity(ps.len());
            for h in handles {
                out.extend(h.join().expect("sweep worker panicked")?);
            }
            Ok::<_, Error>(out)
        })?
    };
    rows.sort_by(|a, b| a.p.total_cmp(&b.p));
    Ok(rows)
}

pub fn write_sweep_csv_to<W: Write>(rows: &[SweepRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "p,red_tau_min,red_tau_max,blue_tau_min,blue_tau_max")?;
    for r in rows {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.p, r.red_tau_min, r.red_tau_max, r.blue_tau_min, r.blue_tau_max
        )?;
    }
    out.flush()
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> std::io::Result<()> {
    write_sweep_csv_to(rows, std::io::BufWriter::new(std::fs::File::create(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shapes() {
        assert_eq!(p_grid(2.0, 2.0, 1).unwrap(), vec![2.0]);
        let g = p_grid(1.5, 5.0, 8).unwrap();
        assert_eq!(g.len(), 8);
        assert_eq!(g[7], 5.0);
        assert!(p_grid(0.5, 2.0, 3).is_err());
        assert!(p_grid(1.5, 2.0, 1).is_err());
    }

    #[test]
    fn parallel_matches_serial() {
        let g = [3.0, 1.5, 2.0, 4.0, 2.5];
        let serial = figure1_sweep(&g).unwrap();
        let parallel = figure1_sweep_parallel(&g, 3).unwrap();
        assert_eq!(serial, parallel);
        assert!(serial.windows(2).all(|w| w[0].p < w[1].p));
    }

    #[test]
    fn csv_layout() {
        let rows = figure1_sweep(&[2.0]).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv_to(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "p,red_tau_min,red_tau_max,blue_tau_min,blue_tau_max");
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1].split(',').count(), 5);
    }
}
