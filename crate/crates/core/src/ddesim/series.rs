use crate::error::{Error, Result};

/// Vector-valued samples on a uniform time grid `start + i·step`, read back by
/// linear interpolation.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSeries {
    start: f64,
    step: f64,
    dim: usize,
    data: Vec<f64>,
}

/// Slack (in grid steps) tolerated when a query lands just outside the grid.
const EDGE_SLACK: f64 = 1e-9;

impl GridSeries {
    pub fn new(start: f64, step: f64, dim: usize) -> Self {
        assert!(step > 0.0, "grid step must be positive");
        Self {
            start,
            step,
            dim,
            data: Vec::new(),
        }
    }

    pub fn with_capacity(start: f64, step: f64, dim: usize, nodes: usize) -> Self {
        let mut s = Self::new(start, step, dim);
        s.data.reserve(nodes * dim);
        s
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    /// Time of the last stored node.
    pub fn end(&self) -> f64 {
        self.time(self.len().saturating_sub(1))
    }

    pub fn push(&mut self, v: &[f64]) {
        assert_eq!(v.len(), self.dim, "grid series: dimension mismatch");
        self.data.extend_from_slice(v);
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn node_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn truncate(&mut self, nodes: usize) {
        self.data.truncate(nodes * self.dim);
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    /// Index of the node at `t` when `t` sits on the grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let s = (t - self.start) / self.step;
        let i = s.round();
        if (s - i).abs() <= 1e-6 && i >= 0.0 && (i as usize) < self.len() {
            Some(i as usize)
        } else {
            None
        }
    }

    /// Left node index and fractional offset for time `t`.
    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let len = self.len();
        let s = (t - self.start) / self.step;
        let last = len.saturating_sub(1) as f64;
        if len == 0 || !(s >= -EDGE_SLACK && s <= last + EDGE_SLACK) {
            return Err(Error::Coverage {
                t,
                start: self.start,
                end: self.end(),
            });
        }
        let s = s.clamp(0.0, last);
        let i = (s.floor() as usize).min(len.saturating_sub(2));
        Ok((i, s - i as f64))
    }

    /// Linear interpolation at `t` written into `out`.
    pub fn interp_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        let (i, frac) = self.locate(t)?;
        if self.len() == 1 {
            out.copy_from_slice(self.node(0));
            return Ok(());
        }
        let (a, b) = (self.node(i), self.node(i + 1));
        for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
            *o = x + frac * (y - x);
        }
        Ok(())
    }

    pub fn interp(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.interp_into(t, &mut out)?;
        Ok(out)
    }

    /// Interpolation with constant extrapolation past the last node.
    pub(crate) fn interp_clamped_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        if t > self.end() {
            out.copy_from_slice(self.node(self.len() - 1));
            Ok(())
        } else {
            self.interp_into(t, out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_interpolation_and_coverage() {
        let mut s = GridSeries::new(-1.0, 0.5, 2);
        for i in 0..5 {
            let t = -1.0 + 0.5 * i as f64;
            s.push(&[t, 2.0 * t]);
        }
        assert_eq!(s.len(), 5);
        assert_eq!(s.end(), 1.0);
        let v = s.interp(0.3).unwrap();
        assert!((v[0] - 0.3).abs() < 1e-15 && (v[1] - 0.6).abs() < 1e-15);
        assert_eq!(s.interp(1.0).unwrap(), vec![1.0, 2.0]);
        assert!(matches!(s.interp(1.2), Err(Error::Coverage { .. })));
        assert!(matches!(s.interp(-1.01), Err(Error::Coverage { .. })));
        assert_eq!(s.index_of(0.5), Some(3));
        assert_eq!(s.index_of(0.25), None);
    }
}
