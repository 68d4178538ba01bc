//! Uniform time grids and closed intervals.

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::model::ParamError;

/// Uniform time grid `t_k = start + k·step`, `k = 0..len`.
///
/// Sample times are computed by multiplication, never by accumulation, so two
/// grids with the same start and step agree bit for bit on their common prefix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    start: f64,
    step: f64,
    len: usize,
}

impl TimeGrid {
    pub fn new(start: f64, step: f64, len: usize) -> Result<Self, ParamError> {
        if !start.is_finite() {
            return Err(ParamError::NonFinite("grid start"));
        }
        if !(step > 0.0) || !step.is_finite() {
            return Err(ParamError::NonPositive { name: "grid step", value: step });
        }
        if len < 2 {
            return Err(ParamError::GridTooShort(len));
        }
        Ok(Self { start, step, len })
    }

    /// Smallest uniform grid starting at `start` whose last sample is at or
    /// beyond `end` (a relative slack of 1e-9 steps absorbs rounding).
    pub fn covering(start: f64, end: f64, step: f64) -> Result<Self, ParamError> {
        if !(end > start) {
            return Err(ParamError::EmptyWindow { start, end });
        }
        if !(step > 0.0) || !step.is_finite() {
            return Err(ParamError::NonPositive { name: "grid step", value: step });
        }
        let steps = ((end - start) / step - 1e-9).ceil().max(1.0);
        Self::new(start, step, steps as usize + 1)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn time(&self, k: usize) -> f64 {
        self.start + k as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.time(self.len - 1)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(move |k| self.time(k))
    }

    /// Index of the interval `[t_k, t_{k+1}]` containing `t`, clamped to the grid.
    pub(crate) fn locate(&self, t: f64) -> usize {
        let x = ((t - self.start) / self.step).floor();
        if x <= 0.0 {
            0
        } else {
            (x as usize).min(self.len - 2)
        }
    }

    /// Same start, step and length up to a relative tolerance.
    pub fn matches(&self, other: &TimeGrid) -> bool {
        let tol = 1e-12 * self.step.max(self.start.abs());
        self.len == other.len
            && (self.start - other.start).abs() <= tol
            && (self.step - other.step).abs() <= 1e-12 * self.step
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// `self ⊆ other` with slack `tol` on both edges.
    pub fn is_within(&self, other: &Interval, tol: f64) -> bool {
        self.lo >= other.lo - tol && self.hi <= other.hi + tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covering_reaches_end() {
        let g = TimeGrid::covering(-800.0, 800.0, 4.9).unwrap();
        assert!(g.end() >= 800.0);
        assert!(g.end() - 4.9 < 800.0);
        let exact = TimeGrid::covering(0.0, 10.0, 0.5).unwrap();
        assert_eq!(exact.len(), 21);
        assert_eq!(exact.end(), 10.0);
    }

    #[test]
    fn longer_grid_extends_prefix() {
        let a = TimeGrid::covering(-800.0, 800.0, 3.3).unwrap();
        let b = TimeGrid::covering(-800.0, 2400.0, 3.3).unwrap();
        for k in 0..a.len() {
            assert_eq!(a.time(k).to_bits(), b.time(k).to_bits());
        }
    }

    #[test]
    fn locate_clamps() {
        let g = TimeGrid::new(0.0, 1.0, 5).unwrap();
        assert_eq!(g.locate(-3.0), 0);
        assert_eq!(g.locate(2.5), 2);
        assert_eq!(g.locate(4.0), 3);
        assert_eq!(g.locate(9.0), 3);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TimeGrid::new(0.0, 0.0, 4).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 1).is_err());
        assert!(TimeGrid::covering(1.0, 1.0, 0.1).is_err());
    }
}
