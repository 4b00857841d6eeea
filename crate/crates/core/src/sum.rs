//! Compensated summation and deterministic parallel reductions.
//!
//! Pair sums accumulate up to N^6 terms of wildly mixed magnitude, so plain
//! f64 accumulation loses digits. Parallel reductions additionally must not
//! depend on the thread count: partial sums are produced per outer index and
//! folded in a fixed order.

use rayon::prelude::*;

/// Neumaier variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of a slice in index order.
pub fn sum_slice(xs: &[f64]) -> f64 {
    let mut acc = Accumulator::new();
    for &x in xs {
        acc.add(x);
    }
    acc.value()
}

/// Parallel map over `0..n` followed by a compensated fold in index order.
///
/// The result is bit-identical for any rayon thread count because every
/// partial result lands in its slot before the sequential reduction.
pub fn par_sum_by<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let partials: Vec<f64> = (0..n).into_par_iter().map(f).collect();
    sum_slice(&partials)
}

/// As `par_sum_by` but each index yields a fixed-size tuple of accumulands.
pub fn par_sum2_by<F>(n: usize, f: F) -> (f64, f64)
where
    F: Fn(usize) -> (f64, f64) + Sync + Send,
{
    let partials: Vec<(f64, f64)> = (0..n).into_par_iter().map(f).collect();
    let mut a = Accumulator::new();
    let mut b = Accumulator::new();
    for &(x, y) in &partials {
        a.add(x);
        b.add(y);
    }
    (a.value(), b.value())
}
