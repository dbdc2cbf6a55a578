use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Unnormalized moments `M_m = ∫ x^m p dx`, m = 0, 1, 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentTriple {
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
}

impl MomentTriple {
    /// Conditional mean and variance `M₁/M₀`, `M₂/M₀ − (M₁/M₀)²`.
    ///
    /// Rounding can leave the variance slightly negative; it is floored at 0.
    /// A clearly negative variance means cancellation has eaten the moments,
    /// which only happens when `M₀` is tiny, so it is reported as underflow.
    pub fn mean_variance(&self) -> Result<(f64, f64)> {
        if !(self.m0 > 1e-300) {
            return Err(Error::Underflow { value: self.m0 });
        }
        let mean = self.m1 / self.m0;
        let second = self.m2 / self.m0;
        let var = second - mean * mean;
        if !(var >= -1e-12 * second.abs().max(1.0)) {
            return Err(Error::Underflow { value: self.m0 });
        }
        Ok((mean, var.max(0.0)))
    }
}

/// Conditional mean and variance of `B(t)` sampled on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalCurve {
    pub t: Vec<f64>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl ConditionalCurve {
    pub fn with_capacity(n: usize) -> Self {
        Self { t: Vec::with_capacity(n), mean: Vec::with_capacity(n), variance: Vec::with_capacity(n) }
    }

    pub fn push(&mut self, t: f64, mean: f64, variance: f64) {
        self.t.push(t);
        self.mean.push(mean);
        self.variance.push(variance);
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Trapezoidal average of the variance over the sampled span.
    pub fn time_average_variance(&self) -> f64 {
        trapezoid_average(&self.t, &self.variance)
    }
}

/// `∫ y dt / (t_last − t_first)` by the trapezoidal rule.
pub fn trapezoid_average(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len().min(y.len());
    if n < 2 {
        return y.first().copied().unwrap_or(0.0);
    }
    let mut acc = 0.0;
    for i in 1..n {
        acc += 0.5 * (y[i] + y[i - 1]) * (t[i] - t[i - 1]);
    }
    acc / (t[n - 1] - t[0])
}
