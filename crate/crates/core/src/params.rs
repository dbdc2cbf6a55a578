use alloc::vec::Vec;

use libm::{cos, sqrt};

use crate::error::{domain, Error, Result};
use crate::gaussian::Variance;
use crate::quadrature::QuadratureControl;

/// Truncation control for the reflection series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesControl {
    pub max_terms: usize,
    pub tail_tolerance: f64,
    /// Below `min_range_ratio·σ` the extrema-law series report
    /// [`Error::RangeTooSmall`] instead of a slow, inaccurate sum.
    pub min_range_ratio: f64,
}

impl Default for SeriesControl {
    fn default() -> Self {
        Self { max_terms: 1000, tail_tolerance: 1e-12, min_range_ratio: 0.1 }
    }
}

impl SeriesControl {
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tail_tolerance = tol;
        self
    }

    pub fn with_max_terms(mut self, n: usize) -> Self {
        self.max_terms = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_terms < 1 {
            return Err(domain("max_terms must be at least 1", self.max_terms as f64));
        }
        if !(self.tail_tolerance > 0.0) {
            return Err(domain("tail_tolerance must be positive", self.tail_tolerance));
        }
        if !(self.min_range_ratio >= 0.0) {
            return Err(domain("min_range_ratio must be nonnegative", self.min_range_ratio));
        }
        Ok(())
    }

    pub(crate) fn check_range(&self, range: f64, sigma: f64) -> Result<()> {
        if !(range > 0.0) {
            return Err(domain("range h - l must be positive", range));
        }
        if range < self.min_range_ratio * sigma {
            return Err(Error::RangeTooSmall { range, sigma, min_ratio: self.min_range_ratio });
        }
        Ok(())
    }
}

/// Model scale plus default numerical controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    variance: Variance,
    pub series: SeriesControl,
    pub quadrature: QuadratureControl,
}

impl ModelParams {
    pub fn new(sigma_sq: f64) -> Result<Self> {
        Ok(Self {
            variance: Variance::new(sigma_sq)?,
            series: SeriesControl::default(),
            quadrature: QuadratureControl::default(),
        })
    }

    /// σ = 1.
    pub fn unit() -> Self {
        Self::new(1.0).expect("unit variance is valid")
    }

    pub fn variance(&self) -> Variance {
        self.variance
    }

    pub fn sigma_sq(&self) -> f64 {
        self.variance.get()
    }

    pub fn sigma(&self) -> f64 {
        sqrt(self.variance.get())
    }

    pub fn with_series(mut self, series: SeriesControl) -> Self {
        self.series = series;
        self
    }

    pub fn with_quadrature(mut self, quadrature: QuadratureControl) -> Self {
        self.quadrature = quadrature;
        self
    }
}

/// Sorted sample times in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid(Vec<f64>);

impl TimeGrid {
    /// `n + 1` equally spaced points including both endpoints.
    pub fn uniform(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(domain("grid needs at least one interval", n as f64));
        }
        Ok(Self((0..=n).map(|i| i as f64 / n as f64).collect()))
    }

    /// `n` equally spaced points strictly inside (0, 1).
    pub fn interior(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(domain("grid needs at least one point", n as f64));
        }
        Ok(Self((1..=n).map(|i| i as f64 / (n + 1) as f64).collect()))
    }

    /// `n + 1` points, `t_i = (1 − cos(πi/n))/2`, denser near both ends.
    pub fn cosine(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(domain("grid needs at least one interval", n as f64));
        }
        let mut v: Vec<f64> = (0..=n)
            .map(|i| 0.5 * (1.0 - cos(core::f64::consts::PI * i as f64 / n as f64)))
            .collect();
        v[0] = 0.0;
        v[n] = 1.0;
        Ok(Self(v))
    }

    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput);
        }
        for w in points.windows(2) {
            if !(w[1] > w[0]) {
                return Err(domain("time grid must be strictly increasing", w[1]));
            }
        }
        let (first, last) = (points[0], points[points.len() - 1]);
        if !(first >= 0.0) || !(last <= 1.0) {
            return Err(domain("time grid must lie in [0, 1]", if first < 0.0 { first } else { last }));
        }
        Ok(Self(points))
    }

    pub fn points(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}
