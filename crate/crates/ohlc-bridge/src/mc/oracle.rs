//! Exact oracle for the law of `B(t)` over a bin of paths.
//!
//! Each member's closed-form curve is evaluated at its own statistics; the
//! bin's mean is the average of those means, and its variance adds the
//! spread of the means to the average conditional variance.

use rayon::prelude::*;

use ohlc_bridge_core::{ModelParams, TimeGrid};

use crate::error::{config, Result};
use crate::mc::analytic::analytic_curve;
use crate::mc::bins::Stat;
use crate::mc::generate::PathSummary;

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureCheck {
    pub times: Vec<f64>,
    pub count: usize,
    pub empirical_mean: Vec<f64>,
    pub empirical_variance: Vec<f64>,
    pub se_mean: Vec<f64>,
    pub se_variance: Vec<f64>,
    pub oracle_mean: Vec<f64>,
    pub oracle_variance: Vec<f64>,
}

impl MixtureCheck {
    pub fn z_mean(&self) -> Vec<f64> {
        self.empirical_mean.iter().zip(&self.oracle_mean).zip(&self.se_mean).map(|((e, o), s)| (e - o).abs() / s).collect()
    }

    pub fn z_variance(&self) -> Vec<f64> {
        self.empirical_variance
            .iter()
            .zip(&self.oracle_variance)
            .zip(&self.se_variance)
            .map(|((e, o), s)| (e - o).abs() / s)
            .collect()
    }

    /// Largest standardized deviation over both curves and all times.
    pub fn max_z(&self) -> f64 {
        self.z_mean().into_iter().chain(self.z_variance()).fold(0.0, f64::max)
    }
}

/// `values[i]` holds path `i` at the times of `grid`; `stats[i]` its
/// summary. Standard errors are the usual `s/√n` for the mean and
/// `√((m₄ − s⁴)/n)` for the population variance.
pub fn mixture_check(values: &[Vec<f64>], stats: &[PathSummary], dims: &[Stat], params: &ModelParams, grid: &TimeGrid) -> Result<MixtureCheck> {
    let n = values.len();
    if n < 2 || stats.len() != n {
        return Err(config("mixture check needs at least two paths with summaries"));
    }
    let nt = grid.len();
    if values.iter().any(|v| v.len() != nt) {
        return Err(config("path values must match the time grid"));
    }
    let curves = stats
        .par_iter()
        .map(|s| analytic_curve(dims, [s.close, s.max, s.min], params, grid))
        .collect::<Result<Vec<_>>>()?;
    let nf = n as f64;
    let mut out = MixtureCheck {
        times: grid.points().to_vec(),
        count: n,
        empirical_mean: vec![0.0; nt],
        empirical_variance: vec![0.0; nt],
        se_mean: vec![0.0; nt],
        se_variance: vec![0.0; nt],
        oracle_mean: vec![0.0; nt],
        oracle_variance: vec![0.0; nt],
    };
    for k in 0..nt {
        let m = values.iter().map(|v| v[k]).sum::<f64>() / nf;
        let (mut m2, mut m4) = (0.0, 0.0);
        for v in values {
            let d = (v[k] - m) * (v[k] - m);
            m2 += d;
            m4 += d * d;
        }
        m2 /= nf;
        m4 /= nf;
        let om = curves.iter().map(|c| c.mean[k]).sum::<f64>() / nf;
        let spread = curves.iter().map(|c| (c.mean[k] - om) * (c.mean[k] - om)).sum::<f64>() / nf;
        let ov = curves.iter().map(|c| c.variance[k]).sum::<f64>() / nf + spread;
        out.empirical_mean[k] = m;
        out.empirical_variance[k] = m2;
        out.se_mean[k] = (m2 / nf).sqrt();
        out.se_variance[k] = ((m4 - m2 * m2).max(0.0) / nf).sqrt();
        out.oracle_mean[k] = om;
        out.oracle_variance[k] = ov;
    }
    Ok(out)
}
