//! Per-bin empirical curves, the ensemble-averaged variance and comparison
//! against closed-form curves.

use ohlc_bridge_core::curve::trapezoid_average;
use ohlc_bridge_core::ConditionalCurve;

use crate::error::{config, Result};
use crate::mc::bins::BinGrid;
use crate::mc::generate::PathEnsemble;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ReportOptions {
    /// Divide bin variances by `n − 1` instead of `n`.
    pub unbiased: bool,
    /// Leave bins with fewer than `kappa` paths out of the ensemble average.
    pub exclude_flagged: bool,
}

/// Running `count`, `Σx`, `Σx²` per bin and time point.
#[derive(Debug, Clone)]
pub struct CurveAccumulator {
    n_times: usize,
    count: Vec<u64>,
    sum: Vec<f64>,
    sumsq: Vec<f64>,
}

impl CurveAccumulator {
    pub fn new(n_bins: usize, n_times: usize) -> Self {
        Self { n_times, count: vec![0; n_bins], sum: vec![0.0; n_bins * n_times], sumsq: vec![0.0; n_bins * n_times] }
    }

    pub fn add(&mut self, bin: usize, values: &[f64]) {
        debug_assert_eq!(values.len(), self.n_times);
        self.count[bin] += 1;
        let base = bin * self.n_times;
        for (k, &v) in values.iter().enumerate() {
            self.sum[base + k] += v;
            self.sumsq[base + k] += v * v;
        }
    }

    pub fn merge(&mut self, other: &CurveAccumulator) {
        for (a, b) in self.count.iter_mut().zip(&other.count) {
            *a += b;
        }
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sumsq.iter_mut().zip(&other.sumsq) {
            *a += b;
        }
    }

    pub fn finish(&self, grid: &BinGrid, times: Vec<f64>, label: &str, opts: ReportOptions) -> EnsembleVarianceReport {
        let nt = self.n_times;
        let mut bins = Vec::with_capacity(self.count.len());
        let mut pooled = vec![0.0; nt];
        let mut weight = 0.0;
        let mut n_paths = 0;
        let mut excluded = 0;
        for (b, &n) in self.count.iter().enumerate() {
            let n = n as usize;
            n_paths += n;
            let flagged = grid.flagged(b);
            let mut mean = vec![0.0; nt];
            let mut variance = vec![0.0; nt];
            let divisor = if opts.unbiased { n.saturating_sub(1) } else { n };
            if n > 0 {
                for k in 0..nt {
                    let m = self.sum[b * nt + k] / n as f64;
                    mean[k] = m;
                    if divisor > 0 {
                        let ss = self.sumsq[b * nt + k] - n as f64 * m * m;
                        variance[k] = (ss / divisor as f64).max(0.0);
                    }
                }
            }
            let include = divisor > 0 && !(opts.exclude_flagged && flagged);
            if include {
                for k in 0..nt {
                    pooled[k] += n as f64 * variance[k];
                }
                weight += n as f64;
            } else if n > 0 {
                excluded += 1;
            }
            bins.push(BinCurve { count: n, flagged, stat_mean: grid.stat_mean(b), mean, variance });
        }
        let ensemble_variance: Vec<f64> = pooled.iter().map(|v| if weight > 0.0 { v / weight } else { 0.0 }).collect();
        let time_average = trapezoid_average(&times, &ensemble_variance);
        EnsembleVarianceReport {
            label: label.to_string(),
            dims: grid.dims().to_vec(),
            times,
            bins,
            ensemble_variance,
            time_average,
            n_paths,
            excluded_bins: excluded,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinCurve {
    pub count: usize,
    pub flagged: bool,
    /// Mean (close, high, low) of the bin's paths.
    pub stat_mean: [f64; 3],
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl BinCurve {
    pub fn curve(&self, times: &[f64]) -> ConditionalCurve {
        ConditionalCurve { t: times.to_vec(), mean: self.mean.clone(), variance: self.variance.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleVarianceReport {
    pub label: String,
    pub dims: Vec<crate::mc::bins::Stat>,
    pub times: Vec<f64>,
    pub bins: Vec<BinCurve>,
    /// Occupancy-weighted average of the bin variances at each time.
    pub ensemble_variance: Vec<f64>,
    /// Trapezoidal time average of `ensemble_variance`.
    pub time_average: f64,
    pub n_paths: usize,
    pub excluded_bins: usize,
}

/// Curves of a materialized ensemble at the grid indices `time_idx`.
pub fn empirical_curves(
    ensemble: &PathEnsemble,
    grid: &BinGrid,
    time_idx: &[usize],
    label: &str,
    opts: ReportOptions,
) -> Result<EnsembleVarianceReport> {
    if grid.assignments().len() != ensemble.n_paths() {
        return Err(config("bin grid was built over a different ensemble"));
    }
    if time_idx.iter().any(|&k| k >= ensemble.times.len()) {
        return Err(config("time index outside the ensemble grid"));
    }
    let mut acc = CurveAccumulator::new(grid.n_bins(), time_idx.len());
    let mut buf = vec![0.0; time_idx.len()];
    for i in 0..ensemble.n_paths() {
        let p = ensemble.path(i);
        for (dst, &k) in buf.iter_mut().zip(time_idx) {
            *dst = p[k];
        }
        acc.add(grid.assignment(i), &buf);
    }
    let times = time_idx.iter().map(|&k| ensemble.times[k]).collect();
    Ok(acc.finish(grid, times, label, opts))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinComparison {
    pub bin: usize,
    pub count: usize,
    pub mse_mean: f64,
    pub mse_variance: f64,
    pub error: Option<String>,
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n as f64
}

/// Per-bin MSE of the empirical mean and variance curves against
/// `analytic(bin)`, sorted worst mean-MSE first. Empty bins are skipped;
/// bins whose analytic curve fails are listed last with the error.
pub fn compare_to_analytic(
    report: &EnsembleVarianceReport,
    mut analytic: impl FnMut(&BinCurve) -> ohlc_bridge_core::Result<ConditionalCurve>,
) -> Vec<BinComparison> {
    let mut out: Vec<BinComparison> = report
        .bins
        .iter()
        .enumerate()
        .filter(|(_, b)| b.count > 0)
        .map(|(i, b)| match analytic(b) {
            Ok(c) => BinComparison {
                bin: i,
                count: b.count,
                mse_mean: mse(&b.mean, &c.mean),
                mse_variance: mse(&b.variance, &c.variance),
                error: None,
            },
            Err(e) => BinComparison { bin: i, count: b.count, mse_mean: f64::NAN, mse_variance: f64::NAN, error: Some(e.to_string()) },
        })
        .collect();
    out.sort_by(|a, b| match (a.error.is_some(), b.error.is_some()) {
        (false, false) => b.mse_mean.total_cmp(&a.mse_mean),
        (x, y) => x.cmp(&y),
    });
    out
}

/// For each quantile `q`, the bin at the `q`-worst position of a sorted
/// comparison table.
pub fn worst_quantiles<'a>(sorted: &'a [BinComparison], quantiles: &[f64]) -> Vec<(f64, &'a BinComparison)> {
    let valid: Vec<&BinComparison> = sorted.iter().filter(|c| c.error.is_none()).collect();
    if valid.is_empty() {
        return Vec::new();
    }
    quantiles
        .iter()
        .map(|&q| {
            let k = ((q * valid.len() as f64).floor() as usize).min(valid.len() - 1);
            (q, valid[k])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::bins::Stat;
    use crate::mc::generate::{generate_paths, SimConfig};

    #[test]
    fn self_comparison_is_zero() {
        let e = generate_paths(&SimConfig::new(2000, 20).with_seed(9)).unwrap();
        let g = BinGrid::build(&e.summaries, &[Stat::Close], &[5], 0.7, 10).unwrap();
        let idx: Vec<usize> = (0..=20).collect();
        let r = empirical_curves(&e, &g, &idx, "close", ReportOptions::default()).unwrap();
        let times = r.times.clone();
        let cmp = compare_to_analytic(&r, |b| Ok(b.curve(&times)));
        assert_eq!(cmp.len(), 5);
        assert!(cmp.iter().all(|c| c.mse_mean == 0.0 && c.mse_variance == 0.0));
    }

    #[test]
    fn population_and_unbiased_divisors() {
        let e = generate_paths(&SimConfig::new(300, 10).with_seed(1)).unwrap();
        let g = BinGrid::build(&e.summaries, &[Stat::Close], &[2], 1.0, 1).unwrap();
        let a = empirical_curves(&e, &g, &[5], "c", ReportOptions::default()).unwrap();
        let b = empirical_curves(&e, &g, &[5], "c", ReportOptions { unbiased: true, ..Default::default() }).unwrap();
        let n = a.bins[0].count as f64;
        assert!((a.bins[0].variance[0] * n / (n - 1.0) - b.bins[0].variance[0]).abs() < 1e-12);
        let manual: f64 = {
            let vals: Vec<f64> = g.members(0).iter().map(|&i| e.path(i)[5]).collect();
            let m = vals.iter().sum::<f64>() / n;
            vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n
        };
        assert!((a.bins[0].variance[0] - manual).abs() < 1e-12);
    }

    #[test]
    fn flagged_bins_can_be_excluded() {
        let e = generate_paths(&SimConfig::new(1000, 10).with_seed(2)).unwrap();
        let g = BinGrid::build(&e.summaries, &[Stat::High], &[20], 0.5, 45).unwrap();
        assert!((0..g.n_bins()).any(|b| g.flagged(b)));
        let inc = empirical_curves(&e, &g, &[5], "h", ReportOptions::default()).unwrap();
        let exc = empirical_curves(&e, &g, &[5], "h", ReportOptions { exclude_flagged: true, ..Default::default() }).unwrap();
        assert_eq!(inc.excluded_bins, 0);
        assert!(exc.excluded_bins > 0);
        assert_ne!(inc.ensemble_variance, exc.ensemble_variance);
    }

    #[test]
    fn worst_quantile_picks_ranked_bins() {
        let mk = |bin, m| BinComparison { bin, count: 1, mse_mean: m, mse_variance: 0.0, error: None };
        let sorted: Vec<BinComparison> = (0..100).map(|i| mk(i, (100 - i) as f64)).collect();
        let w = worst_quantiles(&sorted, &[0.05, 0.01, 0.0]);
        assert_eq!(w.iter().map(|(_, c)| c.bin).collect::<Vec<_>>(), vec![5, 1, 0]);
    }
}
