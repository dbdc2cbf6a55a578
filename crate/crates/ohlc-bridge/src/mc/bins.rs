//! Nested adaptive binning of path statistics.
//!
//! Cuts along each dimension equalize `∫ n(q)^α dq` over the bins, where
//! `n` is the sample density. `α = 1` gives equal-count quantile bins;
//! smaller `α` narrows the sparsely populated outer bins.

use crate::error::{config, Result};
use crate::mc::generate::PathSummary;

pub const DEFAULT_ALPHA: f64 = 0.7;
pub const DEFAULT_KAPPA: usize = 50;

/// Resolution of the density estimate: sorted samples are grouped into
/// roughly this many segments per bin.
const SEGMENTS_PER_BIN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stat {
    Close,
    High,
    Low,
}

impl Stat {
    pub fn name(self) -> &'static str {
        match self {
            Stat::Close => "close",
            Stat::High => "high",
            Stat::Low => "low",
        }
    }
}

/// Bins of a path ensemble. Dimension `k + 1` is cut separately inside each
/// bin of dimensions `0..=k`; flat bin indices are mixed-radix in `dims`
/// order.
#[derive(Debug, Clone)]
pub struct BinGrid {
    dims: Vec<Stat>,
    nbins: Vec<usize>,
    alpha: f64,
    kappa: usize,
    /// `cuts[level]` holds `nbins[level] − 1` interior cuts per parent node.
    cuts: Vec<Vec<f64>>,
    assignment: Vec<u32>,
    counts: Vec<usize>,
    /// Per-bin mean of (close, high, low).
    stat_means: Vec<[f64; 3]>,
}

fn bins_product(nbins: &[usize]) -> usize {
    nbins.iter().product()
}

/// Interior cuts for one sorted sample.
pub fn density_power_cuts(sorted: &[f64], nbins: usize, alpha: f64) -> Vec<f64> {
    let n = sorted.len();
    let mut cuts = Vec::with_capacity(nbins - 1);
    if n == 0 {
        return (1..nbins).map(|j| j as f64).collect();
    }
    if alpha == 1.0 || n < 2 {
        for j in 1..nbins {
            let r = j * n / nbins;
            let c = if r == 0 {
                sorted[0]
            } else if r >= n {
                sorted[n - 1]
            } else {
                0.5 * (sorted[r - 1] + sorted[r])
            };
            cuts.push(c);
        }
    } else {
        let m = (n / (nbins * SEGMENTS_PER_BIN)).max(1);
        let mut edges: Vec<usize> = (0..n).step_by(m).collect();
        if *edges.last().unwrap() != n - 1 {
            edges.push(n - 1);
        }
        let weights: Vec<f64> = edges
            .windows(2)
            .map(|e| {
                let count = (e[1] - e[0]) as f64;
                let width = sorted[e[1]] - sorted[e[0]];
                count.powf(alpha) * width.powf(1.0 - alpha)
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let mut seg = 0;
        for j in 1..nbins {
            let target = total * j as f64 / nbins as f64;
            while seg < weights.len() - 1 && acc + weights[seg] < target {
                acc += weights[seg];
                seg += 1;
            }
            let (a, b) = (sorted[edges[seg]], sorted[edges[seg + 1]]);
            let frac = if weights[seg] > 0.0 { ((target - acc) / weights[seg]).clamp(0.0, 1.0) } else { 0.0 };
            cuts.push(a + frac * (b - a));
        }
    }
    for j in 1..cuts.len() {
        if cuts[j] <= cuts[j - 1] {
            cuts[j] = cuts[j - 1].next_up();
        }
    }
    cuts
}

fn locate(cuts: &[f64], v: f64) -> usize {
    cuts.partition_point(|&c| c <= v)
}

impl BinGrid {
    pub fn build(summaries: &[PathSummary], dims: &[Stat], nbins: &[usize], alpha: f64, kappa: usize) -> Result<Self> {
        if dims.is_empty() || dims.len() > 3 || dims.len() != nbins.len() {
            return Err(config("binning needs 1 to 3 dimensions with one bin count each"));
        }
        if nbins.iter().any(|&n| n < 2) {
            return Err(config("each dimension needs at least 2 bins"));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(config(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        if bins_product(nbins) > u32::MAX as usize {
            return Err(config("too many bins"));
        }
        let mut partial = vec![0u32; summaries.len()];
        let mut cuts = Vec::with_capacity(dims.len());
        let mut nodes = 1usize;
        for (&stat, &nb) in dims.iter().zip(nbins) {
            let mut members: Vec<Vec<f64>> = vec![Vec::new(); nodes];
            for (s, &p) in summaries.iter().zip(&partial) {
                members[p as usize].push(s.get(stat));
            }
            let mut level_cuts = Vec::with_capacity(nodes * (nb - 1));
            for mut vals in members {
                vals.sort_unstable_by(f64::total_cmp);
                level_cuts.extend(density_power_cuts(&vals, nb, alpha));
            }
            for (s, p) in summaries.iter().zip(partial.iter_mut()) {
                let node = *p as usize;
                let c = &level_cuts[node * (nb - 1)..(node + 1) * (nb - 1)];
                *p = (node * nb + locate(c, s.get(stat))) as u32;
            }
            cuts.push(level_cuts);
            nodes *= nb;
        }
        let mut counts = vec![0usize; nodes];
        let mut sums = vec![[0.0f64; 3]; nodes];
        for (s, &b) in summaries.iter().zip(&partial) {
            let b = b as usize;
            counts[b] += 1;
            sums[b][0] += s.close;
            sums[b][1] += s.max;
            sums[b][2] += s.min;
        }
        let stat_means = sums
            .iter()
            .zip(&counts)
            .map(|(s, &n)| if n == 0 { [f64::NAN; 3] } else { s.map(|v| v / n as f64) })
            .collect();
        Ok(Self { dims: dims.to_vec(), nbins: nbins.to_vec(), alpha, kappa, cuts, assignment: partial, counts, stat_means })
    }

    pub fn dims(&self) -> &[Stat] {
        &self.dims
    }

    pub fn nbins(&self) -> &[usize] {
        &self.nbins
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    /// Bin of the `i`-th path the grid was built from.
    pub fn assignment(&self, i: usize) -> usize {
        self.assignment[i] as usize
    }

    pub fn assignments(&self) -> &[u32] {
        &self.assignment
    }

    /// Bin of an arbitrary summary, by walking the nested cuts.
    pub fn bin_of(&self, s: &PathSummary) -> usize {
        let mut node = 0usize;
        for (level, (&stat, &nb)) in self.dims.iter().zip(&self.nbins).enumerate() {
            let c = &self.cuts[level][node * (nb - 1)..(node + 1) * (nb - 1)];
            node = node * nb + locate(c, s.get(stat));
        }
        node
    }

    /// Interior cuts of dimension `level` inside parent node `node`.
    pub fn cuts(&self, level: usize, node: usize) -> &[f64] {
        let nb = self.nbins[level];
        &self.cuts[level][node * (nb - 1)..(node + 1) * (nb - 1)]
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Mean (close, high, low) of the bin's members; NaN when empty.
    pub fn stat_mean(&self, bin: usize) -> [f64; 3] {
        self.stat_means[bin]
    }

    /// Occupancy below `kappa`.
    pub fn flagged(&self, bin: usize) -> bool {
        self.counts[bin] < self.kappa
    }

    pub fn members(&self, bin: usize) -> Vec<usize> {
        self.assignment.iter().enumerate().filter(|(_, &b)| b as usize == bin).map(|(i, _)| i).collect()
    }
}
