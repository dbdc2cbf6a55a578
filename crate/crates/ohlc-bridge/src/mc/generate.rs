//! Seeded Brownian path ensembles.
//!
//! Paths are produced in blocks of [`BLOCK_PATHS`]; block `b` draws from the
//! ChaCha8 stream `b` of the run seed, so the output does not depend on the
//! number of worker threads. Blocks generated in parallel are handed to the
//! consumer in block order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use ohlc_bridge_core::TimeGrid;

use crate::error::{config, Error, Result};
use crate::mc::bins::Stat;

pub const BLOCK_PATHS: usize = 1024;
pub const DEFAULT_MEMORY_BUDGET: u64 = 2 << 30;

/// Bytes of in-flight path values allowed per parallel chunk.
const CHUNK_BYTES: usize = 256 << 20;

/// Upper tail, in step standard deviations, beyond which a bridge excursion
/// is not sampled (probability below e^-72).
const EXCURSION_SDS: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridSpec {
    Uniform,
    /// `t_i = (1 − cos(πi/n))/2`, finer near both ends.
    Cosine,
}

impl GridSpec {
    pub fn times(self, n_steps: usize) -> Result<Vec<f64>> {
        let g = match self {
            GridSpec::Uniform => TimeGrid::uniform(n_steps)?,
            GridSpec::Cosine => TimeGrid::cosine(n_steps)?,
        };
        Ok(g.points().to_vec())
    }
}

/// How the path maximum and minimum are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremaMode {
    /// Extremes of the sampled grid values.
    Discrete,
    /// Extremes of the continuous path: each step's Brownian-bridge excursion
    /// is drawn exactly given its endpoints.
    BridgeSampled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub sigma_sq: f64,
    pub seed: u64,
    pub grid: GridSpec,
    pub extrema: ExtremaMode,
    pub parallel: bool,
    pub memory_budget: u64,
}

impl SimConfig {
    pub fn new(n_paths: usize, n_steps: usize) -> Self {
        Self {
            n_paths,
            n_steps,
            sigma_sq: 1.0,
            seed: 0,
            grid: GridSpec::Uniform,
            extrema: ExtremaMode::Discrete,
            parallel: true,
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_sigma_sq(mut self, sigma_sq: f64) -> Self {
        self.sigma_sq = sigma_sq;
        self
    }

    pub fn with_grid(mut self, grid: GridSpec) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_extrema(mut self, extrema: ExtremaMode) -> Self {
        self.extrema = extrema;
        self
    }

    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 1 {
            return Err(config("n_paths must be at least 1"));
        }
        if self.n_steps < 2 {
            return Err(config("n_steps must be at least 2"));
        }
        if self.n_steps >= u32::MAX as usize {
            return Err(config("n_steps too large"));
        }
        if !(self.sigma_sq > 0.0) || !self.sigma_sq.is_finite() {
            return Err(config(format!("sigma_sq must be positive, got {}", self.sigma_sq)));
        }
        Ok(())
    }

    pub fn times(&self) -> Result<Vec<f64>> {
        self.grid.times(self.n_steps)
    }

    pub fn n_blocks(&self) -> usize {
        self.n_paths.div_ceil(BLOCK_PATHS)
    }

    /// FNV-1a hash of everything that determines the generated summaries.
    pub fn config_hash(&self) -> u64 {
        let text = format!(
            "{}|{}|{:e}|{}|{:?}|{:?}",
            self.n_paths, self.n_steps, self.sigma_sq, self.seed, self.grid, self.extrema
        );
        fnv1a(text.as_bytes())
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Close, maximum and minimum of one path, plus the grid index of the
/// discrete maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSummary {
    pub close: f64,
    pub max: f64,
    pub min: f64,
    pub argmax: u32,
}

impl PathSummary {
    pub fn get(&self, stat: Stat) -> f64 {
        match stat {
            Stat::Close => self.close,
            Stat::High => self.max,
            Stat::Low => self.min,
        }
    }

    fn of_values(values: &[f64]) -> Self {
        let mut s = PathSummary { close: *values.last().unwrap_or(&0.0), max: 0.0, min: 0.0, argmax: 0 };
        for (i, &v) in values.iter().enumerate() {
            if v > s.max {
                s.max = v;
                s.argmax = i as u32;
            }
            s.min = s.min.min(v);
        }
        s
    }
}

/// One block of generated paths. `values` holds the retained grid points
/// of each path, row-major.
#[derive(Debug, Clone)]
pub struct Block {
    pub index: usize,
    pub first_path: usize,
    pub summaries: Vec<PathSummary>,
    pub values: Vec<f64>,
    pub width: usize,
}

impl Block {
    pub fn path(&self, i: usize) -> &[f64] {
        &self.values[i * self.width..(i + 1) * self.width]
    }
}

struct Steps {
    sd: Vec<f64>,
    var: Vec<f64>,
}

impl Steps {
    fn new(cfg: &SimConfig) -> Result<Self> {
        let t = cfg.times()?;
        let var: Vec<f64> = t.windows(2).map(|w| cfg.sigma_sq * (w[1] - w[0])).collect();
        Ok(Self { sd: var.iter().map(|v| v.sqrt()).collect(), var })
    }
}

fn block_rng(seed: u64, block: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block as u64);
    rng
}

fn simulate_block(cfg: &SimConfig, steps: &Steps, block: usize, keep: &[usize]) -> Block {
    let first = block * BLOCK_PATHS;
    let n = BLOCK_PATHS.min(cfg.n_paths - first);
    let mut rng = block_rng(cfg.seed, block);
    let mut summaries = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n * keep.len());
    let bridge = cfg.extrema == ExtremaMode::BridgeSampled;
    for _ in 0..n {
        let mut x = 0.0f64;
        let (mut max, mut min, mut argmax) = (0.0f64, 0.0f64, 0u32);
        let mut kp = 0;
        if keep.first() == Some(&0) {
            values.push(0.0);
            kp = 1;
        }
        for i in 0..cfg.n_steps {
            let z: f64 = rng.sample(StandardNormal);
            let y = x + steps.sd[i] * z;
            if bridge {
                let margin = EXCURSION_SDS * steps.sd[i];
                let (hi, lo) = if y > x { (y, x) } else { (x, y) };
                if hi + margin > max {
                    let u: f64 = 1.0 - rng.random::<f64>();
                    let m = 0.5 * (x + y + ((y - x) * (y - x) - 2.0 * steps.var[i] * u.ln()).sqrt());
                    if m > max {
                        max = m;
                        argmax = i as u32 + 1;
                    }
                }
                if lo - margin < min {
                    let u: f64 = 1.0 - rng.random::<f64>();
                    let m = 0.5 * (x + y - ((y - x) * (y - x) - 2.0 * steps.var[i] * u.ln()).sqrt());
                    min = min.min(m);
                }
            } else {
                if y > max {
                    max = y;
                    argmax = i as u32 + 1;
                }
                min = min.min(y);
            }
            x = y;
            if kp < keep.len() && keep[kp] == i + 1 {
                values.push(x);
                kp += 1;
            }
        }
        summaries.push(PathSummary { close: x, max, min, argmax });
    }
    Block { index: block, first_path: first, summaries, values, width: keep.len() }
}

fn check_keep(cfg: &SimConfig, keep: &[usize]) -> Result<()> {
    if keep.windows(2).any(|w| w[1] <= w[0]) || keep.last().is_some_and(|&k| k > cfg.n_steps) {
        return Err(config("retained time indices must be increasing and within the grid"));
    }
    Ok(())
}

/// Generates every block and feeds them to `consume` in block order.
/// `keep` lists the grid indices whose values are retained.
pub fn stream_blocks(cfg: &SimConfig, keep: &[usize], mut consume: impl FnMut(Block) -> Result<()>) -> Result<()> {
    cfg.validate()?;
    check_keep(cfg, keep)?;
    let steps = Steps::new(cfg)?;
    let nb = cfg.n_blocks();
    if !cfg.parallel {
        for b in 0..nb {
            consume(simulate_block(cfg, &steps, b, keep))?;
        }
        return Ok(());
    }
    let block_bytes = (BLOCK_PATHS * (keep.len() * 8 + 32)).max(1);
    let chunk = (4 * rayon::current_num_threads()).min(CHUNK_BYTES / block_bytes).max(1);
    let mut start = 0;
    while start < nb {
        let end = (start + chunk).min(nb);
        let blocks: Vec<Block> = (start..end).into_par_iter().map(|b| simulate_block(cfg, &steps, b, keep)).collect();
        for b in blocks {
            consume(b)?;
        }
        start = end;
    }
    Ok(())
}

/// Path summaries only; no path values are kept.
pub fn simulate_summaries(cfg: &SimConfig) -> Result<Vec<PathSummary>> {
    let mut out = Vec::with_capacity(cfg.n_paths);
    stream_blocks(cfg, &[], |b| {
        out.extend_from_slice(&b.summaries);
        Ok(())
    })?;
    Ok(out)
}

/// A fully materialized ensemble: one row of grid values per path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub seed: u64,
    pub sigma_sq: f64,
    pub times: Vec<f64>,
    pub summaries: Vec<PathSummary>,
    values: Vec<f64>,
}

impl PathEnsemble {
    pub fn n_paths(&self) -> usize {
        self.summaries.len()
    }

    pub fn path(&self, i: usize) -> &[f64] {
        let w = self.times.len();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

fn check_budget(n_paths: usize, n_times: usize, budget: u64) -> Result<()> {
    let required = (n_paths as u64).saturating_mul(n_times as u64 * 8 + 32);
    if required > budget {
        return Err(Error::Capacity { required, budget });
    }
    Ok(())
}

/// All paths on the full grid. Fails with [`Error::Capacity`] when the
/// matrix would exceed `cfg.memory_budget`.
pub fn generate_paths(cfg: &SimConfig) -> Result<PathEnsemble> {
    cfg.validate()?;
    let times = cfg.times()?;
    check_budget(cfg.n_paths, times.len(), cfg.memory_budget)?;
    let keep: Vec<usize> = (0..times.len()).collect();
    let mut summaries = Vec::with_capacity(cfg.n_paths);
    let mut values = Vec::with_capacity(cfg.n_paths * times.len());
    stream_blocks(cfg, &keep, |b| {
        summaries.extend_from_slice(&b.summaries);
        values.extend_from_slice(&b.values);
        Ok(())
    })?;
    Ok(PathEnsemble { seed: cfg.seed, sigma_sq: cfg.sigma_sq, times, summaries, values })
}

/// Truncated sine expansion
/// `B(t) = σ[ξ₀t + Σ_{n=1}^{M} ξ_n √2 sin(nπt)/(nπ)]` on `n_times + 1`
/// uniform points. Extremes are those of the sampled values.
pub fn fourier_paths(
    n_paths: usize,
    n_modes: usize,
    sigma_sq: f64,
    seed: u64,
    n_times: usize,
    memory_budget: u64,
) -> Result<PathEnsemble> {
    if n_modes < 1 {
        return Err(config("n_modes must be at least 1"));
    }
    let probe = SimConfig::new(n_paths, n_times.max(2)).with_sigma_sq(sigma_sq);
    probe.validate()?;
    let times = GridSpec::Uniform.times(n_times)?;
    check_budget(n_paths, times.len(), memory_budget)?;
    let sigma = sigma_sq.sqrt();
    let width = times.len();
    let cosines: Vec<f64> = times.iter().map(|t| (std::f64::consts::PI * t).cos()).collect();
    let sines: Vec<f64> = times.iter().map(|t| (std::f64::consts::PI * t).sin()).collect();
    let blocks: Vec<(Vec<PathSummary>, Vec<f64>)> = (0..n_paths.div_ceil(BLOCK_PATHS))
        .into_par_iter()
        .map(|b| {
            let n = BLOCK_PATHS.min(n_paths - b * BLOCK_PATHS);
            let mut rng = block_rng(seed, b);
            let mut xi = vec![0.0f64; n_modes + 1];
            let mut sums = Vec::with_capacity(n);
            let mut vals = Vec::with_capacity(n * width);
            for _ in 0..n {
                for x in xi.iter_mut() {
                    *x = rng.sample(StandardNormal);
                }
                let start = vals.len();
                for (j, &t) in times.iter().enumerate() {
                    // sin(nθ) by the three-term recurrence
                    let two_cos = 2.0 * cosines[j];
                    let (mut prev, mut cur) = (0.0, sines[j]);
                    let mut acc = 0.0;
                    for (n, &x) in xi.iter().enumerate().skip(1) {
                        acc += x * cur / n as f64;
                        let next = two_cos * cur - prev;
                        prev = cur;
                        cur = next;
                    }
                    let v = xi[0] * t + acc * std::f64::consts::SQRT_2 / std::f64::consts::PI;
                    vals.push(sigma * v);
                }
                // sin(nπ) is 0 up to roundoff; pin the end to ξ₀ exactly
                vals[start] = 0.0;
                vals[start + width - 1] = sigma * xi[0];
                sums.push(PathSummary::of_values(&vals[start..start + width]));
            }
            (sums, vals)
        })
        .collect();
    let mut summaries = Vec::with_capacity(n_paths);
    let mut values = Vec::with_capacity(n_paths * width);
    for (s, v) in blocks {
        summaries.extend(s);
        values.extend(v);
    }
    Ok(PathEnsemble { seed, sigma_sq, times, summaries, values })
}

/// `B_i(t) − (B_i(1) − c)·t` for every path; extremes are recomputed from
/// the pinned grid values.
pub fn pin_to_close(ensemble: &PathEnsemble, c: f64) -> PathEnsemble {
    let w = ensemble.times.len();
    let mut values = Vec::with_capacity(ensemble.values.len());
    let mut summaries = Vec::with_capacity(ensemble.n_paths());
    for i in 0..ensemble.n_paths() {
        let p = ensemble.path(i);
        let shift = p[w - 1] - c;
        let start = values.len();
        if shift == 0.0 {
            values.extend_from_slice(p);
        } else {
            values.extend(p.iter().zip(&ensemble.times).map(|(v, t)| v - shift * t));
            values[start + w - 1] = c;
        }
        summaries.push(PathSummary::of_values(&values[start..]));
    }
    PathEnsemble { seed: ensemble.seed, sigma_sq: ensemble.sigma_sq, times: ensemble.times.clone(), summaries, values }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_start_at_zero_and_match_summaries() {
        let e = generate_paths(&SimConfig::new(300, 50).with_seed(3)).unwrap();
        for i in 0..e.n_paths() {
            let p = e.path(i);
            assert_eq!(p[0], 0.0);
            let s = PathSummary::of_values(p);
            assert_eq!(s, e.summaries[i]);
        }
    }

    #[test]
    fn summaries_independent_of_worker_layout() {
        let cfg = SimConfig::new(2500, 40).with_seed(11).with_extrema(ExtremaMode::BridgeSampled);
        let a = simulate_summaries(&cfg).unwrap();
        let b = simulate_summaries(&cfg.clone().with_parallel(false)).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let c = pool.install(|| simulate_summaries(&cfg).unwrap());
        assert_eq!(a, c);
    }

    #[test]
    fn bridge_extremes_dominate_grid_extremes() {
        let cfg = SimConfig::new(500, 30).with_seed(5);
        let d = generate_paths(&cfg).unwrap();
        let b = generate_paths(&cfg.clone().with_extrema(ExtremaMode::BridgeSampled)).unwrap();
        // the closes differ (extra uniforms are drawn) so compare per-path invariants
        for i in 0..b.n_paths() {
            let g = PathSummary::of_values(b.path(i));
            assert!(b.summaries[i].max >= g.max && b.summaries[i].min <= g.min);
            assert_eq!(b.summaries[i].close, g.close);
        }
        assert!(d.summaries.iter().all(|s| s.max >= 0.0 && s.min <= 0.0));
    }

    #[test]
    fn retained_columns_follow_keep() {
        let cfg = SimConfig::new(10, 20).with_seed(1);
        let full = generate_paths(&cfg).unwrap();
        let keep = [0, 5, 20];
        let mut got = Vec::new();
        stream_blocks(&cfg, &keep, |b| {
            got.extend_from_slice(&b.values);
            Ok(())
        })
        .unwrap();
        for i in 0..10 {
            for (j, &k) in keep.iter().enumerate() {
                assert_eq!(got[i * 3 + j], full.path(i)[k]);
            }
        }
        assert!(stream_blocks(&cfg, &[3, 2], |_| Ok(())).is_err());
    }

    #[test]
    fn capacity_error_reports_bytes() {
        let mut cfg = SimConfig::new(1000, 100);
        cfg.memory_budget = 1000;
        match generate_paths(&cfg) {
            Err(Error::Capacity { required, budget }) => {
                assert_eq!(budget, 1000);
                assert_eq!(required, 1000 * (101 * 8 + 32));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cosine_grid_refines_ends() {
        let t = GridSpec::Cosine.times(100).unwrap();
        assert!(t[1] - t[0] < t[51] - t[50]);
        let e = generate_paths(&SimConfig::new(5, 100).with_grid(GridSpec::Cosine)).unwrap();
        assert_eq!(e.times, t);
    }

    #[test]
    fn pin_to_own_close_is_identity() {
        let e = generate_paths(&SimConfig::new(50, 30).with_seed(2)).unwrap();
        for i in 0..e.n_paths() {
            let c = e.summaries[i].close;
            let single = PathEnsemble {
                seed: 0,
                sigma_sq: 1.0,
                times: e.times.clone(),
                summaries: vec![e.summaries[i]],
                values: e.path(i).to_vec(),
            };
            let p = pin_to_close(&single, c);
            assert_eq!(p.path(0), e.path(i));
        }
    }

    #[test]
    fn pinned_paths_end_at_close() {
        let e = generate_paths(&SimConfig::new(40, 30).with_seed(4)).unwrap();
        let p = pin_to_close(&e, 0.25);
        assert!(p.summaries.iter().all(|s| s.close == 0.25 && s.max >= 0.25));
    }

    #[test]
    fn fourier_endpoints() {
        let e = fourier_paths(20, 50, 2.0, 1, 16, DEFAULT_MEMORY_BUDGET).unwrap();
        for i in 0..20 {
            assert_eq!(e.path(i)[0], 0.0);
        }
        assert!(fourier_paths(1, 0, 1.0, 1, 16, DEFAULT_MEMORY_BUDGET).is_err());
    }

    #[test]
    fn config_hash_tracks_fields() {
        let a = SimConfig::new(10, 20);
        assert_eq!(a.config_hash(), a.clone().with_parallel(false).config_hash());
        assert_ne!(a.config_hash(), a.clone().with_seed(1).config_hash());
    }
}
