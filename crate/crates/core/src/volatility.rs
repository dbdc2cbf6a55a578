//! Plug-in volatility estimators, the volatility-time map and the
//! volatility-weighted interpolation scores.

use alloc::vec::Vec;

use libm::{exp, log};

use crate::error::{domain, Error, Result};
use crate::extrema::{log_density_hlc, HighLowCloseStat};
use crate::params::{ModelParams, SeriesControl};

const GK_K1: f64 = 0.511;
const GK_K2: f64 = 0.019;
const GK_K3: f64 = 0.383;

/// One bar on the log scale, normalized so that the open is 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OhlcBar {
    pub high: f64,
    pub low: f64,
    pub close: f64,
}

impl OhlcBar {
    pub fn new(high: f64, low: f64, close: f64) -> Result<Self> {
        for v in [high, low, close] {
            if !v.is_finite() {
                return Err(domain("bar values must be finite", v));
            }
        }
        if high < 0.0 || high < close {
            return Err(domain("high below the open or the close", high));
        }
        if low > 0.0 || low > close {
            return Err(domain("low above the open or the close", low));
        }
        Ok(Self { high, low, close })
    }

    pub fn range(&self) -> f64 {
        self.high - self.low
    }

    /// `h = ℓ = c = 0`: the bar carries no information about the scale.
    pub fn is_flat(&self) -> bool {
        self.high == 0.0 && self.low == 0.0 && self.close == 0.0
    }

    pub fn stat(&self) -> Result<HighLowCloseStat> {
        HighLowCloseStat::new(self.high, self.low, self.close)
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self { high: lambda * self.high, low: lambda * self.low, close: lambda * self.close }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolMethod {
    Const,
    GarmanKlass,
    MaxLikelihood,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolEstimate {
    pub sigma_sq: f64,
    pub method: VolMethod,
    /// Likelihood evaluations for [`VolMethod::MaxLikelihood`], else 0.
    pub iterations: usize,
}

fn positive(sigma_sq: f64, method: VolMethod, iterations: usize) -> Result<VolEstimate> {
    if sigma_sq > 0.0 && sigma_sq.is_finite() {
        Ok(VolEstimate { sigma_sq, method, iterations })
    } else {
        Err(Error::DegenerateBar { estimate: sigma_sq })
    }
}

/// `Mean[c²]` over the bars.
pub fn sigma_const(bars: &[OhlcBar]) -> Result<VolEstimate> {
    if bars.is_empty() {
        return Err(Error::EmptyInput);
    }
    let s = bars.iter().map(|b| b.close * b.close).sum::<f64>() / bars.len() as f64;
    positive(s, VolMethod::Const, 0)
}

/// `K₁(h−ℓ)² − K₂[c(h+ℓ) − 2hℓ] − K₃c²`.
pub fn sigma_garman_klass(bar: &OhlcBar) -> Result<VolEstimate> {
    let (h, l, c) = (bar.high, bar.low, bar.close);
    let s = GK_K1 * (h - l) * (h - l) - GK_K2 * (c * (h + l) - 2.0 * h * l) - GK_K3 * c * c;
    positive(s, VolMethod::GarmanKlass, 0)
}

/// Log-likelihood of the bar's `(h, ℓ, c)` under variance `σ²`; `−∞` where
/// the range is too small for the series (the density there is negligible).
pub fn log_likelihood(stat: HighLowCloseStat, sigma_sq: f64, ctrl: &SeriesControl) -> Result<f64> {
    let p = ModelParams::new(sigma_sq)?;
    match log_density_hlc(stat, &p, ctrl) {
        Ok(v) => Ok(v),
        Err(Error::RangeTooSmall { .. }) => Ok(f64::NEG_INFINITY),
        Err(e) => Err(e),
    }
}

const SCAN_POINTS: usize = 41;
const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Maximizes the `(h, ℓ, c)` likelihood over `log σ²`.
///
/// `bracket` defaults to `[0.01, 100]` times the Garman–Klass estimate. A
/// coarse scan locates the best grid cell, then golden-section search
/// refines it to a relative tolerance of 1e-8 in `σ²`.
pub fn sigma_max_likelihood(bar: &OhlcBar, bracket: Option<(f64, f64)>, ctrl: &SeriesControl) -> Result<VolEstimate> {
    let stat = bar.stat().map_err(|_| Error::DegenerateBar { estimate: 0.0 })?;
    let (lo, hi) = match bracket {
        Some(b) => b,
        None => {
            let gk = sigma_garman_klass(bar)?.sigma_sq;
            (0.01 * gk, 100.0 * gk)
        }
    };
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(domain("bracket must satisfy 0 < lower < upper", lo));
    }
    let (u0, u1) = (log(lo), log(hi));
    let mut evals = 0;
    let mut f = |u: f64| -> Result<f64> {
        evals += 1;
        let v = log_likelihood(stat, exp(u), ctrl)?;
        Ok(if v.is_nan() { f64::NEG_INFINITY } else { v })
    };
    let step = (u1 - u0) / (SCAN_POINTS - 1) as f64;
    let mut vals = [0.0; SCAN_POINTS];
    let mut best = 0;
    for i in 0..SCAN_POINTS {
        vals[i] = f(u0 + step * i as f64)?;
        if vals[i] > vals[best] {
            best = i;
        }
    }
    if best == 0 || best == SCAN_POINTS - 1 || vals[best] == f64::NEG_INFINITY {
        return Err(Error::Bracket { lower: vals[0], upper: vals[SCAN_POINTS - 1] });
    }
    let (mut a, mut b) = (u0 + step * (best - 1) as f64, u0 + step * (best + 1) as f64);
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    while b - a > 1e-8 {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = f(x2)?;
        }
    }
    let u = if f1 >= f2 { x1 } else { x2 };
    positive(exp(u), VolMethod::MaxLikelihood, evals)
}

/// Intraday variance profile and the volatility time it induces.
///
/// Slot 0 is the open. `tau[k] = Σ_{i≤k} σ̂²_i / Σ_i σ̂²_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct VolTimeMap {
    pub t: Vec<f64>,
    pub tau: Vec<f64>,
    pub sigma_sq: Vec<f64>,
}

impl VolTimeMap {
    /// Map from explicit `(t, τ)` pairs; both must be nondecreasing on
    /// `[0, 1]` and end at 1.
    pub fn from_points(t: Vec<f64>, tau: Vec<f64>) -> Result<Self> {
        if t.len() != tau.len() {
            return Err(Error::Shape { expected: t.len(), found: tau.len() });
        }
        if t.len() < 2 {
            return Err(Error::EmptyInput);
        }
        for w in t.windows(2).chain(tau.windows(2)) {
            if !(w[1] >= w[0]) {
                return Err(domain("volatility-time map must be nondecreasing", w[1]));
            }
        }
        for &v in t.iter().chain(&tau) {
            if !(0.0..=1.0).contains(&v) {
                return Err(domain("volatility-time values must lie in [0, 1]", v));
            }
        }
        if t[t.len() - 1] != 1.0 || tau[tau.len() - 1] != 1.0 {
            return Err(domain("volatility-time map must end at (1, 1)", tau[tau.len() - 1]));
        }
        let sigma_sq = Vec::new();
        Ok(Self { t, tau, sigma_sq })
    }

    /// `Σ σ̂²` over all slots.
    pub fn total(&self) -> f64 {
        self.sigma_sq.iter().sum()
    }

    /// `τ(t)` by linear interpolation.
    pub fn tau_at(&self, t: f64) -> f64 {
        interp(&self.t, &self.tau, t)
    }

    /// Inverse map `t(τ)`; flat stretches of `τ` resolve to their first `t`.
    pub fn t_at(&self, tau: f64) -> f64 {
        interp(&self.tau, &self.t, tau)
    }
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let i = xs.partition_point(|v| *v <= x);
    let (x0, x1, y0, y1) = (xs[i - 1], xs[i], ys[i - 1], ys[i]);
    if x1 == x0 {
        y1
    } else {
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

/// Per-slot variance `σ̂²(t_i) = mean_day [X(t_i) − X(t_i − lag)]²` and the
/// volatility time. Each day holds `N + 1` log-prices starting at the open;
/// for `i < lag` the increment from the open is rescaled to `lag` steps.
pub fn estimate_vol_time(days: &[Vec<f64>], lag: usize) -> Result<VolTimeMap> {
    if days.is_empty() {
        return Err(Error::EmptyInput);
    }
    if lag == 0 {
        return Err(domain("lag must be at least one slot", 0.0));
    }
    let slots = days[0].len();
    if slots < 2 {
        return Err(Error::Shape { expected: 2, found: slots });
    }
    let mut acc = alloc::vec![0.0; slots];
    for (d, day) in days.iter().enumerate() {
        if day.len() != slots {
            return Err(Error::Shape { expected: slots, found: day.len() });
        }
        if let Some(s) = day.iter().position(|v| !v.is_finite()) {
            return Err(Error::Gap { day: d, slot: s });
        }
        for i in 1..slots {
            let j = i.saturating_sub(lag);
            let dx = day[i] - day[j];
            acc[i] += dx * dx * lag as f64 / (i - j) as f64;
        }
    }
    let nd = days.len() as f64;
    let sigma_sq: Vec<f64> = acc.iter().map(|v| v / nd).collect();
    let total: f64 = sigma_sq.iter().sum();
    if !(total > 0.0) {
        return Err(Error::UndefinedScore);
    }
    let n = slots - 1;
    let t = (0..slots).map(|i| i as f64 / n as f64).collect();
    let mut run = 0.0;
    let mut tau: Vec<f64> = sigma_sq
        .iter()
        .map(|v| {
            run += v;
            run / total
        })
        .collect();
    tau[n] = 1.0;
    Ok(VolTimeMap { t, tau, sigma_sq })
}

/// Volatility-weighted interpolation scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub mse: f64,
    pub rmse: f64,
    /// Mean over days of each day's relative squared error.
    pub mrse: f64,
}

/// Scores of `estimate` against `truth`, both `days × slots`, weighted by
/// the per-slot variance `weights`.
pub fn score(truth: &[Vec<f64>], estimate: &[Vec<f64>], weights: &[f64]) -> Result<Scores> {
    if truth.is_empty() {
        return Err(Error::EmptyInput);
    }
    if estimate.len() != truth.len() {
        return Err(Error::Shape { expected: truth.len(), found: estimate.len() });
    }
    let n = weights.len();
    let (mut err, mut sig, mut rel) = (0.0, 0.0, 0.0);
    for (x, xh) in truth.iter().zip(estimate) {
        if x.len() != n {
            return Err(Error::Shape { expected: n, found: x.len() });
        }
        if xh.len() != n {
            return Err(Error::Shape { expected: n, found: xh.len() });
        }
        let (mut e, mut s) = (0.0, 0.0);
        for i in 0..n {
            let d = x[i] - xh[i];
            e += weights[i] * d * d;
            s += weights[i] * x[i] * x[i];
        }
        if !(s > 0.0) {
            return Err(Error::UndefinedScore);
        }
        err += e;
        sig += s;
        rel += e / s;
    }
    let nd = truth.len() as f64;
    Ok(Scores { mse: err / (n as f64 * nd), rmse: err / sig, mrse: rel / nd })
}
