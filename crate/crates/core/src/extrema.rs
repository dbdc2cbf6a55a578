//! Laws of the close, high and low of a driftless Brownian path on [0, 1],
//! and the Feller density of its range.

use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{log, sqrt};

use crate::error::{domain, Result};
use crate::gaussian::{erfcx_product, phi};
use crate::params::{ModelParams, SeriesControl};
use crate::series::{sum_series, SeriesSum};

/// Terminal high and close.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HighCloseStat {
    pub high: f64,
    pub close: f64,
}

impl HighCloseStat {
    pub fn new(high: f64, close: f64) -> Result<Self> {
        if !high.is_finite() || !close.is_finite() {
            return Err(domain("statistic must be finite", if high.is_finite() { close } else { high }));
        }
        if high < 0.0 {
            return Err(domain("high must be nonnegative", high));
        }
        if high < close {
            return Err(domain("high must be at least the close", high - close));
        }
        Ok(Self { high, close })
    }
}

/// Terminal high, low and close.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HighLowCloseStat {
    pub high: f64,
    pub low: f64,
    pub close: f64,
}

impl HighLowCloseStat {
    pub fn new(high: f64, low: f64, close: f64) -> Result<Self> {
        for v in [high, low, close] {
            if !v.is_finite() {
                return Err(domain("statistic must be finite", v));
            }
        }
        if low > 0.0 {
            return Err(domain("low must be nonpositive", low));
        }
        if high < 0.0 {
            return Err(domain("high must be nonnegative", high));
        }
        if close < low || close > high {
            return Err(domain("close must lie in [low, high]", close));
        }
        if !(high > low) {
            return Err(domain("range must be positive", high - low));
        }
        Ok(Self { high, low, close })
    }

    pub fn range(&self) -> f64 {
        self.high - self.low
    }

    /// The statistic seen by the time-reversed path `B(1−t) − B(1)`.
    pub fn reversed(&self) -> Self {
        Self { high: self.high - self.close, low: self.low - self.close, close: -self.close }
    }
}

/// Density of the high: `2φ_{σ²}(h)` on `h ≥ 0`.
pub fn density_high(h: f64, params: &ModelParams) -> f64 {
    if h < 0.0 {
        0.0
    } else {
        2.0 * phi(h, params.sigma_sq())
    }
}

pub fn log_density_high(h: f64, params: &ModelParams) -> f64 {
    safe_log(density_high(h, params))
}

/// Joint density of (high, close): `2(2h−c)/σ²·φ_{σ²}(2h−c)`.
pub fn joint_high_close(stat: HighCloseStat, params: &ModelParams) -> f64 {
    let s2 = params.sigma_sq();
    let r = 2.0 * stat.high - stat.close;
    2.0 * r / s2 * phi(r, s2)
}

pub fn log_joint_high_close(stat: HighCloseStat, params: &ModelParams) -> f64 {
    safe_log(joint_high_close(stat, params))
}

/// Conditional mean and variance of the close given the high.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloseGivenHigh {
    pub mean: f64,
    pub variance: f64,
}

/// `E[c|h]` and `Var[c|h]`, evaluated through the scaled complementary
/// error function so that large `h/σ` neither overflows nor cancels badly.
pub fn close_given_high_moments(h: f64, params: &ModelParams) -> Result<CloseGivenHigh> {
    if !(h >= 0.0) || !h.is_finite() {
        return Err(domain("high must be finite and nonnegative", h));
    }
    let s = params.sigma();
    let e = erfcx_product(h, s)?;
    let k = s * sqrt(PI / 2.0) * e;
    let mean = h - k;
    let variance = 2.0 * s * s - 2.0 * h * k - k * k;
    Ok(CloseGivenHigh { mean, variance })
}

pub(crate) fn check_barriers(h: f64, l: f64) -> Result<()> {
    if !h.is_finite() || !l.is_finite() {
        return Err(domain("barriers must be finite", if h.is_finite() { l } else { h }));
    }
    if h < 0.0 {
        return Err(domain("high must be nonnegative", h));
    }
    if l > 0.0 {
        return Err(domain("low must be nonpositive", l));
    }
    if !(h > l) {
        return Err(domain("range must be positive", h - l));
    }
    Ok(())
}

fn choi_roh_term(n: usize, c: f64, h: f64, l: f64, s2: f64) -> f64 {
    let d = h - l;
    if n == 0 {
        return phi(c, s2);
    }
    let m = n.div_ceil(2) as f64;
    if n % 2 == 1 {
        let k = m - 1.0;
        -(phi(c - 2.0 * h - 2.0 * k * d, s2) + phi(c - 2.0 * l + 2.0 * k * d, s2))
    } else {
        phi(c - 2.0 * m * d, s2) + phi(c + 2.0 * m * d, s2)
    }
}

/// Density in `c` of ending at `c` while staying inside `[ℓ, h]`.
///
/// Summed in the alternating order
/// `φ(c) − [φ(c−2h) + φ(c−2ℓ)] + [φ(c−2Δ) + φ(c+2Δ)] − …`,
/// whose partial sums alternately over- and under-shoot the limit.
pub fn choi_roh_distribution(c: f64, h: f64, l: f64, params: &ModelParams, ctrl: &SeriesControl) -> Result<f64> {
    check_barriers(h, l)?;
    if c.is_nan() {
        return Err(domain("close is NaN", c));
    }
    if c < l || c > h {
        return Ok(0.0);
    }
    ctrl.check_range(h - l, params.sigma())?;
    let s2 = params.sigma_sq();
    Ok(sum_series(ctrl, |n| choi_roh_term(n, c, h, l, s2))?.value)
}

/// The first `n_terms` partial sums of [`choi_roh_distribution`].
pub fn choi_roh_partial_sums(c: f64, h: f64, l: f64, params: &ModelParams, n_terms: usize) -> Result<Vec<f64>> {
    check_barriers(h, l)?;
    let s2 = params.sigma_sq();
    let mut acc = 0.0;
    Ok((0..n_terms)
        .map(|n| {
            acc += choi_roh_term(n, c, h, l, s2);
            acc
        })
        .collect())
}

/// Joint density of (high, low, close), i.e. `−∂ℓ∂h` of the Choi–Roh law.
pub fn density_hlc(stat: HighLowCloseStat, params: &ModelParams, ctrl: &SeriesControl) -> Result<f64> {
    let s2 = params.sigma_sq();
    let d = stat.range();
    ctrl.check_range(d, params.sigma())?;
    let (h, c) = (stat.high, stat.close);
    let part = |k: f64| {
        let a = |y: f64| {
            let z = y - 2.0 * k * d;
            z * z / s2 - 1.0
        };
        k * k * a(c) * phi(c - 2.0 * k * d, s2) - k * (k + 1.0) * a(c - 2.0 * h) * phi(c - 2.0 * h - 2.0 * k * d, s2)
    };
    let sum = sum_series(ctrl, |n| {
        if n == 0 {
            part(0.0)
        } else {
            part(n as f64) + part(-(n as f64))
        }
    })?;
    Ok(4.0 / s2 * sum.value)
}

pub fn log_density_hlc(stat: HighLowCloseStat, params: &ModelParams, ctrl: &SeriesControl) -> Result<f64> {
    Ok(safe_log(density_hlc(stat, params, ctrl)?))
}

/// Joint density of (high, low) with the close integrated out.
pub fn density_hl(h: f64, l: f64, params: &ModelParams, ctrl: &SeriesControl) -> Result<f64> {
    check_barriers(h, l)?;
    let s2 = params.sigma_sq();
    let d = h - l;
    ctrl.check_range(d, params.sigma())?;
    let yp = |y: f64| y * phi(y, s2);
    let part = |k: f64| {
        let hk = h - 2.0 * k * d;
        let lk = l - 2.0 * k * d;
        k * k * (yp(hk) - yp(lk)) - k * (k + 1.0) * (yp(hk - 2.0 * h) - yp(lk - 2.0 * h))
    };
    let sum = sum_series(ctrl, |n| {
        if n == 0 {
            part(0.0)
        } else {
            part(n as f64) + part(-(n as f64))
        }
    })?;
    Ok(-4.0 / s2 * sum.value)
}

pub fn log_density_hl(h: f64, l: f64, params: &ModelParams, ctrl: &SeriesControl) -> Result<f64> {
    Ok(safe_log(density_hl(h, l, params, ctrl)?))
}

/// Feller's density of the range of a standard Brownian path on [0, 1],
/// `8 Σ_{k≥1} (−1)^{k+1} k² φ(kx)`, with the number of terms used.
pub fn feller_range_density(x: f64, ctrl: &SeriesControl) -> Result<SeriesSum> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain("range must be positive and finite", x));
    }
    let sum = sum_series(ctrl, |n| {
        let k = (n + 1) as f64;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        8.0 * sign * k * k * phi(k * x, 1.0)
    })?;
    Ok(sum)
}

/// The same density after Poisson summation,
/// `8/x³ Σ_{m odd} (π²m²/x² − 1) e^{−π²m²/(2x²)}`; every term is positive
/// once `x < π`, and few terms are needed for small `x`.
pub fn feller_range_density_dual(x: f64, ctrl: &SeriesControl) -> Result<SeriesSum> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain("range must be positive and finite", x));
    }
    let x2 = x * x;
    let sum = sum_series(ctrl, |n| {
        let m = (2 * n + 1) as f64;
        let u = PI * PI * m * m / x2;
        (u - 1.0) * libm::exp(-0.5 * u)
    })?;
    Ok(SeriesSum { value: 8.0 / (x2 * x) * sum.value, terms: sum.terms })
}

fn safe_log(v: f64) -> f64 {
    if v > 0.0 {
        log(v)
    } else {
        f64::NEG_INFINITY
    }
}
