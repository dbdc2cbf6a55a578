//! Gaussian density, scaled error functions and the scaled complementary
//! error function `erfcx(x) = exp(x²)·erfc(x)`.
//!
//! The crate-internal `phi`/`e_sigma` skip argument validation and are what
//! the series evaluators call in their inner loops.

use core::f64::consts::{PI, SQRT_2};

use libm::{erf, erfc, exp, fma, sqrt};

use crate::error::{domain, Result};

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// A strictly positive, finite variance.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Variance(f64);

impl Variance {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 {
            Ok(Self(value))
        } else {
            Err(domain("variance must be positive and finite", value))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn sigma(self) -> f64 {
        sqrt(self.0)
    }

    /// σ²·t(1−t), the variance of a Brownian bridge at time `t`.
    pub fn bridge(self, t: f64) -> Result<Self> {
        Self::new(self.0 * t * (1.0 - t))
    }
}

/// Density of N(0, variance) at `x`.
pub fn gaussian_pdf(x: f64, variance: Variance) -> Result<f64> {
    if !x.is_finite() {
        return Err(domain("gaussian_pdf argument must be finite", x));
    }
    Ok(phi(x, variance.0))
}

/// `½·erf(x/(√2σ))`, i.e. the N(0,σ²) mass on `(0, x)` with sign.
pub fn scaled_erf(x: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(domain("scaled_erf sigma must be positive", sigma));
    }
    if x.is_nan() {
        return Err(domain("scaled_erf argument is NaN", x));
    }
    Ok(e_sigma(x, sigma))
}

/// `erfc(h/√(2σ²))·exp(h²/(2σ²))` without overflow.
pub fn erfcx_product(h: f64, sigma: f64) -> Result<f64> {
    if !(h >= 0.0) {
        return Err(domain("erfcx_product requires h >= 0", h));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(domain("erfcx_product sigma must be positive", sigma));
    }
    Ok(erfcx(h / (SQRT_2 * sigma)))
}

/// Scaled complementary error function `exp(x²)·erfc(x)`.
///
/// Below 4 the product is formed directly with `x²` split into a head and
/// an fma-recovered tail so the exponential carries no rounding from the
/// square. From 4 upward a Lentz continued fraction is used.
pub fn erfcx(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        let hi = x * x;
        let lo = fma(x, x, -hi);
        return 2.0 * exp(hi) * (1.0 + lo) - erfcx(-x);
    }
    if x < 4.0 {
        let hi = x * x;
        let lo = fma(x, x, -hi);
        return exp(hi) * (1.0 + lo) * erfc(x);
    }
    if x == f64::INFINITY {
        return 0.0;
    }
    if x > 1e8 {
        return FRAC_1_SQRT_PI / x;
    }
    // erfcx(x) = 1/√π · 1/(x + (1/2)/(x + (2/2)/(x + (3/2)/(x + ...))))
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for n in 1..500 {
        let a = 0.5 * n as f64;
        d = x + a * d;
        if d == 0.0 {
            d = tiny;
        }
        c = x + a / c;
        if c == 0.0 {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    FRAC_1_SQRT_PI / f
}

#[inline]
pub(crate) fn phi(x: f64, v: f64) -> f64 {
    exp(-x * x / (2.0 * v)) / sqrt(2.0 * PI * v)
}

#[inline]
pub(crate) fn e_sigma(x: f64, s: f64) -> f64 {
    0.5 * erf(x / (SQRT_2 * s))
}
