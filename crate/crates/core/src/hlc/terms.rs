//! The shifted-Gaussian expansion of the high/low/close generator.
//!
//! For `i ∈ {1..4}` and `j, k ∈ ℤ` the endpoints are
//!
//! ```text
//! a_{1j} = a_{2j} = 2jΔ            b_{1k} = b_{3k} = c − 2kΔ
//! a_{3j} = a_{4j} = 2h − 2jΔ       b_{2k} = b_{4k} = 2h − c + 2kΔ
//! ```
//!
//! and each term is `s_i ψ φ_{σ_t²}(x − μ)` with `μ = a(1−t) + bt`,
//! `ψ = φ_{σ²}(a − b)`, signs `s = (+, −, −, +)`. Endpoints are affine in
//! `(h, ℓ)` at fixed `c`, so all `h`/`ℓ` derivatives are exact constants.

use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use libm::{ceil, erf, erfc, exp, log, sqrt};

use crate::extrema::HighLowCloseStat;
use crate::gaussian::phi;
use crate::params::{ModelParams, SeriesControl};

pub(crate) const SIGNS: [f64; 4] = [1.0, -1.0, -1.0, 1.0];

/// Relative exponent beyond which a term cannot affect a double result.
const PRUNE_EXPONENT: f64 = 60.0;

/// Value and `(∂_h, ∂_ℓ)` of a quantity affine in the high and low.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Affine {
    pub v: f64,
    pub dh: f64,
    pub dl: f64,
}

pub(crate) fn endpoints(i: usize, j: i64, k: i64, stat: &HighLowCloseStat) -> (Affine, Affine) {
    let (h, c) = (stat.high, stat.close);
    let d = stat.range();
    let (j, k) = (j as f64, k as f64);
    let a = if i < 2 {
        Affine { v: 2.0 * j * d, dh: 2.0 * j, dl: -2.0 * j }
    } else {
        Affine { v: 2.0 * h - 2.0 * j * d, dh: 2.0 - 2.0 * j, dl: 2.0 * j }
    };
    let b = if i.is_multiple_of(2) {
        Affine { v: c - 2.0 * k * d, dh: -2.0 * k, dl: 2.0 * k }
    } else {
        Affine { v: 2.0 * h - c + 2.0 * k * d, dh: 2.0 + 2.0 * k, dl: -2.0 * k }
    };
    (a, b)
}

/// One term of the `(i, j, k)` expansion at a fixed time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesTermIJK {
    /// 1-based family index.
    pub i: usize,
    pub j: i64,
    pub k: i64,
    pub a: f64,
    pub b: f64,
    pub mu: f64,
    pub g: f64,
    pub psi: f64,
    /// `∂_h μ`
    pub tau: f64,
    /// `∂_ℓ μ`
    pub tau_hat: f64,
    pub sign: f64,
    /// `2(j(1−t) + kt)`
    pub v: f64,
    /// `2(j(1−t) − kt)`
    pub v_tilde: f64,
    /// `2(j + k)`
    pub w: f64,
    /// `2(j − k)`
    pub w_tilde: f64,
    pub(crate) g_h: f64,
    pub(crate) g_l: f64,
    pub(crate) g_hl: f64,
}

impl SeriesTermIJK {
    /// Term `i ∈ {1..4}`, `(j, k)` at time `t`.
    pub fn new(i: usize, j: i64, k: i64, t: f64, stat: &HighLowCloseStat, params: &ModelParams) -> Self {
        assert!((1..=4).contains(&i), "family index runs over 1..=4");
        let s2 = params.sigma_sq();
        let (a, b) = endpoints(i - 1, j, k, stat);
        let d = a.v - b.v;
        let (ddh, ddl) = (a.dh - b.dh, a.dl - b.dl);
        let (jf, kf) = (j as f64, k as f64);
        Self {
            i,
            j,
            k,
            a: a.v,
            b: b.v,
            mu: a.v * (1.0 - t) + b.v * t,
            g: d * d / (2.0 * s2),
            psi: phi(d, s2),
            tau: a.dh * (1.0 - t) + b.dh * t,
            tau_hat: a.dl * (1.0 - t) + b.dl * t,
            sign: SIGNS[i - 1],
            v: 2.0 * (jf * (1.0 - t) + kf * t),
            v_tilde: 2.0 * (jf * (1.0 - t) - kf * t),
            w: 2.0 * (jf + kf),
            w_tilde: 2.0 * (jf - kf),
            g_h: d * ddh / s2,
            g_l: d * ddl / s2,
            g_hl: ddh * ddl / s2,
        }
    }

    /// Coefficients of this term's contribution to `M₀, M₁, M₂`.
    pub fn coefficients(&self, t: f64, stat: &HighLowCloseStat, params: &ModelParams) -> MomentCoefficients {
        let st2 = params.sigma_sq() * t * (1.0 - t);
        MomentCoefficients::new(self.tau, self.tau_hat, self.g_h, self.g_l, self.g_hl, self.mu, st2, stat)
    }
}

/// Per-term coefficients of the moment series.
///
/// `A = ττ̂`, `B = τ∂_ℓg + τ̂∂_hg`, `Γ = −∂_hg∂_ℓg + ∂_h∂_ℓg`,
/// `C = Γ + A/σ_t²`; the density contribution is
/// `sψ[−Az²/σ_t⁴ + Bz/σ_t² + C]φ_{σ_t²}(z)` with `z = x − μ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentCoefficients {
    pub a: f64,
    pub b: f64,
    pub gamma: f64,
    pub c: f64,
    /// `(a⁽ᵐ⁾, â⁽ᵐ⁾, e⁽ᵐ⁾)` for m = 0, 1, 2.
    pub upper: [f64; 3],
    pub lower: [f64; 3],
    pub erf: [f64; 3],
}

impl MomentCoefficients {
    #[allow(clippy::too_many_arguments)]
    fn new(tau: f64, tau_hat: f64, g_h: f64, g_l: f64, g_hl: f64, mu: f64, st2: f64, stat: &HighLowCloseStat) -> Self {
        let (h, l) = (stat.high, stat.low);
        let a = tau * tau_hat;
        let b = tau * g_l + tau_hat * g_h;
        let gamma = -g_h * g_l + g_hl;
        let a1 = a - gamma * st2;
        Self {
            a,
            b,
            gamma,
            c: gamma + a / st2,
            upper: [0.0, a1, 2.0 * h * a - 2.0 * b * st2 - gamma * st2 * (mu + h)],
            lower: [0.0, a1, 2.0 * l * a - 2.0 * b * st2 - gamma * st2 * (mu + l)],
            erf: [gamma, b + gamma * mu, 2.0 * b * mu - 2.0 * a + gamma * (mu * mu + st2)],
        }
    }
}

/// `E_s(h−μ) − E_s(ℓ−μ)` with `E_s(x) = ½erf(x/(√2 s))`, evaluated through
/// `erfc` when both arguments sit in the same tail.
#[inline]
pub(crate) fn erf_window(h: f64, l: f64, mu: f64, s: f64) -> f64 {
    let uh = (h - mu) / (SQRT_2 * s);
    let ul = (l - mu) / (SQRT_2 * s);
    if ul >= 1.0 {
        0.5 * (erfc(ul) - erfc(uh))
    } else if uh <= -1.0 {
        0.5 * (erfc(-uh) - erfc(-ul))
    } else {
        0.5 * (erf(uh) - erf(ul))
    }
}

/// Time-independent part of one term.
#[derive(Debug, Clone, Copy)]
struct StaticTerm {
    #[cfg_attr(not(test), allow(dead_code))]
    i: usize,
    a: Affine,
    b: Affine,
    g: f64,
    weight: f64,
    g_h: f64,
    g_l: f64,
    gamma: f64,
}

/// The truncated `(i, j, k)` table for one statistic, reusable across times.
#[derive(Debug, Clone)]
pub struct TermTable {
    stat: HighLowCloseStat,
    s2: f64,
    window: i64,
    g_min: f64,
    terms: Vec<StaticTerm>,
}

/// Half-width `J` of the symmetric `(j, k)` window: the smallest `J` with
/// `exp(−2(JΔ)²/σ²) < tol`, plus one for the `(2J−1)Δ` exponent reached
/// when the close sits on a barrier.
pub fn window_half_width(range: f64, sigma: f64, ctrl: &SeriesControl) -> i64 {
    let tol = ctrl.tail_tolerance.min(0.5);
    let j = ceil(sigma / range * sqrt(-log(tol) / 2.0));
    if j.is_finite() && j < 1e9 {
        j as i64 + 1
    } else {
        i64::MAX
    }
}

impl TermTable {
    pub fn new(stat: HighLowCloseStat, params: &ModelParams, window: i64) -> Self {
        let s2 = params.sigma_sq();
        let norm = 1.0 / sqrt(2.0 * PI * s2);
        let mut terms = Vec::with_capacity((4 * (2 * window + 1) * (2 * window + 1)) as usize);
        let mut g_min = f64::INFINITY;
        for j in -window..=window {
            for k in -window..=window {
                for i in 0..4 {
                    let (a, b) = endpoints(i, j, k, &stat);
                    let d = a.v - b.v;
                    let g = d * d / (2.0 * s2);
                    g_min = g_min.min(g);
                    let (ddh, ddl) = (a.dh - b.dh, a.dl - b.dl);
                    let g_h = d * ddh / s2;
                    let g_l = d * ddl / s2;
                    let gamma = -g_h * g_l + ddh * ddl / s2;
                    terms.push(StaticTerm { i, a, b, g, weight: SIGNS[i] * norm * exp(-g), g_h, g_l, gamma });
                }
            }
        }
        terms.retain(|s| s.g - g_min <= PRUNE_EXPONENT);
        Self { stat, s2, window, g_min, terms }
    }

    pub fn window(&self) -> i64 {
        self.window
    }

    pub fn stat(&self) -> &HighLowCloseStat {
        &self.stat
    }

    /// Visits every non-negligible term at time `t` with
    /// `(sψ, μ, coefficients)`.
    fn for_each_active(&self, t: f64, mut visit: impl FnMut(f64, f64, &MomentCoefficients)) {
        let st2 = self.s2 * t * (1.0 - t);
        let (h, l) = (self.stat.high, self.stat.low);
        for s in &self.terms {
            let mu = s.a.v * (1.0 - t) + s.b.v * t;
            let out = if mu > h {
                mu - h
            } else if mu < l {
                l - mu
            } else {
                0.0
            };
            if s.g - self.g_min + out * out / (2.0 * st2) > PRUNE_EXPONENT {
                continue;
            }
            let tau = s.a.dh * (1.0 - t) + s.b.dh * t;
            let tau_hat = s.a.dl * (1.0 - t) + s.b.dl * t;
            let a = tau * tau_hat;
            let b = tau * s.g_l + tau_hat * s.g_h;
            let gamma = s.gamma;
            let a1 = a - gamma * st2;
            let co = MomentCoefficients {
                a,
                b,
                gamma,
                c: gamma + a / st2,
                upper: [0.0, a1, 2.0 * h * a - 2.0 * b * st2 - gamma * st2 * (mu + h)],
                lower: [0.0, a1, 2.0 * l * a - 2.0 * b * st2 - gamma * st2 * (mu + l)],
                erf: [gamma, b + gamma * mu, 2.0 * b * mu - 2.0 * a + gamma * (mu * mu + st2)],
            };
            visit(s.weight, mu, &co);
        }
    }

    /// `M₀, M₁, M₂` at an interior time.
    pub fn moments(&self, t: f64) -> [f64; 3] {
        let st2 = self.s2 * t * (1.0 - t);
        let st = sqrt(st2);
        let (h, l) = (self.stat.high, self.stat.low);
        let mut m = [0.0; 3];
        self.for_each_active(t, |w, mu, co| {
            let ph = phi(h - mu, st2);
            let pl = phi(l - mu, st2);
            let r = erf_window(h, l, mu, st);
            for n in 0..3 {
                m[n] += w * (co.upper[n] * ph - co.lower[n] * pl + co.erf[n] * r);
            }
        });
        m
    }

    /// Unnormalized density `Σ sψ H(x−μ) φ_{σ_t²}(x−μ)` at an interior time.
    pub fn density(&self, x: f64, t: f64) -> f64 {
        let st2 = self.s2 * t * (1.0 - t);
        let mut acc = 0.0;
        self.for_each_active(t, |w, mu, co| {
            let z = x - mu;
            let hz = -co.a * z * z / (st2 * st2) + co.b * z / st2 + co.c;
            acc += w * hz * phi(z, st2);
        });
        acc
    }

    /// `Σ sψ φ_{σ_t²}(x−μ)`, the generator itself.
    pub fn generator(&self, x: f64, t: f64) -> f64 {
        let st2 = self.s2 * t * (1.0 - t);
        let mut acc = 0.0;
        for s in &self.terms {
            let mu = s.a.v * (1.0 - t) + s.b.v * t;
            acc += s.weight * phi(x - mu, st2);
        }
        acc
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    #[cfg(test)]
    pub(crate) fn families(&self) -> impl Iterator<Item = usize> + '_ {
        self.terms.iter().map(|s| s.i)
    }
}
