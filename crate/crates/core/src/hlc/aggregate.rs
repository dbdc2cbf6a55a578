//! Sums of the per-term coefficients over `i`, the boundary terms from
//! integrating by parts, and the partial Gaussian moments `G_mn`.
//!
//! All four upper terms of a fixed `(j, k)` share `ψφ_{σ_t²}(h − μ)`. At the
//! low the shared value belongs to the group
//! `{(1, j, k), (2, j, k−1), (3, j+1, k), (4, j+1, k−1)}`.

use core::f64::consts::PI;

use libm::{exp, log, sqrt};

use crate::curve::MomentTriple;
use crate::error::{domain, Result};
use crate::extrema::HighLowCloseStat;
use crate::gaussian::{e_sigma, phi};
use crate::params::{ModelParams, SeriesControl};

use super::terms::{erf_window, window_half_width, SeriesTermIJK};

/// Group sums of the moment coefficients for one `(j, k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateCoefficients {
    /// `Ā = Σ_i s_i A_i`
    pub a_bar: f64,
    /// `Ā^ℓ`, summed over the lower group
    pub a_bar_low: f64,
    pub b_bar: f64,
    pub b_bar_low: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// `Γ̃₂`, the `Γ` of `(2, j, k−1)`
    pub gamma2_low: f64,
    /// `U^{m,h}` for m = 1, 2
    pub u_high: [f64; 2],
    /// `U^{m,ℓ}` for m = 1, 2
    pub u_low: [f64; 2],
}

pub(crate) fn lower_group(j: i64, k: i64) -> [(usize, i64, i64); 4] {
    [(1, j, k), (2, j, k - 1), (3, j + 1, k), (4, j + 1, k - 1)]
}

/// The aggregates summed term by term.
pub fn aggregate_coefficients(t: f64, stat: HighLowCloseStat, params: &ModelParams, j: i64, k: i64) -> AggregateCoefficients {
    let mut out = AggregateCoefficients {
        a_bar: 0.0,
        a_bar_low: 0.0,
        b_bar: 0.0,
        b_bar_low: 0.0,
        gamma1: 0.0,
        gamma2: 0.0,
        gamma2_low: 0.0,
        u_high: [0.0; 2],
        u_low: [0.0; 2],
    };
    for i in 1..=4 {
        let term = SeriesTermIJK::new(i, j, k, t, &stat, params);
        let co = term.coefficients(t, &stat, params);
        out.a_bar += term.sign * co.a;
        out.b_bar += term.sign * co.b;
        out.u_high[0] += term.sign * co.upper[1];
        out.u_high[1] += term.sign * co.upper[2];
        match i {
            1 => out.gamma1 = co.gamma,
            2 => out.gamma2 = co.gamma,
            _ => {}
        }
    }
    for (i, jj, kk) in lower_group(j, k) {
        let term = SeriesTermIJK::new(i, jj, kk, t, &stat, params);
        let co = term.coefficients(t, &stat, params);
        out.a_bar_low += term.sign * co.a;
        out.b_bar_low += term.sign * co.b;
        out.u_low[0] += term.sign * co.lower[1];
        out.u_low[1] += term.sign * co.lower[2];
        if i == 2 {
            out.gamma2_low = co.gamma;
        }
    }
    out
}

/// The same aggregates from their closed forms in `(j, k)`.
pub fn aggregate_closed_form(t: f64, stat: HighLowCloseStat, params: &ModelParams, j: i64, k: i64) -> AggregateCoefficients {
    let s2 = params.sigma_sq();
    let st2 = s2 * t * (1.0 - t);
    let (h, l, c) = (stat.high, stat.low, stat.close);
    let d = stat.range();
    let (jf, kf) = (j as f64, k as f64);
    let tt = t * (1.0 - t);
    let w = 2.0 * (jf + kf);
    let wt = 2.0 * (jf - kf);
    let g1 = (c - w * d) * (c - w * d) / (2.0 * s2);
    let g2 = (2.0 * h - c - wt * d) * (2.0 * h - c - wt * d) / (2.0 * s2);
    let g2l = (2.0 * l - c - wt * d) * (2.0 * l - c - wt * d) / (2.0 * s2);
    let gamma1 = (2.0 * g1 - 1.0) * w * w / s2;
    let gamma2 = (2.0 * g2 - 1.0) * wt * (wt - 2.0) / s2;
    let gamma2_low = (2.0 * g2l - 1.0) * wt * (wt + 2.0) / s2;
    let a_bar = (32.0 * jf * kf + 8.0 * (jf - kf)) * tt;
    let a_bar_low = (32.0 * jf * kf - 8.0 * (jf - kf)) * tt;
    let b_bar = (-32.0 * jf * kf * d - 8.0 * (h - c) * jf + 8.0 * h * kf) / s2;
    let b_bar_low = (32.0 * jf * kf * d + 8.0 * (l - c) * jf - 8.0 * l * kf) / s2;
    AggregateCoefficients {
        a_bar,
        a_bar_low,
        b_bar,
        b_bar_low,
        gamma1,
        gamma2,
        gamma2_low,
        u_high: [
            a_bar + 2.0 * (gamma2 - gamma1) * st2,
            2.0 * h * a_bar - 2.0 * st2 * b_bar + 4.0 * h * st2 * (gamma2 - gamma1),
        ],
        u_low: [
            a_bar_low + 2.0 * (gamma2_low - gamma1) * st2,
            2.0 * l * a_bar_low - 2.0 * st2 * b_bar_low + 4.0 * l * st2 * (gamma2_low - gamma1),
        ],
    }
}

/// Boundary terms `−x^m[A∂_x f + Bf]` of one upper group at `x = h` and
/// one lower group at `x = ℓ` (the common factor `x^m` dropped).
///
/// Each group is rescaled by its largest `e^{−g}φ` factor so that far
/// indices do not underflow; `log_upper` and `log_lower` restore the scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryResidual {
    pub upper: f64,
    pub lower: f64,
    /// Sum of the magnitudes of each group's contributions.
    pub upper_scale: f64,
    pub lower_scale: f64,
    pub log_upper: f64,
    pub log_lower: f64,
}

impl BoundaryResidual {
    /// The unscaled sum of both groups.
    pub fn residual(&self) -> f64 {
        self.upper * exp(self.log_upper) + self.lower * exp(self.log_lower)
    }

    /// Worse of the two groups' residual-to-magnitude ratios; zero when
    /// every term vanishes.
    pub fn relative(&self) -> f64 {
        let r = |v: f64, s: f64| if v == 0.0 { 0.0 } else { v.abs() / s };
        r(self.upper, self.upper_scale).max(r(self.lower, self.lower_scale))
    }
}

pub fn boundary_cancellation_check(t: f64, stat: HighLowCloseStat, params: &ModelParams, j: i64, k: i64) -> BoundaryResidual {
    let st2 = params.sigma_sq() * t * (1.0 - t);
    let group = |members: [(usize, i64, i64); 4], x: f64| {
        let parts = members.map(|(i, jj, kk)| {
            let term = SeriesTermIJK::new(i, jj, kk, t, &stat, params);
            let co = term.coefficients(t, &stat, params);
            let z = x - term.mu;
            (term.sign, co.a, co.b, z, -term.g - z * z / (2.0 * st2))
        });
        let top = parts.iter().map(|p| p.4).fold(f64::NEG_INFINITY, f64::max);
        let (mut sum, mut scale) = (0.0, 0.0);
        for (sign, a, b, z, lg) in parts {
            let f = exp(lg - top);
            let (p, q) = (-a * z / st2 * f, b * f);
            scale += p.abs() + q.abs();
            sum -= sign * (p + q);
        }
        let log = top - 0.5 * log(2.0 * PI * params.sigma_sq()) - 0.5 * log(2.0 * PI * st2);
        (sum, scale, log)
    };
    let (upper, upper_scale, log_upper) = group([(1, j, k), (2, j, k), (3, j, k), (4, j, k)], stat.high);
    let (lower, lower_scale, log_lower) = group(lower_group(j, k), stat.low);
    BoundaryResidual { upper, lower, upper_scale, lower_scale, log_upper, log_lower }
}

/// Moments assembled from the grouped coefficients:
/// `M_m = Σ_{jk} [U^{m,h} f_{1jk}(h) − U^{m,ℓ} f_{1jk}(ℓ)] + Σ_{ijk} s_i ψ e^{(m)} R`.
pub fn moments_chl_grouped(t: f64, stat: HighLowCloseStat, params: &ModelParams, ctrl: &SeriesControl) -> Result<MomentTriple> {
    if !(t > 0.0 && t < 1.0) {
        return Err(domain("time must lie strictly inside (0, 1)", t));
    }
    ctrl.check_range(stat.range(), params.sigma())?;
    let window = window_half_width(stat.range(), params.sigma(), ctrl);
    if window > super::FALLBACK_WINDOW {
        return Err(domain("range too small for the grouped expansion", stat.range()));
    }
    let st2 = params.sigma_sq() * t * (1.0 - t);
    let st = sqrt(st2);
    let (h, l) = (stat.high, stat.low);
    let mut m = [0.0; 3];
    for j in -window..=window {
        for k in -window..=window {
            let agg = aggregate_closed_form(t, stat, params, j, k);
            let t1 = SeriesTermIJK::new(1, j, k, t, &stat, params);
            let fh = t1.psi * phi(h - t1.mu, st2);
            let fl = t1.psi * phi(l - t1.mu, st2);
            for n in 0..2 {
                m[n + 1] += agg.u_high[n] * fh - agg.u_low[n] * fl;
            }
            for i in 1..=4 {
                let term = SeriesTermIJK::new(i, j, k, t, &stat, params);
                let co = term.coefficients(t, &stat, params);
                let r = erf_window(h, l, term.mu, st);
                for n in 0..3 {
                    m[n] += term.sign * term.psi * co.erf[n] * r;
                }
            }
        }
    }
    Ok(MomentTriple { m0: m[0], m1: m[1], m2: m[2] })
}

/// `G_mn(μ, h, ℓ, σ) = ∫_{ℓ−μ}^{h−μ} (x+μ)^m x^n φ_{σ²}(x) dx` for `m + n ≤ 2`.
pub fn gmn(m: u32, n: u32, mu: f64, h: f64, l: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(domain("sigma must be positive", sigma));
    }
    let s2 = sigma * sigma;
    let r = e_sigma(h - mu, sigma) - e_sigma(l - mu, sigma);
    let (ph, pl) = (phi(h - mu, s2), phi(l - mu, s2));
    Ok(match (m, n) {
        (0, 0) => r,
        (0, 1) => s2 * (pl - ph),
        (1, 0) => mu * r + s2 * (pl - ph),
        (2, 0) => (s2 + mu * mu) * r + s2 * ((l + mu) * pl - (h + mu) * ph),
        (1, 1) => s2 * r + s2 * (l * pl - h * ph),
        (0, 2) => s2 * r + s2 * ((l - mu) * pl - (h - mu) * ph),
        _ => return Err(domain("G_mn is provided for m + n <= 2", (m + n) as f64)),
    })
}
