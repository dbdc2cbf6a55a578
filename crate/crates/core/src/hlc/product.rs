//! Product form `G = Q·Q_R` of the generator, built from two single-index
//! reflection series, and the quadrature route to the moments.

use libm::sqrt;

use crate::close_high::{check_time, check_time_closed, integrate_pieces, sorted_breaks, ENDPOINT_EPS};
use crate::curve::MomentTriple;
use crate::error::{domain, Error, Result};
use crate::extrema::{check_barriers, density_hlc, HighLowCloseStat};
use crate::gaussian::phi;
use crate::params::{ModelParams, SeriesControl};
use crate::quadrature::QuadratureControl;

use super::terms::{window_half_width, TermTable};

/// `(f, ∂_h f, ∂_ℓ f, ∂_h∂_ℓ f)`.
pub(crate) type Jet = [f64; 4];

/// Jet of `φ_v(y)` where `y` is affine in `(h, ℓ)` with slopes `(α, β)`.
#[inline]
pub(crate) fn gauss_jet(y: f64, alpha: f64, beta: f64, v: f64) -> Jet {
    let f = phi(y, v);
    let d1 = -y / v * f;
    let d2 = (y * y / (v * v) - 1.0 / v) * f;
    [f, alpha * d1, beta * d1, alpha * beta * d2]
}

#[inline]
pub(crate) fn sub(a: Jet, b: Jet) -> Jet {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]]
}

/// `term(0) + Σ_{n≥1} [term(n) + term(−n)]`, stopped once two consecutive
/// index pairs are negligible in every component.
pub(crate) fn sum_symmetric(ctrl: &SeriesControl, mut term: impl FnMut(i64) -> Jet) -> Result<Jet> {
    ctrl.validate()?;
    let mut sum = term(0);
    let mut small = 0;
    let mut last = f64::INFINITY;
    for n in 1..ctrl.max_terms as i64 {
        let (p, m) = (term(n), term(-n));
        let mut negligible = true;
        last = 0.0;
        for i in 0..4 {
            let d = p[i] + m[i];
            sum[i] += d;
            last = last.max(d.abs());
            if d.abs() >= ctrl.tail_tolerance * (1.0 + sum[i].abs()) {
                negligible = false;
            }
        }
        if negligible {
            small += 1;
            if small >= 2 && n >= 2 {
                return Ok(sum);
            }
        } else {
            small = 0;
        }
    }
    Err(Error::Truncation { terms: ctrl.max_terms, last_term: last })
}

/// Jet of `Q(x, t, h, ℓ)` with respect to the barriers.
pub(crate) fn q_jet(x: f64, t: f64, h: f64, l: f64, s2: f64, ctrl: &SeriesControl) -> Result<Jet> {
    let d = h - l;
    let v = t * s2;
    sum_symmetric(ctrl, |j| {
        let jf = j as f64;
        sub(gauss_jet(x - 2.0 * jf * d, -2.0 * jf, 2.0 * jf, v), gauss_jet(x - 2.0 * h + 2.0 * jf * d, -2.0 + 2.0 * jf, -2.0 * jf, v))
    })
}

/// Jet of `Q_R(x, t, h, ℓ, c) = Q(c−x, 1−t, h−x, ℓ−x)` at fixed `x`, `c`.
pub(crate) fn qr_jet(x: f64, t: f64, h: f64, l: f64, c: f64, s2: f64, ctrl: &SeriesControl) -> Result<Jet> {
    let d = h - l;
    let v = (1.0 - t) * s2;
    sum_symmetric(ctrl, |k| {
        let kf = k as f64;
        sub(
            gauss_jet(x - c + 2.0 * kf * d, 2.0 * kf, -2.0 * kf, v),
            gauss_jet(x - 2.0 * h + c - 2.0 * kf * d, -2.0 - 2.0 * kf, 2.0 * kf, v),
        )
    })
}

/// `−∂_ℓ∂_h(f·g)` from two jets.
#[inline]
pub(crate) fn neg_mixed(f: Jet, g: Jet) -> f64 {
    -(f[3] * g[0] + f[1] * g[2] + f[2] * g[1] + f[0] * g[3])
}

fn check_position(x: f64, h: f64, l: f64) -> Result<()> {
    if !(x >= l && x <= h) {
        return Err(domain("position must lie in [low, high]", x));
    }
    Ok(())
}

/// Density of reaching `x` at time `t` without leaving `[ℓ, h]`:
/// `Σ_j [φ_{tσ²}(x − 2jΔ) − φ_{tσ²}(x − 2h + 2jΔ)]`.
pub fn barrier_series_q(x: f64, t: f64, h: f64, l: f64, params: &ModelParams, ctrl: &SeriesControl) -> Result<f64> {
    check_barriers(h, l)?;
    if !(t > 0.0 && t <= 1.0) {
        return Err(domain("time must lie in (0, 1]", t));
    }
    check_position(x, h, l)?;
    if x == h || x == l {
        return Ok(0.0);
    }
    Ok(q_jet(x, t, h, l, params.sigma_sq(), ctrl)?[0])
}

fn check_generator_args(x: f64, t: f64, stat: &HighLowCloseStat) -> Result<()> {
    check_time(t)?;
    check_position(x, stat.high, stat.low)
}

/// `G(x, t, h, ℓ, c) = Q(x, t, h, ℓ)·Q_R(x, t, h, ℓ, c)`.
///
/// Debug builds also evaluate the flattened `(i, j, k)` expansion and
/// assert agreement to 1e-10.
pub fn generator_g(x: f64, t: f64, stat: HighLowCloseStat, params: &ModelParams, ctrl: &SeriesControl) -> Result<f64> {
    check_generator_args(x, t, &stat)?;
    if x == stat.high || x == stat.low {
        return Ok(0.0);
    }
    let s2 = params.sigma_sq();
    let q = q_jet(x, t, stat.high, stat.low, s2, ctrl)?[0];
    let r = qr_jet(x, t, stat.high, stat.low, stat.close, s2, ctrl)?[0];
    let g = q * r;
    debug_assert!({
        let s = generator_g_series(x, t, stat, params, ctrl)?;
        let peak = 1.0 / (2.0 * core::f64::consts::PI * s2 * sqrt(t * (1.0 - t)));
        (s - g).abs() <= 1e-10 * g.abs() + 1e-13 * peak
    });
    Ok(g)
}

/// The generator as the flattened sum `Σ_{ijk} s_i ψ_{ijk} φ_{σ_t²}(x − μ_{ijk})`.
pub fn generator_g_series(x: f64, t: f64, stat: HighLowCloseStat, params: &ModelParams, ctrl: &SeriesControl) -> Result<f64> {
    check_generator_args(x, t, &stat)?;
    ctrl.validate()?;
    let j = window_half_width(stat.range(), params.sigma(), ctrl);
    if j > super::FALLBACK_WINDOW {
        return Err(Error::Truncation { terms: ctrl.max_terms, last_term: f64::NAN });
    }
    Ok(TermTable::new(stat, params, j).generator(x, t))
}

/// Joint density of `(B(t) = x, high, low, close)` as
/// `−[∂_h∂_ℓQ·Q_R + ∂_hQ·∂_ℓQ_R + ∂_ℓQ·∂_hQ_R + Q·∂_h∂_ℓQ_R]`.
pub fn joint_density_chl_product(x: f64, t: f64, stat: HighLowCloseStat, params: &ModelParams, ctrl: &SeriesControl) -> Result<f64> {
    check_generator_args(x, t, &stat)?;
    joint_density_unchecked(x, t, &stat, params.sigma_sq(), ctrl)
}

fn joint_density_unchecked(x: f64, t: f64, stat: &HighLowCloseStat, s2: f64, ctrl: &SeriesControl) -> Result<f64> {
    let q = q_jet(x, t, stat.high, stat.low, s2, ctrl)?;
    let r = qr_jet(x, t, stat.high, stat.low, stat.close, s2, ctrl)?;
    Ok(neg_mixed(q, r))
}

/// `M₀, M₁, M₂` by adaptive quadrature of `x^m` times the product-form
/// joint density over `[ℓ, h]`.
pub fn quadrature_moments_chl(
    t: f64,
    stat: HighLowCloseStat,
    params: &ModelParams,
    ctrl: &SeriesControl,
    quad: &QuadratureControl,
) -> Result<MomentTriple> {
    check_time_closed(t)?;
    let c = stat.close;
    if t < ENDPOINT_EPS || 1.0 - t < ENDPOINT_EPS {
        let p = density_hlc(stat, params, ctrl)?;
        let x = if t < ENDPOINT_EPS { 0.0 } else { c };
        return Ok(MomentTriple { m0: p, m1: x * p, m2: x * x * p });
    }
    let s2 = params.sigma_sq();
    let s = params.sigma();
    let (h, l) = (stat.high, stat.low);
    let wl = 5.0 * s * sqrt(t);
    let wr = 5.0 * s * sqrt(1.0 - t);
    let breaks = sorted_breaks(l, h, &[0.0, c, -wl, wl, c - wr, c + wr]);
    let mut failure = None;
    let m = integrate_pieces(
        |x| match joint_density_unchecked(x, t, &stat, s2, ctrl) {
            Ok(p) => [p, x * p, x * x * p],
            Err(e) => {
                failure.get_or_insert(e);
                [0.0; 3]
            }
        },
        &breaks,
        quad,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(MomentTriple { m0: m[0], m1: m[1], m2: m[2] })
}
