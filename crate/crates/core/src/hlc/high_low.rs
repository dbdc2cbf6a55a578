//! Law of `B(t)` given only the high and low.
//!
//! Integrating the generator over the close gives
//! `G_HL = Q(x, t, h, ℓ)·Σ_k [R_{1k} − R_{2k}]`, where `R_{1k}` and `R_{2k}`
//! are scaled-erf differences between artificial limits `H` and `L`.
//! The density is `−∂_ℓ∂_h G_HL` with `H, L` held fixed, then set to `h, ℓ`.

use libm::sqrt;

use crate::close_high::{check_time, check_time_closed, integrate_pieces, sorted_breaks, ENDPOINT_EPS};
use crate::curve::{ConditionalCurve, MomentTriple};
use crate::error::{domain, Error, Result};
use crate::extrema::{check_barriers, density_hl, density_hlc, HighLowCloseStat};
use crate::gaussian::phi;
use crate::params::{ModelParams, SeriesControl, TimeGrid};
use crate::quadrature::{integrate, QuadratureControl};

use super::product::{neg_mixed, q_jet, sum_symmetric, Jet};
use super::terms::erf_window;

/// Jet in `(h, ℓ)` of `Σ_k [R_{1k} − R_{2k}]` at `H = h`, `L = ℓ`.
fn close_mass_jet(x: f64, t: f64, h: f64, l: f64, s2: f64, ctrl: &SeriesControl) -> Result<Jet> {
    let d = h - l;
    let v = (1.0 - t) * s2;
    let s = sqrt(v);
    // y = limit − μ with slopes (α, β) shared by both limits
    let part = |mu: f64, alpha: f64, beta: f64| -> Jet {
        let (yh, yl) = (h - mu, l - mu);
        let (ph, pl) = (phi(yh, v), phi(yl, v));
        let dp = ph - pl;
        let dd = -(yh * ph - yl * pl) / v;
        [erf_window(h, l, mu, s), alpha * dp, beta * dp, alpha * beta * dd]
    };
    sum_symmetric(ctrl, |k| {
        let kf = k as f64;
        let r1 = part(x + 2.0 * kf * d, -2.0 * kf, 2.0 * kf);
        let r2 = part(2.0 * h - x + 2.0 * kf * d, -2.0 - 2.0 * kf, 2.0 * kf);
        [r1[0] - r2[0], r1[1] - r2[1], r1[2] - r2[2], r1[3] - r2[3]]
    })
}

fn check_args(x: f64, t: f64, h: f64, l: f64) -> Result<()> {
    check_barriers(h, l)?;
    check_time(t)?;
    if !(x >= l && x <= h) {
        return Err(domain("position must lie in [low, high]", x));
    }
    Ok(())
}

/// `G_HL(x, t, h, ℓ)` with the close integrated over `[ℓ, h]`.
pub fn distribution_hl(x: f64, t: f64, h: f64, l: f64, params: &ModelParams, ctrl: &SeriesControl) -> Result<f64> {
    check_args(x, t, h, l)?;
    let s2 = params.sigma_sq();
    Ok(q_jet(x, t, h, l, s2, ctrl)?[0] * close_mass_jet(x, t, h, l, s2, ctrl)?[0])
}

/// Joint density of `(B(t) = x, high, low)`.
pub fn joint_density_hl(x: f64, t: f64, h: f64, l: f64, params: &ModelParams, ctrl: &SeriesControl) -> Result<f64> {
    check_args(x, t, h, l)?;
    joint_unchecked(x, t, h, l, params.sigma_sq(), ctrl)
}

fn joint_unchecked(x: f64, t: f64, h: f64, l: f64, s2: f64, ctrl: &SeriesControl) -> Result<f64> {
    Ok(neg_mixed(q_jet(x, t, h, l, s2, ctrl)?, close_mass_jet(x, t, h, l, s2, ctrl)?))
}

/// `p(x, t | h, ℓ)`.
pub fn conditional_density_hl(x: f64, t: f64, h: f64, l: f64, params: &ModelParams, ctrl: &SeriesControl) -> Result<f64> {
    let joint = joint_density_hl(x, t, h, l, params, ctrl)?;
    let p = density_hl(h, l, params, ctrl)?;
    if !(p > 1e-300) {
        return Err(Error::Underflow { value: p });
    }
    Ok((joint / p).max(0.0))
}

/// Moments of `B(t)` jointly with `(high, low)`, by quadrature over `[ℓ, h]`.
/// At `t = 1` the close is integrated against the `(h, ℓ, c)` density.
pub fn moments_hl(
    t: f64,
    h: f64,
    l: f64,
    params: &ModelParams,
    ctrl: &SeriesControl,
    quad: &QuadratureControl,
) -> Result<MomentTriple> {
    check_barriers(h, l)?;
    check_time_closed(t)?;
    let s = params.sigma();
    if t < ENDPOINT_EPS {
        let p = density_hl(h, l, params, ctrl)?;
        return Ok(MomentTriple { m0: p, m1: 0.0, m2: 0.0 });
    }
    let mut failure: Option<Error> = None;
    let m = if 1.0 - t < ENDPOINT_EPS {
        integrate_pieces(
            |c| match density_hlc(HighLowCloseStat { high: h, low: l, close: c }, params, ctrl) {
                Ok(p) => [p, c * p, c * c * p],
                Err(e) => {
                    failure.get_or_insert(e);
                    [0.0; 3]
                }
            },
            &sorted_breaks(l, h, &[0.0]),
            quad,
        )?
    } else {
        let s2 = params.sigma_sq();
        let wl = 5.0 * s * sqrt(t);
        integrate_pieces(
            |x| match joint_unchecked(x, t, h, l, s2, ctrl) {
                Ok(p) => [p, x * p, x * x * p],
                Err(e) => {
                    failure.get_or_insert(e);
                    [0.0; 3]
                }
            },
            &sorted_breaks(l, h, &[0.0, -wl, wl]),
            quad,
        )?
    };
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(MomentTriple { m0: m[0], m1: m[1], m2: m[2] })
}

/// Mean and variance of `B(t)` given `(high, low)` over `grid`.
pub fn conditional_curve_hl(
    h: f64,
    l: f64,
    params: &ModelParams,
    grid: &TimeGrid,
    ctrl: &SeriesControl,
    quad: &QuadratureControl,
) -> Result<ConditionalCurve> {
    check_barriers(h, l)?;
    ctrl.check_range(h - l, params.sigma())?;
    let mut curve = ConditionalCurve::with_capacity(grid.len());
    for &t in grid.points() {
        if t < ENDPOINT_EPS {
            curve.push(t, 0.0, 0.0);
            continue;
        }
        let (mean, var) = moments_hl(t, h, l, params, ctrl, quad)?.mean_variance()?;
        curve.push(t, mean.clamp(l, h), var);
    }
    Ok(curve)
}

/// `∫_ℓ^h p(x, t | h, ℓ) dx`, for diagnostics.
pub fn conditional_mass_hl(t: f64, h: f64, l: f64, params: &ModelParams, ctrl: &SeriesControl, quad: &QuadratureControl) -> Result<f64> {
    check_barriers(h, l)?;
    check_time(t)?;
    let s2 = params.sigma_sq();
    let p = density_hl(h, l, params, ctrl)?;
    let v = integrate(|x| joint_unchecked(x, t, h, l, s2, ctrl).unwrap_or(f64::NAN), l, h, quad)?.value;
    if v.is_nan() {
        return Err(domain("series failed inside the integration window", t));
    }
    Ok(v / p)
}
