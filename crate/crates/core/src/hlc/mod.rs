//! Law of `B(t)` given the close, high and low, and given high and low.
//!
//! By Chapman–Kolmogorov the path splits at `t` into two absorbed pieces,
//! `G(x, t, h, ℓ, c) = Q(x, t, h, ℓ)·Q_R(x, t, h, ℓ, c)`, and the joint
//! density is `−∂_ℓ∂_h G`. Expanding both reflection series turns `G` into
//! a double sum of shifted Gaussians in `x`, so every moment is a sum of
//! partial Gaussian moments over `[ℓ, h]`.
//!
//! Means are normalized by `M₀ = p(h, ℓ, c)`.

mod aggregate;
mod high_low;
mod product;
mod terms;

pub use aggregate::{
    aggregate_closed_form, aggregate_coefficients, boundary_cancellation_check, gmn, moments_chl_grouped,
    AggregateCoefficients, BoundaryResidual,
};
pub use high_low::{
    conditional_curve_hl, conditional_density_hl, conditional_mass_hl, distribution_hl, joint_density_hl, moments_hl,
};
pub use product::{barrier_series_q, generator_g, generator_g_series, joint_density_chl_product, quadrature_moments_chl};
pub use terms::{window_half_width, MomentCoefficients, SeriesTermIJK, TermTable};

use crate::close_high::{check_time, check_time_closed, DEGENERATE_EPS, ENDPOINT_EPS};
use crate::curve::{ConditionalCurve, MomentTriple};
use crate::error::{domain, Error, Result};
use crate::extrema::{density_hlc, HighLowCloseStat};
use crate::params::{ModelParams, SeriesControl, TimeGrid};

/// Beyond this `(j, k)` half-width the moments switch to quadrature.
pub const FALLBACK_WINDOW: i64 = 200;

enum Route {
    Series(TermTable),
    Quadrature,
}

impl Route {
    fn new(stat: HighLowCloseStat, params: &ModelParams, ctrl: &SeriesControl) -> Result<Self> {
        ctrl.validate()?;
        ctrl.check_range(stat.range(), params.sigma())?;
        let j = window_half_width(stat.range(), params.sigma(), ctrl);
        Ok(if j > FALLBACK_WINDOW { Route::Quadrature } else { Route::Series(TermTable::new(stat, params, j)) })
    }

    fn moments(&self, t: f64, stat: HighLowCloseStat, params: &ModelParams, ctrl: &SeriesControl) -> Result<MomentTriple> {
        match self {
            Route::Series(table) => {
                let [m0, m1, m2] = table.moments(t);
                Ok(MomentTriple { m0, m1, m2 })
            }
            Route::Quadrature => quadrature_moments_chl(t, stat, params, ctrl, &params.quadrature),
        }
    }
}

/// Closed-form `M₀, M₁, M₂` of `B(t)` jointly with `(high, low, close)`.
///
/// The endpoints use the pinned limits. When the `(j, k)` window would
/// exceed [`FALLBACK_WINDOW`] the quadrature route is used instead.
pub fn moments_chl(t: f64, stat: HighLowCloseStat, params: &ModelParams, ctrl: &SeriesControl) -> Result<MomentTriple> {
    check_time_closed(t)?;
    let route = Route::new(stat, params, ctrl)?;
    if t < ENDPOINT_EPS || 1.0 - t < ENDPOINT_EPS {
        let p = density_hlc(stat, params, ctrl)?;
        let x = if t < ENDPOINT_EPS { 0.0 } else { stat.close };
        return Ok(MomentTriple { m0: p, m1: x * p, m2: x * x * p });
    }
    route.moments(t, stat, params, ctrl)
}

/// `p(x, t | h, ℓ, c)` from the shifted-Gaussian expansion.
pub fn conditional_density_chl(x: f64, t: f64, stat: HighLowCloseStat, params: &ModelParams, ctrl: &SeriesControl) -> Result<f64> {
    check_time(t)?;
    if !(x >= stat.low && x <= stat.high) {
        return Err(domain("position must lie in [low, high]", x));
    }
    match Route::new(stat, params, ctrl)? {
        Route::Series(table) => {
            let m0 = table.moments(t)[0];
            if !(m0 > 1e-300) {
                return Err(Error::Underflow { value: m0 });
            }
            Ok((table.density(x, t) / m0).max(0.0))
        }
        Route::Quadrature => {
            let p = density_hlc(stat, params, ctrl)?;
            if !(p > 1e-300) {
                return Err(Error::Underflow { value: p });
            }
            Ok((joint_density_chl_product(x, t, stat, params, ctrl)? / p).max(0.0))
        }
    }
}

/// Moves the statistic off the zero-density edges `h = c = 0` and `ℓ = c = 0`.
fn regularize(stat: HighLowCloseStat, params: &ModelParams) -> HighLowCloseStat {
    let eps = DEGENERATE_EPS * params.sigma();
    let mut s = stat;
    if s.high - s.close < eps && s.high < eps {
        s.high += eps;
    }
    if s.close - s.low < eps && s.low > -eps {
        s.low -= eps;
    }
    s
}

/// Mean and variance of `B(t)` given `(high, low, close)` over `grid`.
pub fn conditional_curve_chl(
    stat: HighLowCloseStat,
    params: &ModelParams,
    grid: &TimeGrid,
    ctrl: &SeriesControl,
) -> Result<ConditionalCurve> {
    let stat = regularize(stat, params);
    let route = Route::new(stat, params, ctrl)?;
    let mut curve = ConditionalCurve::with_capacity(grid.len());
    for &t in grid.points() {
        if t < ENDPOINT_EPS {
            curve.push(t, 0.0, 0.0);
        } else if 1.0 - t < ENDPOINT_EPS {
            curve.push(t, stat.close, 0.0);
        } else {
            let (mean, var) = route.moments(t, stat, params, ctrl)?.mean_variance()?;
            curve.push(t, mean.clamp(stat.low, stat.high), var);
        }
    }
    Ok(curve)
}
