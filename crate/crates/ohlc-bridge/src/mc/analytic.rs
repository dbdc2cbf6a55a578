//! Closed-form curve for any conditioning set, evaluated at a bin's mean
//! statistic.

use ohlc_bridge_core::close_high::{conditional_curve_ch, conditional_curve_h};
use ohlc_bridge_core::hlc::{conditional_curve_chl, conditional_curve_hl};
use ohlc_bridge_core::{ConditionalCurve, HighCloseStat, HighLowCloseStat, ModelParams, TimeGrid};

use crate::error::{config, Result};
use crate::mc::bins::Stat;

fn has(dims: &[Stat], s: Stat) -> bool {
    dims.contains(&s)
}

fn negate(mut c: ConditionalCurve) -> ConditionalCurve {
    for m in c.mean.iter_mut() {
        *m = -*m;
    }
    c
}

/// `q` is (close, high, low); entries not in `dims` are ignored.
pub fn analytic_curve(dims: &[Stat], q: [f64; 3], params: &ModelParams, grid: &TimeGrid) -> Result<ConditionalCurve> {
    let [c, h, l] = q;
    let key = (has(dims, Stat::Close), has(dims, Stat::High), has(dims, Stat::Low));
    let curve = match key {
        (true, false, false) => {
            let mut out = ConditionalCurve::with_capacity(grid.len());
            for &t in grid.points() {
                out.push(t, c * t, params.sigma_sq() * t * (1.0 - t));
            }
            out
        }
        (false, true, false) => conditional_curve_h(h, params, grid, &params.quadrature)?,
        (false, false, true) => negate(conditional_curve_h(-l, params, grid, &params.quadrature)?),
        (true, true, false) => conditional_curve_ch(HighCloseStat::new(h, c)?, params, grid)?,
        (true, false, true) => negate(conditional_curve_ch(HighCloseStat::new(-l, -c)?, params, grid)?),
        (false, true, true) => conditional_curve_hl(h, l, params, grid, &params.series, &params.quadrature)?,
        (true, true, true) => conditional_curve_chl(HighLowCloseStat::new(h, l, c)?, params, grid, &params.series)?,
        (false, false, false) => return Err(config("empty conditioning set")),
    };
    Ok(curve)
}
