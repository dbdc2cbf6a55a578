//! Per-bar interpolation of OHLC bars.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use ohlc_bridge_core::close_high::conditional_curve_ch;
use ohlc_bridge_core::hlc::conditional_curve_chl;
use ohlc_bridge_core::volatility::{sigma_const, sigma_garman_klass, sigma_max_likelihood};
use ohlc_bridge_core::{ConditionalCurve, HighCloseStat, ModelParams, OhlcBar, TimeGrid, VolMethod, VolTimeMap};

use crate::error::{config, Result};
use crate::fmt::sig12;
use crate::mc::dump::csv_err;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// `E[B(τ)|c] = cτ`.
    Bridge,
    /// Conditioned on close and high.
    Ch,
    /// Conditioned on close, high and low.
    Chl,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Bridge => "bridge",
            Method::Ch => "ch",
            Method::Chl => "chl",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaChoice {
    Const,
    GarmanKlass,
    MaxLikelihood,
    /// A known variance applied to every bar.
    Known(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpolateOptions {
    pub method: Method,
    pub sigma: SigmaChoice,
    /// Curves are sampled at `grid_intervals + 1` uniform points in
    /// volatility time.
    pub grid_intervals: usize,
    pub voltime: Option<VolTimeMap>,
    /// Half-width, in bars, of the window whose `Mean[c²]` replaces a
    /// per-bar estimate that fails.
    pub fallback_window: usize,
    pub params: ModelParams,
}

impl InterpolateOptions {
    pub fn new(method: Method, sigma: SigmaChoice, grid_intervals: usize) -> Self {
        Self { method, sigma, grid_intervals, voltime: None, fallback_window: 10, params: ModelParams::unit() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarCurve {
    pub index: usize,
    pub sigma_sq: f64,
    pub sigma_method: &'static str,
    pub tau: Vec<f64>,
    pub t: Vec<f64>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarError {
    pub index: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationResult {
    pub method: Method,
    pub curves: Vec<BarCurve>,
    pub errors: Vec<BarError>,
}

fn vol_name(m: VolMethod) -> &'static str {
    match m {
        VolMethod::Const => "const",
        VolMethod::GarmanKlass => "gk",
        VolMethod::MaxLikelihood => "ml",
    }
}

fn window_const(bars: &[OhlcBar], i: usize, half: usize) -> ohlc_bridge_core::Result<f64> {
    let lo = i.saturating_sub(half);
    let hi = (i + half + 1).min(bars.len());
    Ok(sigma_const(&bars[lo..hi])?.sigma_sq)
}

fn bar_sigma(
    bars: &[OhlcBar],
    i: usize,
    global: Option<f64>,
    opts: &InterpolateOptions,
    warnings: &mut Vec<String>,
) -> ohlc_bridge_core::Result<(f64, &'static str)> {
    let bar = &bars[i];
    let est = match opts.sigma {
        SigmaChoice::Known(s) => return Ok((s, "known")),
        SigmaChoice::Const => return global.map(|s| (s, "const")).ok_or(ohlc_bridge_core::Error::EmptyInput),
        SigmaChoice::GarmanKlass => sigma_garman_klass(bar),
        SigmaChoice::MaxLikelihood => sigma_max_likelihood(bar, None, &opts.params.series),
    };
    match est {
        Ok(e) => Ok((e.sigma_sq, vol_name(e.method))),
        Err(e) => {
            let s = window_const(bars, i, opts.fallback_window)?;
            let msg = format!("bar {i}: {e}; using window Mean[c^2] = {s}");
            log::warn!("{msg}");
            warnings.push(msg);
            Ok((s, "const"))
        }
    }
}

fn curve_for(bar: &OhlcBar, sigma_sq: f64, grid: &TimeGrid, opts: &InterpolateOptions) -> ohlc_bridge_core::Result<ConditionalCurve> {
    let params = ModelParams::new(sigma_sq)?.with_series(opts.params.series).with_quadrature(opts.params.quadrature);
    match opts.method {
        Method::Bridge => {
            let mut c = ConditionalCurve::with_capacity(grid.len());
            for &t in grid.points() {
                c.push(t, bar.close * t, sigma_sq * t * (1.0 - t));
            }
            Ok(c)
        }
        Method::Ch => conditional_curve_ch(HighCloseStat::new(bar.high, bar.close)?, &params, grid),
        Method::Chl => conditional_curve_chl(bar.stat()?, &params, grid, &params.series),
    }
}

/// Interpolates every bar. Failures are collected per bar and do not stop
/// the batch; output order follows input order.
pub fn interpolate(bars: &[OhlcBar], opts: &InterpolateOptions) -> Result<InterpolationResult> {
    if opts.grid_intervals < 1 {
        return Err(config("grid needs at least one interval"));
    }
    let grid = TimeGrid::uniform(opts.grid_intervals)?;
    let global = match opts.sigma {
        SigmaChoice::Const => Some(sigma_const(bars)?.sigma_sq),
        SigmaChoice::Known(s) if !(s > 0.0) => return Err(config(format!("known sigma^2 must be positive, got {s}"))),
        _ => None,
    };
    let results: Vec<std::result::Result<BarCurve, BarError>> = (0..bars.len())
        .into_par_iter()
        .map(|i| {
            let mut warnings = Vec::new();
            let fail = |e: ohlc_bridge_core::Error| BarError { index: i, message: e.to_string() };
            let (sigma_sq, sigma_method) = bar_sigma(bars, i, global, opts, &mut warnings).map_err(fail)?;
            let c = curve_for(&bars[i], sigma_sq, &grid, opts).map_err(fail)?;
            let t = match &opts.voltime {
                Some(m) => c.t.iter().map(|&u| m.t_at(u)).collect(),
                None => c.t.clone(),
            };
            Ok(BarCurve { index: i, sigma_sq, sigma_method, tau: c.t, t, mean: c.mean, variance: c.variance, warnings })
        })
        .collect();
    let mut curves = Vec::new();
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(c) => curves.push(c),
            Err(e) => {
                log::warn!("bar {}: {}", e.index, e.message);
                errors.push(e);
            }
        }
    }
    Ok(InterpolationResult { method: opts.method, curves, errors })
}

#[derive(Serialize)]
struct Row<'a> {
    bar_id: &'a str,
    t: f64,
    tau: f64,
    mean: f64,
    variance: f64,
    sigma_sq: f64,
    method: &'static str,
}

fn round12(v: f64) -> f64 {
    sig12(v).parse().unwrap_or(v)
}

/// `bar_id, t, tau, mean, variance, sigma_sq, method` rows.
pub fn write_csv<W: Write>(w: W, result: &InterpolationResult, ids: &[String]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["bar_id", "t", "tau", "mean", "variance", "sigma_sq", "method"]).map_err(csv_err)?;
    for c in &result.curves {
        for k in 0..c.tau.len() {
            wr.write_record([
                ids[c.index].as_str(),
                &sig12(c.t[k]),
                &sig12(c.tau[k]),
                &sig12(c.mean[k]),
                &sig12(c.variance[k]),
                &sig12(c.sigma_sq),
                result.method.name(),
            ])
            .map_err(csv_err)?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// `{"rows": [...], "errors": [...]}` with the CSV columns as fields.
pub fn write_json<W: Write>(mut w: W, result: &InterpolationResult, ids: &[String]) -> Result<()> {
    let mut rows = Vec::new();
    for c in &result.curves {
        for k in 0..c.tau.len() {
            rows.push(Row {
                bar_id: &ids[c.index],
                t: round12(c.t[k]),
                tau: round12(c.tau[k]),
                mean: round12(c.mean[k]),
                variance: round12(c.variance[k]),
                sigma_sq: round12(c.sigma_sq),
                method: result.method.name(),
            });
        }
    }
    let errors: Vec<serde_json::Value> = result
        .errors
        .iter()
        .map(|e| serde_json::json!({ "bar_id": ids[e.index], "message": e.message }))
        .collect();
    serde_json::to_writer_pretty(&mut w, &serde_json::json!({ "rows": rows, "errors": errors })).map_err(std::io::Error::from)?;
    writeln!(w)?;
    Ok(())
}
