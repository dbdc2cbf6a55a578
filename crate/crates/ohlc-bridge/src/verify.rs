//! Self-checks run by `ohlc verify`: moment identities, closed form against
//! quadrature, reflection symmetries, coefficient identities and seeded
//! Monte Carlo comparisons.

use ohlc_bridge_core::close_high::{conditional_curve_ch, moments_ch};
use ohlc_bridge_core::extrema::{close_given_high_moments, density_hlc, feller_range_density, joint_high_close};
use ohlc_bridge_core::hlc::{aggregate_closed_form, aggregate_coefficients, boundary_cancellation_check, conditional_curve_chl, moments_chl, quadrature_moments_chl};
use ohlc_bridge_core::quadrature::integrate;
use ohlc_bridge_core::{HighCloseStat, HighLowCloseStat, ModelParams, SeriesControl, TimeGrid};

use crate::mc::bins::{BinGrid, Stat};
use crate::mc::generate::{generate_paths, ExtremaMode, SimConfig};
use crate::mc::oracle::mixture_check;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Quick,
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

/// Standardized deviation allowed in the Monte Carlo checks.
pub const MC_Z_LIMIT: f64 = 4.0;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn check(name: &'static str, worst: Result<f64, String>, limit: f64) -> CheckResult {
    match worst {
        Ok(w) => CheckResult { name, pass: w <= limit, detail: format!("worst {w:.3e} (limit {limit:.0e})") },
        Err(e) => CheckResult { name, pass: false, detail: e },
    }
}

fn chl_stats(level: Level) -> Vec<HighLowCloseStat> {
    let mut out = Vec::new();
    let (hs, ls, us): (&[f64], &[f64], &[f64]) = match level {
        Level::Quick => (&[0.4, 1.1], &[-0.5], &[0.3, 0.8]),
        Level::Full => (&[0.3, 0.8, 1.4], &[-0.2, -0.7, -1.3], &[0.15, 0.5, 0.85]),
    };
    for &h in hs {
        for &l in ls {
            for &u in us {
                out.push(HighLowCloseStat::new(h, l, l + u * (h - l)).unwrap());
            }
        }
    }
    out
}

fn moment_identities(level: Level) -> Result<f64, String> {
    let p = ModelParams::unit();
    let ctrl = SeriesControl::default();
    let mut worst: f64 = 0.0;
    for s in chl_stats(level) {
        let want = density_hlc(s, &p, &ctrl).map_err(|e| e.to_string())?;
        let ch = HighCloseStat::new(s.high, s.close).map_err(|e| e.to_string())?;
        let want_ch = joint_high_close(ch, &p);
        for t in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let m = moments_chl(t, s, &p, &ctrl).map_err(|e| e.to_string())?;
            worst = worst.max(rel(m.m0, want));
            let m = moments_ch(t, ch, &p).map_err(|e| e.to_string())?;
            worst = worst.max(rel(m.m0, want_ch));
        }
    }
    Ok(worst)
}

fn closed_vs_quadrature(level: Level) -> Result<f64, String> {
    let p = ModelParams::unit();
    let ctrl = SeriesControl::default();
    let mut worst: f64 = 0.0;
    for s in chl_stats(level) {
        for t in [0.2, 0.5, 0.8] {
            let a = moments_chl(t, s, &p, &ctrl).map_err(|e| e.to_string())?;
            let b = quadrature_moments_chl(t, s, &p, &ctrl, &p.quadrature).map_err(|e| e.to_string())?;
            let scale1 = a.m1.abs().max(a.m0 * s.range());
            worst = worst.max(rel(a.m0, b.m0)).max((a.m1 - b.m1).abs() / scale1).max(rel(a.m2, b.m2));
        }
    }
    Ok(worst)
}

fn reflections() -> Result<f64, String> {
    let p = ModelParams::unit();
    let ctrl = SeriesControl::default();
    let ts = [0.1, 0.3, 0.5, 0.7, 0.9];
    let grid = TimeGrid::from_points(ts.to_vec()).unwrap();
    let rev = TimeGrid::from_points(ts.iter().rev().map(|t| 1.0 - t).collect()).unwrap();
    let mut worst: f64 = 0.0;
    let n = ts.len();
    for &(h, c) in &[(0.6, 0.3), (1.2, 0.9), (0.0, 0.5)] {
        let a = conditional_curve_ch(HighCloseStat::new(h, -c).unwrap(), &p, &grid).map_err(|e| e.to_string())?;
        let b = conditional_curve_ch(HighCloseStat::new(h + c, c).unwrap(), &p, &rev).map_err(|e| e.to_string())?;
        for i in 0..n {
            worst = worst.max((a.mean[i] - (b.mean[n - 1 - i] - c)).abs()).max((a.variance[i] - b.variance[n - 1 - i]).abs());
        }
    }
    for &(h, l, c) in &[(0.8, -0.6, 0.3), (0.4, -1.0, 0.2)] {
        let a = conditional_curve_chl(HighLowCloseStat::new(h, l, -c).unwrap(), &p, &grid, &ctrl).map_err(|e| e.to_string())?;
        let b = conditional_curve_chl(HighLowCloseStat::new(h + c, l + c, c).unwrap(), &p, &rev, &ctrl).map_err(|e| e.to_string())?;
        for i in 0..n {
            worst = worst.max((a.mean[i] - (b.mean[n - 1 - i] - c)).abs()).max((a.variance[i] - b.variance[n - 1 - i]).abs());
        }
    }
    Ok(worst)
}

fn coefficient_identities() -> Result<f64, String> {
    let p = ModelParams::new(1.3).unwrap();
    let mut worst: f64 = 0.0;
    for s in [HighLowCloseStat::new(0.9, -0.4, 0.2).unwrap(), HighLowCloseStat::new(0.5, -1.2, -0.8).unwrap()] {
        for t in [0.25, 0.6] {
            for j in -5..=5 {
                for k in -5..=5 {
                    let a = aggregate_coefficients(t, s, &p, j, k);
                    let b = aggregate_closed_form(t, s, &p, j, k);
                    for (x, y) in [(a.a_bar, b.a_bar), (a.a_bar_low, b.a_bar_low), (a.b_bar, b.b_bar), (a.b_bar_low, b.b_bar_low)] {
                        worst = worst.max((x - y).abs() / (1.0 + y.abs()));
                    }
                    worst = worst.max(boundary_cancellation_check(t, s, &p, j, k).relative());
                }
            }
        }
    }
    Ok(worst)
}

fn close_high_root() -> Result<f64, String> {
    let p = ModelParams::unit();
    let (mut a, mut b) = (0.5, 1.0);
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if close_given_high_moments(m, &p).map_err(|e| e.to_string())?.mean < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok((0.5 * (a + b) - 0.7517915247).abs())
}

fn range_mass() -> Result<f64, String> {
    let ctrl = SeriesControl::default().with_tolerance(1e-14).with_max_terms(100_000);
    // (0, 0.05] holds less than 1e-300 of the mass
    let mass = integrate(|x| feller_range_density(x, &ctrl).map(|s| s.value).unwrap_or(f64::NAN), 0.05, 6.0, &Default::default())
        .map_err(|e| e.to_string())?
        .value;
    Ok((mass - 1.0).abs())
}

fn mc_check(level: Level, dims: &[Stat], nbins: usize, seed: u64) -> Result<f64, String> {
    let (n_paths, n_steps) = match level {
        Level::Quick => (8000 * nbins.pow(dims.len() as u32) / 2, 500),
        Level::Full => (12000 * nbins.pow(dims.len() as u32), 2000),
    };
    let cfg = SimConfig::new(n_paths, n_steps).with_seed(seed).with_extrema(ExtremaMode::BridgeSampled);
    let e = generate_paths(&cfg).map_err(|e| e.to_string())?;
    let g = BinGrid::build(&e.summaries, dims, &vec![nbins; dims.len()], 1.0, 1).map_err(|e| e.to_string())?;
    let idx: Vec<usize> = (1..10).map(|k| k * n_steps / 10).collect();
    let grid = TimeGrid::from_points(idx.iter().map(|&k| e.times[k]).collect()).unwrap();
    let p = ModelParams::unit();
    let mut worst: f64 = 0.0;
    for b in 0..g.n_bins() {
        let members = g.members(b);
        let values: Vec<Vec<f64>> = members.iter().map(|&i| idx.iter().map(|&k| e.path(i)[k]).collect()).collect();
        let stats: Vec<_> = members.iter().map(|&i| e.summaries[i]).collect();
        let m = mixture_check(&values, &stats, dims, &p, &grid).map_err(|e| e.to_string())?;
        worst = worst.max(m.max_z());
    }
    Ok(worst)
}

pub fn run(level: Level) -> Vec<CheckResult> {
    let mut out = vec![
        check("moment identities", moment_identities(level), 1e-9),
        check("closed form vs quadrature", closed_vs_quadrature(level), 1e-6),
        check("reflection identities", reflections(), 1e-9),
        check("coefficient identities", coefficient_identities(), 1e-10),
        check("root of E[c|h]", close_high_root(), 1e-8),
        check("range density mass on (0, 6]", range_mass(), 1e-8),
        check("monte carlo (close, high)", mc_check(level, &[Stat::Close, Stat::High], 2, 101), MC_Z_LIMIT),
    ];
    if level == Level::Full {
        out.push(check("monte carlo (high, low)", mc_check(level, &[Stat::High, Stat::Low], 2, 102), MC_Z_LIMIT));
        out.push(check("monte carlo (close, high, low)", mc_check(level, &[Stat::Close, Stat::High, Stat::Low], 2, 103), MC_Z_LIMIT));
    }
    out
}
