//! Acceptance criteria 1 to 10. Prints one PASS/FAIL line per criterion.
//!
//! `ACCEPTANCE_ONLY=2,6` restricts the run; `ACCEPTANCE_STRICT=1` makes a
//! failed criterion exit with status 1.

use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use ohlc_bridge::core::close_high::{conditional_curve_ch, moments_ch};
use ohlc_bridge::core::extrema::{close_given_high_moments, density_hlc, feller_range_density, joint_high_close};
use ohlc_bridge::core::hlc::{aggregate_closed_form, aggregate_coefficients, boundary_cancellation_check, conditional_curve_chl, moments_chl, quadrature_moments_chl};
use ohlc_bridge::core::quadrature::integrate;
use ohlc_bridge::core::volatility::{estimate_vol_time, score};
use ohlc_bridge::core::{HighCloseStat, HighLowCloseStat, ModelParams, OhlcBar, QuadratureControl, SeriesControl, TimeGrid};
use ohlc_bridge::mc::{generate_paths, mixture_check, simulate_summaries, stream_blocks, table2, BinGrid, ExtremaMode, PathSummary, SimConfig, Stat, StudyConfig};
use ohlc_bridge::pipeline::{interpolate, InterpolateOptions, Method, SigmaChoice};

type Outcome = Result<(bool, String), String>;
type Criterion = (&'static str, fn() -> Outcome);

fn e<E: std::fmt::Display>(x: E) -> String {
    x.to_string()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn ch_stats() -> Vec<HighCloseStat> {
    let mut out = Vec::new();
    for h in [0.1, 0.4, 0.8, 1.3, 2.0] {
        for d in [0.05, 0.4, 1.0, 1.8] {
            out.push(HighCloseStat::new(h, h - d).unwrap());
        }
    }
    out
}

fn chl_stats() -> Vec<HighLowCloseStat> {
    let mut out = Vec::new();
    for (h, l) in [(0.3, -0.3), (0.6, -1.0), (1.2, -0.4), (0.9, -0.9), (1.6, -1.2)] {
        for u in [0.1, 0.4, 0.7, 0.95] {
            out.push(HighLowCloseStat::new(h, l, l + u * (h - l)).unwrap());
        }
    }
    out
}

fn moment_identities() -> Outcome {
    let p = ModelParams::unit();
    let ctrl = SeriesControl::default();
    // The moments are analytic in 1 − t near the close, so the limit is read
    // off a linear extrapolation from 1 − δ and 1 − 2δ.
    let delta = 1e-6;
    let (mut m0_err, mut lim_err): (f64, f64) = (0.0, 0.0);
    let mut limit = |m1: f64, m2: f64, c: f64, dens: f64| {
        let e1 = (m1 - c * dens).abs() / (dens * c.abs().max(1.0));
        let e2 = (m2 - c * c * dens).abs() / (dens * (c * c).max(1.0));
        lim_err = lim_err.max(e1).max(e2);
    };
    for s in ch_stats() {
        let want = joint_high_close(s, &p);
        for k in 1..=9 {
            m0_err = m0_err.max(rel(moments_ch(k as f64 / 10.0, s, &p).map_err(e)?.m0, want));
        }
        let (a, b) = (moments_ch(1.0 - delta, s, &p).map_err(e)?, moments_ch(1.0 - 2.0 * delta, s, &p).map_err(e)?);
        limit(2.0 * a.m1 - b.m1, 2.0 * a.m2 - b.m2, s.close, want);
    }
    for s in chl_stats() {
        let want = density_hlc(s, &p, &ctrl).map_err(e)?;
        for k in 1..=9 {
            m0_err = m0_err.max(rel(moments_chl(k as f64 / 10.0, s, &p, &ctrl).map_err(e)?.m0, want));
        }
        let (a, b) = (moments_chl(1.0 - delta, s, &p, &ctrl).map_err(e)?, moments_chl(1.0 - 2.0 * delta, s, &p, &ctrl).map_err(e)?);
        limit(2.0 * a.m1 - b.m1, 2.0 * a.m2 - b.m2, s.close, want);
    }
    Ok((m0_err <= 1e-9 && lim_err <= 1e-8, format!("M0 worst {m0_err:.2e} (1e-9), t->1 worst {lim_err:.2e} (1e-8)")))
}

fn cross_method() -> Outcome {
    let p = ModelParams::unit();
    let ctrl = SeriesControl::default();
    let mut cases = Vec::new();
    for h in [0.3, 0.8, 1.4] {
        for l in [-0.2, -0.7, -1.3] {
            for u in [0.15, 0.5, 0.85] {
                for k in 1..=9 {
                    cases.push((HighLowCloseStat::new(h, l, l + u * (h - l)).unwrap(), k as f64 / 10.0));
                }
            }
        }
    }
    let worst = cases
        .par_iter()
        .map(|&(s, t)| {
            let a = moments_chl(t, s, &p, &ctrl).map_err(e)?;
            let b = quadrature_moments_chl(t, s, &p, &ctrl, &p.quadrature).map_err(e)?;
            // M1 changes sign inside the grid; measure it against M0·Δ there
            let scale1 = a.m1.abs().max(a.m0 * s.range());
            Ok(rel(a.m0, b.m0).max((a.m1 - b.m1).abs() / scale1).max(rel(a.m2, b.m2)))
        })
        .collect::<Result<Vec<f64>, String>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok((worst <= 1e-6, format!("{} cases, worst {worst:.2e} (1e-6)", cases.len())))
}

fn monte_carlo() -> Outcome {
    let n_steps = 4000;
    let idx: Vec<usize> = (1..10).map(|k| k * n_steps / 10).collect();
    let cfg = SimConfig::new(60_000, n_steps).with_seed(3).with_extrema(ExtremaMode::BridgeSampled);
    let times = cfg.times().map_err(e)?;
    let grid = TimeGrid::from_points(idx.iter().map(|&k| times[k]).collect()).map_err(e)?;
    let (mut summaries, mut values) = (Vec::new(), Vec::new());
    stream_blocks(&cfg, &idx, |b| {
        for i in 0..b.summaries.len() {
            values.push(b.path(i).to_vec());
        }
        summaries.extend_from_slice(&b.summaries);
        Ok(())
    })
    .map_err(e)?;
    let p = ModelParams::unit();
    let mut detail = Vec::new();
    let mut pass = true;
    for (dims, nbins, label) in [(&[Stat::Close, Stat::High][..], &[4, 3][..], "ch"), (&[Stat::Close, Stat::High, Stat::Low][..], &[2, 2, 3][..], "chl")] {
        let g = BinGrid::build(&summaries, dims, nbins, 1.0, 1).map_err(e)?;
        let (mut worst, mut min_count): (f64, usize) = (0.0, usize::MAX);
        for b in 0..g.n_bins() {
            let members = g.members(b);
            min_count = min_count.min(members.len());
            let v: Vec<Vec<f64>> = members.iter().map(|&i| values[i].clone()).collect();
            let s: Vec<PathSummary> = members.iter().map(|&i| summaries[i]).collect();
            worst = worst.max(mixture_check(&v, &s, dims, &p, &grid).map_err(e)?.max_z());
        }
        pass &= worst <= 3.0 && min_count >= 5000;
        detail.push(format!("{label}: {} bins, min {min_count} paths, worst z {worst:.2}", g.n_bins()));
    }
    Ok((pass, detail.join("; ") + " (3 SE)"))
}

fn table2_reproduction() -> Outcome {
    let cfg = StudyConfig::new(SimConfig::new(2_000_000, 1530).with_seed(1), 40);
    let (rows, _) = table2(&cfg).map_err(e)?;
    let detail: Vec<String> = rows
        .iter()
        .map(|r| format!("{} {:.4} vs {:.4}±{}{}", r.label, r.measured, r.expected, r.tolerance, if r.pass() { "" } else { " miss" }))
        .collect();
    Ok((rows.iter().all(|r| r.pass()), detail.join(", ")))
}

fn mean_range(n_steps: usize, seed: u64) -> Result<f64, String> {
    let s = simulate_summaries(&SimConfig::new(500_000, n_steps).with_seed(seed)).map_err(e)?;
    Ok(s.iter().map(|p| p.max - p.min).sum::<f64>() / s.len() as f64)
}

fn feller_suite() -> Outcome {
    let ctrl = SeriesControl::default().with_tolerance(1e-14).with_max_terms(100_000);
    let dens = |x: f64| feller_range_density(x, &ctrl).map(|s| s.value).unwrap_or(f64::NAN);
    // (0, 0.05] holds less than 1e-300 of the mass
    let mass = integrate(dens, 0.05, 6.0, &Default::default()).map_err(e)?.value;
    let loose = QuadratureControl { abs_tol: 1e-12, ..Default::default() };
    let below = integrate(dens, 0.05, 0.7, &loose).map_err(e)?.value;
    let terms = feller_range_density(0.005, &SeriesControl::default().with_tolerance(1e-10).with_max_terms(1_000_000)).map_err(e)?.terms;
    let exact = 2.0 * (2.0 / std::f64::consts::PI).sqrt();
    let shift_fine = exact - mean_range(2000, 51)?;
    let shift_coarse = exact - mean_range(500, 52)?;
    let ratio = shift_coarse / shift_fine;
    let checks = [
        (mass - 1.0).abs() <= 1e-8,
        (300..=400).contains(&terms),
        below < 1e-3,
        (shift_fine - 0.0066).abs() <= 0.3 * 0.0066,
        (1.5..=2.5).contains(&ratio),
    ];
    Ok((
        checks.iter().all(|&c| c),
        format!(
            "mass err {:.2e}, terms at 0.005 {terms} [300,400], mass below 0.7 {below:.2e}, shift {shift_fine:.4} (0.0066±30%), 4x-step ratio {ratio:.2} [1.5,2.5]",
            (mass - 1.0).abs()
        ),
    ))
}

fn close_high_root() -> Outcome {
    let p = ModelParams::unit();
    let (mut a, mut b) = (0.5, 1.0);
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if close_given_high_moments(m, &p).map_err(e)?.mean < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    let root = 0.5 * (a + b);
    let err = (root - 0.7517915247).abs();
    Ok((err <= 1e-8, format!("h* = {root:.12}, error {err:.2e} (1e-8)")))
}

/// Mean and variance with standard errors from the first four moments.
fn moments_with_se(xs: &[f64]) -> (f64, f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    (mean, var, (var / n).sqrt(), ((m4 - var * var) / n).sqrt())
}

fn reflection_suite() -> Outcome {
    let p = ModelParams::unit();
    let ctrl = SeriesControl::default();
    let ts: Vec<f64> = (1..10).map(|k| k as f64 / 10.0).collect();
    let grid = TimeGrid::from_points(ts.clone()).unwrap();
    let rev = TimeGrid::from_points(ts.iter().rev().map(|t| 1.0 - t).collect()).unwrap();
    let n = ts.len();
    let mut closed: f64 = 0.0;
    let mut cmp = |a: &[f64], av: &[f64], b: &[f64], bv: &[f64], c: f64| {
        for i in 0..n {
            closed = closed.max((a[i] - (b[n - 1 - i] - c)).abs()).max((av[i] - bv[n - 1 - i]).abs());
        }
    };
    for &(h, c) in &[(0.6, 0.3), (1.2, 0.9), (0.0, 0.5), (0.3, 1.4), (2.0, 0.1)] {
        let a = conditional_curve_ch(HighCloseStat::new(h, -c).unwrap(), &p, &grid).map_err(e)?;
        let b = conditional_curve_ch(HighCloseStat::new(h + c, c).unwrap(), &p, &rev).map_err(e)?;
        cmp(&a.mean, &a.variance, &b.mean, &b.variance, c);
    }
    for &(h, l, c) in &[(0.8, -0.6, 0.3), (0.4, -1.0, 0.2), (1.1, -0.3, -0.2), (0.5, -0.5, 0.0)] {
        let a = conditional_curve_chl(HighLowCloseStat::new(h, l, -c).unwrap(), &p, &grid, &ctrl).map_err(e)?;
        let b = conditional_curve_chl(HighLowCloseStat::new(h + c, l + c, c).unwrap(), &p, &rev, &ctrl).map_err(e)?;
        cmp(&a.mean, &a.variance, &b.mean, &b.variance, c);
    }

    // Y(t) -> Y(1 − t) − Y(1) maps (c, h, ℓ) to (−c, h − c, ℓ − c)
    let n_steps = 400;
    let keep: Vec<usize> = (0..=10).map(|k| k * n_steps / 10).collect();
    let collect = |seed: u64| -> Result<Vec<(PathSummary, Vec<f64>)>, String> {
        let mut out = Vec::new();
        stream_blocks(&SimConfig::new(400_000, n_steps).with_seed(seed), &keep, |b| {
            out.extend((0..b.summaries.len()).map(|i| (b.summaries[i], b.path(i).to_vec())));
            Ok(())
        })
        .map_err(e)?;
        Ok(out)
    };
    let (ens_a, ens_b) = (collect(71)?, collect(72)?);
    let in_a_ch = |s: &PathSummary| (-0.6..=-0.1).contains(&s.close) && (0.3..=0.9).contains(&s.max);
    let in_b_ch = |s: &PathSummary| (0.1..=0.6).contains(&s.close) && (0.3..=0.9).contains(&(s.max - s.close));
    let in_a_chl = |s: &PathSummary| in_a_ch(s) && (-1.0..=-0.4).contains(&s.min);
    let in_b_chl = |s: &PathSummary| in_b_ch(s) && (-1.0..=-0.4).contains(&(s.min - s.close));
    let mut worst_z: f64 = 0.0;
    let mut counts = Vec::new();
    for (fa, fb) in [(&in_a_ch as &dyn Fn(&PathSummary) -> bool, &in_b_ch as &dyn Fn(&PathSummary) -> bool), (&in_a_chl, &in_b_chl)] {
        let a: Vec<&Vec<f64>> = ens_a.iter().filter(|(s, _)| fa(s)).map(|(_, v)| v).collect();
        let b: Vec<&Vec<f64>> = ens_b.iter().filter(|(s, _)| fb(s)).map(|(_, v)| v).collect();
        counts.push((a.len(), b.len()));
        for k in 1..10 {
            let xa: Vec<f64> = a.iter().map(|v| v[k]).collect();
            let xb: Vec<f64> = b.iter().map(|v| v[10 - k] - v[10]).collect();
            let (ma, va, sma, sva) = moments_with_se(&xa);
            let (mb, vb, smb, svb) = moments_with_se(&xb);
            worst_z = worst_z.max((ma - mb).abs() / sma.hypot(smb)).max((va - vb).abs() / sva.hypot(svb));
        }
    }
    Ok((
        closed <= 1e-9 && worst_z <= 3.0,
        format!("closed form worst {closed:.2e} (1e-9); empirical worst z {worst_z:.2} (3 SE), region sizes {counts:?}"),
    ))
}

fn coefficient_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut worst_coef, mut worst_resid): (f64, f64) = (0.0, 0.0);
    for _ in 0..20 {
        let h = rng.random_range(0.1..1.5);
        let l = -rng.random_range(0.1..1.5);
        let s = HighLowCloseStat::new(h, l, l + rng.random_range(0.0..1.0) * (h - l)).unwrap();
        let p = ModelParams::new(rng.random_range(0.5..2.0)).unwrap();
        let t = rng.random_range(0.05..0.95);
        for j in -5..=5 {
            for k in -5..=5 {
                let a = aggregate_coefficients(t, s, &p, j, k);
                let b = aggregate_closed_form(t, s, &p, j, k);
                for (x, y) in [(a.a_bar, b.a_bar), (a.a_bar_low, b.a_bar_low), (a.b_bar, b.b_bar), (a.b_bar_low, b.b_bar_low)] {
                    if x != y {
                        worst_coef = worst_coef.max(rel(x, y));
                    }
                }
                worst_resid = worst_resid.max(boundary_cancellation_check(t, s, &p, j, k).relative());
            }
        }
    }
    Ok((
        worst_coef <= 1e-10 && worst_resid <= 1e-10,
        format!("aggregates worst {worst_coef:.2e}, boundary residual worst {worst_resid:.2e} (1e-10)"),
    ))
}

fn pipeline_end_to_end() -> Outcome {
    let (n_days, n_steps, intervals) = (5000, 2340, 117);
    let stride = n_steps / intervals;
    let ens = generate_paths(&SimConfig::new(n_days, n_steps).with_seed(9)).map_err(e)?;
    let truth: Vec<Vec<f64>> = (0..n_days).map(|d| ens.path(d).iter().step_by(stride).copied().collect()).collect();
    let weights = estimate_vol_time(&truth, 1).map_err(e)?.sigma_sq;
    let bars: Vec<OhlcBar> = ens.summaries.iter().map(|s| OhlcBar::new(s.max, s.min, s.close)).collect::<Result<_, _>>().map_err(e)?;
    let run = |method, sigma| -> Result<f64, String> {
        let r = interpolate(&bars, &InterpolateOptions::new(method, sigma, intervals)).map_err(e)?;
        if let Some(err) = r.errors.first() {
            return Err(format!("{} bars failed, first: {}", r.errors.len(), err.message));
        }
        let est: Vec<Vec<f64>> = r.curves.into_iter().map(|c| c.mean).collect();
        Ok(score(&truth, &est, &weights).map_err(e)?.rmse)
    };
    let bridge = run(Method::Bridge, SigmaChoice::Known(1.0))?;
    let known = run(Method::Chl, SigmaChoice::Known(1.0))? / bridge;
    let gk = run(Method::Chl, SigmaChoice::GarmanKlass)? / bridge;
    let ml = run(Method::Chl, SigmaChoice::MaxLikelihood)? / bridge;
    Ok((
        (known - 0.42).abs() <= 0.05 && gk < 0.65 && ml < 0.65 && ml <= gk,
        format!("known {known:.4} (0.42±0.05), gk {gk:.4}, ml {ml:.4} (< 0.65, ml <= gk)"),
    ))
}

fn simulate_cli(extra: &[&str]) -> Result<String, String> {
    let mut args = vec!["simulate", "--seed", "17", "--paths", "20000", "--steps", "200", "--bins", "6", "--condition", "ch"];
    args.extend_from_slice(extra);
    let o = Command::new(env!("CARGO_BIN_EXE_ohlc")).args(&args).output().map_err(e)?;
    if !o.status.success() {
        return Err(String::from_utf8_lossy(&o.stderr).into_owned());
    }
    String::from_utf8(o.stdout).map_err(e)
}

fn determinism() -> Outcome {
    let a = simulate_cli(&["--sequential"])?;
    let b = simulate_cli(&["--sequential"])?;
    let par = simulate_cli(&[])?;
    let fields = |s: &str| s.lines().flat_map(|l| l.split(',').map(str::to_string).collect::<Vec<_>>()).collect::<Vec<_>>();
    let (fa, fp) = (fields(&a), fields(&par));
    let mut worst: f64 = if fa.len() == fp.len() { 0.0 } else { f64::INFINITY };
    for (x, y) in fa.iter().zip(&fp) {
        match (x.parse::<f64>(), y.parse::<f64>()) {
            (Ok(x), Ok(y)) => worst = worst.max((x - y).abs() / x.abs().max(1.0)),
            _ if x != y => worst = f64::INFINITY,
            _ => {}
        }
    }
    Ok((a == b && worst <= 1e-12, format!("sequential byte-identical: {}, parallel worst diff {worst:.1e} (1e-12)", a == b)))
}

fn main() {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let criteria: [Criterion; 10] = [
        ("moment identities", moment_identities),
        ("closed form vs quadrature", cross_method),
        ("monte carlo agreement", monte_carlo),
        ("table 2 reproduction", table2_reproduction),
        ("feller range suite", feller_suite),
        ("root of E[c|h]", close_high_root),
        ("reflection symmetries", reflection_suite),
        ("aggregate and boundary identities", coefficient_identities),
        ("synthetic pipeline scores", pipeline_end_to_end),
        ("simulate determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = f().unwrap_or_else(|msg| (false, format!("error: {msg}")));
        println!("{} {n:>2} {name}: {detail} [{:.1} s]", if pass { "PASS" } else { "FAIL" }, start.elapsed().as_secs_f64());
        if !pass {
            failed.push(n);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        if strict {
            std::process::exit(1);
        }
    }
}
