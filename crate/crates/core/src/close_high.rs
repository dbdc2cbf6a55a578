//! Law of `B(t)` given the close and the high, and given the high alone.
//!
//! Writing `P_{t,x}(h) = φ_{tσ²}(x) − φ_{tσ²}(2h−x)` for the density of
//! reaching `x` at time `t` without crossing `h`, the joint density of
//! `(B(t), close, high)` is `∂_h[P_{t,x}(h) P_{1−t,c−x}(h−x)]`. The product
//! expands into four Gaussians in `x`, which is what gives the moments a
//! closed form.

use alloc::vec::Vec;
use core::f64::consts::SQRT_2;

use libm::{erf, sqrt};

use crate::curve::{ConditionalCurve, MomentTriple};
use crate::error::{domain, Result};
use crate::extrema::{close_given_high_moments, density_high, joint_high_close, HighCloseStat};
use crate::gaussian::phi;
use crate::params::{ModelParams, TimeGrid};
use crate::quadrature::{integrate_many, QuadratureControl};

/// Times closer than this to 0 or 1 use the pinned-endpoint limits.
pub const ENDPOINT_EPS: f64 = 1e-9;

/// Offset applied to the high when `2h − c` vanishes (h = c = 0).
pub const DEGENERATE_EPS: f64 = 1e-8;

/// One of the four shifted Gaussians `s_i ψ_i φ_{σ_t²}(x − μ_i)` whose sum
/// is `P_{t,x}(h) P_{1−t,c−x}(h−x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourGaussianTerm {
    pub index: usize,
    pub a: f64,
    pub b: f64,
    pub mu: f64,
    pub g: f64,
    pub psi: f64,
    pub sign: f64,
    /// `∂_h μ_i`
    pub tau: f64,
}

impl FourGaussianTerm {
    pub fn eval(&self, x: f64, bridge_var: f64) -> f64 {
        self.sign * self.psi * phi(x - self.mu, bridge_var)
    }
}

pub fn four_gaussian_terms(t: f64, stat: HighCloseStat, params: &ModelParams) -> [FourGaussianTerm; 4] {
    let s2 = params.sigma_sq();
    let (h, c) = (stat.high, stat.close);
    let a = [0.0, 0.0, 2.0 * h, 2.0 * h];
    let b = [c, 2.0 * h - c, c, 2.0 * h - c];
    let sign = [1.0, -1.0, -1.0, 1.0];
    let tau = [0.0, 2.0 * t, 2.0 * (1.0 - t), 2.0];
    core::array::from_fn(|i| {
        let d = a[i] - b[i];
        FourGaussianTerm {
            index: i + 1,
            a: a[i],
            b: b[i],
            mu: a[i] * (1.0 - t) + b[i] * t,
            g: d * d / (2.0 * s2),
            psi: phi(d, s2),
            sign: sign[i],
            tau: tau[i],
        }
    })
}

pub(crate) fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0 && t < 1.0) {
        return Err(domain("time must lie strictly inside (0, 1)", t));
    }
    Ok(())
}

pub(crate) fn check_time_closed(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(domain("time must lie in [0, 1]", t));
    }
    Ok(())
}

/// `φ_{tσ²}(x) − φ_{tσ²}(2h−x)`.
pub fn survival_factor(x: f64, t: f64, h: f64, params: &ModelParams) -> Result<f64> {
    check_time(t)?;
    if x > h {
        return Err(domain("position above the barrier", x - h));
    }
    let v = t * params.sigma_sq();
    Ok(phi(x, v) - phi(2.0 * h - x, v))
}

/// Joint density of `(B(t) = x, close = c, high = h)`.
pub fn joint_density_cht(x: f64, t: f64, h: f64, c: f64, params: &ModelParams) -> Result<f64> {
    check_time(t)?;
    let stat = HighCloseStat::new(h, c)?;
    if x > h {
        return Err(domain("position above the high", x - h));
    }
    Ok(joint_density_unchecked(x, t, stat.high, stat.close, params.sigma_sq()))
}

pub(crate) fn joint_density_unchecked(x: f64, t: f64, h: f64, c: f64, s2: f64) -> f64 {
    let vl = t * s2;
    let vr = (1.0 - t) * s2;
    let pl = phi(x, vl) - phi(2.0 * h - x, vl);
    let pr = phi(c - x, vr) - phi(2.0 * h - c - x, vr);
    let ql = 2.0 * (2.0 * h - x) / vl * phi(2.0 * h - x, vl);
    let qr = 2.0 * (2.0 * h - c - x) / vr * phi(2.0 * h - c - x, vr);
    pl * qr + ql * pr
}

/// Closed-form `M₀, M₁, M₂` of `B(t)` jointly with `(close, high)`.
///
/// With `r = 2h − c`, `σ_t² = σ²t(1−t)` and `E = erf((h−rt)/(√2σ_t))`:
///
/// ```text
/// M₁ = φ(c)[1 + erf((ct−h)/√2σ_t)] + φ(r)[2hr/σ² − 1 + p·E] − 4rt(1−t)φ(r)φ_{σ_t²}(h−rt)
/// M₂ = 2(2h−ct)φ(c)[1 + erf((ct−h)/√2σ_t)]
///      + 2φ(r)[rt(1−t) + q₁ + q₂·E − 4rht(1−t)φ_{σ_t²}(h−rt)]
/// ```
///
/// where `p = 1−2t + 2r(rt−h)/σ²`,
/// `q₁ = −(rt² + (1−t)(2h−rt)) + r(h² + (h−rt)²)/σ²` and
/// `q₂ = 2h(1−t) − rt + 2hr(rt−h)/σ²`. `M₀ = p(h, c)`.
pub fn moments_ch(t: f64, stat: HighCloseStat, params: &ModelParams) -> Result<MomentTriple> {
    check_time_closed(t)?;
    let m0 = joint_high_close(stat, params);
    let c = stat.close;
    if t < ENDPOINT_EPS {
        return Ok(MomentTriple { m0, m1: 0.0, m2: 0.0 });
    }
    if 1.0 - t < ENDPOINT_EPS {
        return Ok(MomentTriple { m0, m1: c * m0, m2: c * c * m0 });
    }
    let m = moments_ch_closed(t, stat, params);
    debug_assert!({
        let e = moments_ch_expanded(t, stat, params);
        let scale = m0.abs() + m.m1.abs() + m.m2.abs() + 1e-300;
        (e.m1 - m.m1).abs() <= 1e-7 * scale && (e.m2 - m.m2).abs() <= 1e-7 * scale
    });
    Ok(m)
}

fn moments_ch_closed(t: f64, stat: HighCloseStat, params: &ModelParams) -> MomentTriple {
    let s2 = params.sigma_sq();
    let (h, c) = (stat.high, stat.close);
    let st2 = s2 * t * (1.0 - t);
    let st = sqrt(st2);
    let r = 2.0 * h - c;
    let phc = phi(c, s2);
    let phr = phi(r, s2);
    let lower = 1.0 + erf((c * t - h) / (SQRT_2 * st));
    let e = erf((h - r * t) / (SQRT_2 * st));
    let bump = phi(h - r * t, st2);
    let p = (1.0 - 2.0 * t) + 2.0 * r * (r * t - h) / s2;
    let m1 = phc * lower + phr * (2.0 * h * r / s2 - 1.0 + p * e) - 4.0 * r * t * (1.0 - t) * phr * bump;
    let q1 = -(r * t * t + (1.0 - t) * (2.0 * h - r * t)) + r * (h * h + (h - r * t) * (h - r * t)) / s2;
    let q2 = (2.0 * h * (1.0 - t) - r * t) + 2.0 * h * r * (r * t - h) / s2;
    let m2 = 2.0 * (2.0 * h - c * t) * phc * lower
        + 2.0 * phr * (r * t * (1.0 - t) + q1 + q2 * e - 4.0 * r * h * t * (1.0 - t) * bump);
    MomentTriple { m0: joint_high_close(stat, params), m1, m2 }
}

/// The same moments assembled term by term from the four-Gaussian form:
/// `M_m = Σ_i s_i ψ_i ∫_{−∞}^{h} [m x^{m−1} τ_i − ∂_h g_i x^m] φ_{σ_t²}(x−μ_i) dx`.
/// Used as an internal cross-check of [`moments_ch`].
pub fn moments_ch_expanded(t: f64, stat: HighCloseStat, params: &ModelParams) -> MomentTriple {
    let s2 = params.sigma_sq();
    let h = stat.high;
    let r = 2.0 * h - stat.close;
    let st2 = s2 * t * (1.0 - t);
    let st = sqrt(st2);
    let terms = four_gaussian_terms(t, stat, params);
    let g_h = [0.0, 2.0 * r / s2, 2.0 * r / s2, 0.0];
    let mut m = [0.0; 3];
    for (term, gh) in terms.iter().zip(g_h).skip(1) {
        let mu = term.mu;
        let z = h - mu;
        let n = 0.5 * (1.0 + erf(z / (SQRT_2 * st)));
        let f = phi(z, st2);
        let i0 = n;
        let i1 = mu * n - st2 * f;
        let i2 = (mu * mu + st2) * n - st2 * (h + mu) * f;
        let w = term.sign * term.psi;
        m[0] += w * (-gh * i0);
        m[1] += w * (term.tau * i0 - gh * i1);
        m[2] += w * (2.0 * term.tau * i1 - gh * i2);
    }
    MomentTriple { m0: m[0], m1: m[1], m2: m[2] }
}

fn regularize(stat: HighCloseStat, params: &ModelParams) -> HighCloseStat {
    let eps = DEGENERATE_EPS * params.sigma();
    if 2.0 * stat.high - stat.close < eps {
        HighCloseStat { high: stat.high + eps, close: stat.close }
    } else {
        stat
    }
}

/// Mean and variance of `B(t)` given `(close, high)` over `grid`.
///
/// When `2h − c` vanishes (h = c = 0) the conditioning density is zero and
/// the curve is taken from the interior limit with the high raised by
/// `DEGENERATE_EPS·σ`.
pub fn conditional_curve_ch(stat: HighCloseStat, params: &ModelParams, grid: &TimeGrid) -> Result<ConditionalCurve> {
    let stat = regularize(stat, params);
    let mut curve = ConditionalCurve::with_capacity(grid.len());
    for &t in grid.points() {
        if t < ENDPOINT_EPS {
            curve.push(t, 0.0, 0.0);
        } else if 1.0 - t < ENDPOINT_EPS {
            curve.push(t, stat.close, 0.0);
        } else {
            let (mean, var) = moments_ch(t, stat, params)?.mean_variance()?;
            curve.push(t, mean.min(stat.high), var);
        }
    }
    Ok(curve)
}

/// Density of `B(t) = x` jointly with `high = h`, close integrated out:
/// `2P_{t,x}(h) φ_{(1−t)σ²}(h−x) + q_{t,x}(h) erf((h−x)/√(2(1−t)σ²))`.
pub fn density_given_high(x: f64, t: f64, h: f64, params: &ModelParams) -> Result<f64> {
    check_time(t)?;
    if !(h >= 0.0) {
        return Err(domain("high must be nonnegative", h));
    }
    if x > h {
        return Err(domain("position above the high", x - h));
    }
    Ok(density_given_high_unchecked(x, t, h, params.sigma_sq()))
}

fn density_given_high_unchecked(x: f64, t: f64, h: f64, s2: f64) -> f64 {
    let vl = t * s2;
    let vr = (1.0 - t) * s2;
    let pl = phi(x, vl) - phi(2.0 * h - x, vl);
    let ql = 2.0 * (2.0 * h - x) / vl * phi(2.0 * h - x, vl);
    2.0 * pl * phi(h - x, vr) + ql * erf((h - x) / sqrt(2.0 * vr))
}

/// Sum of integrals over consecutive pieces separated by `breaks`.
pub(crate) fn integrate_pieces<const N: usize, F>(
    mut f: F,
    breaks: &[f64],
    ctrl: &QuadratureControl,
) -> Result<[f64; N]>
where
    F: FnMut(f64) -> [f64; N],
{
    let mut total = [0.0; N];
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let r = integrate_many(&mut f, w[0], w[1], ctrl)?;
            for i in 0..N {
                total[i] += r.value[i];
            }
        }
    }
    Ok(total)
}

pub(crate) fn sorted_breaks(lo: f64, hi: f64, inner: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = Vec::with_capacity(inner.len() + 2);
    v.push(lo);
    v.extend(inner.iter().copied().filter(|x| *x > lo && *x < hi));
    v.push(hi);
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Moments of `B(t)` jointly with the high, by adaptive quadrature.
pub fn moments_given_high(t: f64, h: f64, params: &ModelParams, quad: &QuadratureControl) -> Result<MomentTriple> {
    check_time_closed(t)?;
    if !(h >= 0.0) || !h.is_finite() {
        return Err(domain("high must be finite and nonnegative", h));
    }
    let m0 = density_high(h, params);
    if t < ENDPOINT_EPS {
        return Ok(MomentTriple { m0, m1: 0.0, m2: 0.0 });
    }
    if 1.0 - t < ENDPOINT_EPS {
        let cg = close_given_high_moments(h, params)?;
        return Ok(MomentTriple { m0, m1: m0 * cg.mean, m2: m0 * (cg.variance + cg.mean * cg.mean) });
    }
    let s2 = params.sigma_sq();
    let s = params.sigma();
    let wl = 6.0 * s * sqrt(t);
    let lo = h.min(0.0) - 14.0 * s;
    let breaks = sorted_breaks(lo, h, &[-wl, 0.0, wl, h - 6.0 * s * sqrt(1.0 - t)]);
    let m = integrate_pieces(
        |x| {
            let p = density_given_high_unchecked(x, t, h, s2);
            [p, x * p, x * x * p]
        },
        &breaks,
        quad,
    )?;
    Ok(MomentTriple { m0: m[0], m1: m[1], m2: m[2] })
}

/// Mean and variance of `B(t)` given the high only.
pub fn conditional_curve_h(h: f64, params: &ModelParams, grid: &TimeGrid, quad: &QuadratureControl) -> Result<ConditionalCurve> {
    let h = h.max(DEGENERATE_EPS * params.sigma());
    let mut curve = ConditionalCurve::with_capacity(grid.len());
    for &t in grid.points() {
        if t < ENDPOINT_EPS {
            curve.push(t, 0.0, 0.0);
            continue;
        }
        let (mean, var) = moments_given_high(t, h, params, quad)?.mean_variance()?;
        curve.push(t, mean.min(h), var);
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn stat(h: f64, c: f64) -> HighCloseStat {
        HighCloseStat::new(h, c).unwrap()
    }

    fn quad_moments(t: f64, h: f64, c: f64) -> [f64; 3] {
        let q = QuadratureControl::default();
        integrate_pieces(
            |x| {
                let p = joint_density_unchecked(x, t, h, c, 1.0);
                [p, x * p, x * x * p]
            },
            &sorted_breaks(-14.0, h, &[0.0, c]),
            &q,
        )
        .unwrap()
    }

    #[test]
    fn survival_values() {
        let p = ModelParams::unit();
        assert_eq!(survival_factor(1.3, 0.4, 1.3, &p).unwrap(), 0.0);
        let v = survival_factor(0.0, 0.5, 2.0, &p).unwrap();
        let want = 1.0 / sqrt(PI) - libm::exp(-16.0) / sqrt(PI);
        assert!(rel(v, want) < 1e-14);
        let far = survival_factor(0.3, 0.5, 40.0, &p).unwrap();
        assert!(rel(far, phi(0.3, 0.5)) < 1e-15);
        assert!(survival_factor(2.0, 0.5, 1.0, &p).is_err());
        assert!(survival_factor(0.0, 1.0, 1.0, &p).is_err());
    }

    #[test]
    fn joint_integrates_to_high_close() {
        let p = ModelParams::unit();
        let m = quad_moments(0.4, 1.0, 0.3);
        assert!(rel(m[0], joint_high_close(stat(1.0, 0.3), &p)) < 1e-8);
        assert!(joint_density_cht(1.0, 0.4, 1.0, 0.3, &p).unwrap().is_finite());
    }

    #[test]
    fn four_terms_meet_at_barrier() {
        let p = ModelParams::unit();
        for &(t, h, c) in &[(0.3, 1.0, 0.2), (0.7, 0.4, -1.1), (0.5, 2.0, 1.9)] {
            let st2 = t * (1.0 - t);
            let want = phi(h, t) * phi(h - c, 1.0 - t);
            for term in four_gaussian_terms(t, stat(h, c), &p) {
                assert!(rel(term.psi * phi(h - term.mu, st2), want) < 1e-12);
            }
        }
    }

    #[test]
    fn four_terms_reproduce_product() {
        let p = ModelParams::unit();
        let (t, h, c, x) = (0.35, 0.9, -0.2, 0.1);
        let st2 = t * (1.0 - t);
        let sum: f64 = four_gaussian_terms(t, stat(h, c), &p).iter().map(|f| f.eval(x, st2)).sum();
        let prod = (phi(x, t) - phi(2.0 * h - x, t)) * (phi(c - x, 1.0 - t) - phi(2.0 * h - c - x, 1.0 - t));
        assert!(rel(sum, prod) < 1e-13);
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let p = ModelParams::unit();
        for &(t, h, c) in &[(0.5, 1.0, 0.0), (0.3, 1.2, -0.4), (0.8, 0.5, 0.45), (0.1, 2.0, 1.5), (0.93, 0.2, -2.0)] {
            let q = quad_moments(t, h, c);
            let m = moments_ch(t, stat(h, c), &p).unwrap();
            assert!(rel(m.m1 / m.m0, q[1] / q[0]) < 1e-8, "{t} {h} {c}");
            assert!(rel(m.m2 / m.m0, q[2] / q[0]) < 1e-8, "{t} {h} {c}");
            let e = moments_ch_expanded(t, stat(h, c), &p);
            assert!(rel(e.m0, m.m0) < 1e-10);
        }
    }

    #[test]
    fn endpoint_limits() {
        let p = ModelParams::unit();
        let s = stat(0.8, 0.3);
        let pc = joint_high_close(s, &p);
        let m = moments_ch(1.0 - 1e-7, s, &p).unwrap();
        assert!(rel(m.m1, 0.3 * pc) < 1e-5 && rel(m.m2, 0.09 * pc) < 1e-5);
        let m = moments_ch(1.0, s, &p).unwrap();
        assert_eq!((m.m1, m.m2), (0.3 * pc, 0.09 * pc));
        let curve = conditional_curve_ch(s, &p, &TimeGrid::uniform(10).unwrap()).unwrap();
        assert_eq!((curve.mean[0], curve.mean[10]), (0.0, 0.3));
        assert_eq!((curve.variance[0], curve.variance[10]), (0.0, 0.0));
    }

    #[test]
    fn excursion_limit() {
        // h = c = 0: −B is a Brownian excursion, B(t) ~ −σ_t·χ₃
        let p = ModelParams::unit();
        let curve = conditional_curve_ch(stat(0.0, 0.0), &p, &TimeGrid::interior(9).unwrap()).unwrap();
        for i in 0..9 {
            let t = curve.t[i];
            let st = sqrt(t * (1.0 - t));
            assert!((curve.mean[i] + 2.0 * sqrt(2.0 / PI) * st).abs() < 1e-6);
            assert!((curve.variance[i] - st * st * (3.0 - 8.0 / PI)).abs() < 1e-6);
        }
    }

    #[test]
    fn density_given_high_normalization() {
        let p = ModelParams::unit();
        let q = QuadratureControl::default();
        let v = integrate(|x| density_given_high(x, 0.3, 0.8, &p).unwrap(), f64::NEG_INFINITY, 0.8, &q).unwrap();
        assert!(rel(v.value, density_high(0.8, &p)) < 1e-7);
        // the path cannot sit at its own maximum with positive density
        assert_eq!(density_given_high(0.8, 0.3, 0.8, &p).unwrap(), 0.0);
        assert!(density_given_high(0.8 - 1e-6, 0.3, 0.8, &p).unwrap() > 0.0);
        let m = moments_given_high(0.3, 0.8, &p, &q).unwrap();
        assert!(rel(m.m0, density_high(0.8, &p)) < 1e-7);
    }

    #[test]
    fn given_high_terminal_mean() {
        let p = ModelParams::unit();
        let q = QuadratureControl::default();
        for h in [0.3, 1.0, 2.2] {
            let m = moments_given_high(1.0 - 1e-7, h, &p, &q).unwrap();
            let want = close_given_high_moments(h, &p).unwrap().mean;
            assert!((m.m1 / m.m0 - want).abs() < 1e-6 * want.abs().max(1.0), "h={h}");
        }
    }

    #[test]
    fn given_high_is_close_marginal() {
        // ∫ M_m(t, h, c) dc over c ≤ h equals the high-only moments
        let p = ModelParams::unit();
        let q = QuadratureControl::default();
        let (t, h) = (0.45, 0.7);
        let marg = integrate_many(
            |c| {
                let m = moments_ch(t, stat(h, c), &p).unwrap();
                [m.m0, m.m1, m.m2]
            },
            f64::NEG_INFINITY,
            h,
            &q,
        )
        .unwrap();
        let direct = moments_given_high(t, h, &p, &q).unwrap();
        assert!(rel(marg.value[1], direct.m1) < 1e-8);
        assert!(rel(marg.value[2], direct.m2) < 1e-8);
    }

    proptest! {
        #[test]
        fn m0_is_joint_density(h in 0.0f64..3.0, u in 0.0f64..1.0, ti in 1usize..10) {
            let c = h - u * (h + 2.5);
            let t = ti as f64 / 10.0;
            let p = ModelParams::unit();
            let m = moments_ch_expanded(t, stat(h, c), &p);
            let want = joint_high_close(stat(h, c), &p);
            prop_assert!((m.m0 - want).abs() <= 1e-10 * want.max(1e-300));
        }

        #[test]
        fn mean_below_high_and_variance_nonnegative(h in 0.0f64..3.0, u in 0.0f64..1.0) {
            let c = h - u * (h + 2.5);
            let p = ModelParams::unit();
            let curve = conditional_curve_ch(stat(h, c), &p, &TimeGrid::interior(19).unwrap()).unwrap();
            for i in 0..curve.len() {
                prop_assert!(curve.mean[i] <= h);
                prop_assert!(curve.variance[i] >= 0.0);
            }
        }

        #[test]
        fn reflection(h in 0.0f64..2.5, c in 0.01f64..2.0) {
            let h = h.max(0.0);
            let p = ModelParams::unit();
            let g = TimeGrid::interior(9).unwrap();
            let left = conditional_curve_ch(stat(h, -c), &p, &g).unwrap();
            let right = conditional_curve_ch(stat(h + c, c), &p, &g).unwrap();
            for i in 0..9 {
                let j = 8 - i;
                prop_assert!((left.mean[i] - (right.mean[j] - c)).abs() < 1e-9);
                prop_assert!((left.variance[i] - right.variance[j]).abs() < 1e-9);
            }
        }

        #[test]
        fn scale_covariance(h in 0.0f64..2.0, u in 0.0f64..1.0, lam in 0.3f64..3.0) {
            let c = h - u * (h + 2.0);
            let g = TimeGrid::interior(5).unwrap();
            let a = conditional_curve_ch(stat(h, c), &ModelParams::unit(), &g).unwrap();
            let b = conditional_curve_ch(stat(lam * h, lam * c), &ModelParams::new(lam * lam).unwrap(), &g).unwrap();
            for i in 0..5 {
                prop_assert!((b.mean[i] - lam * a.mean[i]).abs() < 1e-9 * lam.max(1.0));
                prop_assert!((b.variance[i] - lam * lam * a.variance[i]).abs() < 1e-9 * (lam * lam).max(1.0));
            }
        }
    }
}
