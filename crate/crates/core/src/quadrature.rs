//! Globally adaptive Gauss–Kronrod (7/15) quadrature for vector-valued
//! integrands, with the usual maps for infinite limits.

use alloc::vec::Vec;

use libm::pow;

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureControl {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadratureControl {
    fn default() -> Self {
        Self { abs_tol: 1e-14, rel_tol: 1e-12, max_intervals: 2000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral<const N: usize> {
    pub value: [f64; N],
    pub error: [f64; N],
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral1 {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Piece<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: [f64; N],
    splittable: bool,
}

fn gk15<const N: usize, F: FnMut(f64) -> [f64; N]>(f: &mut F, a: f64, b: f64) -> Piece<N> {
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let fc = f(c);
    let mut k = [0.0; N];
    let mut g = [0.0; N];
    let mut abs = [0.0; N];
    for i in 0..N {
        k[i] = WGK[7] * fc[i];
        g[i] = WG[3] * fc[i];
        abs[i] = WGK[7] * fc[i].abs();
    }
    let mut samples = [[0.0; N]; 15];
    samples[7] = fc;
    for j in 0..7 {
        let dx = hw * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        samples[j] = f1;
        samples[14 - j] = f2;
        for i in 0..N {
            k[i] += WGK[j] * (f1[i] + f2[i]);
            abs[i] += WGK[j] * (f1[i].abs() + f2[i].abs());
            if j % 2 == 1 {
                g[i] += WG[j / 2] * (f1[i] + f2[i]);
            }
        }
    }
    let mut value = [0.0; N];
    let mut error = [0.0; N];
    for i in 0..N {
        let mean = 0.5 * k[i];
        let mut asc = WGK[7] * (samples[7][i] - mean).abs();
        for j in 0..7 {
            asc += WGK[j] * ((samples[j][i] - mean).abs() + (samples[14 - j][i] - mean).abs());
        }
        let asc = asc * hw.abs();
        let mut err = ((k[i] - g[i]) * hw).abs();
        if asc != 0.0 && err != 0.0 {
            err = asc * pow(200.0 * err / asc, 1.5).min(1.0);
        }
        let floor = 50.0 * f64::EPSILON * abs[i] * hw.abs();
        value[i] = k[i] * hw;
        error[i] = err.max(floor);
    }
    let splittable = (b - a).abs() > 1e-13 * a.abs().max(b.abs()).max(1e-300);
    Piece { a, b, value, error, splittable }
}

/// Integrates a vector-valued `f` over `[a, b]`; either limit may be infinite.
pub fn integrate_many<const N: usize, F>(
    mut f: F,
    a: f64,
    b: f64,
    ctrl: &QuadratureControl,
) -> Result<Integral<N>>
where
    F: FnMut(f64) -> [f64; N],
{
    if a.is_nan() || b.is_nan() {
        return Err(domain("integration limit is NaN", f64::NAN));
    }
    if a == b {
        return Ok(Integral { value: [0.0; N], error: [0.0; N], evaluations: 0 });
    }
    if a > b {
        let mut r = integrate_many(f, b, a, ctrl)?;
        for v in r.value.iter_mut() {
            *v = -*v;
        }
        return Ok(r);
    }
    match (a.is_finite(), b.is_finite()) {
        (true, true) => adapt(&mut f, a, b, ctrl),
        (false, true) => adapt(
            &mut |s: f64| {
                let x = b - (1.0 - s) / s;
                scale(f(x), 1.0 / (s * s))
            },
            0.0,
            1.0,
            ctrl,
        ),
        (true, false) => adapt(
            &mut |s: f64| {
                let x = a + (1.0 - s) / s;
                scale(f(x), 1.0 / (s * s))
            },
            0.0,
            1.0,
            ctrl,
        ),
        (false, false) => adapt(
            &mut |s: f64| {
                let d = 1.0 - s * s;
                let x = s / d;
                scale(f(x), (1.0 + s * s) / (d * d))
            },
            -1.0,
            1.0,
            ctrl,
        ),
    }
}

/// Scalar convenience wrapper around [`integrate_many`].
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    ctrl: &QuadratureControl,
) -> Result<Integral1> {
    let r = integrate_many(|x| [f(x)], a, b, ctrl)?;
    Ok(Integral1 { value: r.value[0], error: r.error[0], evaluations: r.evaluations })
}

fn scale<const N: usize>(mut v: [f64; N], w: f64) -> [f64; N] {
    for x in v.iter_mut() {
        // 0·∞ at the mapped endpoint is a vanishing tail
        *x = if *x == 0.0 { 0.0 } else { *x * w };
    }
    v
}

fn adapt<const N: usize, F: FnMut(f64) -> [f64; N]>(
    f: &mut F,
    a: f64,
    b: f64,
    ctrl: &QuadratureControl,
) -> Result<Integral<N>> {
    let mut pieces: Vec<Piece<N>> = Vec::with_capacity(64);
    let initial = 4;
    for i in 0..initial {
        let lo = a + (b - a) * i as f64 / initial as f64;
        let hi = if i + 1 == initial { b } else { a + (b - a) * (i + 1) as f64 / initial as f64 };
        pieces.push(gk15(f, lo, hi));
    }
    let mut evaluations = 15 * initial;
    loop {
        let mut value = [0.0; N];
        let mut error = [0.0; N];
        for p in &pieces {
            for i in 0..N {
                value[i] += p.value[i];
                error[i] += p.error[i];
            }
        }
        let tol: [f64; N] = core::array::from_fn(|i| ctrl.abs_tol.max(ctrl.rel_tol * value[i].abs()));
        if (0..N).all(|i| error[i] <= tol[i]) {
            return Ok(Integral { value, error, evaluations });
        }
        let worst = pieces
            .iter()
            .enumerate()
            .filter(|(_, p)| p.splittable)
            .map(|(idx, p)| {
                let score = (0..N).map(|i| p.error[i] / tol[i]).fold(0.0, f64::max);
                (idx, score)
            })
            .max_by(|x, y| x.1.total_cmp(&y.1));
        let Some((idx, _)) = worst else {
            return Err(quad_failure(&error, &tol));
        };
        if pieces.len() >= ctrl.max_intervals {
            return Err(quad_failure(&error, &tol));
        }
        let p = pieces.swap_remove(idx);
        let mid = 0.5 * (p.a + p.b);
        pieces.push(gk15(f, p.a, mid));
        pieces.push(gk15(f, mid, p.b));
        evaluations += 30;
    }
}

fn quad_failure<const N: usize>(error: &[f64; N], tol: &[f64; N]) -> Error {
    let i = (0..N).max_by(|&x, &y| (error[x] / tol[x]).total_cmp(&(error[y] / tol[y]))).unwrap_or(0);
    Error::Quadrature { achieved: error[i], requested: tol[i] }
}
