//! Adaptive Gauss–Kronrod (7/15) quadrature with global bisection.
//!
//! The error contract is absolute: the returned estimate satisfies
//! `error <= max(tol, ROUNDOFF * |integral|)`. The roundoff floor keeps large
//! integrals from demanding more digits than `f64` carries.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the embedded 7-point rule (nodes XGK[1], XGK[3], XGK[5], 0).
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const ROUNDOFF: f64 = 64.0 * f64::EPSILON;

/// Default cap on the number of panels held by the adaptive scheme.
pub const DEFAULT_MAX_PANELS: usize = 4000;

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

#[derive(Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrate `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<Integral> {
    integrate_with_breaks(f, &[a, b], tol, DEFAULT_MAX_PANELS)
}

/// Integrate `f` over the partition given by `breaks` (sorted, at least two
/// points). Panels never straddle a break point.
pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    tol: f64,
    max_panels: usize,
) -> Result<Integral> {
    if breaks.len() < 2 {
        return Err(Error::Domain("quadrature needs at least two break points".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("quadrature tolerance must be positive, got {tol}")));
    }
    let (lo, hi) = (breaks[0], breaks[breaks.len() - 1]);
    if lo == hi {
        return Ok(Integral { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in breaks.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let (value, error) = gk15(&mut f, w[0], w[1]);
        evaluations += 15;
        total += value;
        total_err += error;
        heap.push(Panel { a: w[0], b: w[1], value, error });
    }
    if !total.is_finite() || !total_err.is_finite() {
        return Err(Error::Quadrature { a: lo, b: hi, error: total_err, tol });
    }
    while total_err > tol.max(ROUNDOFF * total.abs()) {
        if heap.len() >= max_panels {
            let worst = heap.peek().expect("non-empty");
            return Err(Error::Quadrature { a: worst.a, b: worst.b, error: total_err, tol });
        }
        let worst = heap.pop().expect("non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // Panel cannot be split further in f64.
            return Err(Error::Quadrature { a: worst.a, b: worst.b, error: total_err, tol });
        }
        let (v1, e1) = gk15(&mut f, worst.a, mid);
        let (v2, e2) = gk15(&mut f, mid, worst.b);
        evaluations += 30;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        if !total.is_finite() {
            return Err(Error::Quadrature { a: worst.a, b: worst.b, error: f64::INFINITY, tol });
        }
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
    }
    // Re-sum to shed the drift of the running updates.
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let error: f64 = heap.iter().map(|p| p.error).sum();
    Ok(Integral { value, error, evaluations })
}

fn gk15_vec<F: FnMut(f64, &mut [f64])>(
    f: &mut F,
    a: f64,
    b: f64,
    buf: &mut [f64],
    kron: &mut [f64],
    gauss: &mut [f64],
) -> f64 {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    f(center, buf);
    for i in 0..buf.len() {
        kron[i] = buf[i] * WGK[7];
        gauss[i] = buf[i] * WG[3];
    }
    for j in 0..7 {
        let dx = half * XGK[j];
        f(center - dx, buf);
        for i in 0..buf.len() {
            kron[i] += WGK[j] * buf[i];
            if j % 2 == 1 {
                gauss[i] += WG[j / 2] * buf[i];
            }
        }
        f(center + dx, buf);
        for i in 0..buf.len() {
            kron[i] += WGK[j] * buf[i];
            if j % 2 == 1 {
                gauss[i] += WG[j / 2] * buf[i];
            }
        }
    }
    let mut err: f64 = 0.0;
    for i in 0..buf.len() {
        err = err.max(((kron[i] - gauss[i]) * half).abs());
        kron[i] *= half;
    }
    err
}

struct VecPanel {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: f64,
}

/// Integrate a vector-valued integrand of length `dim` over `[a, b]`. The
/// error is measured in the max norm over components.
pub fn integrate_vec<F: FnMut(f64, &mut [f64])>(
    mut f: F,
    dim: usize,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<(Vec<f64>, f64)> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("quadrature tolerance must be positive, got {tol}")));
    }
    if a == b {
        return Ok((vec![0.0; dim], 0.0));
    }
    let mut buf = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];
    let mut kron = vec![0.0; dim];
    let error = gk15_vec(&mut f, a, b, &mut buf, &mut kron, &mut gauss);
    let mut panels = vec![VecPanel { a, b, value: kron.clone(), error }];
    loop {
        let mut total = vec![0.0; dim];
        let mut total_err = 0.0;
        let mut worst = 0;
        for (k, p) in panels.iter().enumerate() {
            for i in 0..dim {
                total[i] += p.value[i];
            }
            total_err += p.error;
            if p.error > panels[worst].error {
                worst = k;
            }
        }
        let scale = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !scale.is_finite() {
            return Err(Error::Quadrature { a, b, error: f64::INFINITY, tol });
        }
        if total_err <= tol.max(ROUNDOFF * scale) {
            return Ok((total, total_err));
        }
        if panels.len() >= DEFAULT_MAX_PANELS {
            return Err(Error::Quadrature { a, b, error: total_err, tol });
        }
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if !(mid > p.a && mid < p.b) {
            return Err(Error::Quadrature { a: p.a, b: p.b, error: total_err, tol });
        }
        let e1 = gk15_vec(&mut f, p.a, mid, &mut buf, &mut kron, &mut gauss);
        panels.push(VecPanel { a: p.a, b: mid, value: kron.clone(), error: e1 });
        let e2 = gk15_vec(&mut f, mid, p.b, &mut buf, &mut kron, &mut gauss);
        panels.push(VecPanel { a: mid, b: p.b, value: kron.clone(), error: e2 });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| x.powi(5) - 3.0 * x * x, 0.0, 2.0, 1e-12).unwrap();
        assert!((r.value - (64.0 / 6.0 - 8.0)).abs() < 1e-13);
    }

    #[test]
    fn exponential_decay_window() {
        let r = integrate(|s| (-2.0 * s).exp(), 0.0, 1.0, 1e-12).unwrap();
        assert!((r.value - (1.0 - (-2.0f64).exp()) / 2.0).abs() < 1e-13);
    }

    #[test]
    fn kink_at_break_point() {
        let f = |x: f64| (x - 0.3).abs();
        let r = integrate_with_breaks(f, &[0.0, 0.3, 1.0], 1e-13, 100).unwrap();
        assert!((r.value - (0.045 + 0.245)).abs() < 1e-14);
        assert_eq!(r.evaluations, 30);
    }

    #[test]
    fn sharp_peak_needs_refinement() {
        let f = |x: f64| 1.0 / (1e-4 + (x - 0.5).powi(2));
        let exact = 2.0 * (0.5f64 / 1e-2).atan() / 1e-2;
        let r = integrate(f, 0.0, 1.0, 1e-8).unwrap();
        assert!((r.value - exact).abs() < 1e-8, "{} vs {}", r.value, exact);
    }

    #[test]
    fn vector_integrand_matches_scalar() {
        let (v, _) = integrate_vec(
            |x, out| {
                out[0] = x.sin();
                out[1] = x.exp();
            },
            2,
            0.0,
            3.0,
            1e-12,
        )
        .unwrap();
        assert!((v[0] - (1.0 - 3.0f64.cos())).abs() < 1e-12);
        assert!((v[1] - (3.0f64.exp() - 1.0)).abs() < 1e-11);
    }

    #[test]
    fn rejects_bad_tolerance() {
        assert!(integrate(|x| x, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn nan_integrand_reports_failure() {
        let r = integrate(|_| f64::NAN, 0.0, 1.0, 1e-10);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }
}
