//! Time sequences picking out minima or maxima of a non-negative integrand on
//! consecutive intervals.

use serde::Serialize;

use crate::error::{Error, Result};

const SCAN_POINTS: usize = 1024;
const GOLDEN_ITERATIONS: usize = 80;

// Leftmost extremiser on [lo, hi]: dense scan, then golden-section search
// between the neighbours of the best scan point. `sign = 1` minimises,
// `sign = −1` maximises.
fn leftmost_extremum<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64, sign: f64) -> f64 {
    let step = (hi - lo) / (SCAN_POINTS - 1) as f64;
    let point = |k: usize| if k == SCAN_POINTS - 1 { hi } else { lo + k as f64 * step };
    let mut best_k = 0;
    let mut best = sign * f(lo);
    for k in 1..SCAN_POINTS {
        let v = sign * f(point(k));
        if v < best {
            best = v;
            best_k = k;
        }
    }
    if best_k == 0 || best_k == SCAN_POINTS - 1 {
        return point(best_k);
    }
    let (mut a, mut b) = (point(best_k - 1), point(best_k + 1));
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = sign * f(c);
    let mut fd = sign * f(d);
    for _ in 0..GOLDEN_ITERATIONS {
        // Ties move left so the search keeps the leftmost candidate.
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = sign * f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = sign * f(d);
        }
        if b - a <= 4.0 * f64::EPSILON * b.abs().max(1.0) {
            break;
        }
    }
    let x = if fc <= fd { c } else { d };
    if sign * f(x) < best {
        x
    } else {
        point(best_k)
    }
}

fn check_args(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("step h must be positive, got {h}")))
    }
}

// Nudge x by ulps into [lo, hi] relative to the previous point.
fn clamp_gap(prev: f64, x: f64, h_lo: f64, h_hi: f64) -> f64 {
    let mut x = x;
    while x - prev < h_lo {
        x = x.next_up();
    }
    while x - prev > h_hi {
        x = x.next_down();
    }
    x
}

/// `t_0 = 0`, `t_{n+1}` the leftmost minimiser of `f` on `[t_n+h, t_n+2h]`.
/// Returns `t_0..=t_{n_max}`.
pub fn build_min_sequence<F: FnMut(f64) -> f64>(mut f: F, h: f64, n_max: usize) -> Result<Vec<f64>> {
    check_args(h)?;
    let mut t = Vec::with_capacity(n_max + 1);
    t.push(0.0);
    for n in 0..n_max {
        let prev = t[n];
        let x = leftmost_extremum(&mut f, prev + h, prev + 2.0 * h, 1.0);
        t.push(clamp_gap(prev, x, h, 2.0 * h));
    }
    Ok(t)
}

/// Which subsequence of the maximisers is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MaxCase {
    /// `t_n = s_{2n}`.
    Even,
    /// `t_0 = 0`, `t_n = s_{2n−1}`.
    Odd,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxSequence {
    /// `s_0 = 0` and `s_n` the leftmost maximiser on `[nh, (n+1)h]`.
    pub s: Vec<f64>,
    /// Subsequence with the larger sum of `f` over the computed range.
    pub case: MaxCase,
    pub t: Vec<f64>,
}

impl MaxSequence {
    pub fn subsequence(&self, case: MaxCase) -> Vec<f64> {
        match case {
            MaxCase::Even => self.s.iter().step_by(2).copied().collect(),
            MaxCase::Odd => std::iter::once(0.0).chain(self.s.iter().skip(1).step_by(2).copied()).collect(),
        }
    }
}

/// Maximiser sequence `s_n` for `n = 0..=n_max` and the derived sequence
/// with spacing in `[h, 3h]`.
pub fn build_max_sequence<F: FnMut(f64) -> f64>(mut f: F, h: f64, n_max: usize) -> Result<MaxSequence> {
    check_args(h)?;
    let mut s = Vec::with_capacity(n_max + 1);
    s.push(0.0);
    for n in 1..=n_max {
        let lo = n as f64 * h;
        let hi = (n + 1) as f64 * h;
        s.push(leftmost_extremum(&mut f, lo, hi, -1.0).clamp(lo, hi));
    }
    let even: f64 = s.iter().skip(2).step_by(2).map(|&x| f(x)).sum();
    let odd: f64 = s.iter().skip(1).step_by(2).map(|&x| f(x)).sum();
    let case = if even >= odd { MaxCase::Even } else { MaxCase::Odd };
    let mut seq = MaxSequence { s, case, t: Vec::new() };
    seq.t = seq.subsequence(case);
    Ok(seq)
}
