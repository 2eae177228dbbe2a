//! Standard normal tail probabilities.

use libm::erfc;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_677_939_946_059_934_381_868_5;

// Beyond this point the continued fraction for the Mills ratio converges in
// a few dozen terms and erfc would start to lose relative accuracy.
const CF_SWITCH: f64 = 5.0;

/// `1 − Φ(x)` for the standard normal distribution function `Φ`.
///
/// `+∞` maps to 0 and `−∞` to 1. NaN propagates.
pub fn mills_tail(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == f64::INFINITY {
        return 0.0;
    }
    if x == f64::NEG_INFINITY {
        return 1.0;
    }
    if x > CF_SWITCH {
        gaussian_density(x) * mills_ratio(x)
    } else if x < -CF_SWITCH {
        1.0 - gaussian_density(-x) * mills_ratio(-x)
    } else {
        0.5 * erfc(x * std::f64::consts::FRAC_1_SQRT_2)
    }
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    mills_tail(-x)
}

/// Density `e^{−x²/2}/√(2π)`, with `x²` split so large arguments keep their
/// relative accuracy.
pub fn gaussian_density(x: f64) -> f64 {
    let x = x.abs();
    if x > 40.0 {
        return 0.0;
    }
    // hi carries at most 26 significant bits so hi*hi is exact.
    let hi = (x * 65536.0).trunc() / 65536.0;
    let lo = x - hi;
    let exponent_hi = -0.5 * hi * hi;
    let exponent_lo = -(hi * lo + 0.5 * lo * lo);
    FRAC_1_SQRT_2PI * exponent_hi.exp() * exponent_lo.exp()
}

/// Mills ratio `(1 − Φ(x)) / φ(x)` for `x > 0` by the continued fraction
/// `1/(x + 1/(x + 2/(x + 3/(x + …))))`, evaluated with the modified Lentz
/// recurrence.
fn mills_ratio(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / f
}
