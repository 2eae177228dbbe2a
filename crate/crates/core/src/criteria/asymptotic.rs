//! Tail behaviour of `g(t) = ‖σ(t)‖²` for the built-in families, used to
//! bound or witness the divergence of the omitted part of a series or
//! integral criterion.

use crate::model::{DiffusionForm, DiffusionSpec, Envelope, MatrixNorm};
use crate::quad;

/// Eventual shape of `g(t)`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Profile {
    Zero,
    /// `g = 0` on `[end, ∞)`.
    CompactSupport { end: f64 },
    /// `g ≥ floor > 0` on `[0, ∞)`; `limit` is `lim g`, possibly `+∞`.
    NonVanishing { floor: f64, limit: f64, what: &'static str },
    /// `g = c·e^{−rate·t}`.
    ExpDecay { c: f64, rate: f64 },
    /// `g = c·(1+t)^{−power}`, `power > 0`.
    PowerDecay { c: f64, power: f64 },
    /// `g = c·ln(e+t)^{−power}`, `power > 0`.
    LogDecay { c: f64, power: f64 },
    /// Arbitrary closure; only empirical analysis is possible.
    Opaque,
}

pub(crate) fn profile(spec: &DiffusionSpec, norm: MatrixNorm) -> Profile {
    if spec.is_zero() {
        return Profile::Zero;
    }
    match spec.form() {
        DiffusionForm::Constant(m) => {
            let v = norm.norm_sq(m);
            Profile::NonVanishing { floor: v, limit: v, what: "constant diffusion" }
        }
        DiffusionForm::EnvelopeTimesPattern { envelope, pattern } => {
            let p = norm.norm_sq(pattern);
            match *envelope {
                Envelope::ExpDecay { scale, rate } => Profile::ExpDecay { c: scale * scale * p, rate: 2.0 * rate },
                Envelope::PowerLaw { scale, exponent } => {
                    let c = scale * scale * p;
                    if exponent < 0.0 {
                        Profile::PowerDecay { c, power: -2.0 * exponent }
                    } else {
                        let limit = if exponent == 0.0 { c } else { f64::INFINITY };
                        Profile::NonVanishing { floor: c, limit, what: "power-law envelope with α ≥ 0" }
                    }
                }
                Envelope::LogPower { gamma } => Profile::LogDecay { c: gamma * p, power: 1.0 },
                Envelope::LogGrow { scale, exponent } => {
                    let c = scale * scale * p;
                    if exponent < 0.0 {
                        Profile::LogDecay { c, power: -2.0 * exponent }
                    } else {
                        let limit = if exponent == 0.0 { c } else { f64::INFINITY };
                        Profile::NonVanishing { floor: c, limit, what: "logarithmic envelope with β ≥ 0" }
                    }
                }
            }
        }
        DiffusionForm::Table { times, values } => {
            // Beyond the last knot the last value is held.
            let last = norm.norm_sq(values.last().expect("non-empty table"));
            if last > 0.0 {
                return Profile::NonVanishing { floor: last, limit: last, what: "table held at a non-zero value" };
            }
            let mut k = values.len() - 1;
            while k > 0 && values[k - 1].iter().all(|v| *v == 0.0) {
                k -= 1;
            }
            Profile::CompactSupport { end: times[k] }
        }
        DiffusionForm::Custom(_) => Profile::Opaque,
    }
}

impl Profile {
    /// `lim_{t→∞} g(t)`, when known.
    pub(crate) fn limit(&self) -> Option<f64> {
        match self {
            Profile::Zero
            | Profile::CompactSupport { .. }
            | Profile::ExpDecay { .. }
            | Profile::PowerDecay { .. }
            | Profile::LogDecay { .. } => Some(0.0),
            Profile::NonVanishing { limit, .. } => Some(*limit),
            Profile::Opaque => None,
        }
    }

    /// Threshold `ε′` at which the criterion with window length `s` switches
    /// from divergent to convergent, when it lies strictly inside `(0, ∞)`.
    pub(crate) fn threshold(&self, s: f64) -> Option<f64> {
        match self {
            Profile::LogDecay { c, power } if *power == 1.0 && *c > 0.0 => Some((2.0 * s * c).sqrt()),
            _ => None,
        }
    }

    /// `lim θ²(n)·ln n` for windows of length `h`: `Some(v)` with `v = ∞`
    /// allowed, `None` when not determined analytically.
    pub(crate) fn limit_lh(&self, h: f64) -> Option<f64> {
        match self {
            Profile::Zero | Profile::CompactSupport { .. } | Profile::ExpDecay { .. } | Profile::PowerDecay { .. } => {
                Some(0.0)
            }
            Profile::NonVanishing { .. } => Some(f64::INFINITY),
            Profile::LogDecay { c, power } => Some(if *power > 1.0 {
                0.0
            } else if *power == 1.0 {
                h * c
            } else {
                f64::INFINITY
            }),
            Profile::Opaque => None,
        }
    }
}

/// Outcome of bounding `∫_{x0}^∞ f(s·g(x)) dx` with `f(v) = √v·e^{−ε²/(2v)}`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tail {
    Bound(f64),
    Divergent(String),
    /// Convergent, but the bound is not representable in `f64`.
    Overflow,
    Unknown,
}

fn ln_factorial(m: usize) -> f64 {
    (1..=m).map(|k| (k as f64).ln()).sum()
}

/// Upper bound for `∫_{x0}^∞ √(s g(x))·exp(−ε²/(2 s g(x))) dx`. Relies on
/// `g` being non-increasing on `[x0, ∞)` for the decaying families, so it
/// also bounds the sum of the criterion's terms when divided by the window.
pub(crate) fn tail_integral(profile: &Profile, s: f64, eps: f64, x0: f64) -> Tail {
    let e2 = eps * eps;
    match *profile {
        Profile::Zero => Tail::Bound(0.0),
        Profile::CompactSupport { end } => {
            if x0 >= end {
                Tail::Bound(0.0)
            } else {
                Tail::Unknown
            }
        }
        Profile::NonVanishing { floor, what, .. } => {
            let v = s * floor;
            Tail::Divergent(format!(
                "{what}: every window has intensity at least {v:.6e}, so each term is at least {:.6e} and the tail cannot converge",
                v.sqrt() * (-e2 / (2.0 * v)).exp()
            ))
        }
        Profile::ExpDecay { c, rate } => {
            // f(v) ≤ √v and √(s c e^{−rate x}) integrates in closed form.
            Tail::Bound((s * c).sqrt() * 2.0 / rate * (-rate * x0 / 2.0).exp())
        }
        Profile::PowerDecay { c, power } => {
            // e^{−z} ≤ m!·z^{−m}: the integrand is at most
            // √(sc)·m!·(2sc/ε²)^m·(1+x)^{−power(m+½)}.
            let sc = s * c;
            let m_min = ((1.0 / power - 0.5).floor() + 1.0).max(0.0) as usize;
            let mut best = f64::INFINITY;
            for m in m_min..m_min + 400 {
                let q = power * (m as f64 + 0.5);
                if q <= 1.0 {
                    continue;
                }
                let log_bound = 0.5 * sc.ln() + ln_factorial(m) + m as f64 * (2.0 * sc / e2).ln()
                    + (1.0 - q) * (1.0 + x0).ln()
                    - (q - 1.0).ln();
                best = best.min(log_bound);
            }
            if best > 700.0 {
                Tail::Overflow
            } else {
                Tail::Bound(best.exp())
            }
        }
        Profile::LogDecay { c, power } => log_decay_tail(s * c, power, e2, x0),
        Profile::Opaque => Tail::Unknown,
    }
}

fn log_decay_tail(sc: f64, q: f64, e2: f64, x0: f64) -> Tail {
    // Substitute u = ln(e+x): the bound becomes
    // √(sc)·u0^{−q/2}·∫_{u0}^∞ exp(u − κ u^q) du with κ = ε²/(2sc).
    let kappa = e2 / (2.0 * sc);
    let u0 = (std::f64::consts::E + x0).ln();
    let pre = sc.sqrt() * u0.powf(-q / 2.0);
    if q < 1.0 {
        return Tail::Divergent(format!(
            "intensity decays like ln(t)^(-{q}), slower than 1/ln t: terms dominate exp(-κ ln(n)^{q}) with κ = {kappa:.6e}, which is not summable"
        ));
    }
    if q == 1.0 {
        // Within rounding of κ = 1 the boundary case is treated as divergent.
        if kappa > 1.0 + 1e-12 {
            let log_k = (1.0 - kappa) * u0 - (kappa - 1.0).ln();
            return if log_k + pre.ln() > 700.0 { Tail::Overflow } else { Tail::Bound(pre * log_k.exp()) };
        }
        return Tail::Divergent(format!(
            "terms are at least a multiple of n^(-{kappa:.6})·(ln n)^(-1/2), a divergent series since the exponent is at most 1"
        ));
    }
    // q > 1: φ(u) = κu^q − u is convex; beyond U with φ'(U) ≥ 1 the tail is
    // at most e^{−φ(U)}/φ'(U).
    let phi = |u: f64| kappa * u.powf(q) - u;
    let dphi = |u: f64| kappa * q * u.powf(q - 1.0) - 1.0;
    let u1 = (2.0 / (kappa * q)).powf(1.0 / (q - 1.0));
    let big_u = u0.max(u1);
    // Peak of e^{−φ} on [u0, U].
    let u_star = (1.0 / (kappa * q)).powf(1.0 / (q - 1.0));
    let peak = if u_star > u0 { -phi(u_star) } else { -phi(u0) };
    if peak + pre.ln() > 700.0 {
        return Tail::Overflow;
    }
    let far = (-phi(big_u)).exp() / dphi(big_u);
    let near = if big_u > u0 {
        // Scale by the peak so the quadrature sees values of order one.
        match quad::integrate(|u| (-phi(u) - peak).exp(), u0, big_u, 1e-12) {
            Ok(r) => (r.value + r.error) * peak.exp(),
            Err(_) => return Tail::Unknown,
        }
    } else {
        0.0
    };
    let total = pre * (near + far);
    if total.is_finite() {
        Tail::Bound(total)
    } else {
        Tail::Overflow
    }
}
