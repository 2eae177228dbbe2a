//! Finiteness rulings for the series criterion `S′_h(ε)` and the integral
//! criterion `I_c(ε)`, and the limits that drive them.

use log::info;
use serde::Serialize;

use super::asymptotic::{profile, tail_integral, Profile, Tail};
use super::terms::{check_eps, integral_i_in, term_s_prime};
use crate::error::{Error, Result};
use crate::model::{window_intensity_in, DiffusionSpec, MatrixNorm, DEFAULT_QUAD_TOL};

/// Default number of explicitly summed terms before the analytic tail bound.
pub const DEFAULT_SERIES_TERMS: usize = 2048;
/// Default horizon of the explicit part of the integral criterion, in units
/// of the window length.
pub const DEFAULT_INTEGRAL_WINDOWS: f64 = 1024.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Finiteness {
    Finite,
    Infinite,
    Undecided,
}

/// Verdict on the finiteness of one criterion at one `ε`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinitenessRuling {
    pub eps: f64,
    pub status: Finiteness,
    /// Explicitly accumulated partial sum or integral.
    pub partial_value: f64,
    /// Bound on the omitted tail: finite for `Finite`, `+∞` for `Infinite`,
    /// absent for `Undecided`.
    #[serde(serialize_with = "crate::report::ser_opt_f64")]
    pub tail_bound: Option<f64>,
    /// Divergence argument for `Infinite`, or the reason for `Undecided`.
    pub witness: Option<String>,
    pub n_terms: Option<usize>,
    pub t_max: Option<f64>,
}

impl FinitenessRuling {
    /// `partial_value + tail_bound` for finite rulings.
    pub fn upper_bound(&self) -> Option<f64> {
        match (self.status, self.tail_bound) {
            (Finiteness::Finite, Some(t)) => Some(self.partial_value + t),
            _ => None,
        }
    }
}

/// `lim θ²(n)·ln n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value")]
pub enum LimitLh {
    Value(f64),
    Infinite,
    Undecided,
}

impl LimitLh {
    fn from_value(v: f64) -> Self {
        if v == f64::INFINITY {
            LimitLh::Infinite
        } else {
            LimitLh::Value(v)
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct EmpiricalLog {
    limit: LimitLh,
    /// Largest sampled `θ²·ln(e+t)/s`, an envelope constant for the tail.
    envelope: f64,
}

// Sample window energies far out and extrapolate θ²(n)·ln n in 1/ln n.
fn empirical_log(spec: &DiffusionSpec, s: f64, norm: MatrixNorm, tol: f64) -> Result<EmpiricalLog> {
    let ns = [1e3, 1e4, 1e5, 1e6];
    let mut v = [0.0; 4];
    let mut envelope: f64 = 0.0;
    for (k, &n) in ns.iter().enumerate() {
        let t = n * s;
        let theta_sq = spec.intensity(t, t + s, norm, tol)?;
        v[k] = theta_sq * n.ln();
        envelope = envelope.max(theta_sq * (std::f64::consts::E + t).ln() / s);
    }
    let scale = v.iter().copied().fold(0.0, f64::max);
    if scale <= 1e-12 {
        return Ok(EmpiricalLog { limit: LimitLh::Value(0.0), envelope });
    }
    let rich = |i: usize| {
        let (a, b) = (ns[i].ln(), ns[i + 1].ln());
        (v[i + 1] * b - v[i] * a) / (b - a)
    };
    let (r1, r2) = (rich(1), rich(2));
    let converged = (r2 - r1).abs() <= 2e-2 * r2.abs().max(1e-12) && v[3] <= 2.0 * v[2] && r2.is_finite();
    let limit = if !converged {
        LimitLh::Undecided
    } else if r2.abs() <= 1e-6 * scale {
        LimitLh::Value(0.0)
    } else {
        LimitLh::Value(r2.max(0.0))
    };
    Ok(EmpiricalLog { limit, envelope })
}

/// `L_h = lim θ²(n)·ln n`, analytic for the built-in families and
/// extrapolated from samples for closures.
pub fn limit_lh(spec: &DiffusionSpec, h: f64) -> Result<LimitLh> {
    limit_lh_in(spec, h, MatrixNorm::Frobenius)
}

pub(crate) fn limit_lh_in(spec: &DiffusionSpec, h: f64, norm: MatrixNorm) -> Result<LimitLh> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("window length must be positive, got {h}")));
    }
    let p = profile(spec, norm);
    match p.limit_lh(h) {
        Some(v) => Ok(LimitLh::from_value(v)),
        None => Ok(empirical_log(spec, h, norm, DEFAULT_QUAD_TOL)?.limit),
    }
}

/// Rule on a criterion given its explicit part and the tail bound.
fn rule(eps: f64, partial: f64, tail: Tail, n_terms: Option<usize>, t_max: Option<f64>) -> FinitenessRuling {
    let (status, tail_bound, witness) = match tail {
        Tail::Bound(b) => (Finiteness::Finite, Some(b), None),
        Tail::Divergent(w) => (Finiteness::Infinite, Some(f64::INFINITY), Some(w)),
        Tail::Overflow => (
            Finiteness::Undecided,
            None,
            Some("the tail converges but its bound exceeds the floating-point range".to_string()),
        ),
        Tail::Unknown => (Finiteness::Undecided, None, Some("no analytic tail bound for this diffusion".to_string())),
    };
    FinitenessRuling { eps, status, partial_value: partial, tail_bound, witness, n_terms, t_max }
}

// Tail handling for closures carrying the monotone hint: a logarithmic
// envelope fitted to far-out samples stands in for the family.
fn empirical_tail(emp: &EmpiricalLog, s: f64, eps: f64, x0: f64) -> Tail {
    match emp.limit {
        LimitLh::Undecided => Tail::Unknown,
        LimitLh::Infinite => Tail::Unknown,
        LimitLh::Value(l) => {
            let c = (l / s).max(emp.envelope);
            match tail_integral(&Profile::LogDecay { c, power: 1.0 }, s, eps, x0) {
                Tail::Bound(b) => Tail::Bound(b),
                Tail::Divergent(w) if eps * eps < 2.0 * l => Tail::Divergent(format!("empirical (monotone hint trusted): {w}")),
                _ => Tail::Unknown,
            }
        }
    }
}

/// Series criterion `S′_h(ε)` with the window energies cached so that many
/// values of `ε` can be ruled on cheaply.
#[derive(Debug, Clone)]
pub struct SeriesCriterion<'a> {
    spec: &'a DiffusionSpec,
    h: f64,
    profile: Profile,
    empirical: Option<EmpiricalLog>,
    /// `θ²(n)` for `n = 1..=N`.
    theta_sq: Vec<f64>,
}

impl<'a> SeriesCriterion<'a> {
    pub fn new(spec: &'a DiffusionSpec, h: f64, norm: MatrixNorm, n_terms: usize, tol: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Domain(format!("window length must be positive, got {h}")));
        }
        let profile = profile(spec, norm);
        let mut n = n_terms.max(1);
        if let Profile::CompactSupport { end } = profile {
            n = n.max((end / h).ceil() as usize + 1);
        }
        let empirical = if profile == Profile::Opaque && spec.monotone_hint() {
            info!("trusting the monotone-window hint for an opaque diffusion");
            Some(empirical_log(spec, h, norm, tol)?)
        } else {
            None
        };
        let w = window_intensity_in(spec, h, n + 1, tol, norm)?;
        Ok(Self { spec, h, profile, empirical, theta_sq: w.values[1..].to_vec() })
    }

    pub fn spec(&self) -> &DiffusionSpec {
        self.spec
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_terms(&self) -> usize {
        self.theta_sq.len()
    }

    /// Cached `θ²(n)` for `n = 1..=N`.
    pub fn window_energies(&self) -> &[f64] {
        &self.theta_sq
    }

    pub(crate) fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn partial(&self, eps: f64) -> f64 {
        self.theta_sq.iter().map(|&v| term_s_prime(eps, v)).sum()
    }

    pub fn ruling(&self, eps: f64) -> Result<FinitenessRuling> {
        check_eps(eps)?;
        let n = self.theta_sq.len();
        let x0 = n as f64 * self.h;
        let tail = match &self.empirical {
            Some(emp) => empirical_tail(emp, self.h, eps, x0),
            None => tail_integral(&self.profile, self.h, eps, x0),
        };
        // Σ_{n>N} F(nh) ≤ (1/h)∫_{Nh}^∞ F for the non-increasing bound F.
        let tail = match tail {
            Tail::Bound(b) => Tail::Bound(b / self.h),
            other => other,
        };
        Ok(rule(eps, self.partial(eps), tail, Some(n), None))
    }
}

/// Finiteness of `S′_h(ε)` with the default number of explicit terms.
pub fn decide_s_prime(spec: &DiffusionSpec, eps: f64, h: f64) -> Result<FinitenessRuling> {
    SeriesCriterion::new(spec, h, MatrixNorm::Frobenius, DEFAULT_SERIES_TERMS, DEFAULT_QUAD_TOL)?.ruling(eps)
}

/// Integral criterion `I_c(ε)`.
#[derive(Debug, Clone)]
pub struct IntegralCriterion<'a> {
    spec: &'a DiffusionSpec,
    c: f64,
    norm: MatrixNorm,
    t_max: f64,
    tol: f64,
    profile: Profile,
    empirical: Option<EmpiricalLog>,
}

impl<'a> IntegralCriterion<'a> {
    pub fn new(spec: &'a DiffusionSpec, c: f64, norm: MatrixNorm, t_max: f64, tol: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Domain(format!("window length must be positive, got {c}")));
        }
        let profile = profile(spec, norm);
        let mut t_max = t_max;
        if let Profile::CompactSupport { end } = profile {
            t_max = t_max.max(end);
        }
        let empirical = if profile == Profile::Opaque && spec.monotone_hint() {
            Some(empirical_log(spec, c, norm, tol)?)
        } else {
            None
        };
        Ok(Self { spec, c, norm, t_max, tol, profile, empirical })
    }

    pub fn ruling(&self, eps: f64) -> Result<FinitenessRuling> {
        check_eps(eps)?;
        let tail = match &self.empirical {
            Some(emp) => empirical_tail(emp, self.c, eps, self.t_max),
            None => tail_integral(&self.profile, self.c, eps, self.t_max),
        };
        let partial = integral_i_in(self.spec, eps, self.c, self.t_max, self.tol, self.norm)?;
        Ok(rule(eps, partial, tail, None, Some(self.t_max)))
    }
}

/// Finiteness of `I_c(ε)` with the default explicit horizon.
pub fn decide_i(spec: &DiffusionSpec, eps: f64, c: f64) -> Result<FinitenessRuling> {
    IntegralCriterion::new(spec, c, MatrixNorm::Frobenius, DEFAULT_INTEGRAL_WINDOWS * c, 1e-9)?.ruling(eps)
}

/// Whether `θ²(n) → 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FadingCheck {
    /// `None` when neither analysis nor the trend test is conclusive.
    pub fading: Option<bool>,
    /// `lim θ²(n)` (or the last sampled value for the trend test).
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub limit: f64,
    pub analytic: bool,
}

/// Decide `lim θ²(n) = 0` for windows of length `h`.
pub fn check_fading(spec: &DiffusionSpec, h: f64) -> Result<FadingCheck> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("window length must be positive, got {h}")));
    }
    let p = profile(spec, MatrixNorm::Frobenius);
    if let Some(g_inf) = p.limit() {
        let limit = if g_inf == 0.0 { 0.0 } else { h * g_inf };
        return Ok(FadingCheck { fading: Some(g_inf == 0.0), limit, analytic: true });
    }
    // Trend test on dyadic windows.
    let samples = (4..=24)
        .map(|k| {
            let t = (1u64 << k) as f64 * h;
            spec.intensity(t, t + h, MatrixNorm::Frobenius, DEFAULT_QUAD_TOL)
        })
        .collect::<Result<Vec<f64>>>()?;
    let peak = samples.iter().copied().fold(0.0, f64::max);
    let last = *samples.last().expect("non-empty");
    let tail = &samples[samples.len() - 6..];
    let fading = if peak == 0.0 {
        Some(true)
    } else if tail.windows(2).all(|w| w[1] < w[0]) && last < 1e-2 * peak {
        Some(true)
    } else if tail.windows(2).all(|w| w[1] >= w[0]) {
        Some(false)
    } else {
        None
    };
    Ok(FadingCheck { fading, limit: last, analytic: false })
}

/// The equivalent conditions for mean-square stability that can be checked
/// from `σ` alone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanSquareReport {
    /// Fading windows for `h = 1`.
    pub fading_unit_window: Option<bool>,
    /// Fading windows for every `h` in `h_values`.
    pub fading_all_windows: Option<bool>,
    /// `∫_t^{t+1}‖σ‖²_F → 0` along continuous `t`.
    pub running_window_to_zero: Option<bool>,
    pub h_values: Vec<f64>,
    /// All decided statements agree.
    pub consistent: bool,
}

pub fn mean_square_equiv(spec: &DiffusionSpec) -> Result<MeanSquareReport> {
    let h_values = vec![0.25, 0.5, 1.0, 2.0, 4.0];
    let unit = check_fading(spec, 1.0)?.fading;
    let all = h_values.iter().map(|&h| Ok(check_fading(spec, h)?.fading)).collect::<Result<Vec<_>>>()?;
    let all = if all.iter().any(|v| v.is_none()) {
        None
    } else {
        Some(all.iter().all(|v| *v == Some(true)))
    };
    let running = match profile(spec, MatrixNorm::Frobenius).limit() {
        Some(g) => Some(g == 0.0),
        None => {
            // Offsets that are not multiples of a window length.
            let samples = (4..=24)
                .map(|k| {
                    let t = (1u64 << k) as f64 * 1.37;
                    spec.intensity(t, t + 1.0, MatrixNorm::Frobenius, DEFAULT_QUAD_TOL)
                })
                .collect::<Result<Vec<f64>>>()?;
            let peak = samples.iter().copied().fold(0.0, f64::max);
            let tail = &samples[samples.len() - 6..];
            if peak == 0.0 || (tail.windows(2).all(|w| w[1] < w[0]) && tail[5] < 1e-2 * peak) {
                Some(true)
            } else if tail.windows(2).all(|w| w[1] >= w[0]) {
                Some(false)
            } else {
                None
            }
        }
    };
    let decided: Vec<bool> = [unit, all, running].into_iter().flatten().collect();
    let consistent = decided.windows(2).all(|w| w[0] == w[1]);
    Ok(MeanSquareReport {
        fading_unit_window: unit,
        fading_all_windows: all,
        running_window_to_zero: running,
        h_values,
        consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Envelope, Matrix};
    use nalgebra::dmatrix;
    use std::sync::Arc;

    fn log_power(gamma: f64) -> DiffusionSpec {
        DiffusionSpec::envelope(Envelope::LogPower { gamma }, dmatrix![1.0]).unwrap()
    }

    #[test]
    fn exp_decay_is_finite_everywhere() {
        let s = DiffusionSpec::envelope(Envelope::ExpDecay { scale: 1.0, rate: 1.0 }, dmatrix![1.0]).unwrap();
        for &eps in &[1e-3, 0.1, 1.0, 10.0] {
            let r = decide_s_prime(&s, eps, 1.0).unwrap();
            assert_eq!(r.status, Finiteness::Finite);
            assert!(r.tail_bound.unwrap().is_finite());
            assert_eq!(decide_i(&s, eps, 1.0).unwrap().status, Finiteness::Finite);
        }
    }

    #[test]
    fn log_power_threshold() {
        let s = log_power(1.0);
        let r = decide_s_prime(&s, 1.0, 1.0).unwrap();
        assert_eq!(r.status, Finiteness::Infinite);
        assert!(r.witness.is_some());
        assert_eq!(decide_s_prime(&s, 2.0, 1.0).unwrap().status, Finiteness::Finite);
        assert_eq!(decide_i(&s, 1.0, 1.0).unwrap().status, Finiteness::Infinite);
        assert_eq!(decide_i(&s, 2.0, 1.0).unwrap().status, Finiteness::Finite);
    }

    #[test]
    fn constant_is_infinite_everywhere() {
        let s = DiffusionSpec::constant(dmatrix![0.2]).unwrap();
        for &eps in &[1e-3, 1.0, 100.0] {
            assert_eq!(decide_s_prime(&s, eps, 1.0).unwrap().status, Finiteness::Infinite);
            assert_eq!(decide_i(&s, eps, 1.0).unwrap().status, Finiteness::Infinite);
        }
    }

    #[test]
    fn finite_ruling_bounds_a_longer_partial_sum() {
        let s = log_power(1.0);
        let short = SeriesCriterion::new(&s, 1.0, MatrixNorm::Frobenius, 200, 1e-12).unwrap();
        let long = SeriesCriterion::new(&s, 1.0, MatrixNorm::Frobenius, 20_000, 1e-12).unwrap();
        let r = short.ruling(2.0).unwrap();
        assert!(long.partial(2.0) <= r.upper_bound().unwrap());
    }

    #[test]
    fn limit_lh_examples() {
        assert_eq!(limit_lh(&log_power(2.0), 1.0).unwrap(), LimitLh::Value(2.0));
        let e = DiffusionSpec::envelope(Envelope::ExpDecay { scale: 1.0, rate: 1.0 }, dmatrix![1.0]).unwrap();
        assert_eq!(limit_lh(&e, 1.0).unwrap(), LimitLh::Value(0.0));
        assert_eq!(limit_lh(&DiffusionSpec::constant(dmatrix![0.4]).unwrap(), 1.0).unwrap(), LimitLh::Infinite);
    }

    #[test]
    fn empirical_limit_for_closure() {
        let f = Arc::new(|t: f64| dmatrix![(2.0 / (std::f64::consts::E + t).ln()).sqrt()]);
        let s = DiffusionSpec::custom(1, 1, f).unwrap();
        match limit_lh(&s, 1.0).unwrap() {
            LimitLh::Value(v) => assert!((v - 2.0).abs() < 0.05, "{v}"),
            other => panic!("{other:?}"),
        }
        // Without the hint no ruling is made.
        assert_eq!(decide_s_prime(&s, 3.0, 1.0).unwrap().status, Finiteness::Undecided);
        let hinted = s.with_monotone_hint(true);
        assert_eq!(decide_s_prime(&hinted, 3.0, 1.0).unwrap().status, Finiteness::Finite);
        assert_eq!(decide_s_prime(&hinted, 1.0, 1.0).unwrap().status, Finiteness::Infinite);
    }

    #[test]
    fn fading_examples() {
        let e = DiffusionSpec::envelope(Envelope::ExpDecay { scale: 1.0, rate: 1.0 }, dmatrix![1.0]).unwrap();
        assert_eq!(check_fading(&e, 1.0).unwrap().fading, Some(true));
        assert_eq!(check_fading(&DiffusionSpec::constant(dmatrix![1.0]).unwrap(), 1.0).unwrap().fading, Some(false));
        assert_eq!(check_fading(&log_power(3.0), 1.0).unwrap().fading, Some(true));
        let f = Arc::new(|t: f64| dmatrix![1.0 / (1.0 + t)]);
        let c = check_fading(&DiffusionSpec::custom(1, 1, f).unwrap(), 1.0).unwrap();
        assert_eq!(c.fading, Some(true));
        assert!(!c.analytic);
    }

    #[test]
    fn mean_square_examples() {
        let e = DiffusionSpec::envelope(Envelope::ExpDecay { scale: 1.0, rate: 1.0 }, dmatrix![1.0]).unwrap();
        let r = mean_square_equiv(&e).unwrap();
        assert_eq!((r.fading_unit_window, r.fading_all_windows, r.running_window_to_zero), (Some(true), Some(true), Some(true)));
        let c = mean_square_equiv(&DiffusionSpec::constant(Matrix::identity(2, 2)).unwrap()).unwrap();
        assert_eq!((c.fading_unit_window, c.fading_all_windows, c.running_window_to_zero), (Some(false), Some(false), Some(false)));
        let g = DiffusionSpec::envelope(Envelope::LogGrow { scale: 1.0, exponent: 1.0 }, dmatrix![1.0]).unwrap();
        let g = mean_square_equiv(&g).unwrap();
        assert_eq!(g.fading_all_windows, Some(false));
        assert!(g.consistent);
    }
}
