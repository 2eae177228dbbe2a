//! Diffusion and drift descriptions, pointwise evaluation and the windowed
//! intensities of `‖σ‖²` consumed by the criteria and the simulator.

use std::f64::consts::{E, PI};
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::quad;

pub type Matrix = DMatrix<f64>;

/// Default absolute tolerance for windowed intensity quadrature.
pub const DEFAULT_QUAD_TOL: f64 = 1e-10;

/// Scalar envelope families `t ↦ e(t)` multiplying a fixed pattern matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Envelope {
    /// `k·(1+t)^α`
    PowerLaw { scale: f64, exponent: f64 },
    /// `sqrt(γ / ln(e+t))`
    LogPower { gamma: f64 },
    /// `k·e^{−λt}`
    ExpDecay { scale: f64, rate: f64 },
    /// `k·(ln(e+t))^β`
    LogGrow { scale: f64, exponent: f64 },
}

impl Envelope {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Envelope::PowerLaw { scale, exponent } => scale.is_finite() && exponent.is_finite(),
            Envelope::LogPower { gamma } => gamma.is_finite() && gamma >= 0.0,
            Envelope::ExpDecay { scale, rate } => scale.is_finite() && rate.is_finite() && rate > 0.0,
            Envelope::LogGrow { scale, exponent } => scale.is_finite() && exponent.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("invalid envelope parameters {self:?}")))
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Envelope::PowerLaw { scale, exponent } => scale * (1.0 + t).powf(exponent),
            Envelope::LogPower { gamma } => (gamma / (E + t).ln()).sqrt(),
            Envelope::ExpDecay { scale, rate } => scale * (-rate * t).exp(),
            Envelope::LogGrow { scale, exponent } => scale * (E + t).ln().powf(exponent),
        }
    }

    /// `e(t)²`, computed without the square root where possible.
    pub fn eval_sq(&self, t: f64) -> f64 {
        match *self {
            Envelope::PowerLaw { scale, exponent } => scale * scale * (1.0 + t).powf(2.0 * exponent),
            Envelope::LogPower { gamma } => gamma / (E + t).ln(),
            Envelope::ExpDecay { scale, rate } => scale * scale * (-2.0 * rate * t).exp(),
            Envelope::LogGrow { scale, exponent } => scale * scale * (E + t).ln().powf(2.0 * exponent),
        }
    }
}

/// Norm used to measure the diffusion intensity. Frobenius is the default;
/// the others exist to check that the classification does not depend on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatrixNorm {
    #[default]
    Frobenius,
    MaxEntry,
    Spectral,
}

impl MatrixNorm {
    pub fn norm_sq(&self, m: &Matrix) -> f64 {
        match self {
            MatrixNorm::Frobenius => frobenius_sq(m),
            MatrixNorm::MaxEntry => m.iter().fold(0.0f64, |acc, v| acc.max(v * v)),
            MatrixNorm::Spectral => {
                if m.is_empty() {
                    0.0
                } else {
                    let s = m.singular_values();
                    let top = s.iter().fold(0.0f64, |acc, v| acc.max(*v));
                    top * top
                }
            }
        }
    }
}

/// Sum of squared entries.
pub fn frobenius_sq(m: &Matrix) -> f64 {
    m.iter().map(|v| v * v).sum()
}

pub type SigmaFn = Arc<dyn Fn(f64) -> Matrix + Send + Sync>;

#[derive(Clone)]
pub enum DiffusionForm {
    Constant(Matrix),
    EnvelopeTimesPattern { envelope: Envelope, pattern: Matrix },
    /// Piecewise linear between knots, first value held before the first
    /// knot and last value held after the last one.
    Table { times: Vec<f64>, values: Vec<Matrix> },
    /// Arbitrary continuous closure. Only empirical analysis is available.
    Custom(SigmaFn),
}

impl fmt::Debug for DiffusionForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiffusionForm::Constant(m) => f.debug_tuple("Constant").field(m).finish(),
            DiffusionForm::EnvelopeTimesPattern { envelope, pattern } => f
                .debug_struct("EnvelopeTimesPattern")
                .field("envelope", envelope)
                .field("pattern", pattern)
                .finish(),
            DiffusionForm::Table { times, values } => {
                f.debug_struct("Table").field("times", times).field("values", values).finish()
            }
            DiffusionForm::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Deterministic diffusion coefficient `σ: [0,∞) → R^{d×r}`.
#[derive(Debug, Clone)]
pub struct DiffusionSpec {
    d: usize,
    r: usize,
    form: DiffusionForm,
    monotone_hint: bool,
}

fn check_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("{what} has non-finite entries")))
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("time must be finite and non-negative, got {t}")))
    }
}

impl DiffusionSpec {
    pub fn constant(m: Matrix) -> Result<Self> {
        check_finite(&m, "constant diffusion")?;
        if m.is_empty() {
            return Err(Error::InvalidSpec("diffusion matrix must be non-empty".into()));
        }
        Ok(Self { d: m.nrows(), r: m.ncols(), form: DiffusionForm::Constant(m), monotone_hint: false })
    }

    pub fn envelope(envelope: Envelope, pattern: Matrix) -> Result<Self> {
        envelope.validate()?;
        check_finite(&pattern, "pattern")?;
        if pattern.is_empty() {
            return Err(Error::InvalidSpec("pattern matrix must be non-empty".into()));
        }
        Ok(Self {
            d: pattern.nrows(),
            r: pattern.ncols(),
            form: DiffusionForm::EnvelopeTimesPattern { envelope, pattern },
            monotone_hint: false,
        })
    }

    pub fn table(times: Vec<f64>, values: Vec<Matrix>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::InvalidSpec("table needs matching, non-empty times and values".into()));
        }
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::InvalidSpec("table times must be finite and non-negative".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSpec("table times must be strictly increasing".into()));
        }
        let (d, r) = values[0].shape();
        if d == 0 || r == 0 {
            return Err(Error::InvalidSpec("table matrices must be non-empty".into()));
        }
        for v in &values {
            if v.shape() != (d, r) {
                return Err(Error::InvalidSpec("table matrices must share one shape".into()));
            }
            check_finite(v, "table value")?;
        }
        Ok(Self { d, r, form: DiffusionForm::Table { times, values }, monotone_hint: false })
    }

    pub fn custom(d: usize, r: usize, f: SigmaFn) -> Result<Self> {
        if d == 0 || r == 0 {
            return Err(Error::InvalidSpec("custom diffusion must have positive dimensions".into()));
        }
        Ok(Self { d, r, form: DiffusionForm::Custom(f), monotone_hint: false })
    }

    /// Assert that `n ↦ ∫_{nh}^{(n+1)h}‖σ‖²` is eventually non-increasing.
    /// The hint is trusted, not verified.
    pub fn with_monotone_hint(mut self, hint: bool) -> Self {
        self.monotone_hint = hint;
        self
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn form(&self) -> &DiffusionForm {
        &self.form
    }

    pub fn monotone_hint(&self) -> bool {
        self.monotone_hint
    }

    pub fn is_zero(&self) -> bool {
        match &self.form {
            DiffusionForm::Constant(m) => m.iter().all(|v| *v == 0.0),
            DiffusionForm::EnvelopeTimesPattern { envelope, pattern } => {
                pattern.iter().all(|v| *v == 0.0)
                    || matches!(
                        envelope,
                        Envelope::PowerLaw { scale, .. }
                        | Envelope::ExpDecay { scale, .. }
                        | Envelope::LogGrow { scale, .. } if *scale == 0.0
                    )
                    || matches!(envelope, Envelope::LogPower { gamma } if *gamma == 0.0)
            }
            DiffusionForm::Table { values, .. } => values.iter().all(|m| m.iter().all(|v| *v == 0.0)),
            DiffusionForm::Custom(_) => false,
        }
    }

    /// Knot times of a table form; quadrature panels split there.
    pub fn knots(&self) -> &[f64] {
        match &self.form {
            DiffusionForm::Table { times, .. } => times,
            _ => &[],
        }
    }

    fn table_segment(times: &[f64], t: f64) -> (usize, f64) {
        // Returns (i, w) with σ(t) = (1−w)·v[i] + w·v[i+1]; w = 0 outside the knots.
        let n = times.len();
        if n == 1 || t <= times[0] {
            return (0, 0.0);
        }
        if t >= times[n - 1] {
            return (n - 1, 0.0);
        }
        let i = times.partition_point(|&x| x <= t) - 1;
        let w = (t - times[i]) / (times[i + 1] - times[i]);
        (i, w)
    }

    /// `σ(t)`.
    pub fn eval(&self, t: f64) -> Result<Matrix> {
        check_time(t)?;
        Ok(self.eval_unchecked(t))
    }

    pub(crate) fn eval_unchecked(&self, t: f64) -> Matrix {
        match &self.form {
            DiffusionForm::Constant(m) => m.clone(),
            DiffusionForm::EnvelopeTimesPattern { envelope, pattern } => pattern * envelope.eval(t),
            DiffusionForm::Table { times, values } => {
                let (i, w) = Self::table_segment(times, t);
                if w == 0.0 {
                    values[i].clone()
                } else {
                    &values[i] * (1.0 - w) + &values[i + 1] * w
                }
            }
            DiffusionForm::Custom(f) => f(t),
        }
    }

    /// `‖σ(t)‖²` in the requested norm.
    pub fn norm_sq_at(&self, t: f64, norm: MatrixNorm) -> f64 {
        match (&self.form, norm) {
            (DiffusionForm::Constant(m), _) => norm.norm_sq(m),
            (DiffusionForm::EnvelopeTimesPattern { envelope, pattern }, _) => {
                // Every norm is absolutely homogeneous.
                envelope.eval_sq(t) * norm.norm_sq(pattern)
            }
            (DiffusionForm::Table { times, values }, MatrixNorm::Frobenius) => {
                let (i, w) = Self::table_segment(times, t);
                if w == 0.0 {
                    frobenius_sq(&values[i])
                } else {
                    values[i]
                        .iter()
                        .zip(values[i + 1].iter())
                        .map(|(a, b)| {
                            let v = (1.0 - w) * a + w * b;
                            v * v
                        })
                        .sum()
                }
            }
            _ => norm.norm_sq(&self.eval_unchecked(t)),
        }
    }

    /// Squared Euclidean norm of row `i` of `σ(t)`.
    pub fn row_norm_sq_at(&self, t: f64, i: usize) -> f64 {
        let m = self.eval_unchecked(t);
        m.row(i).iter().map(|v| v * v).sum()
    }

    /// Lipschitz constant of a table form in the Frobenius norm (max slope over
    /// segments). `None` for other forms.
    pub fn table_lipschitz(&self) -> Option<f64> {
        match &self.form {
            DiffusionForm::Table { times, values } => Some(
                times
                    .windows(2)
                    .zip(values.windows(2))
                    .map(|(t, v)| frobenius_sq(&(&v[1] - &v[0])).sqrt() / (t[1] - t[0]))
                    .fold(0.0, f64::max),
            ),
            _ => None,
        }
    }

    /// Integrate a function of `s` over `[a, b]`, splitting panels at table knots.
    pub(crate) fn integrate_over<F: FnMut(f64) -> f64>(&self, f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
        let mut breaks = vec![a];
        breaks.extend(self.knots().iter().copied().filter(|&k| k > a && k < b));
        breaks.push(b);
        Ok(quad::integrate_with_breaks(f, &breaks, tol, quad::DEFAULT_MAX_PANELS)?.value)
    }

    /// `∫_a^b ‖σ(s)‖² ds`.
    pub fn intensity(&self, a: f64, b: f64, norm: MatrixNorm, tol: f64) -> Result<f64> {
        check_time(a)?;
        check_time(b)?;
        if b < a {
            return Err(Error::Domain(format!("interval [{a}, {b}] is reversed")));
        }
        if self.is_zero() {
            return Ok(0.0);
        }
        if let DiffusionForm::Constant(m) = &self.form {
            return Ok(norm.norm_sq(m) * (b - a));
        }
        let v = self.integrate_over(|s| self.norm_sq_at(s, norm), a, b, tol)?;
        Ok(v.max(0.0))
    }

    /// `∫_a^b ‖σ_{i·}(s)‖² ds` for row `i`.
    pub fn row_intensity(&self, i: usize, a: f64, b: f64, tol: f64) -> Result<f64> {
        if i >= self.d {
            return Err(Error::Domain(format!("row {i} out of range for d = {}", self.d)));
        }
        check_time(a)?;
        check_time(b)?;
        let v = self.integrate_over(|s| self.row_norm_sq_at(s, i), a, b, tol)?;
        Ok(v.max(0.0))
    }
}

/// `θ²(n) = ∫_{nh}^{(n+1)h} ‖σ(s)‖²_F ds` for `n = 0..N−1`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowIntensity {
    pub h: f64,
    pub values: Vec<f64>,
    pub quadrature_tolerance: f64,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be finite and positive, got {v}")))
    }
}

pub fn eval_sigma(spec: &DiffusionSpec, t: f64) -> Result<Matrix> {
    spec.eval(t)
}

pub fn window_intensity(spec: &DiffusionSpec, h: f64, n_max: usize, tol: f64) -> Result<WindowIntensity> {
    window_intensity_in(spec, h, n_max, tol, MatrixNorm::Frobenius)
}

pub fn window_intensity_in(
    spec: &DiffusionSpec,
    h: f64,
    n_max: usize,
    tol: f64,
    norm: MatrixNorm,
) -> Result<WindowIntensity> {
    check_positive("window length h", h)?;
    check_positive("tolerance", tol)?;
    let values = (0..n_max)
        .map(|n| spec.intensity(n as f64 * h, (n + 1) as f64 * h, norm, tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(WindowIntensity { h, values, quadrature_tolerance: tol })
}

/// `ς_c(t)² = ∫_t^{t+c} ‖σ(s)‖²_F ds`.
pub fn running_intensity(spec: &DiffusionSpec, c: f64, t: f64, tol: f64) -> Result<f64> {
    check_positive("window length c", c)?;
    check_positive("tolerance", tol)?;
    spec.intensity(t, t + c, MatrixNorm::Frobenius, tol)
}

/// `∫_0^t e^{−2λ(t−s)} ‖σ(s)‖²_F ds`.
pub fn exp_weighted_tail(spec: &DiffusionSpec, lambda: f64, t: f64, tol: f64) -> Result<f64> {
    check_positive("rate λ", lambda)?;
    check_positive("tolerance", tol)?;
    check_time(t)?;
    if t == 0.0 || spec.is_zero() {
        return Ok(0.0);
    }
    // The kernel is concentrated within a few 1/λ of t.
    let mut breaks = vec![0.0, t];
    let mut j = 1.0;
    while j <= 64.0 {
        let b = t - j / lambda;
        if b > 0.0 {
            breaks.push(b);
        }
        j *= 2.0;
    }
    breaks.extend(spec.knots().iter().copied().filter(|&k| k > 0.0 && k < t));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let v = quad::integrate_with_breaks(
        |s| (-2.0 * lambda * (t - s)).exp() * spec.norm_sq_at(s, MatrixNorm::Frobenius),
        &breaks,
        tol,
        quad::DEFAULT_MAX_PANELS,
    )?;
    Ok(v.value.max(0.0))
}

/// Matrix-valued periodic drift forms.
#[derive(Debug, Clone, PartialEq)]
pub enum PeriodicForm {
    /// `A(t) = A₀ + Σ_k C_k cos(kωt) + S_k sin(kωt)` with `ω = 2π/T`.
    Fourier { mean: Matrix, cos: Vec<Matrix>, sin: Vec<Matrix> },
    /// Piecewise linear through knots in `[0, T)`, wrapping from the last
    /// knot back to the first one shifted by `T`.
    Table { times: Vec<f64>, values: Vec<Matrix> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicDrift {
    period: f64,
    form: PeriodicForm,
    d: usize,
}

impl PeriodicDrift {
    pub fn new(period: f64, form: PeriodicForm) -> Result<Self> {
        check_positive("period", period)?;
        let d = match &form {
            PeriodicForm::Fourier { mean, cos, sin } => {
                let d = mean.nrows();
                if d == 0 || !mean.is_square() {
                    return Err(Error::InvalidSpec("periodic drift must be square and non-empty".into()));
                }
                for m in std::iter::once(mean).chain(cos).chain(sin) {
                    if m.shape() != (d, d) {
                        return Err(Error::InvalidSpec("Fourier coefficients must share one shape".into()));
                    }
                    check_finite(m, "Fourier coefficient")?;
                }
                d
            }
            PeriodicForm::Table { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return Err(Error::InvalidSpec("periodic table needs matching, non-empty knots".into()));
                }
                if times.iter().any(|t| !t.is_finite() || *t < 0.0 || *t >= period) {
                    return Err(Error::InvalidSpec("periodic table knots must lie in [0, T)".into()));
                }
                if times.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidSpec("periodic table knots must be strictly increasing".into()));
                }
                let d = values[0].nrows();
                if d == 0 {
                    return Err(Error::InvalidSpec("periodic drift must be non-empty".into()));
                }
                for v in values {
                    if v.shape() != (d, d) {
                        return Err(Error::InvalidSpec("periodic table matrices must be d×d".into()));
                    }
                    check_finite(v, "periodic table value")?;
                }
                d
            }
        };
        Ok(Self { period, form, d })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn form(&self) -> &PeriodicForm {
        &self.form
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn eval(&self, t: f64) -> Matrix {
        match &self.form {
            PeriodicForm::Fourier { mean, cos, sin } => {
                let omega = 2.0 * PI / self.period;
                let mut a = mean.clone();
                for (k, c) in cos.iter().enumerate() {
                    a += c * ((k + 1) as f64 * omega * t).cos();
                }
                for (k, s) in sin.iter().enumerate() {
                    a += s * ((k + 1) as f64 * omega * t).sin();
                }
                a
            }
            PeriodicForm::Table { times, values } => {
                let tau = t.rem_euclid(self.period);
                let n = times.len();
                if n == 1 {
                    return values[0].clone();
                }
                let (i, j, t0, t1) = if tau < times[0] {
                    (n - 1, 0, times[n - 1] - self.period, times[0])
                } else if tau >= times[n - 1] {
                    (n - 1, 0, times[n - 1], times[0] + self.period)
                } else {
                    let i = times.partition_point(|&x| x <= tau) - 1;
                    (i, i + 1, times[i], times[i + 1])
                };
                let w = (tau - t0) / (t1 - t0);
                &values[i] * (1.0 - w) + &values[j] * w
            }
        }
    }

    /// True when `A(t)` does not depend on `t`.
    pub fn is_time_invariant(&self) -> bool {
        match &self.form {
            PeriodicForm::Fourier { cos, sin, .. } => {
                cos.iter().chain(sin).all(|m| m.iter().all(|v| *v == 0.0))
            }
            PeriodicForm::Table { values, .. } => values.iter().all(|v| v == &values[0]),
        }
    }
}

/// Drift matrix of the linear part.
#[derive(Debug, Clone, PartialEq)]
pub enum DriftSpec {
    Constant(Matrix),
    Periodic(PeriodicDrift),
}

impl DriftSpec {
    pub fn constant(a: Matrix) -> Result<Self> {
        if a.is_empty() || !a.is_square() {
            return Err(Error::InvalidSpec("constant drift must be square and non-empty".into()));
        }
        check_finite(&a, "drift")?;
        Ok(DriftSpec::Constant(a))
    }

    pub fn periodic(period: f64, form: PeriodicForm) -> Result<Self> {
        Ok(DriftSpec::Periodic(PeriodicDrift::new(period, form)?))
    }

    pub fn dim(&self) -> usize {
        match self {
            DriftSpec::Constant(a) => a.nrows(),
            DriftSpec::Periodic(p) => p.dim(),
        }
    }

    pub fn eval(&self, t: f64) -> Matrix {
        match self {
            DriftSpec::Constant(a) => a.clone(),
            DriftSpec::Periodic(p) => p.eval(t),
        }
    }

    /// The constant matrix when the drift does not vary in time.
    pub fn as_constant(&self) -> Option<Matrix> {
        match self {
            DriftSpec::Constant(a) => Some(a.clone()),
            DriftSpec::Periodic(p) if p.is_time_invariant() => Some(p.eval(0.0)),
            DriftSpec::Periodic(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn eval_constant() {
        let s = DiffusionSpec::constant(dmatrix![0.3]).unwrap();
        assert_eq!(s.eval(5.0).unwrap(), dmatrix![0.3]);
    }

    #[test]
    fn eval_log_power_at_zero() {
        let s = DiffusionSpec::envelope(Envelope::LogPower { gamma: 2.0 }, dmatrix![1.0]).unwrap();
        assert!((s.eval(0.0).unwrap()[(0, 0)] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn eval_table_midpoint() {
        let s = DiffusionSpec::table(vec![0.0, 2.0], vec![dmatrix![0.0], dmatrix![4.0]]).unwrap();
        assert_eq!(s.eval(1.0).unwrap(), dmatrix![2.0]);
        // Held outside the knots.
        assert_eq!(s.eval(10.0).unwrap(), dmatrix![4.0]);
    }

    #[test]
    fn eval_rejects_bad_time() {
        let s = DiffusionSpec::constant(dmatrix![1.0]).unwrap();
        assert!(matches!(s.eval(-1.0), Err(Error::Domain(_))));
        assert!(matches!(s.eval(f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(s.eval(f64::INFINITY), Err(Error::Domain(_))));
    }

    #[test]
    fn frobenius_examples() {
        assert_eq!(frobenius_sq(&dmatrix![3.0, 4.0]), 25.0);
        assert_eq!(frobenius_sq(&Matrix::zeros(2, 3)), 0.0);
        assert_eq!(frobenius_sq(&Matrix::identity(2, 2)), 2.0);
    }

    #[test]
    fn table_validation() {
        assert!(DiffusionSpec::table(vec![1.0, 1.0], vec![dmatrix![0.0], dmatrix![1.0]]).is_err());
        assert!(DiffusionSpec::table(vec![0.0, 1.0], vec![dmatrix![0.0], dmatrix![1.0, 2.0]]).is_err());
        assert!(DiffusionSpec::table(vec![0.0], vec![dmatrix![f64::NAN]]).is_err());
    }

    #[test]
    fn window_intensity_constant() {
        let s = DiffusionSpec::constant(dmatrix![0.6, 0.8]).unwrap();
        let w = window_intensity(&s, 0.5, 4, 1e-10).unwrap();
        for v in w.values {
            assert!((v - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn window_intensity_exp_decay_first_window() {
        let s = DiffusionSpec::envelope(Envelope::ExpDecay { scale: 1.0, rate: 1.0 }, dmatrix![1.0]).unwrap();
        let w = window_intensity(&s, 1.0, 1, 1e-12).unwrap();
        // ∫_0^1 e^{-2s} ds
        let expected = (1.0 - (-2.0f64).exp()) / 2.0;
        assert!((w.values[0] - expected).abs() < 1e-12);
        assert!((w.values[0] - 0.432_332).abs() < 1e-6);
    }

    #[test]
    fn window_intensity_zero_and_errors() {
        let s = DiffusionSpec::constant(Matrix::zeros(2, 2)).unwrap();
        assert!(window_intensity(&s, 1.0, 5, 1e-10).unwrap().values.iter().all(|v| *v == 0.0));
        assert!(window_intensity(&s, 0.0, 5, 1e-10).is_err());
        assert!(window_intensity(&s, 1.0, 5, -1.0).is_err());
    }

    #[test]
    fn running_intensity_examples() {
        let c = DiffusionSpec::constant(dmatrix![2.0]).unwrap();
        assert!((running_intensity(&c, 0.7, 3.0, 1e-10).unwrap() - 4.0 * 0.7).abs() < 1e-13);
        let e = DiffusionSpec::envelope(Envelope::ExpDecay { scale: 1.0, rate: 1.0 }, dmatrix![1.0]).unwrap();
        let expected = (1.0 - (-2.0f64).exp()) / 2.0;
        assert!((running_intensity(&e, 1.0, 0.0, 1e-12).unwrap() - expected).abs() < 1e-12);
        let z = DiffusionSpec::constant(dmatrix![0.0]).unwrap();
        assert_eq!(running_intensity(&z, 1.0, 2.0, 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn exp_weighted_tail_closed_forms() {
        let z = DiffusionSpec::constant(dmatrix![0.0]).unwrap();
        assert_eq!(exp_weighted_tail(&z, 1.0, 10.0, 1e-10).unwrap(), 0.0);
        let c = DiffusionSpec::constant(dmatrix![1.5]).unwrap();
        for &t in &[0.1f64, 1.0, 7.0, 100.0] {
            let expected = 2.25 * (1.0 - (-2.0 * t).exp()) / 2.0;
            let got = exp_weighted_tail(&c, 1.0, t, 1e-12).unwrap();
            assert!((got - expected).abs() < 1e-11, "t={t}");
        }
        // σ² = e^{-s}: ∫_0^t e^{-2(t-s)} e^{-s} ds = e^{-2t}(e^{t} - 1) = e^{-t}(1 - e^{-t})
        let e = DiffusionSpec::envelope(Envelope::ExpDecay { scale: 1.0, rate: 0.5 }, dmatrix![1.0]).unwrap();
        for &t in &[1.0, 10.0, 40.0] {
            let expected = (-t as f64).exp() * (1.0 - (-t as f64).exp());
            let got = exp_weighted_tail(&e, 1.0, t, 1e-14).unwrap();
            assert!((got - expected).abs() < 1e-13, "t={t}: {got} vs {expected}");
        }
    }

    #[test]
    fn exp_weighted_tail_vanishes_for_fading_envelopes() {
        let specs = [
            Envelope::ExpDecay { scale: 1.0, rate: 0.3 },
            Envelope::PowerLaw { scale: 1.0, exponent: -0.5 },
            Envelope::LogPower { gamma: 1.0 },
            Envelope::LogGrow { scale: 1.0, exponent: -1.0 },
        ];
        for env in specs {
            let s = DiffusionSpec::envelope(env, dmatrix![1.0]).unwrap();
            let mut prev = f64::INFINITY;
            for k in 4..12 {
                let t = (1u64 << k) as f64;
                let v = exp_weighted_tail(&s, 1.0, t, 1e-12).unwrap();
                assert!(v < prev, "{env:?} at t={t}");
                prev = v;
            }
        }
    }

    #[test]
    fn table_continuity_lipschitz() {
        let s = DiffusionSpec::table(
            vec![0.0, 1.0, 3.0],
            vec![dmatrix![0.0, 1.0], dmatrix![2.0, 1.0], dmatrix![-1.0, 0.0]],
        )
        .unwrap();
        let lip = s.table_lipschitz().unwrap();
        for i in 0..400 {
            let t = i as f64 * 0.01;
            let dt = 1e-3;
            let diff = frobenius_sq(&(s.eval(t + dt).unwrap() - s.eval(t).unwrap())).sqrt();
            assert!(diff <= lip * dt * (1.0 + 1e-9));
        }
    }

    #[test]
    fn periodic_table_wraps() {
        let p = PeriodicDrift::new(
            2.0,
            PeriodicForm::Table { times: vec![0.5, 1.5], values: vec![dmatrix![1.0], dmatrix![3.0]] },
        )
        .unwrap();
        assert_eq!(p.eval(1.0), dmatrix![2.0]);
        assert_eq!(p.eval(3.0), p.eval(1.0));
        // Wrap segment from 1.5 to 2.5 goes from 3 back to 1.
        assert!((p.eval(2.0)[(0, 0)] - 2.0).abs() < 1e-15);
        assert!((p.eval(0.0)[(0, 0)] - 2.0).abs() < 1e-15);
        for k in 0..50 {
            let t = 0.137 * k as f64;
            assert!((p.eval(t + 2.0) - p.eval(t)).abs().max() < 1e-12);
        }
    }

    #[test]
    fn fourier_drift() {
        let p = PeriodicDrift::new(
            2.0 * PI,
            PeriodicForm::Fourier { mean: dmatrix![-1.0], cos: vec![dmatrix![1.0]], sin: vec![] },
        )
        .unwrap();
        assert!((p.eval(0.0)[(0, 0)] - 0.0).abs() < 1e-15);
        assert!((p.eval(PI)[(0, 0)] + 2.0).abs() < 1e-15);
        assert!(!p.is_time_invariant());
    }

    #[test]
    fn alternate_norms_scale_pattern() {
        let p = dmatrix![3.0, 0.0; 0.0, 4.0];
        assert_eq!(MatrixNorm::MaxEntry.norm_sq(&p), 16.0);
        assert!((MatrixNorm::Spectral.norm_sq(&p) - 16.0).abs() < 1e-12);
        assert_eq!(MatrixNorm::Frobenius.norm_sq(&p), 25.0);
    }
}
