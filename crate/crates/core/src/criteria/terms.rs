//! Summands of the series and integral criteria and their partial sums.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{running_intensity, window_intensity, DiffusionForm, DiffusionSpec, MatrixNorm};
use crate::quad;
use crate::special::mills_tail;

/// `1 − Φ(ε/θ)` with the conventions `Φ(∞) = 1` (so `θ = 0` gives 0) and
/// `θ = ∞` gives `1 − Φ(0) = 1/2`.
pub fn term_s(eps: f64, theta_sq: f64) -> f64 {
    if theta_sq <= 0.0 {
        return 0.0;
    }
    if theta_sq == f64::INFINITY {
        return 0.5;
    }
    mills_tail(eps / theta_sq.sqrt())
}

/// `θ·exp(−ε²/(2θ²))`, zero when `θ = 0`.
pub fn term_s_prime(eps: f64, theta_sq: f64) -> f64 {
    if theta_sq <= 0.0 {
        return 0.0;
    }
    theta_sq.sqrt() * (-eps * eps / (2.0 * theta_sq)).exp()
}

/// A finite partial sum together with its summands.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartialSum {
    pub value: f64,
    pub terms: Vec<f64>,
}

impl PartialSum {
    fn from_terms(terms: Vec<f64>) -> Self {
        Self { value: terms.iter().sum(), terms }
    }
}

pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if eps.is_finite() && eps > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("ε must be finite and positive, got {eps}")))
    }
}

/// `Σ_{n=1}^{N} term_s_prime(ε, θ²(n))` over windows of length `h`.
pub fn partial_sum_s_prime(spec: &DiffusionSpec, eps: f64, h: f64, n: usize, tol: f64) -> Result<PartialSum> {
    check_eps(eps)?;
    let w = window_intensity(spec, h, n + 1, tol)?;
    Ok(PartialSum::from_terms(w.values[1..].iter().map(|&v| term_s_prime(eps, v)).collect()))
}

/// `Σ_{n=0}^{N−1} term_s(ε, θ²(n))` over windows of length `h`.
pub fn partial_sum_s(spec: &DiffusionSpec, eps: f64, h: f64, n: usize, tol: f64) -> Result<PartialSum> {
    check_eps(eps)?;
    let w = window_intensity(spec, h, n, tol)?;
    Ok(PartialSum::from_terms(w.values.iter().map(|&v| term_s(eps, v)).collect()))
}

/// `∫_0^{t_max} ς_c(t)·exp(−ε²/(2ς_c(t)²)) dt` where `ς_c(t)² = ∫_t^{t+c}‖σ‖²_F`.
pub fn integral_i(spec: &DiffusionSpec, eps: f64, c: f64, t_max: f64, tol: f64) -> Result<f64> {
    integral_i_in(spec, eps, c, t_max, tol, MatrixNorm::Frobenius)
}

pub(crate) fn integral_i_in(
    spec: &DiffusionSpec,
    eps: f64,
    c: f64,
    t_max: f64,
    tol: f64,
    norm: MatrixNorm,
) -> Result<f64> {
    check_eps(eps)?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Domain(format!("window c must be positive, got {c}")));
    }
    if !(t_max >= 0.0 && t_max.is_finite()) {
        return Err(Error::Domain(format!("t_max must be finite and non-negative, got {t_max}")));
    }
    if t_max == 0.0 || spec.is_zero() {
        return Ok(0.0);
    }
    if let DiffusionForm::Constant(m) = spec.form() {
        return Ok(t_max * term_s_prime(eps, c * norm.norm_sq(m)));
    }
    let inner_tol = (tol * 1e-3).max(1e-15);
    let mut failure = None;
    let integrand = |t: f64| {
        let v = if norm == MatrixNorm::Frobenius {
            running_intensity(spec, c, t, inner_tol)
        } else {
            spec.intensity(t, t + c, norm, inner_tol)
        };
        match v {
            Ok(v) => term_s_prime(eps, v),
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    };
    // Panel breaks on a coarse grid, at knots and at knots shifted by −c
    // where the inner window starts to cover a kink.
    let pieces = ((t_max / c).ceil() as usize).clamp(1, 512);
    let mut breaks: Vec<f64> = (0..=pieces).map(|k| t_max * k as f64 / pieces as f64).collect();
    for &k in spec.knots() {
        for b in [k, k - c] {
            if b > 0.0 && b < t_max {
                breaks.push(b);
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let r = quad::integrate_with_breaks(integrand, &breaks, tol, quad::DEFAULT_MAX_PANELS.max(4 * breaks.len()));
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(r?.value)
}

/// Increasing time grid starting at zero with spacing bounds `α ≤ Δ ≤ β`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeGrid {
    times: Vec<f64>,
    alpha: f64,
    beta: f64,
}

impl TimeGrid {
    /// Grid whose bounds are the observed minimum and maximum spacing.
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::Grid("a grid needs at least two points".into()));
        }
        let gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        let alpha = gaps.iter().copied().fold(f64::INFINITY, f64::min);
        let beta = gaps.iter().copied().fold(0.0, f64::max);
        Self::with_bounds(times, alpha, beta)
    }

    /// Grid checked against prescribed spacing bounds.
    pub fn with_bounds(times: Vec<f64>, alpha: f64, beta: f64) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::Grid("a grid needs at least two points".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::Grid(format!("grid must start at 0, starts at {}", times[0])));
        }
        if !(alpha > 0.0 && alpha <= beta && beta.is_finite()) {
            return Err(Error::Grid(format!("spacing bounds must satisfy 0 < α ≤ β < ∞, got [{alpha}, {beta}]")));
        }
        for (n, w) in times.windows(2).enumerate() {
            let gap = w[1] - w[0];
            if !gap.is_finite() || gap < alpha || gap > beta {
                return Err(Error::Grid(format!("spacing {gap} at index {n} is outside [{alpha}, {beta}]")));
            }
        }
        Ok(Self { times, alpha, beta })
    }

    /// Uniform grid `0, h, …, n·h`.
    pub fn uniform(h: f64, n: usize) -> Result<Self> {
        Self::with_bounds((0..=n).map(|k| k as f64 * h).collect(), h * (1.0 - 1e-12), h * (1.0 + 1e-12))
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// `Σ_n (1 − Φ(ε/√∫_{t_n}^{t_{n+1}}‖σ‖²_F))` over the grid intervals.
pub fn sum_general_grid(spec: &DiffusionSpec, eps: f64, grid: &TimeGrid, tol: f64) -> Result<PartialSum> {
    check_eps(eps)?;
    let terms = grid
        .times
        .windows(2)
        .map(|w| Ok(term_s(eps, spec.intensity(w[0], w[1], MatrixNorm::Frobenius, tol)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(PartialSum::from_terms(terms))
}

/// Row intensities `θ_i² = ∫_a^b Σ_j σ_ij²` for every row.
pub fn row_intensities(spec: &DiffusionSpec, a: f64, b: f64, tol: f64) -> Result<Vec<f64>> {
    (0..spec.d()).map(|i| spec.row_intensity(i, a, b, tol)).collect()
}

/// `Σ_n Σ_i (1 − Φ(ε/θ_i(n)))` over the grid intervals. The returned terms
/// are the per-interval inner sums.
pub fn rowwise_sum_s1(spec: &DiffusionSpec, eps: f64, grid: &TimeGrid, tol: f64) -> Result<PartialSum> {
    check_eps(eps)?;
    let terms = grid
        .times
        .windows(2)
        .map(|w| Ok(row_intensities(spec, w[0], w[1], tol)?.into_iter().map(|v| term_s(eps, v)).sum()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(PartialSum::from_terms(terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Envelope;
    use nalgebra::dmatrix;

    #[test]
    fn term_examples() {
        assert_eq!(term_s(1.0, 0.0), 0.0);
        assert!((term_s(1.3, 1.69) - 0.158_655_253_931_457_05).abs() < 1e-15);
        assert_eq!(term_s(1.0, f64::INFINITY), 0.5);
        assert_eq!(term_s_prime(1.0, 0.0), 0.0);
        assert!((term_s_prime(1.0, 1.0) - (-0.5f64).exp()).abs() < 1e-16);
        assert!((term_s_prime(2.5, 6.25) - 2.5 * (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn partial_sums_of_simple_specs() {
        let z = DiffusionSpec::constant(dmatrix![0.0]).unwrap();
        for n in [1, 10, 100] {
            assert_eq!(partial_sum_s_prime(&z, 1.0, 1.0, n, 1e-10).unwrap().value, 0.0);
        }
        let c = DiffusionSpec::constant(dmatrix![1.0]).unwrap();
        let p = partial_sum_s_prime(&c, 1.0, 1.0, 100, 1e-12).unwrap();
        assert!((p.value - 100.0 * (-0.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn log_power_partial_sum_matches_window_by_window() {
        let s = DiffusionSpec::envelope(Envelope::LogPower { gamma: 1.0 }, dmatrix![1.0]).unwrap();
        let n = 2000;
        let p = partial_sum_s_prime(&s, 2.0, 1.0, n, 1e-12).unwrap();
        let mut oracle = 0.0;
        for k in 1..=n {
            let v = quad::integrate(|t| 1.0 / (std::f64::consts::E + t).ln(), k as f64, k as f64 + 1.0, 1e-13)
                .unwrap()
                .value;
            oracle += v.sqrt() * (-4.0 / (2.0 * v)).exp();
        }
        assert!((p.value - oracle).abs() < 1e-8);
    }

    #[test]
    fn integral_of_constant_intensity() {
        let c = DiffusionSpec::constant(dmatrix![0.5, 0.0; 0.0, 0.5]).unwrap();
        let v: f64 = 0.5 * 2.0;
        let got = integral_i(&c, 1.0, 2.0, 30.0, 1e-10).unwrap();
        assert!((got - 30.0 * v.sqrt() * (-1.0 / (2.0 * v)).exp()).abs() < 1e-12);
        let z = DiffusionSpec::constant(dmatrix![0.0]).unwrap();
        assert_eq!(integral_i(&z, 1.0, 1.0, 10.0, 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(vec![0.0, 1.0, 1.0]).is_err());
        assert!(TimeGrid::new(vec![1.0, 2.0]).is_err());
        assert!(TimeGrid::with_bounds(vec![0.0, 1.0, 4.0], 1.0, 2.0).is_err());
        let g = TimeGrid::new(vec![0.0, 1.0, 3.0, 4.0, 6.0]).unwrap();
        assert_eq!((g.alpha(), g.beta()), (1.0, 2.0));
    }

    #[test]
    fn uniform_grid_reproduces_window_sum() {
        let s = DiffusionSpec::envelope(Envelope::ExpDecay { scale: 2.0, rate: 0.3 }, dmatrix![1.0, 0.5]).unwrap();
        let g = TimeGrid::uniform(1.0, 50).unwrap();
        let a = sum_general_grid(&s, 0.7, &g, 1e-12).unwrap();
        let b = partial_sum_s(&s, 0.7, 1.0, 50, 1e-12).unwrap();
        assert!((a.value - b.value).abs() < 1e-12);
    }

    #[test]
    fn alternating_grid_on_constant_sigma() {
        let s = DiffusionSpec::constant(dmatrix![0.8]).unwrap();
        let times: Vec<f64> = (0..=20).map(|k| (3 * (k / 2) + k % 2) as f64).collect();
        let g = TimeGrid::new(times).unwrap();
        let got = sum_general_grid(&s, 1.0, &g, 1e-12).unwrap();
        let oracle = 10.0 * (mills_tail(1.0 / (0.64f64).sqrt()) + mills_tail(1.0 / (1.28f64).sqrt()));
        assert!((got.value - oracle).abs() < 1e-12);
    }

    #[test]
    fn rowwise_examples() {
        let one = DiffusionSpec::envelope(Envelope::LogPower { gamma: 2.0 }, dmatrix![1.0, 0.3]).unwrap();
        let g = TimeGrid::uniform(1.0, 20).unwrap();
        let a = rowwise_sum_s1(&one, 1.0, &g, 1e-12).unwrap();
        let b = sum_general_grid(&one, 1.0, &g, 1e-12).unwrap();
        assert!((a.value - b.value).abs() < 1e-12);
        let diag = DiffusionSpec::envelope(Envelope::LogPower { gamma: 2.0 }, dmatrix![0.5, 0.0; 0.0, 0.5]).unwrap();
        let single = DiffusionSpec::envelope(Envelope::LogPower { gamma: 2.0 }, dmatrix![0.5]).unwrap();
        let a = rowwise_sum_s1(&diag, 1.0, &g, 1e-12).unwrap();
        let b = sum_general_grid(&single, 1.0, &g, 1e-12).unwrap();
        assert!((a.value - 2.0 * b.value).abs() < 1e-12);
    }
}
