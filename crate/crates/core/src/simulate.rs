//! Sampling of `dX = A X dt + σ(t) dB` on uniform grids.
//!
//! The exact scheme uses the Gaussian transition of the linear SDE: the
//! state is propagated by the transition matrix over one step and an
//! independent `Normal(0, Q_n)` increment is added. Step operators are
//! computed once and shared by all paths.

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dopri5, expm, transition};
use crate::model::{DiffusionForm, DiffusionSpec, DriftSpec, Envelope, Matrix, PeriodicDrift};
use crate::quad;

/// Tolerance of the Runge–Kutta solves used by the periodic engine.
pub const ODE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    ExactLinearGaussian,
    EulerMaruyama,
}

fn default_scheme() -> Scheme {
    Scheme::ExactLinearGaussian
}
fn default_cov_tol() -> f64 {
    1e-13
}
fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Grid step `Δ`.
    pub dt: f64,
    pub t_end: f64,
    pub paths: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    /// Absolute tolerance of the step-covariance quadrature.
    #[serde(default = "default_cov_tol")]
    pub cov_tol: f64,
    /// Only every `output_stride`-th grid point is stored. Running
    /// quantities are still accumulated on the full grid.
    #[serde(default = "default_stride")]
    pub output_stride: usize,
}

impl SimConfig {
    pub fn new(dt: f64, t_end: f64, paths: usize, seed: u64) -> Self {
        Self {
            dt,
            t_end,
            paths,
            seed,
            scheme: default_scheme(),
            cov_tol: default_cov_tol(),
            output_stride: default_stride(),
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.output_stride = stride;
        self
    }

    /// Number of grid steps, after checking the configuration.
    pub fn n_steps(&self) -> Result<usize> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!("grid step must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end >= self.dt) {
            return Err(Error::Config(format!("horizon {} must be at least one step {}", self.t_end, self.dt)));
        }
        if self.paths == 0 {
            return Err(Error::Config("ensemble needs at least one path".into()));
        }
        if !(self.cov_tol > 0.0) {
            return Err(Error::Config(format!("covariance tolerance must be positive, got {}", self.cov_tol)));
        }
        let n = (self.t_end / self.dt).round();
        if (n * self.dt - self.t_end).abs() > 1e-9 * self.t_end {
            return Err(Error::Config(format!("step {} does not divide the horizon {}", self.dt, self.t_end)));
        }
        let n = n as usize;
        if self.output_stride == 0 || n % self.output_stride != 0 {
            return Err(Error::Config(format!(
                "output stride {} must be positive and divide the step count {n}",
                self.output_stride
            )));
        }
        Ok(n)
    }
}

/// One simulated trajectory, recorded at the ensemble's `times`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Path {
    pub seed: u64,
    /// States, `d` consecutive entries per recorded time.
    pub states: Vec<f64>,
    /// `‖X(t)‖₂`.
    pub norm: Vec<f64>,
    /// `max_{s ≤ t} ‖X(s)‖₂` over the full grid.
    pub running_max: Vec<f64>,
    /// Trapezoid `(1/t)∫₀^t ‖X‖²`; the first entry is `‖X(0)‖²`.
    pub avg_sq: Vec<f64>,
    /// Max and min of `‖X‖₂` over the full-grid points between consecutive
    /// recorded times, endpoints included.
    pub block_max: Vec<f64>,
    pub block_min: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathEnsemble {
    pub d: usize,
    pub dt: f64,
    pub output_stride: usize,
    pub scheme: Scheme,
    pub times: Vec<f64>,
    pub paths: Vec<Path>,
}

impl PathEnsemble {
    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn state(&self, path: usize, k: usize) -> &[f64] {
        &self.paths[path].states[k * self.d..(k + 1) * self.d]
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.paths.iter().map(|p| p.seed).collect()
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("non-empty grid")
    }

    /// Index of the first recorded time `≥ t`.
    pub fn index_at(&self, t: f64) -> usize {
        let k = self.times.partition_point(|&s| s < t - 1e-9 * self.dt);
        k.min(self.times.len() - 1)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of path `index` derived from the ensemble seed.
pub fn path_seed(base: u64, index: u64) -> u64 {
    splitmix64(base ^ splitmix64(index))
}

fn check_dims(drift: &DriftSpec, sigma: &DiffusionSpec) -> Result<usize> {
    let d = drift.dim();
    if sigma.d() != d {
        return Err(Error::InvalidSpec(format!("drift is {d}×{d} but diffusion has {} rows", sigma.d())));
    }
    Ok(d)
}

fn step_pieces(sigma: &DiffusionSpec, t: f64, dt: f64) -> Vec<f64> {
    let mut b = vec![t];
    b.extend(sigma.knots().iter().copied().filter(|&k| k > t && k < t + dt));
    b.push(t + dt);
    b
}

/// Covariance of the exact one-step increment,
/// `Q = ∫_t^{t+Δ} Φ(t+Δ, s) σ(s)σ(s)ᵀ Φ(t+Δ, s)ᵀ ds`.
///
/// For a constant drift the integral is evaluated by adaptive quadrature
/// with `Φ` a matrix exponential. For a periodic drift `Q` is obtained by
/// integrating `Q' = A Q + Q Aᵀ + σσᵀ` from `Q(t) = 0`, which has the same
/// solution. Eigenvalues below zero but above `−1e−12·trace` are clamped.
pub fn step_covariance(drift: &DriftSpec, sigma: &DiffusionSpec, t: f64, dt: f64, tol: f64) -> Result<Matrix> {
    let d = check_dims(drift, sigma)?;
    if !(t.is_finite() && t >= 0.0) || !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Domain(format!("need t ≥ 0 and Δ > 0, got t = {t}, Δ = {dt}")));
    }
    if sigma.is_zero() {
        return Ok(Matrix::zeros(d, d));
    }
    let pieces = step_pieces(sigma, t, dt);
    let mut q = Matrix::zeros(d, d);
    match drift.as_constant() {
        Some(a) => {
            let mut failure = None;
            for w in pieces.windows(2) {
                let (v, _) = quad::integrate_vec(
                    |s, out| match expm(&a, t + dt - s) {
                        Ok(e) => {
                            let g = e * sigma.eval_unchecked(s);
                            out.copy_from_slice((&g * g.transpose()).as_slice());
                        }
                        Err(err) => {
                            failure.get_or_insert(err);
                            out.iter_mut().for_each(|v| *v = 0.0);
                        }
                    },
                    d * d,
                    w[0],
                    w[1],
                    tol,
                )?;
                q += Matrix::from_column_slice(d, d, &v);
            }
            if let Some(err) = failure {
                return Err(err);
            }
        }
        None => {
            for w in pieces.windows(2) {
                let y = dopri5(
                    |s, y, dy| {
                        let a = drift.eval(s);
                        let qm = nalgebra::DMatrixView::from_slice(y, d, d);
                        let g = sigma.eval_unchecked(s);
                        let aq = &a * qm;
                        let rhs = &aq + aq.transpose() + &g * g.transpose();
                        dy.copy_from_slice(rhs.as_slice());
                    },
                    w[0],
                    w[1],
                    q.as_slice(),
                    tol.max(1e-14),
                )?;
                q = Matrix::from_column_slice(d, d, &y);
            }
        }
    }
    q = (&q + q.transpose()) * 0.5;
    let (values, vectors) = checked_eigen(&q)?;
    if values.iter().all(|&v| v >= 0.0) {
        return Ok(q);
    }
    let clamped = Matrix::from_diagonal(&values.map(|v| v.max(0.0)));
    Ok(&vectors * clamped * vectors.transpose())
}

fn checked_eigen(q: &Matrix) -> Result<(nalgebra::DVector<f64>, Matrix)> {
    if !q.iter().all(|v| v.is_finite()) {
        return Err(Error::NotPsd { min_eig: f64::NAN, trace: q.trace() });
    }
    let eig = SymmetricEigen::new(q.clone());
    let trace = q.trace();
    let min = eig.eigenvalues.min();
    if min < -1e-12 * trace.abs() {
        return Err(Error::NotPsd { min_eig: min, trace });
    }
    Ok((eig.eigenvalues, eig.eigenvectors))
}

/// `L` with `L Lᵀ = Q` from the symmetric eigendecomposition.
pub fn psd_sqrt(q: &Matrix) -> Result<Matrix> {
    if q.iter().all(|v| *v == 0.0) {
        return Ok(Matrix::zeros(q.nrows(), q.ncols()));
    }
    if q.nrows() == 1 {
        if q[(0, 0)] < 0.0 {
            return Err(Error::NotPsd { min_eig: q[(0, 0)], trace: q[(0, 0)] });
        }
        return Ok(q.map(f64::sqrt));
    }
    let (values, mut vectors) = checked_eigen(q)?;
    for (j, v) in values.iter().enumerate() {
        let s = v.max(0.0).sqrt();
        vectors.column_mut(j).iter_mut().for_each(|x| *x *= s);
    }
    Ok(vectors)
}

// Per-step linear maps: state ← trans·state + noise·z, with both looked up
// cyclically by step index.
struct Kernel {
    d: usize,
    k: usize,
    trans: Vec<Vec<f64>>,
    noise: Vec<Vec<f64>>,
}

fn sigma_is_constant(sigma: &DiffusionSpec) -> bool {
    matches!(sigma.form(), DiffusionForm::Constant(_)) || sigma.is_zero()
}

fn steps_per_period(p: &PeriodicDrift, dt: f64) -> Result<usize> {
    let m = (p.period() / dt).round();
    if m < 1.0 || (m * dt - p.period()).abs() > 1e-9 * p.period() {
        return Err(Error::Config(format!("step {dt} must divide the drift period {}", p.period())));
    }
    Ok(m as usize)
}

fn build_kernel(drift: &DriftSpec, sigma: &DiffusionSpec, cfg: &SimConfig, n_steps: usize) -> Result<Kernel> {
    let d = check_dims(drift, sigma)?;
    let dt = cfg.dt;
    let constant_drift = drift.as_constant();
    let trans_len = match (&constant_drift, drift) {
        (Some(_), _) => 1,
        (None, DriftSpec::Periodic(p)) => steps_per_period(p, dt)?,
        (None, DriftSpec::Constant(_)) => unreachable!("constant drift is always time invariant"),
    };
    let noise_len = if sigma_is_constant(sigma) { trans_len } else { n_steps };
    let (trans, noise, k): (Vec<Matrix>, Vec<Matrix>, usize) = match cfg.scheme {
        Scheme::ExactLinearGaussian => {
            let trans = match &constant_drift {
                Some(a) => vec![expm(a, dt)?],
                None => (0..trans_len)
                    .into_par_iter()
                    .map(|j| transition(drift, j as f64 * dt, (j + 1) as f64 * dt, ODE_TOL))
                    .collect::<Result<Vec<_>>>()?,
            };
            let noise = (0..noise_len)
                .into_par_iter()
                .map(|j| psd_sqrt(&step_covariance(drift, sigma, j as f64 * dt, dt, cfg.cov_tol)?))
                .collect::<Result<Vec<_>>>()?;
            (trans, noise, d)
        }
        Scheme::EulerMaruyama => {
            let id = Matrix::identity(d, d);
            let trans = (0..trans_len).map(|j| &id + drift.eval(j as f64 * dt) * dt).collect();
            let root = dt.sqrt();
            let noise = (0..noise_len).map(|j| sigma.eval_unchecked(j as f64 * dt) * root).collect();
            (trans, noise, sigma.r())
        }
    };
    Ok(Kernel {
        d,
        k,
        trans: trans.into_iter().map(|m| m.as_slice().to_vec()).collect(),
        noise: noise.into_iter().map(|m| m.as_slice().to_vec()).collect(),
    })
}

fn run_path(kernel: &Kernel, xi: &[f64], cfg: &SimConfig, n_steps: usize, seed: u64) -> Result<Path> {
    let (d, k, stride, dt) = (kernel.d, kernel.k, cfg.output_stride, cfg.dt);
    let n_rec = n_steps / stride + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = xi.to_vec();
    let mut next = vec![0.0; d];
    let mut z = vec![0.0; k];
    let mut path = Path {
        seed,
        states: Vec::with_capacity(n_rec * d),
        norm: Vec::with_capacity(n_rec),
        running_max: Vec::with_capacity(n_rec),
        avg_sq: Vec::with_capacity(n_rec),
        block_max: Vec::with_capacity(n_rec - 1),
        block_min: Vec::with_capacity(n_rec - 1),
    };
    let mut sq: f64 = x.iter().map(|v| v * v).sum();
    let mut norm = sq.sqrt();
    let mut running_max = norm;
    let mut integral = 0.0;
    let (mut bmax, mut bmin) = (norm, norm);
    path.states.extend_from_slice(&x);
    path.norm.push(norm);
    path.running_max.push(norm);
    path.avg_sq.push(sq);
    for n in 0..n_steps {
        let tr = &kernel.trans[n % kernel.trans.len()];
        let nz = &kernel.noise[n % kernel.noise.len()];
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        for (i, out) in next.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..d {
                acc += tr[i + j * d] * x[j];
            }
            for j in 0..k {
                acc += nz[i + j * d] * z[j];
            }
            *out = acc;
        }
        std::mem::swap(&mut x, &mut next);
        let new_sq: f64 = x.iter().map(|v| v * v).sum();
        if !new_sq.is_finite() {
            return Err(Error::Domain(format!("state left the floating-point range at t = {}", (n + 1) as f64 * dt)));
        }
        integral += 0.5 * dt * (sq + new_sq);
        sq = new_sq;
        norm = sq.sqrt();
        running_max = running_max.max(norm);
        bmax = bmax.max(norm);
        bmin = bmin.min(norm);
        if (n + 1) % stride == 0 {
            path.states.extend_from_slice(&x);
            path.norm.push(norm);
            path.running_max.push(running_max);
            path.avg_sq.push(integral / ((n + 1) as f64 * dt));
            path.block_max.push(bmax);
            path.block_min.push(bmin);
            bmax = norm;
            bmin = norm;
        }
    }
    Ok(path)
}

/// Simulate an ensemble for any drift. Constant drifts, including
/// time-invariant periodic ones, use the matrix exponential; periodic
/// drifts require the step to divide the period.
pub fn simulate(drift: &DriftSpec, sigma: &DiffusionSpec, xi: &[f64], cfg: &SimConfig) -> Result<PathEnsemble> {
    let n_steps = cfg.n_steps()?;
    let d = check_dims(drift, sigma)?;
    if xi.len() != d {
        return Err(Error::InvalidSpec(format!("initial state has length {} but the system has d = {d}", xi.len())));
    }
    if !xi.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidSpec("initial state must be finite".into()));
    }
    let kernel = build_kernel(drift, sigma, cfg, n_steps)?;
    let paths = (0..cfg.paths)
        .into_par_iter()
        .map(|i| run_path(&kernel, xi, cfg, n_steps, path_seed(cfg.seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let times = (0..=n_steps / cfg.output_stride).map(|k| (k * cfg.output_stride) as f64 * cfg.dt).collect();
    Ok(PathEnsemble { d, dt: cfg.dt, output_stride: cfg.output_stride, scheme: cfg.scheme, times, paths })
}

/// `X` for a constant drift `A`.
pub fn simulate_x(a: &Matrix, sigma: &DiffusionSpec, xi: &[f64], cfg: &SimConfig) -> Result<PathEnsemble> {
    simulate(&DriftSpec::constant(a.clone())?, sigma, xi, cfg)
}

/// `X` for a periodic drift.
pub fn simulate_x_periodic(
    drift: &PeriodicDrift,
    sigma: &DiffusionSpec,
    xi: &[f64],
    cfg: &SimConfig,
) -> Result<PathEnsemble> {
    simulate(&DriftSpec::Periodic(drift.clone()), sigma, xi, cfg)
}

/// `Y(t) = e^{−t}∫₀^t e^s σ(s) dB(s)`: the solution with `A = −I`, `Y(0) = 0`.
pub fn simulate_y(sigma: &DiffusionSpec, cfg: &SimConfig) -> Result<PathEnsemble> {
    let d = sigma.d();
    simulate_x(&-Matrix::identity(d, d), sigma, &vec![0.0; d], cfg)
}

/// `A = −I_d` and `σ(t) = (1+t)^α I_d`.
pub fn bessel_spec(d: usize, alpha: f64) -> Result<(DriftSpec, DiffusionSpec)> {
    if d < 3 {
        return Err(Error::Domain(format!("the Bessel example needs d ≥ 3, got {d}")));
    }
    let drift = DriftSpec::constant(-Matrix::identity(d, d))?;
    let sigma = DiffusionSpec::envelope(Envelope::PowerLaw { scale: 1.0, exponent: alpha }, Matrix::identity(d, d))?;
    Ok((drift, sigma))
}

pub fn bessel_scenario(d: usize, alpha: f64, cfg: &SimConfig) -> Result<PathEnsemble> {
    let (drift, sigma) = bessel_spec(d, alpha)?;
    simulate(&drift, &sigma, &vec![0.0; d], cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PeriodicForm;
    use nalgebra::dmatrix;
    use std::f64::consts::PI;

    #[test]
    fn ou_step_covariance_closed_form() {
        let drift = DriftSpec::constant(dmatrix![-1.0]).unwrap();
        let sigma = DiffusionSpec::constant(dmatrix![1.0]).unwrap();
        for dt in [0.01, 0.05, 0.5, 2.0] {
            let q = step_covariance(&drift, &sigma, 3.0, dt, 1e-13).unwrap();
            let exact = -(-2.0 * dt).exp_m1() / 2.0;
            assert!((q[(0, 0)] - exact).abs() < 1e-12, "{dt}: {} vs {exact}", q[(0, 0)]);
        }
    }

    #[test]
    fn brownian_and_zero_covariances() {
        let s = dmatrix![1.0, 0.5; 0.0, 2.0];
        let drift = DriftSpec::constant(Matrix::zeros(2, 2)).unwrap();
        let q = step_covariance(&drift, &DiffusionSpec::constant(s.clone()).unwrap(), 0.0, 0.3, 1e-13).unwrap();
        assert!((q - &s * s.transpose() * 0.3).abs().max() < 1e-13);
        let q = step_covariance(&drift, &DiffusionSpec::constant(Matrix::zeros(2, 2)).unwrap(), 0.0, 0.3, 1e-13)
            .unwrap();
        assert_eq!(q, Matrix::zeros(2, 2));
    }

    #[test]
    fn periodic_covariance_matches_constant_route() {
        // A negligible harmonic forces the differential-equation route.
        let a = dmatrix![-1.0, 0.5; 0.0, -2.0];
        let sigma = DiffusionSpec::envelope(Envelope::ExpDecay { scale: 1.0, rate: 0.3 }, dmatrix![1.0, 0.0; 0.2, 1.0])
            .unwrap();
        let per = DriftSpec::periodic(
            1.0,
            PeriodicForm::Fourier { mean: a.clone(), cos: vec![Matrix::zeros(2, 2)], sin: vec![dmatrix![1e-300, 0.0; 0.0, 0.0]] },
        )
        .unwrap();
        assert!(per.as_constant().is_none());
        let q1 = step_covariance(&per, &sigma, 2.0, 0.25, 1e-13).unwrap();
        let q2 = step_covariance(&DriftSpec::Constant(a), &sigma, 2.0, 0.25, 1e-13).unwrap();
        assert!((q1 - q2).abs().max() < 1e-11);
    }

    #[test]
    fn zero_noise_reproduces_flow() {
        let a = dmatrix![-0.3, 1.0; -1.0, -0.3];
        let sigma = DiffusionSpec::constant(Matrix::zeros(2, 1)).unwrap();
        let xi = [1.0, -2.0];
        let ens = simulate_x(&a, &sigma, &xi, &SimConfig::new(0.1, 10.0, 2, 7)).unwrap();
        for (k, &t) in ens.times.iter().enumerate() {
            let exact = expm(&a, t).unwrap() * nalgebra::DVector::from_column_slice(&xi);
            for p in 0..2 {
                let x = ens.state(p, k);
                assert!((x[0] - exact[0]).abs() < 1e-10 && (x[1] - exact[1]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn forced_start_decays_exactly() {
        let sigma = DiffusionSpec::constant(Matrix::zeros(1, 1)).unwrap();
        let ens = simulate_x(&dmatrix![-1.0], &sigma, &[2.0], &SimConfig::new(0.5, 5.0, 1, 0)).unwrap();
        for (k, &t) in ens.times.iter().enumerate() {
            let y = ens.state(0, k)[0];
            assert!((y - 2.0 * (-t).exp()).abs() < 1e-14 * 2.0);
        }
    }

    #[test]
    fn reproducible_and_y_matches_x() {
        let sigma = DiffusionSpec::envelope(Envelope::LogPower { gamma: 1.0 }, Matrix::identity(2, 2)).unwrap();
        let cfg = SimConfig::new(0.1, 20.0, 8, 42).with_stride(5);
        let y1 = simulate_y(&sigma, &cfg).unwrap();
        let y2 = simulate_y(&sigma, &cfg).unwrap();
        assert_eq!(y1, y2);
        let x = simulate_x(&-Matrix::identity(2, 2), &sigma, &[0.0, 0.0], &cfg).unwrap();
        assert_eq!(y1, x);
        let other = simulate_y(&sigma, &SimConfig { seed: 43, ..cfg.clone() }).unwrap();
        assert_ne!(y1.paths[0].states, other.paths[0].states);
    }

    #[test]
    fn constant_periodic_reduces_to_constant_engine() {
        let a = dmatrix![-1.0, 0.2; 0.0, -0.5];
        let per = PeriodicDrift::new(
            2.0,
            PeriodicForm::Fourier { mean: a.clone(), cos: vec![Matrix::zeros(2, 2)], sin: vec![] },
        )
        .unwrap();
        let sigma = DiffusionSpec::constant(Matrix::identity(2, 2)).unwrap();
        let cfg = SimConfig::new(0.1, 10.0, 4, 3);
        assert_eq!(
            simulate_x_periodic(&per, &sigma, &[1.0, 1.0], &cfg).unwrap(),
            simulate_x(&a, &sigma, &[1.0, 1.0], &cfg).unwrap()
        );
    }

    #[test]
    fn periodic_zero_noise_flow() {
        let per = PeriodicDrift::new(
            2.0 * PI,
            PeriodicForm::Fourier { mean: dmatrix![-1.0], cos: vec![dmatrix![1.0]], sin: vec![] },
        )
        .unwrap();
        let sigma = DiffusionSpec::constant(dmatrix![0.0]).unwrap();
        let cfg = SimConfig::new(2.0 * PI / 64.0, 2.0 * PI, 1, 0);
        let ens = simulate_x_periodic(&per, &sigma, &[1.5], &cfg).unwrap();
        let last = ens.state(0, ens.times.len() - 1)[0];
        assert!((last - 1.5 * (-2.0 * PI).exp()).abs() < 1e-10);
        let bad = SimConfig::new(0.1, 2.0 * PI * 10.0, 1, 0);
        assert!(simulate_x_periodic(&per, &sigma, &[1.0], &bad).is_err());
    }

    #[test]
    fn stride_keeps_running_quantities() {
        let sigma = DiffusionSpec::constant(dmatrix![1.0]).unwrap();
        let full = simulate_y(&sigma, &SimConfig::new(0.1, 10.0, 2, 9)).unwrap();
        let coarse = simulate_y(&sigma, &SimConfig::new(0.1, 10.0, 2, 9).with_stride(10)).unwrap();
        assert_eq!(coarse.times.len(), 11);
        for p in 0..2 {
            for k in 0..coarse.times.len() {
                assert_eq!(coarse.paths[p].norm[k], full.paths[p].norm[10 * k]);
                assert_eq!(coarse.paths[p].running_max[k], full.paths[p].running_max[10 * k]);
                assert_eq!(coarse.paths[p].avg_sq[k], full.paths[p].avg_sq[10 * k]);
            }
            for k in 0..coarse.times.len() - 1 {
                let block = &full.paths[p].norm[10 * k..=10 * (k + 1)];
                assert_eq!(coarse.paths[p].block_max[k], block.iter().copied().fold(f64::MIN, f64::max));
                assert_eq!(coarse.paths[p].block_min[k], block.iter().copied().fold(f64::MAX, f64::min));
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::new(0.0, 1.0, 1, 0).n_steps().is_err());
        assert!(SimConfig::new(0.3, 1.0, 1, 0).n_steps().is_err());
        assert!(SimConfig::new(0.25, 1.0, 0, 0).n_steps().is_err());
        assert!(SimConfig::new(0.25, 1.0, 1, 0).with_stride(3).n_steps().is_err());
        assert_eq!(SimConfig::new(0.25, 1.0, 1, 0).n_steps().unwrap(), 4);
    }

    #[test]
    fn psd_sqrt_clamps_tiny_negative() {
        let q = dmatrix![1.0, 1.0; 1.0, 1.0 - 1e-15];
        let l = psd_sqrt(&q).unwrap();
        assert!((&l * l.transpose() - &q).abs().max() < 1e-14);
        assert!(psd_sqrt(&dmatrix![1.0, 0.0; 0.0, -0.5]).is_err());
    }
}
