//! Dormand–Prince 5(4) integration of linear matrix ODEs.

use super::eigen::spectral_radius;
use crate::error::{Error, Result};
use crate::model::{DriftSpec, Matrix, PeriodicDrift};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrate `y' = f(t, y)` from `t0` to `t1` with mixed absolute/relative
/// local tolerance `tol`. Returns `y(t1)`.
pub fn dopri5<F>(mut f: F, t0: f64, t1: f64, y0: &[f64], tol: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("ODE tolerance must be positive, got {tol}")));
    }
    if !(t1 >= t0) {
        return Err(Error::Domain("ODE integration runs forward in time only".into()));
    }
    let n = y0.len();
    let mut y = y0.to_vec();
    if t1 == t0 {
        return Ok(y);
    }
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut t = t0;
    let mut h = (t1 - t0).min(0.1);
    f(t, &y, &mut k[0]);
    let mut steps = 0usize;
    while t < t1 {
        steps += 1;
        if steps > 10_000_000 {
            return Err(Error::StepUnderflow { t, h });
        }
        if t + h > t1 {
            h = t1 - t;
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for j in 0..s {
                    acc += h * A[s][j] * k[j][i];
                }
                stage[i] = acc;
            }
            let (_, rest) = k.split_at_mut(s);
            f(t + C[s] * h, &stage, &mut rest[0]);
        }
        // Stage 7 is evaluated at the fifth-order solution (FSAL).
        let mut err: f64 = 0.0;
        for i in 0..n {
            let mut acc = y[i];
            for j in 0..6 {
                acc += h * A[6][j] * k[j][i];
            }
            y_new[i] = acc;
        }
        for i in 0..n {
            let mut e = 0.0;
            for j in 0..7 {
                e += E[j] * k[j][i];
            }
            let scale = tol * (1.0 + y[i].abs().max(y_new[i].abs()));
            err = err.max((h * e).abs() / scale);
        }
        if !err.is_finite() {
            h *= 0.25;
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepUnderflow { t, h });
            }
            continue;
        }
        if err <= 1.0 {
            t = if h == t1 - t { t1 } else { t + h };
            std::mem::swap(&mut y, &mut y_new);
            k.swap(0, 6);
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h < 1e-14 * t.abs().max(1.0) && t < t1 {
            return Err(Error::StepUnderflow { t, h });
        }
    }
    Ok(y)
}

/// Transition matrix `Φ(t, s)` of `Ψ' = A(t)Ψ`, `Φ(s, s) = I`.
pub fn transition(drift: &DriftSpec, s: f64, t: f64, tol: f64) -> Result<Matrix> {
    let d = drift.dim();
    if let Some(a) = drift.as_constant() {
        return super::expm(&a, t - s);
    }
    let y0 = Matrix::identity(d, d);
    let out = dopri5(
        |tau, y, dy| {
            let a = drift.eval(tau);
            let ym = nalgebra::DMatrixView::from_slice(y, d, d);
            let prod = a * ym;
            dy.copy_from_slice(prod.as_slice());
        },
        s,
        t,
        y0.as_slice(),
        tol,
    )?;
    Ok(Matrix::from_column_slice(d, d, &out))
}

/// `Ψ(t_end)` with `Ψ(0) = I`, integrated by the adaptive Runge–Kutta pair
/// even when the drift is constant.
pub fn fundamental_solution(drift: &DriftSpec, t_end: f64, tol: f64) -> Result<Matrix> {
    if !(t_end >= 0.0) {
        return Err(Error::Domain(format!("t_end must be non-negative, got {t_end}")));
    }
    let d = drift.dim();
    let y0 = Matrix::identity(d, d);
    let out = dopri5(
        |tau, y, dy| {
            let a = drift.eval(tau);
            let ym = nalgebra::DMatrixView::from_slice(y, d, d);
            let prod = a * ym;
            dy.copy_from_slice(prod.as_slice());
        },
        0.0,
        t_end,
        y0.as_slice(),
        tol,
    )?;
    Ok(Matrix::from_column_slice(d, d, &out))
}

/// Monodromy matrix `Ψ(T)` over one period and its spectral radius.
#[derive(Debug, Clone, PartialEq)]
pub struct MonodromyResult {
    pub psi_t: Matrix,
    pub rho: f64,
    pub ode_tolerance: f64,
}

pub fn monodromy(drift: &PeriodicDrift, tol: f64) -> Result<MonodromyResult> {
    let spec = DriftSpec::Periodic(drift.clone());
    let psi_t = fundamental_solution(&spec, drift.period(), tol)?;
    let det = psi_t.determinant();
    if !(det.abs() > 0.0) || !det.is_finite() {
        return Err(Error::Singular);
    }
    let rho = spectral_radius(&psi_t)?;
    Ok(MonodromyResult { psi_t, rho, ode_tolerance: tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::expm;
    use crate::model::PeriodicForm;
    use nalgebra::dmatrix;
    use std::f64::consts::PI;

    fn scalar_fourier(mean: f64, cos: f64, sin: f64) -> PeriodicDrift {
        PeriodicDrift::new(
            2.0 * PI,
            PeriodicForm::Fourier { mean: dmatrix![mean], cos: vec![dmatrix![cos]], sin: vec![dmatrix![sin]] },
        )
        .unwrap()
    }

    #[test]
    fn constant_drift_matches_expm() {
        let a = dmatrix![-1.0, 2.0; -0.5, -0.3];
        let psi = fundamental_solution(&DriftSpec::Constant(a.clone()), 3.0, 1e-12).unwrap();
        assert!((psi - expm(&a, 3.0).unwrap()).abs().max() < 1e-8);
    }

    #[test]
    fn sine_drift_returns_to_one() {
        let p = scalar_fourier(0.0, 0.0, 1.0);
        let psi = fundamental_solution(&DriftSpec::Periodic(p), 2.0 * PI, 1e-12).unwrap();
        assert!((psi[(0, 0)] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn shifted_cosine_decays() {
        let p = scalar_fourier(-1.0, 1.0, 0.0);
        let psi = fundamental_solution(&DriftSpec::Periodic(p), 2.0 * PI, 1e-12).unwrap();
        assert!((psi[(0, 0)] - (-2.0 * PI).exp()).abs() < 1e-10);
    }

    #[test]
    fn monodromy_examples() {
        let c = PeriodicDrift::new(1.0, PeriodicForm::Fourier { mean: dmatrix![-1.0], cos: vec![], sin: vec![] })
            .unwrap();
        assert!((monodromy(&c, 1e-12).unwrap().rho - (-1.0f64).exp()).abs() < 1e-10);
        assert!((monodromy(&scalar_fourier(0.0, 0.0, 1.0), 1e-12).unwrap().rho - 1.0).abs() < 1e-9);
        let diag = PeriodicDrift::new(
            2.0 * PI,
            PeriodicForm::Fourier {
                mean: dmatrix![-1.0, 0.0; 0.0, -2.0],
                cos: vec![dmatrix![1.0, 0.0; 0.0, 0.0]],
                sin: vec![],
            },
        )
        .unwrap();
        let m = monodromy(&diag, 1e-12).unwrap();
        assert!((m.rho - (-2.0 * PI).exp()).abs() < 1e-8);
        assert!(m.psi_t.determinant().abs() > 0.0);
    }

    #[test]
    fn periodic_table_drift_is_integrated() {
        let p = PeriodicDrift::new(
            2.0,
            PeriodicForm::Table { times: vec![0.0, 1.0], values: vec![dmatrix![-1.0], dmatrix![-3.0]] },
        )
        .unwrap();
        // The drift is a triangle wave with mean −2, so ∫₀² a = −4.
        let m = monodromy(&p, 1e-12).unwrap();
        assert!((m.rho - (-4.0f64).exp()).abs() < 1e-9);
    }
}
