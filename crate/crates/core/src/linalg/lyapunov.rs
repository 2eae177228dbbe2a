use nalgebra::DVector;

use super::eigen::{eigenvalues, spectral_abscissa};
use crate::error::{Error, Result};
use crate::model::Matrix;

/// Solution `M` of `AᵀM + MA = −I`.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovSolution {
    pub m: Matrix,
    /// `‖AᵀM + MA + I‖_F`.
    pub residual: f64,
}

fn sym_index(i: usize, j: usize, d: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    // Row-major packing of the upper triangle.
    i * d - i * (i + 1) / 2 + j
}

fn residual(a: &Matrix, m: &Matrix) -> Matrix {
    let d = a.nrows();
    a.transpose() * m + m * a + Matrix::identity(d, d)
}

/// Solve the Lyapunov equation for a Hurwitz-stable `A` by the packed linear
/// system on the `d(d+1)/2` symmetric unknowns.
pub fn solve_lyapunov(a: &Matrix) -> Result<LyapunovSolution> {
    if !a.is_square() || a.is_empty() {
        return Err(Error::Domain("Lyapunov solve needs a non-empty square matrix".into()));
    }
    let abscissa = spectral_abscissa(a)?;
    if abscissa >= 0.0 {
        return Err(Error::Stability(format!("spectral abscissa {abscissa} is not negative")));
    }
    let d = a.nrows();
    let n = d * (d + 1) / 2;
    let mut sys = Matrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    // Equation (i, j), i ≤ j: Σ_k A_ki M_kj + Σ_k M_ik A_kj = −δ_ij.
    for i in 0..d {
        for j in i..d {
            let row = sym_index(i, j, d);
            for k in 0..d {
                sys[(row, sym_index(k, j, d))] += a[(k, i)];
                sys[(row, sym_index(i, k, d))] += a[(k, j)];
            }
            if i == j {
                rhs[row] = -1.0;
            }
        }
    }
    let lu = sys.clone().lu();
    let mut x = lu.solve(&rhs).ok_or(Error::Singular)?;
    // One step of iterative refinement.
    let r = &rhs - &sys * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    let m = Matrix::from_fn(d, d, |i, j| x[sym_index(i, j, d)]);
    let res = residual(a, &m).norm();
    let min_eig = eigenvalues(&m)?.iter().map(|e| e.re).fold(f64::INFINITY, f64::min);
    if !(min_eig > 0.0) {
        return Err(Error::NotPsd { min_eig, trace: m.trace() });
    }
    Ok(LyapunovSolution { m, residual: res })
}
