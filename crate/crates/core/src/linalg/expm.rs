//! Matrix exponential by Padé scaling and squaring (degrees 3, 5, 7, 9, 13).

use crate::error::{Error, Result};
use crate::model::Matrix;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA: [f64; 4] = [1.495585217958292e-2, 2.539398330063230e-1, 9.504178996162932e-1, 2.097847961257068];
const THETA13: f64 = 5.371920351148152;

fn norm1(a: &Matrix) -> f64 {
    a.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn pade_low(a: &Matrix, b: &[f64]) -> (Matrix, Matrix) {
    let n = a.nrows();
    let id = Matrix::identity(n, n);
    let a2 = a * a;
    let mut power = id.clone();
    let mut u = id.clone() * b[1];
    let mut v = id * b[0];
    for k in 1..b.len() / 2 {
        power = &power * &a2;
        u += &power * b[2 * k + 1];
        v += &power * b[2 * k];
    }
    (a * u, v)
}

fn pade13(a: &Matrix) -> (Matrix, Matrix) {
    let n = a.nrows();
    let id = Matrix::identity(n, n);
    let b = &B13;
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let u = a * (&a6 * inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1]);
    let inner_v = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = &a6 * inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    (u, v)
}

/// `e^{A t}`.
pub fn expm(a: &Matrix, t: f64) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::Domain("expm needs a square matrix".into()));
    }
    if !t.is_finite() || a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("expm needs finite input".into()));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let at = a * t;
    let nrm = norm1(&at);
    if nrm == 0.0 {
        return Ok(Matrix::identity(n, n));
    }
    let (u, v, squarings) = if nrm <= THETA[0] {
        let (u, v) = pade_low(&at, &B3);
        (u, v, 0)
    } else if nrm <= THETA[1] {
        let (u, v) = pade_low(&at, &B5);
        (u, v, 0)
    } else if nrm <= THETA[2] {
        let (u, v) = pade_low(&at, &B7);
        (u, v, 0)
    } else if nrm <= THETA[3] {
        let (u, v) = pade_low(&at, &B9);
        (u, v, 0)
    } else {
        let s = ((nrm / THETA13).log2().ceil()).max(0.0) as i32;
        if s > 1000 {
            return Err(Error::ExpmOverflow(nrm));
        }
        let scaled = &at * 2f64.powi(-s);
        let (u, v) = pade13(&scaled);
        (u, v, s)
    };
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).ok_or(Error::Singular)?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::ExpmOverflow(nrm));
    }
    Ok(r)
}
