//! Matrix exponential by scaling and squaring with a degree-13 Padé
//! approximant (Higham, 2005).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{all_finite, norm1};

const PADE13: [f64; 14] = [
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

/// Largest 1-norm for which the degree-13 approximant is accurate to unit
/// roundoff without scaling.
const THETA13: f64 = 5.371920351148152;

/// Beyond this many squarings the result is not trusted.
const MAX_SQUARINGS: i32 = 64;

pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Shape {
            rows: n,
            cols: a.ncols(),
            reason: "matrix exponential needs a square matrix",
        });
    }
    let norm = norm1(a);
    if !norm.is_finite() {
        return Err(Error::NumericStability(
            "matrix exponential input is not finite".into(),
        ));
    }
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    if squarings > MAX_SQUARINGS {
        return Err(Error::NumericStability(format!(
            "matrix exponential needs {squarings} squarings (1-norm {norm:.3e})"
        )));
    }
    let scaled = a * 2f64.powi(-squarings);
    let b = &PADE13;
    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &ident * b[1];
    let u = &scaled * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &ident * b[0];

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .ok_or_else(|| Error::NumericStability("Padé denominator is singular".into()))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    if !all_finite(&r) {
        return Err(Error::NumericStability(
            "matrix exponential overflowed".into(),
        ));
    }
    Ok(r)
}
