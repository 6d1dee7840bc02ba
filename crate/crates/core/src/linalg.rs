//! Log-determinants of complex matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// det A = exp(ln_abs) · phase, kept apart so |det A|² can underflow gracefully.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDet {
    pub ln_abs: f64,
    /// Unit-modulus phase factor (zero for a singular matrix).
    pub phase: Complex64,
}

impl LogDet {
    pub fn value(&self) -> Complex64 {
        self.phase * self.ln_abs.exp()
    }

    /// ln |det|², i.e. the log of a survival probability.
    pub fn ln_abs_sq(&self) -> f64 {
        2.0 * self.ln_abs
    }

    pub fn abs_sq(&self) -> f64 {
        self.ln_abs_sq().exp()
    }

    /// Complex logarithm ln det A with the principal branch of the phase.
    pub fn ln(&self) -> Complex64 {
        Complex64::new(self.ln_abs, self.phase.arg())
    }
}

/// LU with partial pivoting; magnitudes are summed in log space.
pub fn log_det(a: &DMatrix<Complex64>) -> Result<LogDet> {
    if !a.is_square() {
        return Err(Error::Dimension(format!("determinant of a {}x{} matrix", a.nrows(), a.ncols())));
    }
    if a.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Numerical("non-finite entry in determinant".into()));
    }
    if a.nrows() == 0 {
        return Ok(LogDet { ln_abs: 0.0, phase: Complex64::new(1.0, 0.0) });
    }
    let lu = a.clone().lu();
    let sign: f64 = lu.p().determinant();
    let mut ln_abs = 0.0;
    let mut phase = Complex64::new(sign, 0.0);
    for d in lu.u().diagonal().iter() {
        let r = d.norm();
        if r == 0.0 {
            return Ok(LogDet { ln_abs: f64::NEG_INFINITY, phase: Complex64::new(0.0, 0.0) });
        }
        ln_abs += r.ln();
        phase *= d / r;
    }
    // renormalize the accumulated phase against drift
    phase /= phase.norm();
    Ok(LogDet { ln_abs, phase })
}

/// Determinant of a small real matrix by LU.
pub fn real_det(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 1.0;
    }
    a.clone().lu().determinant()
}
