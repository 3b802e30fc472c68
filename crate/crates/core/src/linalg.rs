//! Small dense complex linear-algebra helpers shared by the solvers.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;

/// Condition estimates above this value are reported as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// A determinant stored as `phase * exp(log_abs)` so that large strips do not
/// overflow. A zero determinant has `log_abs == -inf` and unit phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDet {
    pub log_abs: f64,
    pub phase: Complex64,
}

impl LogDet {
    pub fn one() -> Self {
        LogDet {
            log_abs: 0.0,
            phase: Complex64::new(1.0, 0.0),
        }
    }

    pub fn zero() -> Self {
        LogDet {
            log_abs: f64::NEG_INFINITY,
            phase: Complex64::new(1.0, 0.0),
        }
    }

    pub fn from_value(z: Complex64) -> Self {
        let r = z.norm();
        if r == 0.0 {
            Self::zero()
        } else {
            LogDet {
                log_abs: r.ln(),
                phase: z / r,
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.log_abs == f64::NEG_INFINITY
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(self, other: LogDet) -> LogDet {
        if self.is_zero() || other.is_zero() {
            return LogDet::zero();
        }
        LogDet {
            log_abs: self.log_abs + other.log_abs,
            phase: renormalize_phase(self.phase * other.phase),
        }
    }

    pub fn value(&self) -> Complex64 {
        if self.is_zero() {
            Complex64::new(0.0, 0.0)
        } else {
            self.phase * self.log_abs.exp()
        }
    }
}

fn renormalize_phase(z: Complex64) -> Complex64 {
    let r = z.norm();
    if r == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        z / r
    }
}

/// Log-determinant through an LU factorization with partial pivoting.
pub fn log_det(m: &CMat) -> LogDet {
    assert!(m.is_square());
    if m.nrows() == 0 {
        return LogDet::one();
    }
    let lu = m.clone().lu();
    let mut acc = LogDet::one();
    let u = lu.u();
    for k in 0..u.nrows() {
        acc = acc.mul(LogDet::from_value(u[(k, k)]));
        if acc.is_zero() {
            return acc;
        }
    }
    let sign = lu.p().determinant::<f64>();
    acc.phase *= sign;
    acc
}

/// Sum over rows of `ln ||row||_2`: Hadamard's bound on `ln |det m|`.
pub fn log_hadamard(m: &CMat) -> f64 {
    m.row_iter()
        .map(|row| row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().ln())
        .sum()
}

pub fn norm1(m: &CMat) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn norm_max(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest singular value.
pub fn op_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

pub fn hermitian_defect(m: &CMat) -> f64 {
    norm_max(&(m - m.adjoint()))
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Inverts `m`, failing when `||m||_1 ||m^{-1}||_1` exceeds
/// [`SINGULAR_CONDITION`] or the factorization hits an exact zero pivot.
pub fn invert_checked(m: &CMat) -> Result<(CMat, f64)> {
    invert_with_scale(m, norm1(m))
}

/// Like [`invert_checked`] but measures the condition against a caller
/// supplied scale instead of `||m||_1`. Block sweeps use the norm of the
/// surrounding rows of `H - E` here, since a 1x1 pivot always has
/// condition one in isolation.
pub fn invert_with_scale(m: &CMat, scale: f64) -> Result<(CMat, f64)> {
    let singular = Error::Singular {
        condition: f64::INFINITY,
        position: None,
    };
    // real input: invert in real arithmetic
    let inv = if m.nrows() > 8 && m.iter().all(|z| z.im == 0.0) {
        let re = m.map(|z| z.re).try_inverse().ok_or(singular)?;
        re.map(|x| Complex64::new(x, 0.0))
    } else {
        m.clone().try_inverse().ok_or(singular)?
    };
    let cond = scale * norm1(&inv);
    if !cond.is_finite() || cond > SINGULAR_CONDITION {
        return Err(Error::Singular {
            condition: cond,
            position: None,
        });
    }
    Ok((inv, cond))
}

/// Rescales `m` in place so that its largest entry has modulus one and
/// returns the natural log of the factor that was removed.
pub fn normalize_in_place(m: &mut CMat) -> f64 {
    let s = norm_max(m);
    if s == 0.0 || !s.is_finite() {
        return 0.0;
    }
    m.unscale_mut(s);
    s.ln()
}

/// `ln ||m||_F` without overflow for already-normalized matrices.
pub fn log_frobenius(m: &CMat) -> f64 {
    let s = m.iter().map(|z| z.norm_sqr()).sum::<f64>();
    0.5 * s.ln()
}

pub fn real_diag(values: &[f64]) -> CMat {
    CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        values.len(),
        values.iter().map(|&v| Complex64::new(v, 0.0)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn log_det_matches_small_determinant() {
        let m = CMat::from_row_slice(2, 2, &[c(1.0), c(2.0), c(3.0), c(4.0)]);
        let d = log_det(&m);
        assert!((d.value() - c(-2.0)).norm() < 1e-14);
    }

    #[test]
    fn log_det_of_singular_matrix_is_zero() {
        let m = CMat::from_row_slice(2, 2, &[c(1.0), c(1.0), c(1.0), c(1.0)]);
        assert!(log_det(&m).value().norm() < 1e-15);
    }

    #[test]
    fn log_det_large_diagonal_does_not_overflow() {
        let m = real_diag(&vec![1e10; 100]);
        let d = log_det(&m);
        assert!((d.log_abs - 100.0 * 1e10f64.ln()).abs() < 1e-9);
        assert!((d.phase - c(1.0)).norm() < 1e-14);
    }

    #[test]
    fn checked_inverse_rejects_singular() {
        let m = CMat::from_row_slice(2, 2, &[c(1.0), c(1.0), c(1.0), c(1.0)]);
        assert!(matches!(invert_checked(&m), Err(Error::Singular { .. })));
    }

    #[test]
    fn hadamard_bounds_determinant() {
        let m = CMat::from_fn(4, 4, |i, j| c(((i * 7 + j * 3) % 5) as f64 - 2.0));
        let d = log_det(&m);
        assert!(d.is_zero() || d.log_abs <= log_hadamard(&m) + 1e-12);
    }
}
