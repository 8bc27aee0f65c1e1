//! Dense complex linear algebra helpers: matrix exponentials and
//! eigendecompositions of drift matrices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default bound on `‖A t‖₁` accepted by [`expm`].
pub const DEFAULT_EXPM_BOUND: f64 = 1e6;

/// Eigenvector condition numbers above this are treated as defective.
pub const DEFAULT_CONDITION_BOUND: f64 = 1e8;

pub fn norm1(a: &DMatrix<Complex64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `e^{A t}` by scaling and squaring.
pub fn expm(a: &DMatrix<Complex64>, t: f64) -> Result<DMatrix<Complex64>> {
    expm_bounded(a, t, DEFAULT_EXPM_BOUND)
}

pub fn expm_bounded(a: &DMatrix<Complex64>, t: f64, bound: f64) -> Result<DMatrix<Complex64>> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::Domain(format!("matrix exponential needs t >= 0, got {t}")));
    }
    let at = a * Complex64::new(t, 0.0);
    let norm = norm1(&at);
    if !norm.is_finite() || norm > bound {
        return Err(Error::ExpmOverflow { norm, bound });
    }
    if norm == 0.0 {
        return Ok(DMatrix::identity(a.nrows(), a.ncols()));
    }
    Ok(at.exp())
}

/// `e^{A t} v`.
pub fn expm_action(a: &DMatrix<Complex64>, t: f64, v: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    Ok(expm(a, t)? * v)
}

/// `A = V diag(values) V⁻¹`.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<Complex64>,
    pub vectors: DMatrix<Complex64>,
    pub inverse: DMatrix<Complex64>,
    pub condition: f64,
}

/// Eigendecomposition through the complex Schur form.
///
/// Fails with [`Error::DefectiveDrift`] when the eigenvector matrix has a
/// 1-norm condition number above `condition_bound`.
pub fn eigen_decompose(a: &DMatrix<Complex64>, condition_bound: f64) -> Result<Eigen> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Eigen {
            values: vec![],
            vectors: DMatrix::zeros(0, 0),
            inverse: DMatrix::zeros(0, 0),
            condition: 1.0,
        });
    }
    let scale = norm1(a).max(f64::MIN_POSITIVE);
    let (q, t) = a.clone().schur().unpack();
    for j in 0..n {
        for i in j + 1..n {
            if t[(i, j)].norm() > 1e-10 * scale {
                return Err(Error::Numerical("Schur form did not converge to triangular".into()));
            }
        }
    }
    let values: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();

    // Eigenvectors of the triangular factor by back substitution.
    let mut y = DMatrix::<Complex64>::zeros(n, n);
    for k in 0..n {
        y[(k, k)] = Complex64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut num = Complex64::new(0.0, 0.0);
            for j in i + 1..=k {
                num -= t[(i, j)] * y[(j, k)];
            }
            let den = t[(i, i)] - t[(k, k)];
            if den.norm() <= 1e-14 * scale {
                if num.norm() <= 1e-12 * scale {
                    y[(i, k)] = Complex64::new(0.0, 0.0);
                    continue;
                }
                return Err(Error::DefectiveDrift { condition: f64::INFINITY });
            }
            y[(i, k)] = num / den;
        }
    }
    let mut vectors = q * y;
    for mut col in vectors.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= Complex64::new(norm, 0.0);
        }
    }
    let inverse = vectors
        .clone()
        .lu()
        .try_inverse()
        .ok_or(Error::DefectiveDrift { condition: f64::INFINITY })?;
    let condition = norm1(&vectors) * norm1(&inverse);
    if !condition.is_finite() || condition > condition_bound {
        return Err(Error::DefectiveDrift { condition });
    }
    Ok(Eigen {
        values,
        vectors,
        inverse,
        condition,
    })
}
