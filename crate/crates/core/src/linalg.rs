//! Small dense solves with an explicit singularity check.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};

/// Pivots smaller than this in magnitude are treated as singular.
pub const PIVOT_TOL: f64 = 1e-12;

/// Solves `a x = b` by LU with partial pivoting.
pub fn solve(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim(a.nrows(), a.ncols())?;
    check_dim(a.nrows(), b.len())?;
    if a.nrows() == 0 {
        return Ok(DVector::zeros(0));
    }
    let lu = a.lu();
    let pivot = lu.u().diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if !(pivot >= PIVOT_TOL) {
        return Err(Error::Singular { pivot });
    }
    lu.solve(b).ok_or(Error::Singular { pivot })
}

/// Solves `a X = b` column by column.
pub fn solve_matrix(a: DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_dim(a.nrows(), a.ncols())?;
    check_dim(a.nrows(), b.nrows())?;
    let lu = a.lu();
    let pivot = lu.u().diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if b.nrows() > 0 && !(pivot >= PIVOT_TOL) {
        return Err(Error::Singular { pivot });
    }
    lu.solve(b).ok_or(Error::Singular { pivot })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_well_posed_system() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let b = DVector::from_vec(vec![3.0, 5.0]);
        let x = solve(a, &b).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn reports_singular_system() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(solve(a, &DVector::zeros(2)), Err(Error::Singular { .. })));
    }
}
