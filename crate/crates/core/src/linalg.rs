//! Small dense helpers on top of nalgebra.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

/// Moore-Penrose pseudo-inverse, zeroing singular values below `rel_tol * sigma_max`.
///
/// Returns the pseudo-inverse together with the number of retained singular values.
pub fn pinv(a: &DMatrix<f64>, rel_tol: f64) -> Result<(DMatrix<f64>, usize)> {
    let (r, c) = a.shape();
    if r == 0 || c == 0 {
        return Ok((DMatrix::zeros(c, r), 0));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("pseudo-inverse of a non-finite matrix".into()));
    }
    let svd = a.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    if sigma_max == 0.0 {
        return Ok((DMatrix::zeros(c, r), 0));
    }
    let cut = rel_tol * sigma_max;
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let mut out = DMatrix::zeros(c, r);
    let mut rank = 0;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= cut {
            continue;
        }
        rank += 1;
        // out += v_k * u_k^T / s
        out += (v_t.row(k).transpose() * u.column(k).transpose()) / s;
    }
    Ok((out, rank))
}

/// The `count` right singular vectors of `m` with the smallest singular values, smallest first.
pub fn complex_null_vectors(m: &DMatrix<Complex<f64>>, count: usize) -> Result<Vec<DVector<Complex<f64>>>> {
    let n = m.ncols();
    if m.nrows() != n {
        return Err(Error::Numerical("null vectors requested for a non-square matrix".into()));
    }
    let svd = m
        .clone()
        .try_svd(false, true, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("complex SVD did not converge".into()))?;
    let v_t = svd.v_t.expect("v_t requested");
    // SVD::try_svd returns singular values in decreasing order.
    Ok((0..count.min(n)).map(|k| v_t.row(n - 1 - k).adjoint()).collect())
}

pub fn real_null_vectors(m: &DMatrix<f64>, count: usize) -> Result<Vec<DVector<f64>>> {
    let n = m.ncols();
    if m.nrows() != n {
        return Err(Error::Numerical("null vectors requested for a non-square matrix".into()));
    }
    let svd = m
        .clone()
        .try_svd(false, true, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let v_t = svd.v_t.expect("v_t requested");
    Ok((0..count.min(n)).map(|k| v_t.row(n - 1 - k).transpose()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_identities_on_rectangular() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let (p, rank) = pinv(&a, 1e-12).unwrap();
        assert_eq!(rank, 2);
        assert!((&a * &p * &a - &a).norm() < 1e-12);
        assert!((&p * &a * &p - &p).norm() < 1e-12);
    }

    #[test]
    fn pinv_truncates_rank_deficiency() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        let (p, rank) = pinv(&a, 1e-10).unwrap();
        assert_eq!(rank, 1);
        assert!((&a * &p * &a - &a).norm() < 1e-12);
    }

    #[test]
    fn zero_matrix_has_zero_pinv() {
        let (p, rank) = pinv(&DMatrix::zeros(2, 4), 1e-10).unwrap();
        assert_eq!(rank, 0);
        assert_eq!(p.shape(), (4, 2));
        assert_eq!(p.norm(), 0.0);
    }

    #[test]
    fn null_vector_of_singular_matrix() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let v = &real_null_vectors(&m, 1).unwrap()[0];
        assert!((&m * v).norm() < 1e-14);
        assert!((v.norm() - 1.0).abs() < 1e-14);
    }
}
