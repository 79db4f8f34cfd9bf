//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigen-decomposition of a symmetric matrix, eigenvalues descending.
///
/// Each eigenvector is signed so that its largest-magnitude entry is positive,
/// which makes the basis reproducible across scalings of the input.
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(m.nrows(), n);
    for (k, &i) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        let pivot = v.iamax();
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        vectors.set_column(k, &v);
    }
    (values, vectors)
}

/// `m^{-1/2}` for a symmetric positive-definite matrix.
pub fn inv_sqrt_sym(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (vals, vecs) = sym_eigen_desc(m);
    let top = vals.iter().copied().fold(0.0f64, f64::max);
    if vals.iter().any(|&v| v <= top * 1e-14 || !v.is_finite()) {
        return Err(Error::Degenerate(
            "matrix is not positive definite".into(),
        ));
    }
    let scale = DMatrix::from_diagonal(&vals.map(|v| 1.0 / v.sqrt()));
    Ok(&vecs * scale * vecs.transpose())
}

/// Symmetric orthogonalization `(W Wᵀ)^{-1/2} W`.
pub fn sym_decorrelate(w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(inv_sqrt_sym(&(w * w.transpose()))? * w)
}

/// Orthonormal basis of the column space of a full-column-rank matrix.
pub fn orthonormal_columns(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.clone().qr().q()
}

/// Principal angles (degrees, ascending) between two column spaces given by
/// orthonormal bases.
pub fn principal_angles_deg(qa: &DMatrix<f64>, qb: &DMatrix<f64>) -> Vec<f64> {
    let cross = qa.transpose() * qb;
    let sv = cross.singular_values();
    let mut angles: Vec<f64> = sv
        .iter()
        .map(|&c| c.clamp(-1.0, 1.0).acos().to_degrees())
        .collect();
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    angles
}

/// `max |W Wᵀ − I|`.
pub fn orthogonality_defect(w: &DMatrix<f64>) -> f64 {
    let n = w.nrows();
    (w * w.transpose() - DMatrix::<f64>::identity(n, n)).amax()
}

/// Permutation matrix whose row `k` selects channel `order[k]`.
pub fn permutation_matrix(order: &[usize]) -> DMatrix<f64> {
    let n = order.len();
    let mut p = DMatrix::zeros(n, n);
    for (row, &col) in order.iter().enumerate() {
        p[(row, col)] = 1.0;
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn eigen_is_sorted_and_signed() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 5.0]);
        let (vals, vecs) = sym_eigen_desc(&m);
        assert_abs_diff_eq!(vals.as_slice(), &[5.0, 3.0, 1.0][..], epsilon = 1e-12);
        for k in 0..3 {
            let v = vecs.column(k);
            assert!(v[v.iamax()] > 0.0);
            assert_abs_diff_eq!(&m * v, v * vals[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn inverse_sqrt_whitens() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let w = inv_sqrt_sym(&m).unwrap();
        assert_abs_diff_eq!(&w * &m * &w, DMatrix::identity(2, 2), epsilon = 1e-12);
        assert!(inv_sqrt_sym(&DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0])).is_err());
    }

    #[test]
    fn principal_angles_of_rotated_planes() {
        let a = DMatrix::from_row_slice(3, 1, &[1.0, 0.0, 0.0]);
        let th = 30f64.to_radians();
        let b = DMatrix::from_row_slice(3, 1, &[th.cos(), th.sin(), 0.0]);
        let ang = principal_angles_deg(&a, &b);
        assert_abs_diff_eq!(ang[0], 30.0, epsilon = 1e-9);
    }
}
