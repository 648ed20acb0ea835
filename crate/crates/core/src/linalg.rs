//! Small dense helpers that ndarray does not provide.

use ndarray::{Array2, ArrayView2};

/// Thin QR by modified Gram-Schmidt (applied twice), returning the `rows × cols`
/// factor with orthonormal columns. The implied triangular factor has a positive
/// diagonal, so the factorization is unique and the result is sign-fixed.
///
/// Requires `rows >= cols` and full column rank.
pub(crate) fn orthonormal_columns(m: ArrayView2<f64>) -> Array2<f64> {
    let (rows, cols) = m.dim();
    assert!(rows >= cols, "orthonormal_columns needs a tall matrix");
    let mut q = m.to_owned();
    for j in 0..cols {
        // two passes of re-orthogonalization keep loss of orthogonality at machine precision
        for _ in 0..2 {
            for k in 0..j {
                let dot: f64 = (0..rows).map(|r| q[[r, k]] * q[[r, j]]).sum();
                for r in 0..rows {
                    q[[r, j]] -= dot * q[[r, k]];
                }
            }
        }
        let norm = (0..rows).map(|r| q[[r, j]] * q[[r, j]]).sum::<f64>().sqrt();
        assert!(norm > 0.0, "rank-deficient input to orthonormal_columns");
        for r in 0..rows {
            q[[r, j]] /= norm;
        }
    }
    q
}

/// Determinant by Gaussian elimination with partial pivoting.
pub(crate) fn determinant(m: ArrayView2<f64>) -> f64 {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "determinant of a non-square matrix");
    let mut a = m.to_owned();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[[x, col]].abs().total_cmp(&a[[y, col]].abs()))
            .unwrap();
        if a[[pivot, col]] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for k in 0..n {
                a.swap([pivot, k], [col, k]);
            }
            det = -det;
        }
        let p = a[[col, col]];
        det *= p;
        for r in col + 1..n {
            let f = a[[r, col]] / p;
            if f != 0.0 {
                for k in col..n {
                    a[[r, k]] -= f * a[[col, k]];
                }
            }
        }
    }
    det
}

/// Largest absolute deviation of `mᵀm` from the identity.
pub(crate) fn orthogonality_defect(m: ArrayView2<f64>) -> f64 {
    let gram = m.t().dot(&m);
    let mut worst: f64 = 0.0;
    for ((i, j), v) in gram.indexed_iter() {
        let target = if i == j { 1.0 } else { 0.0 };
        worst = worst.max((v - target).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn determinant_of_known_matrices() {
        assert!((determinant(array![[2.0, 0.0], [0.0, 3.0]].view()) - 6.0).abs() < 1e-14);
        assert!((determinant(array![[0.0, 1.0], [1.0, 0.0]].view()) + 1.0).abs() < 1e-14);
        let m = array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 10.0]];
        assert!((determinant(m.view()) + 3.0).abs() < 1e-12);
    }

    #[test]
    fn gram_schmidt_gives_orthonormal_columns() {
        let m = array![[1.0, 1.0], [0.0, 1.0], [1.0, 0.0]];
        let q = orthonormal_columns(m.view());
        assert!(orthogonality_defect(q.view()) < 1e-14);
        // first column is the normalized first input column
        let s = 2f64.sqrt().recip();
        assert!((q[[0, 0]] - s).abs() < 1e-15 && (q[[2, 0]] - s).abs() < 1e-15);
    }
}
