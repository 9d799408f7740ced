//! Small dense linear-algebra helpers shared across modules.

use nalgebra::DMatrix;

/// Eigenvalues of a dense symmetric matrix (ascending).
pub fn sym_eigenvalues(m: &[Vec<f64>]) -> Vec<f64> {
    let d = m.len();
    let mat = DMatrix::from_fn(d, d, |i, j| 0.5 * (m[i][j] + m[j][i]));
    let mut ev: Vec<f64> = mat.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// Symmetric positive-semidefinite square root via eigendecomposition;
/// tiny negative eigenvalues from roundoff are clamped to zero.
pub(crate) fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let d = m.nrows();
    let mut s = DMatrix::zeros(d, d);
    for i in 0..d {
        s[(i, i)] = eig.eigenvalues[i].max(0.0).sqrt();
    }
    &eig.eigenvectors * s * eig.eigenvectors.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_of_diagonal() {
        let m = vec![vec![2.0, 0.0], vec![0.0, -1.0]];
        let ev = sym_eigenvalues(&m);
        assert!((ev[0] + 1.0).abs() < 1e-12);
        assert!((ev[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sqrt_squares_back() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let s = sym_sqrt(&m);
        let back = &s * &s;
        for i in 0..2 {
            for j in 0..2 {
                assert!((back[(i, j)] - m[(i, j)]).abs() < 1e-12);
            }
        }
    }
}
