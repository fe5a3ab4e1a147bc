//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{CoxError, Result};

/// Largest admissible condition number for an information matrix.
pub const MAX_CONDITION: f64 = 1e12;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Inverse of a symmetric positive-definite matrix, rejecting singular or
/// ill-conditioned input.
pub fn spd_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(CoxError::SingularInformation);
    }
    let eig = SymmetricEigen::new(symmetrize(a));
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(min > 0.0) || max / min > MAX_CONDITION {
        return Err(CoxError::SingularInformation);
    }
    let inv_vals = eig.eigenvalues.map(|l| 1.0 / l);
    let q = &eig.eigenvectors;
    Ok(symmetrize(&(q * DMatrix::from_diagonal(&inv_vals) * q.transpose())))
}

/// Reorders rows and columns so that `front` come first (in the given order),
/// followed by the remaining coordinates in their original order.
pub fn permute_to_front(m: &DMatrix<f64>, front: &[usize]) -> DMatrix<f64> {
    let perm = front_permutation(m.nrows(), front);
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(perm[i], perm[j])])
}

pub fn front_permutation(p: usize, front: &[usize]) -> Vec<usize> {
    let mut perm: Vec<usize> = front.to_vec();
    perm.extend((0..p).filter(|j| !front.contains(j)));
    perm
}

pub fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}
