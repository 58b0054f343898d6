//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

/// Eigenpairs of a Hermitian matrix, eigenvalues sorted descending.
///
/// Column `i` of `vectors` belongs to `values[i]`. Ordering among exactly equal
/// eigenvalues follows the solver's output order, which is deterministic.
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

pub fn hermitian_eigen(m: &CMatrix) -> HermitianEigen {
    let eig = SymmetricEigen::new(hermitize(m));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    HermitianEigen { values, vectors }
}

/// `(m + m†)/2`.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// Largest entrywise deviation from Hermiticity, relative to the largest entry.
pub fn hermiticity_error(m: &CMatrix) -> f64 {
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let diff = m - m.adjoint();
    diff.iter().map(|z| z.norm()).fold(0.0, f64::max) / scale
}

/// Pairwise (tree) reduction in a fixed order, independent of how the parts were produced.
pub fn tree_sum<T, F>(mut parts: Vec<T>, add: F) -> Option<T>
where
    F: Fn(T, T) -> T,
{
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(add(a, b)),
                None => next.push(a),
            }
        }
        parts = next;
    }
    parts.pop()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_and_reconstructs() {
        let m = CMatrix::from_fn(5, 5, |i, j| {
            let (i, j) = (i as f64, j as f64);
            Complex64::new(1.0 / (1.0 + i + j), 0.1 * (i - j))
        });
        let m = hermitize(&m);
        let eig = hermitian_eigen(&m);
        assert!(eig.values.windows(2).all(|w| w[0] >= w[1]));
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            5,
            eig.values.iter().map(|&v| Complex64::new(v, 0.0)),
        ));
        let back = &eig.vectors * d * eig.vectors.adjoint();
        assert!((back - &m).norm() < 1e-12);
    }

    #[test]
    fn tree_sum_order() {
        let parts: Vec<u32> = (1..=7).collect();
        assert_eq!(tree_sum(parts, |a, b| a + b), Some(28));
        assert_eq!(tree_sum(Vec::<u32>::new(), |a, b| a + b), None);
    }
}
