//! Small dense helpers on top of nalgebra.

use nalgebra::DMatrix;

use crate::sparse::SparseVec;

/// `dim x vectors.len()` matrix with the vectors as columns.
pub fn columns(vectors: &[SparseVec], dim: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(dim, vectors.len());
    for (j, v) in vectors.iter().enumerate() {
        for (i, x) in v.iter() {
            m[(i, j)] = x;
        }
    }
    m
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Modified Gram-Schmidt with one re-orthogonalization pass.
///
/// A vector whose remaining norm falls to `rank_tol` times its original norm
/// or below is treated as dependent and skipped.
pub fn orthonormalize<I>(vectors: I, rank_tol: f64) -> Vec<Vec<f64>>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for mut v in vectors {
        let original = norm(&v);
        if original == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for q in &basis {
                let a = dot(q, &v);
                v.iter_mut().zip(q).for_each(|(x, y)| *x -= a * y);
            }
        }
        let rest = norm(&v);
        if rest > rank_tol * original {
            v.iter_mut().for_each(|x| *x /= rest);
            basis.push(v);
        }
    }
    basis
}

/// Singular values in decreasing order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dependent_vectors_are_skipped() {
        let b = orthonormalize(vec![vec![1.0, 1.0, 0.0], vec![2.0, 2.0, 0.0], vec![0.0, 1.0, 0.0]], 1e-12);
        assert_eq!(b.len(), 2);
        assert!(dot(&b[0], &b[1]).abs() < 1e-15);
        assert!((norm(&b[1]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn singular_values_sorted() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -5.0]);
        assert_eq!(singular_values(&m), vec![5.0, 3.0]);
    }
}
