//! Orthogonal projection onto the span of a primal family.

use crate::error::{Error, Result};
use crate::linalg;
use crate::sparse::SparseVec;

/// Smallest accepted ratio of extreme singular values of a primal family.
pub const INDEPENDENCE_RATIO: f64 = 1e-10;

/// Orthogonal projector onto a subspace of the ambient space.
///
/// Holds an orthonormal basis either of the subspace itself or of its
/// orthogonal complement, whichever the caller supplies.
#[derive(Debug, Clone)]
pub enum Projector {
    Span { dim: usize, basis: Vec<Vec<f64>> },
    Complement { dim: usize, basis: Vec<SparseVec> },
}

impl Projector {
    /// Projector onto `span(primal)`, via a thin QR factorization.
    ///
    /// Fails when the family is numerically rank deficient.
    pub fn onto_span(primal: &[SparseVec], dim: usize) -> Result<Self> {
        let a = linalg::columns(primal, dim);
        let s = linalg::singular_values(&a);
        let (largest, smallest) = (s.first().copied().unwrap_or(0.0), s.last().copied().unwrap_or(0.0));
        let ratio = if largest > 0.0 { smallest / largest } else { 0.0 };
        if primal.len() > dim || !(ratio > INDEPENDENCE_RATIO) {
            return Err(Error::Conditioning { ratio });
        }
        let q = a.qr().q();
        let basis = (0..q.ncols()).map(|j| q.column(j).iter().copied().collect()).collect();
        Ok(Projector::Span { dim, basis })
    }

    /// Projector whose kernel is `span(normals)`.
    pub fn from_complement(normals: &[SparseVec], dim: usize) -> Result<Self> {
        let dense = normals.iter().map(|v| v.to_dense(dim));
        let basis: Vec<SparseVec> =
            linalg::orthonormalize(dense, 1e-12).iter().map(|v| SparseVec::from_dense(v)).collect();
        if basis.len() != normals.len() {
            return Err(Error::Conditioning { ratio: 0.0 });
        }
        Ok(Projector::Complement { dim, basis })
    }

    pub fn dim(&self) -> usize {
        match self {
            Projector::Span { dim, .. } | Projector::Complement { dim, .. } => *dim,
        }
    }

    /// Components of `y` along the complement basis. Only for [`Projector::Complement`].
    pub(crate) fn complement_coefficients(&self, y: &SparseVec) -> Vec<(usize, f64)> {
        match self {
            Projector::Complement { basis, .. } => {
                basis.iter().enumerate().map(|(r, u)| (r, u.dot(y))).filter(|&(_, a)| a != 0.0).collect()
            }
            Projector::Span { .. } => Vec::new(),
        }
    }

    pub fn apply(&self, y: &SparseVec) -> SparseVec {
        match self {
            Projector::Span { dim, basis } => {
                let mut out = vec![0.0; *dim];
                for q in basis {
                    let a = y.dot_dense(q);
                    out.iter_mut().zip(q).for_each(|(o, x)| *o += a * x);
                }
                SparseVec::from_dense(&out)
            }
            Projector::Complement { basis, .. } => y.minus_combination(&self.complement_coefficients(y), basis),
        }
    }
}

/// `P y` for each raw dual, with `P` the orthogonal projector onto `span(primal)`.
///
/// Biorthogonality survives because `<x_m, P y_n> = <x_m, y_n>` for every `x_m` in the span.
pub fn dual_via_projection(primal: &[SparseVec], raw_duals: &[SparseVec], dim: usize) -> Result<Vec<SparseVec>> {
    let p = Projector::onto_span(primal, dim)?;
    Ok(raw_duals.iter().map(|y| p.apply(y)).collect())
}
