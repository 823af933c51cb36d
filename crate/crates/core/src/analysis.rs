//! Numerical checks on a built system: biorthogonality, boundedness,
//! partial-sum operator norms, basis constants, frame bounds and strongness.
//!
//! The finite basis constant of an ordering is `max_{1<=k<=n} ||S_k||`, where
//! `S_k v = sum_{m<=k} <v, dual_{pi(m)}> x_{pi(m)}`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg;
use crate::permutations::Permutation;
use crate::sparse::SparseVec;
use crate::systems::BiorthogonalSystem;

/// Operators up to this size go through a full SVD.
pub const DENSE_CUTOFF: usize = 512;
pub const POWER_ITERATION_CAP: usize = 10_000;
pub const DEFAULT_TOL: f64 = 1e-10;
/// Threshold below which `<v, dual_n>` counts as zero in the strongness diagnostic.
pub const ACTIVE_THRESHOLD: f64 = 1e-12;
/// Rank-decision tolerance for distances to a span.
pub const RANK_TOL: f64 = 1e-12;

pub trait LinearOperator: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply(&self, v: &[f64]) -> Vec<f64>;
    fn apply_transpose(&self, v: &[f64]) -> Vec<f64>;
    fn to_dense(&self) -> DMatrix<f64>;
}

impl LinearOperator for DMatrix<f64> {
    fn nrows(&self) -> usize {
        self.nrows()
    }

    fn ncols(&self) -> usize {
        self.ncols()
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        (self * nalgebra::DVector::from_column_slice(v)).as_slice().to_vec()
    }

    fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        (self.transpose() * nalgebra::DVector::from_column_slice(v)).as_slice().to_vec()
    }

    fn to_dense(&self) -> DMatrix<f64> {
        self.clone()
    }
}

/// `S_k` for a given ordering, kept in factored form.
pub struct PartialSumOperator<'a> {
    sys: &'a BiorthogonalSystem,
    terms: Vec<(&'a SparseVec, SparseVec)>,
}

impl<'a> PartialSumOperator<'a> {
    pub fn new(sys: &'a BiorthogonalSystem, order: &Permutation, k: usize) -> Result<Self> {
        check_order(sys, order)?;
        if k > order.len() {
            return Err(Error::IndexOutOfRange { index: k, len: order.len() });
        }
        let terms = order.images()[..k].iter().map(|&i| (&sys.primal()[i - 1], sys.dual(i - 1))).collect();
        Ok(PartialSumOperator { sys, terms })
    }

    pub fn rank(&self) -> usize {
        self.terms.len()
    }
}

impl LinearOperator for PartialSumOperator<'_> {
    fn nrows(&self) -> usize {
        self.sys.ambient_dim()
    }

    fn ncols(&self) -> usize {
        self.sys.ambient_dim()
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows()];
        for (x, d) in &self.terms {
            x.axpy_into(d.dot_dense(v), &mut out);
        }
        out
    }

    fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols()];
        for (x, d) in &self.terms {
            d.axpy_into(x.dot_dense(v), &mut out);
        }
        out
    }

    fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows(), self.ncols());
        for (x, d) in &self.terms {
            for (i, xv) in x.iter() {
                for (j, dv) in d.iter() {
                    m[(i, j)] += xv * dv;
                }
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpectralMethod {
    /// Full SVD up to [`DENSE_CUTOFF`], power iteration above.
    #[default]
    Auto,
    Dense,
    Power,
}

pub fn spectral_norm(op: &dyn LinearOperator, tol: f64) -> Result<f64> {
    spectral_norm_with(op, SpectralMethod::Auto, tol)
}

pub fn spectral_norm_with(op: &dyn LinearOperator, method: SpectralMethod, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let dense = match method {
        SpectralMethod::Auto => op.nrows().max(op.ncols()) <= DENSE_CUTOFF,
        SpectralMethod::Dense => true,
        SpectralMethod::Power => false,
    };
    if dense {
        Ok(linalg::singular_values(&op.to_dense()).first().copied().unwrap_or(0.0))
    } else {
        power_iteration(op, tol)
    }
}

fn power_iteration(op: &dyn LinearOperator, tol: f64) -> Result<f64> {
    let n = op.ncols();
    if n == 0 {
        return Ok(0.0);
    }
    let ones = vec![1.0 / (n as f64).sqrt(); n];
    // fallback start for operators that annihilate the all-ones vector
    let spread: Vec<f64> = (0..n).map(|i| 1.0 + ((i as u64 * 2_654_435_761) % 1013) as f64 / 1013.0).collect();
    let mut last = 0.0;
    for start in [ones, spread] {
        let mut x = start;
        let scale = linalg::norm(&x);
        x.iter_mut().for_each(|v| *v /= scale);
        let mut prev: Option<f64> = None;
        for _ in 0..POWER_ITERATION_CAP {
            let y = op.apply(&x);
            let sigma = linalg::norm(&y);
            last = sigma;
            let w = op.apply_transpose(&y);
            let wn = linalg::norm(&w);
            if wn == 0.0 {
                break;
            }
            x = w.into_iter().map(|v| v / wn).collect();
            if let Some(p) = prev {
                if (sigma - p).abs() <= tol * sigma {
                    return Ok(sigma);
                }
            }
            prev = Some(sigma);
        }
        if prev.is_some() {
            return Err(Error::Convergence { iterations: POWER_ITERATION_CAP, last_estimate: last });
        }
    }
    Ok(0.0)
}

fn check_order(sys: &BiorthogonalSystem, order: &Permutation) -> Result<()> {
    if order.len() != sys.n_vectors() {
        return Err(Error::DimensionMismatch { what: "order length", expected: sys.n_vectors(), found: order.len() });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisConstant {
    pub value: f64,
    /// Prefix length attaining the maximum.
    pub k: usize,
    pub order: Permutation,
}

pub fn basis_constant(sys: &BiorthogonalSystem, order: &Permutation) -> Result<BasisConstant> {
    basis_constant_with(sys, order, SpectralMethod::Auto, DEFAULT_TOL, Execution::default())
}

pub fn basis_constant_with(
    sys: &BiorthogonalSystem,
    order: &Permutation,
    method: SpectralMethod,
    tol: f64,
    exec: Execution,
) -> Result<BasisConstant> {
    check_order(sys, order)?;
    let n = sys.n_vectors();
    if n > DENSE_CUTOFF && method != SpectralMethod::Power {
        return Err(Error::SizeGuard {
            what: "vector count for the dense basis constant",
            size: n,
            limit: DENSE_CUTOFF,
        });
    }
    let norms = exec.map_range(n, |k| {
        let op = PartialSumOperator::new(sys, order, k + 1)?;
        spectral_norm_with(&op, method, tol)
    });
    let mut best = BasisConstant { value: f64::NEG_INFINITY, k: 0, order: order.clone() };
    for (k, v) in norms.into_iter().enumerate() {
        let v = v?;
        if v > best.value {
            best.value = v;
            best.k = k + 1;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorBound {
    /// `max_k ||S_k v|| / ||v||`
    pub ratio: f64,
    pub k: usize,
}

/// Lower bound on the basis constant of `order` from a single test vector.
pub fn lower_bound_via_vector(sys: &BiorthogonalSystem, order: &Permutation, v: &[f64]) -> Result<VectorBound> {
    check_order(sys, order)?;
    if v.len() != sys.ambient_dim() {
        return Err(Error::DimensionMismatch { what: "test vector", expected: sys.ambient_dim(), found: v.len() });
    }
    let vnorm = linalg::norm(v);
    if vnorm == 0.0 {
        return Err(Error::ZeroVector);
    }
    let mut acc = vec![0.0; sys.ambient_dim()];
    let mut norm_sq = 0.0;
    let mut best = VectorBound { ratio: 0.0, k: 0 };
    for (m, &i) in order.images().iter().enumerate() {
        let a = sys.dual(i - 1).dot_dense(v);
        for (c, x) in sys.primal()[i - 1].iter() {
            let old = acc[c];
            acc[c] += a * x;
            norm_sq += acc[c] * acc[c] - old * old;
        }
        let ratio = norm_sq.max(0.0).sqrt() / vnorm;
        if ratio > best.ratio {
            best = VectorBound { ratio, k: m + 1 };
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameBounds {
    pub prefix: usize,
    pub sigma_min_sq: f64,
    pub sigma_max_sq: f64,
    pub condition_number: f64,
}

/// Extreme squared singular values of `x_1..x_prefix` and their ratio.
pub fn frame_bounds(sys: &BiorthogonalSystem, prefix: usize) -> Result<FrameBounds> {
    if prefix == 0 || prefix > sys.n_vectors() {
        return Err(Error::IndexOutOfRange { index: prefix, len: sys.n_vectors() });
    }
    let s = linalg::singular_values(&linalg::columns(&sys.primal()[..prefix], sys.ambient_dim()));
    let (hi, lo) = (s[0] * s[0], s[prefix - 1] * s[prefix - 1]);
    Ok(FrameBounds { prefix, sigma_min_sq: lo, sigma_max_sq: hi, condition_number: hi / lo })
}

/// Euclidean distance from `v` to `span(vectors)`.
pub fn distance_to_span(v: &[f64], vectors: &[SparseVec]) -> f64 {
    let dim = v.len().max(vectors.iter().filter_map(SparseVec::max_index).map(|i| i + 1).max().unwrap_or(0));
    let basis = linalg::orthonormalize(vectors.iter().map(|x| x.to_dense(dim)), RANK_TOL);
    let mut r = v.to_vec();
    r.resize(dim, 0.0);
    for _ in 0..2 {
        for q in &basis {
            let a = linalg::dot(q, &r);
            r.iter_mut().zip(q).for_each(|(x, y)| *x -= a * y);
        }
    }
    linalg::norm(&r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongnessDiagnostic {
    /// 1-based indices `n` with `|<v, dual_n>| > 1e-12`.
    pub active: Vec<usize>,
    /// Distance from `v` to the span of the active primal vectors.
    pub distance: f64,
}

/// A positive distance shows that `v` is not recovered by its own expansion terms.
pub fn strongness_diagnostic(sys: &BiorthogonalSystem, v: &[f64]) -> StrongnessDiagnostic {
    let coeffs = sys.dual_coefficients(v);
    let active: Vec<usize> =
        coeffs.iter().enumerate().filter(|(_, a)| a.abs() > ACTIVE_THRESHOLD).map(|(j, _)| j + 1).collect();
    let spanning: Vec<SparseVec> = active.iter().map(|&n| sys.primal()[n - 1].clone()).collect();
    StrongnessDiagnostic { distance: distance_to_span(v, &spanning), active }
}

/// `max_{i,j} |<x_i, dual_j> - delta_ij|`.
pub fn biorthogonality_residual(sys: &BiorthogonalSystem) -> f64 {
    biorthogonality_residual_with(sys, Execution::default())
}

pub fn biorthogonality_residual_with(sys: &BiorthogonalSystem, exec: Execution) -> f64 {
    // coordinate -> primal vectors touching it
    let mut by_coord: Vec<Vec<(usize, f64)>> = vec![Vec::new(); sys.ambient_dim()];
    for (i, x) in sys.primal().iter().enumerate() {
        for (c, v) in x.iter() {
            by_coord[c].push((i, v));
        }
    }
    let n = sys.n_vectors();
    let per_dual = exec.map_range(n, |j| {
        let mut col = vec![0.0; n];
        for (c, dv) in sys.dual(j).iter() {
            for &(i, xv) in &by_coord[c] {
                col[i] += xv * dv;
            }
        }
        col[j] -= 1.0;
        col.iter().fold(0.0f64, |m, g| m.max(g.abs()))
    });
    per_dual.into_iter().fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub n: usize,
    pub norm_x: f64,
    pub norm_dual: f64,
    pub product: f64,
    pub bound: f64,
    pub margin: f64,
}

pub fn boundedness_profile(sys: &BiorthogonalSystem) -> Vec<ProfileRow> {
    Execution::default().map_range(sys.n_vectors(), |j| {
        let norm_x = sys.primal()[j].norm();
        let norm_dual = sys.dual(j).norm();
        let product = norm_x * norm_dual;
        let bound = sys.eps_bounds()[j];
        ProfileRow { n: j + 1, norm_x, norm_dual, product, bound, margin: bound - product }
    })
}

pub const PROFILE_CSV_HEADER: &str = "n,norm_x,norm_dual,product,bound,margin";

pub fn profile_csv(rows: &[ProfileRow]) -> String {
    let mut out = String::from(PROFILE_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{},{},{},{},{}\n", r.n, r.norm_x, r.norm_dual, r.product, r.bound, r.margin));
    }
    out
}

/// Residual allowed before a system counts as not biorthogonal.
pub const BIORTHOGONALITY_TOL: f64 = 1e-8;
/// Allowed overshoot of `||x_n|| ||dual_n||` over its bound.
pub const MARGIN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub biorthogonality_residual: f64,
    pub boundedness_profile: Vec<ProfileRow>,
    pub frame_bounds: Option<FrameBounds>,
    pub basis_constant: Option<BasisConstant>,
}

#[derive(Debug, Clone, Default)]
pub struct AnalysisOptions {
    pub frame_prefix: Option<usize>,
    pub basis_constant_order: Option<Permutation>,
}

impl AnalysisReport {
    pub fn passed(&self) -> bool {
        self.biorthogonality_residual <= BIORTHOGONALITY_TOL
            && self.boundedness_profile.iter().all(|r| r.margin >= -MARGIN_TOL)
    }

    pub fn min_margin(&self) -> f64 {
        self.boundedness_profile.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min)
    }
}

pub fn analyze(sys: &BiorthogonalSystem, opts: &AnalysisOptions) -> Result<AnalysisReport> {
    Ok(AnalysisReport {
        biorthogonality_residual: biorthogonality_residual(sys),
        boundedness_profile: boundedness_profile(sys),
        frame_bounds: opts.frame_prefix.map(|p| frame_bounds(sys, p)).transpose()?,
        basis_constant: opts.basis_constant_order.as_ref().map(|o| basis_constant(sys, o)).transpose()?,
    })
}
