//! Biorthogonal systems in explicit coordinates.
//!
//! Coordinates follow one convention everywhere: index 0 is the distinguished
//! direction `e0` (the vector the systems are built around) and index `n >= 1`
//! is `e_n`. Vector labels are 1-based in builders and reports; the storage
//! below is 0-based (`primal(0)` is `x_1`).

mod build;
mod format;
mod projection;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use build::{
    build_block_sum, build_theorem2, build_truncated, build_truncated_with, pad_orthonormal, restore_normalized_order,
    theorem1_vectors, DualChoice, Theorem2Options, DEFAULT_MAX_DIM, DEFAULT_SCAN_CAP,
};
pub use format::{from_json, to_json, COORD_CONVENTION, SCHEMA};
pub use projection::{dual_via_projection, Projector};

use crate::coefficients::{CoefficientTable, Theorem2Params};
use crate::error::{Error, Result};
use crate::sparse::SparseVec;

/// Dual vector stored as `raw - sum_r a_r u_r` over a shared orthonormal set `u`.
///
/// Explicit duals have no correction terms. Projection duals keep the raw
/// vector plus its components along an orthonormal basis of the orthogonal
/// complement of the primal span, so nothing of size `n^2` is held.
#[derive(Debug, Clone, PartialEq)]
pub struct DualEntry {
    pub raw: SparseVec,
    pub correction: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DualFamily {
    complement: Vec<SparseVec>,
    entries: Vec<DualEntry>,
}

impl DualFamily {
    pub fn explicit(vectors: Vec<SparseVec>) -> Self {
        DualFamily {
            complement: Vec::new(),
            entries: vectors.into_iter().map(|raw| DualEntry { raw, correction: Vec::new() }).collect(),
        }
    }

    pub(crate) fn factored(complement: Vec<SparseVec>, entries: Vec<DualEntry>) -> Self {
        DualFamily { complement, entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn complement(&self) -> &[SparseVec] {
        &self.complement
    }

    pub fn entries(&self) -> &[DualEntry] {
        &self.entries
    }

    /// Materialized dual vector, 0-based.
    pub fn get(&self, j: usize) -> SparseVec {
        let e = &self.entries[j];
        e.raw.minus_combination(&e.correction, &self.complement)
    }
}

/// Builder provenance stored alongside the vectors.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SystemMeta {
    pub builder: String,
    #[serde(default)]
    pub params: BTreeMap<String, serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theorem2: Option<Theorem2Meta>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub blocks: Vec<BlockMeta>,
}

/// Selection parameters plus the `c_1..c_{2M}` they were computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Meta {
    #[serde(flatten)]
    pub params: Theorem2Params,
    pub c: Vec<f64>,
}

impl Theorem2Meta {
    pub fn table(&self) -> Result<CoefficientTable> {
        CoefficientTable::from_c(self.c.clone())
    }
}

/// Placement of one summand inside a block direct sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMeta {
    pub vector_offset: usize,
    pub coord_offset: usize,
    pub n_vectors: usize,
    pub ambient_dim: usize,
    pub builder: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theorem2: Option<Theorem2Meta>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiorthogonalSystem {
    ambient_dim: usize,
    primal: Vec<SparseVec>,
    duals: DualFamily,
    eps_bounds: Vec<f64>,
    meta: SystemMeta,
}

impl BiorthogonalSystem {
    /// Assembles a system, checking only shapes and coordinate ranges.
    pub fn new(
        ambient_dim: usize,
        primal: Vec<SparseVec>,
        duals: DualFamily,
        eps_bounds: Vec<f64>,
        meta: SystemMeta,
    ) -> Result<Self> {
        let n = primal.len();
        if n == 0 {
            return Err(Error::InvalidParameter("a system needs at least one vector".into()));
        }
        if n > ambient_dim {
            return Err(Error::DimensionMismatch {
                what: "vector count vs ambient dimension",
                expected: ambient_dim,
                found: n,
            });
        }
        if duals.len() != n {
            return Err(Error::DimensionMismatch { what: "dual count", expected: n, found: duals.len() });
        }
        if eps_bounds.len() != n {
            return Err(Error::DimensionMismatch { what: "eps_bounds length", expected: n, found: eps_bounds.len() });
        }
        let out_of_range = primal
            .iter()
            .chain(duals.entries.iter().map(|e| &e.raw))
            .chain(duals.complement.iter())
            .filter_map(SparseVec::max_index)
            .find(|&i| i >= ambient_dim);
        if let Some(i) = out_of_range {
            return Err(Error::DimensionMismatch { what: "coordinate index", expected: ambient_dim, found: i });
        }
        let bad_corr = duals.entries.iter().flat_map(|e| &e.correction).any(|&(r, _)| r >= duals.complement.len());
        if bad_corr {
            return Err(Error::InvalidParameter("dual correction refers to a missing complement vector".into()));
        }
        Ok(BiorthogonalSystem { ambient_dim, primal, duals, eps_bounds, meta })
    }

    /// Convenience constructor for explicit primal/dual lists.
    pub fn from_explicit(
        ambient_dim: usize,
        primal: Vec<SparseVec>,
        dual: Vec<SparseVec>,
        eps_bounds: Vec<f64>,
        builder: &str,
    ) -> Result<Self> {
        let meta = SystemMeta { builder: builder.to_string(), ..Default::default() };
        Self::new(ambient_dim, primal, DualFamily::explicit(dual), eps_bounds, meta)
    }

    /// Orthonormal self-dual system `e_0, ..., e_{n-1}` with bounds `1 + eps`.
    pub fn orthonormal(n: usize, eps: f64) -> Self {
        let vs: Vec<SparseVec> = (0..n).map(SparseVec::unit).collect();
        Self::from_explicit(n, vs.clone(), vs, vec![1.0 + eps; n], "orthonormal").expect("valid shape")
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn n_vectors(&self) -> usize {
        self.primal.len()
    }

    pub fn primal(&self) -> &[SparseVec] {
        &self.primal
    }

    pub fn duals(&self) -> &DualFamily {
        &self.duals
    }

    /// Materialized dual of vector `j` (0-based).
    pub fn dual(&self, j: usize) -> SparseVec {
        self.duals.get(j)
    }

    pub fn eps_bounds(&self) -> &[f64] {
        &self.eps_bounds
    }

    pub fn meta(&self) -> &SystemMeta {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut SystemMeta {
        &mut self.meta
    }

    /// `<v, dual_j>` for every `j`, with `v` dense in ambient coordinates.
    pub fn dual_coefficients(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n_vectors()).map(|j| self.dual(j).dot_dense(v)).collect()
    }

    /// Summand `i` (0-based) of a block direct sum, in its own coordinates.
    pub fn block(&self, i: usize) -> Result<Self> {
        let info =
            self.meta.blocks.get(i).ok_or(Error::IndexOutOfRange { index: i + 1, len: self.meta.blocks.len() })?;
        let (v0, c0) = (info.vector_offset, info.coord_offset);
        if v0 + info.n_vectors > self.n_vectors() || c0 + info.ambient_dim > self.ambient_dim {
            return Err(Error::ParamsMismatch(format!("block {} lies outside the system", i + 1)));
        }
        let local = |v: &SparseVec| -> Result<SparseVec> {
            let mut pairs = Vec::with_capacity(v.nnz());
            for (c, x) in v.iter() {
                if c < c0 || c >= c0 + info.ambient_dim {
                    return Err(Error::ParamsMismatch(format!("block {} has support outside its coordinates", i + 1)));
                }
                pairs.push((c - c0, x));
            }
            Ok(SparseVec::from_pairs(pairs))
        };
        let range = v0..v0 + info.n_vectors;
        let primal = self.primal[range.clone()].iter().map(local).collect::<Result<Vec<_>>>()?;
        let duals = range.clone().map(|j| local(&self.dual(j))).collect::<Result<Vec<_>>>()?;
        let meta = SystemMeta { builder: info.builder.clone(), theorem2: info.theorem2.clone(), ..Default::default() };
        Self::new(info.ambient_dim, primal, DualFamily::explicit(duals), self.eps_bounds[range].to_vec(), meta)
    }

    /// Re-indexes vectors: position `m` of the result holds old vector `images[m]` (1-based).
    pub fn permuted(&self, images: &[usize]) -> Result<Self> {
        let n = self.n_vectors();
        let mut seen = vec![false; n];
        for &i in images {
            if i == 0 || i > n || std::mem::replace(&mut seen[i - 1], true) {
                return Err(Error::MalformedPermutation(format!("{images:?} is not a bijection on 1..={n}")));
            }
        }
        if images.len() != n {
            return Err(Error::MalformedPermutation(format!("length {} for {n} vectors", images.len())));
        }
        let pick = |i: &usize| i - 1;
        let duals = DualFamily {
            complement: self.duals.complement.clone(),
            entries: images.iter().map(|i| self.duals.entries[pick(i)].clone()).collect(),
        };
        Self::new(
            self.ambient_dim,
            images.iter().map(|i| self.primal[pick(i)].clone()).collect(),
            duals,
            images.iter().map(|i| self.eps_bounds[pick(i)]).collect(),
            self.meta.clone(),
        )
    }

    pub(crate) fn into_parts(self) -> (usize, Vec<SparseVec>, DualFamily, Vec<f64>, SystemMeta) {
        (self.ambient_dim, self.primal, self.duals, self.eps_bounds, self.meta)
    }
}
