//! Sparse coordinate vectors.
//!
//! Entries are kept sorted by coordinate with no duplicates. Zero values that
//! arise from arithmetic are kept as stored entries; only constructors that
//! explicitly say so drop them.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVec {
    idx: Vec<usize>,
    val: Vec<f64>,
}

impl SparseVec {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds from arbitrary `(index, value)` pairs, summing duplicates.
    pub fn from_pairs(mut pairs: Vec<(usize, f64)>) -> Self {
        pairs.sort_by_key(|&(i, _)| i);
        let mut out = SparseVec::new();
        for (i, v) in pairs {
            match out.idx.last() {
                Some(&last) if last == i => *out.val.last_mut().unwrap() += v,
                _ => {
                    out.idx.push(i);
                    out.val.push(v);
                }
            }
        }
        out
    }

    pub fn unit(i: usize) -> Self {
        SparseVec { idx: vec![i], val: vec![1.0] }
    }

    /// Keeps the nonzero entries of a dense vector.
    pub fn from_dense(dense: &[f64]) -> Self {
        let (idx, val) = dense.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, v)| (i, *v)).unzip();
        SparseVec { idx, val }
    }

    pub fn nnz(&self) -> usize {
        self.idx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idx.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.idx
    }

    pub fn values(&self) -> &[f64] {
        &self.val
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.idx.iter().copied().zip(self.val.iter().copied())
    }

    /// Largest stored coordinate, if any.
    pub fn max_index(&self) -> Option<usize> {
        self.idx.last().copied()
    }

    pub fn get(&self, i: usize) -> f64 {
        match self.idx.binary_search(&i) {
            Ok(p) => self.val[p],
            Err(_) => 0.0,
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.val.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dot(&self, other: &SparseVec) -> f64 {
        let (mut a, mut b) = (0, 0);
        let mut acc = 0.0;
        while a < self.idx.len() && b < other.idx.len() {
            match self.idx[a].cmp(&other.idx[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.val[a] * other.val[b];
                    a += 1;
                    b += 1;
                }
            }
        }
        acc
    }

    /// Inner product with a dense vector. Coordinates past the end of `dense` count as zero.
    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.iter().filter(|&(i, _)| i < dense.len()).map(|(i, v)| v * dense[i]).sum()
    }

    /// `dense += a * self`
    pub fn axpy_into(&self, a: f64, dense: &mut [f64]) {
        for (i, v) in self.iter() {
            dense[i] += a * v;
        }
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }

    pub fn scaled(&self, a: f64) -> SparseVec {
        SparseVec { idx: self.idx.clone(), val: self.val.iter().map(|v| a * v).collect() }
    }

    /// Same values with every coordinate moved by `offset`.
    pub fn shifted(&self, offset: usize) -> SparseVec {
        SparseVec { idx: self.idx.iter().map(|i| i + offset).collect(), val: self.val.clone() }
    }

    /// `self - sum_r coeffs[r].1 * basis[coeffs[r].0]`, merging supports.
    pub(crate) fn minus_combination(&self, coeffs: &[(usize, f64)], basis: &[SparseVec]) -> SparseVec {
        if coeffs.is_empty() {
            return self.clone();
        }
        let mut pairs: Vec<(usize, f64)> = self.iter().collect();
        for &(r, a) in coeffs {
            pairs.extend(basis[r].iter().map(|(i, v)| (i, -a * v)));
        }
        SparseVec::from_pairs(pairs)
    }
}

/// On-disk form: `{"nnz": [[index, value], ...]}`.
#[derive(Serialize, Deserialize)]
struct SparseRepr {
    nnz: Vec<(usize, f64)>,
}

impl Serialize for SparseVec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        SparseRepr { nnz: self.iter().collect() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SparseVec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Sparse(SparseRepr),
            Dense(Vec<f64>),
        }
        match Repr::deserialize(d)? {
            Repr::Sparse(r) => {
                if r.nnz.windows(2).any(|w| w[0].0 >= w[1].0) {
                    return Err(serde::de::Error::custom("nnz indices must be strictly increasing"));
                }
                let (idx, val) = r.nnz.into_iter().unzip();
                Ok(SparseVec { idx, val })
            }
            Repr::Dense(v) => Ok(SparseVec::from_dense(&v)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pairs_are_merged_and_sorted() {
        let v = SparseVec::from_pairs(vec![(3, 1.0), (1, 2.0), (3, 0.5)]);
        assert_eq!(v.indices(), &[1, 3]);
        assert_eq!(v.values(), &[2.0, 1.5]);
        assert_eq!(v.get(2), 0.0);
        assert_eq!(v.get(3), 1.5);
    }

    #[test]
    fn dense_input_is_accepted_on_load() {
        let v: SparseVec = serde_json::from_str("[0.0, 2.0, 0.0, -1.0]").unwrap();
        assert_eq!(v.indices(), &[1, 3]);
        let s: SparseVec = serde_json::from_str(r#"{"nnz": [[0, 1.5], [4, 2.0]]}"#).unwrap();
        assert_eq!(s.get(4), 2.0);
        assert!(serde_json::from_str::<SparseVec>(r#"{"nnz": [[4, 1.5], [0, 2.0]]}"#).is_err());
    }

    fn arb_dense() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(prop_oneof![Just(0.0), -10.0..10.0f64], 1..24)
    }

    proptest! {
        #[test]
        fn sparse_ops_agree_with_dense(a in arb_dense(), b in arb_dense()) {
            let n = a.len().max(b.len());
            let (mut da, mut db) = (a.clone(), b.clone());
            da.resize(n, 0.0);
            db.resize(n, 0.0);
            let (sa, sb) = (SparseVec::from_dense(&da), SparseVec::from_dense(&db));
            let dense_dot: f64 = da.iter().zip(&db).map(|(x, y)| x * y).sum();
            prop_assert!((sa.dot(&sb) - dense_dot).abs() <= 1e-9 * (1.0 + dense_dot.abs()));
            prop_assert!((sa.dot_dense(&db) - dense_dot).abs() <= 1e-9 * (1.0 + dense_dot.abs()));
            prop_assert_eq!(sa.to_dense(n), da);
        }

        #[test]
        fn json_round_trip_is_exact(a in arb_dense()) {
            let s = SparseVec::from_dense(&a);
            let back: SparseVec = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
            prop_assert_eq!(back, s);
        }
    }
}
