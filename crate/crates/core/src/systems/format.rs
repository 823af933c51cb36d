//! `mbasis/1` JSON system files.
//!
//! Floats are written in shortest round-trip form, so a saved system loads
//! back bit for bit. Dual vectors are always written materialized.

use serde::{Deserialize, Serialize};

use super::{BiorthogonalSystem, DualFamily, SystemMeta};
use crate::error::{Error, Result};
use crate::sparse::SparseVec;

pub const SCHEMA: &str = "mbasis/1";
pub const COORD_CONVENTION: &str = "frak_e_at_0";

#[derive(Serialize, Deserialize)]
struct SystemFile {
    schema: String,
    ambient_dim: usize,
    n_vectors: usize,
    coord_convention: String,
    primal: Vec<SparseVec>,
    dual: Vec<SparseVec>,
    eps_bounds: Vec<f64>,
    meta: SystemMeta,
}

pub fn to_json(sys: &BiorthogonalSystem) -> String {
    let file = SystemFile {
        schema: SCHEMA.into(),
        ambient_dim: sys.ambient_dim(),
        n_vectors: sys.n_vectors(),
        coord_convention: COORD_CONVENTION.into(),
        primal: sys.primal().to_vec(),
        dual: (0..sys.n_vectors()).map(|j| sys.dual(j)).collect(),
        eps_bounds: sys.eps_bounds().to_vec(),
        meta: sys.meta().clone(),
    };
    serde_json::to_string(&file).expect("system serializes")
}

fn format_err(path: &str, reason: impl ToString) -> Error {
    Error::Format { path: path.into(), reason: reason.to_string() }
}

pub fn from_json(text: &str) -> Result<BiorthogonalSystem> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: SystemFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        format_err(&path, e.into_inner())
    })?;
    if file.schema != SCHEMA {
        return Err(format_err("schema", format!("expected {SCHEMA:?}, found {:?}", file.schema)));
    }
    if file.coord_convention != COORD_CONVENTION {
        return Err(format_err(
            "coord_convention",
            format!("expected {COORD_CONVENTION:?}, found {:?}", file.coord_convention),
        ));
    }
    for (field, len) in
        [("primal", file.primal.len()), ("dual", file.dual.len()), ("eps_bounds", file.eps_bounds.len())]
    {
        if len != file.n_vectors {
            return Err(format_err(field, format!("has {len} entries, n_vectors is {}", file.n_vectors)));
        }
    }
    for (field, vs) in [("primal", &file.primal), ("dual", &file.dual)] {
        for (j, v) in vs.iter().enumerate() {
            if let Some(i) = v.max_index().filter(|&i| i >= file.ambient_dim) {
                return Err(format_err(
                    &format!("{field}[{j}]"),
                    format!("index {i} >= ambient_dim {}", file.ambient_dim),
                ));
            }
        }
    }
    if let Some(t2) = &file.meta.theorem2 {
        let p = &t2.params;
        if p.n != file.n_vectors || p.gamma.len() != p.n || t2.c.len() != p.n {
            return Err(format_err("meta.theorem2", "N, gamma and c must all match n_vectors"));
        }
    }
    BiorthogonalSystem::new(file.ambient_dim, file.primal, DualFamily::explicit(file.dual), file.eps_bounds, file.meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{normalize_eps, NormalizationPolicy};
    use crate::systems::{build_theorem2, build_truncated, Theorem2Options};

    #[test]
    fn round_trip_preserves_every_bit() {
        let eps = normalize_eps(&[1.0; 100], NormalizationPolicy::Strict).unwrap();
        let (sys, _) = build_theorem2(&eps, 0.05, &Theorem2Options::default()).unwrap();
        let text = to_json(&sys);
        let back = from_json(&text).unwrap();
        assert_eq!(back.primal(), sys.primal());
        for j in 0..sys.n_vectors() {
            assert_eq!(back.dual(j), sys.dual(j));
        }
        assert_eq!(back.meta(), sys.meta());
        assert_eq!(to_json(&back), text);
    }

    #[test]
    fn schema_errors_carry_a_path() {
        let eps = normalize_eps(&[1.0; 4], NormalizationPolicy::Strict).unwrap();
        let text = to_json(&build_truncated(&eps, 4).unwrap());
        let bad = text.replace("mbasis/1", "mbasis/9");
        assert!(matches!(from_json(&bad), Err(Error::Format { path, .. }) if path == "schema"));
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["primal"][2] = serde_json::json!("oops");
        match from_json(&v.to_string()) {
            Err(Error::Format { path, .. }) => assert!(path.starts_with("primal"), "{path}"),
            other => panic!("{other:?}"),
        }
        v["primal"][2] = serde_json::json!({"nnz": [[99, 1.0]]});
        assert!(matches!(from_json(&v.to_string()), Err(Error::Format { .. })));
    }
}
