//! Report envelopes and atomic file output.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::Failure;

pub const TOOL: &str = "mbasis";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Resolved configuration of one run. Output locations are left out so that
/// the same run writes the same bytes wherever it is sent.
#[derive(Serialize, Debug, Clone)]
pub struct RunConfig {
    pub command: String,
    pub eps: String,
    pub normalize: bool,
    pub seed: u64,
    pub max_dim: usize,
    pub tol: f64,
    pub params: Value,
}

impl RunConfig {
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }

    pub fn provenance(&self) -> Value {
        serde_json::json!({ "tool": TOOL, "version": VERSION, "config": self, "config_hash": self.hash() })
    }
}

#[derive(Serialize)]
pub struct Report<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: &'a RunConfig,
    pub config_hash: String,
    pub result: T,
}

pub fn report_json<T: Serialize>(config: &RunConfig, result: T) -> String {
    let r = Report { tool: TOOL, version: VERSION, config, config_hash: config.hash(), result };
    let mut s = serde_json::to_string_pretty(&r).expect("report serializes");
    s.push('\n');
    s
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Failure::from(e.error))?;
    Ok(())
}

/// Sends the document to `path`, or to stdout when none is given.
///
/// The one-line summary goes to stdout next to a file, and to stderr when the
/// document itself occupies stdout.
pub fn emit(path: Option<&Path>, document: &str, summary: &str) -> Result<(), Failure> {
    match path {
        Some(p) => {
            write_atomic(p, document)?;
            println!("{summary} -> {}", p.display());
        }
        None => {
            print!("{document}");
            eprintln!("{summary}");
        }
    }
    Ok(())
}
