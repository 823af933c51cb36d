//! `mbasis` command-line tool.
//!
//! Exit codes: 0 all checks pass, 1 a check failed, 2 usage or file format
//! error, 3 a resource guard or parameter scan gave up.

mod cli;
mod output;

use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use mbasis::analysis::{analyze, basis_constant_with, profile_csv, AnalysisOptions, SpectralMethod};
use mbasis::coefficients::NormalizationPolicy;
use mbasis::permutations::{
    adversarial_orders, exhaustive_min_basis_constant, run_witness_batch, sample_order, standard_orders, BatchSummary,
    WitnessBatch,
};
use mbasis::systems::{
    build_block_sum, build_theorem2, build_truncated_with, from_json, restore_normalized_order, to_json, DualChoice,
    Theorem2Options,
};
use mbasis::{normalize_eps, BiorthogonalSystem, EpsSpec, EpsilonSequence, Error, Execution, Permutation};
use serde_json::json;

use cli::{Cli, Command, Construct, Format, Global};
use output::{emit, report_json, RunConfig};

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::TooSummable { .. } | Error::DimensionGuard { .. } | Error::SizeGuard { .. } => 3,
            Error::Convergence { .. } => 3,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

type Outcome = Result<bool, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(f) = configure_threads() {
        eprintln!("error: {}", f.message);
        return ExitCode::from(f.code);
    }
    let result = match &cli.command {
        Command::Construct(c) => construct(&cli.global, c),
        Command::Analyze(a) => analyze_cmd(&cli.global, a),
        Command::Witness(w) => witness_cmd(&cli.global, w),
        Command::Search(s) => search_cmd(&cli.global, s),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("MBASIS_THREADS") else { return Ok(()) };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::usage(format!("MBASIS_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::usage(e.to_string()))
}

fn config(g: &Global, command: &str, params: serde_json::Value) -> RunConfig {
    RunConfig {
        command: command.into(),
        eps: g.eps.clone(),
        normalize: g.normalize,
        seed: g.seed,
        max_dim: g.max_dim,
        tol: g.tol,
        params,
    }
}

fn load_eps(g: &Global, len: usize) -> Result<EpsilonSequence, Failure> {
    let spec: EpsSpec = g.eps.parse()?;
    let raw = spec.materialize(len)?;
    let policy = if g.normalize { NormalizationPolicy::DropZerosAndSort } else { NormalizationPolicy::Strict };
    Ok(normalize_eps(&raw, policy)?)
}

fn load_system(path: &Path) -> Result<(BiorthogonalSystem, String), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let sys = from_json(&text)?;
    Ok((sys, output::sha256_hex(text.as_bytes())))
}

fn positive(name: &str, v: f64) -> Result<(), Failure> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Failure::usage(format!("--{name} must be positive, got {v}")))
    }
}

fn construct(g: &Global, c: &Construct) -> Outcome {
    if g.max_dim == 0 {
        return Err(Failure::usage("--max-dim must be positive"));
    }
    let (mut sys, cfg, detail) = match c {
        Construct::T1 { n, raw_duals } => {
            if *n == 0 {
                return Err(Failure::usage("--n must be positive"));
            }
            if *n >= g.max_dim {
                return Err(Error::DimensionGuard { required: n + 1, max_dim: g.max_dim }.into());
            }
            let eps = load_eps(g, *n)?;
            if !g.normalize && eps.len() < *n {
                return Err(Error::Length { requested: *n, available: eps.len() }.into());
            }
            let choice = if *raw_duals { DualChoice::Raw } else { DualChoice::Projected };
            let sys = if g.normalize {
                restore_normalized_order(&build_truncated_with(&eps, eps.len(), choice)?, eps.log())?
            } else {
                build_truncated_with(&eps, *n, choice)?
            };
            let cfg = config(g, "construct t1", json!({ "n": n, "raw_duals": raw_duals }));
            (sys, cfg, String::new())
        }
        Construct::T2 { c, scan_cap } => {
            positive("c", *c)?;
            let eps = load_eps(g, scan_cap.saturating_mul(2))?;
            let opts = Theorem2Options { scan_cap: *scan_cap, max_dim: g.max_dim };
            let (sys, p) = build_theorem2(&eps, *c, &opts)?;
            let cfg = config(g, "construct t2", json!({ "c": c, "scan_cap": scan_cap }));
            (sys, cfg, format!(" (L={}, M={}, B={:.6})", p.l, p.m, p.b))
        }
        Construct::Blocks { c, scan_cap } => {
            for &v in c {
                positive("c", v)?;
            }
            let eps = load_eps(g, scan_cap.saturating_mul(2).saturating_mul(c.len()))?;
            let opts = Theorem2Options { scan_cap: *scan_cap, max_dim: g.max_dim };
            let (mut blocks, mut used, mut dim) = (Vec::new(), 0, 0);
            for &target in c {
                let (b, p) = build_theorem2(&eps.tail(used + 1)?, target, &opts)?;
                used += p.n;
                dim += b.ambient_dim();
                if dim > g.max_dim {
                    return Err(Error::DimensionGuard { required: dim, max_dim: g.max_dim }.into());
                }
                blocks.push(b);
            }
            let sys = build_block_sum(&blocks, &eps.values()[..used])?;
            let cfg = config(g, "construct blocks", json!({ "c": c, "scan_cap": scan_cap }));
            (sys, cfg, format!(" ({} blocks)", blocks.len()))
        }
    };
    sys.meta_mut().params.insert("provenance".into(), cfg.provenance());
    let residual = mbasis::analysis::biorthogonality_residual(&sys);
    let ok = residual <= mbasis::analysis::BIORTHOGONALITY_TOL;
    let summary = format!(
        "construct: builder {}, N={}, ambient_dim={}{detail}, max biorthogonality residual {residual:.3e}",
        sys.meta().builder,
        sys.n_vectors(),
        sys.ambient_dim()
    );
    let mut doc = to_json(&sys);
    doc.push('\n');
    emit(g.output.as_deref(), &doc, &summary)?;
    Ok(ok)
}

fn parse_order(spec: &str, n: usize, seed: u64) -> Result<Permutation, Failure> {
    match spec {
        "natural" => Ok(Permutation::identity(n)),
        "random" => Ok(sample_order(n, seed, 0)),
        name if name.chars().all(|ch| ch.is_ascii_alphabetic() || ch == '_') => adversarial_orders(n)?
            .into_iter()
            .find(|(k, _)| *k == name)
            .map(|(_, p)| p)
            .ok_or_else(|| Failure::usage(format!("unknown ordering {name:?}"))),
        explicit => {
            let p: Permutation = explicit.parse()?;
            if p.len() != n {
                return Err(Failure::usage(format!("ordering has {} entries, system has {n} vectors", p.len())));
            }
            Ok(p)
        }
    }
}

fn analyze_cmd(g: &Global, a: &cli::Analyze) -> Outcome {
    let (sys, input_hash) = load_system(&a.file)?;
    let order = a.basis_constant.as_deref().map(|s| parse_order(s, sys.n_vectors(), g.seed)).transpose()?;
    let mut report = analyze(&sys, &AnalysisOptions { frame_prefix: a.frame_prefix, basis_constant_order: None })?;
    if let Some(o) = &order {
        report.basis_constant = Some(basis_constant_with(&sys, o, SpectralMethod::Auto, g.tol, Execution::default())?);
    }
    let passed = report.passed();
    let csv = profile_csv(&report.boundedness_profile);
    if let Some(p) = &a.profile_csv {
        output::write_atomic(p, &csv)?;
    }
    let cfg = config(
        g,
        "analyze",
        json!({
            "input_sha256": input_hash,
            "basis_constant": a.basis_constant,
            "frame_prefix": a.frame_prefix,
        }),
    );
    let doc = match g.format.unwrap_or(Format::Json) {
        Format::Csv => csv,
        Format::Json => {
            report_json(&cfg, json!({ "passed": passed, "min_margin": report.min_margin(), "report": report }))
        }
    };
    let bc = report
        .basis_constant
        .as_ref()
        .map(|b| format!(", basis constant {:.6} at k={}", b.value, b.k))
        .unwrap_or_default();
    let summary = format!(
        "analyze: residual {:.3e}, min margin {:.3e}{bc} -> {}",
        report.biorthogonality_residual,
        report.min_margin(),
        if passed { "PASS" } else { "FAIL" }
    );
    emit(g.output.as_deref(), &doc, &summary)?;
    Ok(passed)
}

fn witness_cmd(g: &Global, w: &cli::Witness) -> Outcome {
    let (sys, input_hash) = load_system(&w.file)?;
    let mut targets = Vec::new();
    if let Some(t2) = &sys.meta().theorem2 {
        targets.push((String::new(), sys.clone(), t2.clone()));
    } else {
        for (i, b) in sys.meta().blocks.iter().enumerate() {
            if let Some(t2) = &b.theorem2 {
                targets.push((format!("block{}/", i + 1), sys.block(i)?, t2.clone()));
            }
        }
    }
    if targets.is_empty() {
        return Err(Failure::usage(format!("{} has no theorem2 metadata", w.file.display())));
    }
    let mut rows = Vec::new();
    for (prefix, block, t2) in &targets {
        let table = t2.table()?;
        let orders = standard_orders(t2.params.n, w.samples, g.seed)?;
        let batch = run_witness_batch(block, &t2.params, &table, &orders, Execution::default())?;
        for mut r in batch.rows {
            r.order_id = rows.len();
            r.seed_or_name = format!("{prefix}{}", r.seed_or_name);
            rows.push(r);
        }
    }
    let summary = BatchSummary {
        orders_tested: rows.len(),
        min_lower_bound: rows.iter().map(|r| r.lower_bound).fold(f64::INFINITY, f64::min),
        all_passed: rows.iter().all(|r| r.passed),
    };
    let batch = WitnessBatch { rows, summary };
    let cfg = config(g, "witness", json!({ "input_sha256": input_hash, "samples": w.samples }));
    if g.format == Some(Format::Csv) {
        return Err(Failure::usage("witness reports are JSON only"));
    }
    let doc = report_json(&cfg, &batch);
    let line = format!(
        "witness: {} orders, min lower bound {:.6} -> {}",
        batch.summary.orders_tested,
        batch.summary.min_lower_bound,
        if batch.summary.all_passed { "PASS" } else { "FAIL" }
    );
    emit(g.output.as_deref(), &doc, &line)?;
    Ok(batch.summary.all_passed)
}

fn search_cmd(g: &Global, s: &cli::Search) -> Outcome {
    let (sys, input_hash) = load_system(&s.file)?;
    if sys.n_vectors() > s.limit {
        return Err(Failure::usage(
            Error::TooManyOrders {
                n: sys.n_vectors(),
                count: mbasis::permutations::factorial(sys.n_vectors()),
                limit: s.limit,
            }
            .to_string(),
        ));
    }
    let found = exhaustive_min_basis_constant(&sys, s.limit)?;
    let passed = found.min_value >= 1.0 - 1e-9;
    let doc = match g.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut out = String::from("order_id,order,basis_constant,k\n");
            for (i, b) in found.per_order.iter().enumerate() {
                let images: Vec<String> = b.order.images().iter().map(usize::to_string).collect();
                out.push_str(&format!("{i},{},{},{}\n", images.join(" "), b.value, b.k));
            }
            out
        }
        Format::Json => {
            let cfg = config(g, "search", json!({ "input_sha256": input_hash, "limit": s.limit }));
            report_json(
                &cfg,
                json!({ "best_order": found.best_order, "min_value": found.min_value, "per_order": found.per_order }),
            )
        }
    };
    let summary = format!(
        "search: {} orders, min basis constant {:.6} at {}",
        found.per_order.len(),
        found.min_value,
        found.best_order
    );
    emit(g.output.as_deref(), &doc, &summary)?;
    Ok(passed)
}
