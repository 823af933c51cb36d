//! Scalar machinery of the construction: epsilon sequences, the `c_n`
//! recursion, `beta`/`alpha` values and the parameter selection used by the
//! permutation-resistant system.
//!
//! Indices in this module's public API are 1-based, matching the vector
//! labels `x_1, x_2, ...`. Throughout, `beta_n^2` is read as `c_n` itself so
//! that every threshold comparison sees the same bits.

use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Inequality, Result};
use crate::sparse::SparseVec;

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new(start: f64) -> Self {
        CompensatedSum { sum: start, comp: 0.0 }
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Source of epsilon values: `const:<v>`, `power:<p>`, `geometric:<r>` or `file:<path>`.
#[derive(Debug, Clone, PartialEq)]
pub enum EpsSpec {
    /// `eps_n = v`
    Const(f64),
    /// `eps_n = n^{-p}`
    Power(f64),
    /// `eps_n = r^n`
    Geometric(f64),
    /// One decimal value per line; blank lines and `#` comments are skipped.
    File(PathBuf),
}

impl FromStr for EpsSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |reason: &str| Error::EpsSpec { spec: s.to_string(), reason: reason.to_string() };
        let (kind, arg) = s.split_once(':').ok_or_else(|| bad("expected <kind>:<value>"))?;
        let number = || -> Result<f64> {
            let v: f64 = arg.trim().parse().map_err(|_| bad("value is not a decimal number"))?;
            if !v.is_finite() {
                return Err(bad("value is not finite"));
            }
            Ok(v)
        };
        match kind {
            "const" => {
                let v = number()?;
                if v < 0.0 {
                    return Err(bad("constant must be non-negative"));
                }
                Ok(EpsSpec::Const(v))
            }
            "power" => Ok(EpsSpec::Power(number()?)),
            "geometric" => {
                let r = number()?;
                if r <= 0.0 {
                    return Err(bad("ratio must be positive"));
                }
                Ok(EpsSpec::Geometric(r))
            }
            "file" if !arg.is_empty() => Ok(EpsSpec::File(PathBuf::from(arg))),
            "file" => Err(bad("missing path")),
            _ => Err(bad("unknown kind; expected const, power, geometric or file")),
        }
    }
}

impl EpsSpec {
    /// Materializes up to `len` terms.
    ///
    /// Geometric sequences stop before the first term that underflows to zero,
    /// and files stop at their last line, so the result may be shorter.
    pub fn materialize(&self, len: usize) -> Result<Vec<f64>> {
        Ok(match self {
            EpsSpec::Const(v) => vec![*v; len],
            EpsSpec::Power(p) => (1..=len).map(|n| (n as f64).powf(-p)).collect(),
            EpsSpec::Geometric(r) => {
                (1..=len).map(|n| r.powf(n as f64)).take_while(|v| *v > 0.0 && v.is_finite()).collect()
            }
            EpsSpec::File(path) => {
                let text = std::fs::read_to_string(path)?;
                let mut out = Vec::new();
                for (lineno, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    if out.len() == len {
                        break;
                    }
                    let v: f64 = line.parse().map_err(|_| Error::EpsSpec {
                        spec: format!("file:{}", path.display()),
                        reason: format!("line {} is not a decimal number", lineno + 1),
                    })?;
                    out.push(v);
                }
                out
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationPolicy {
    /// Reject anything that is not already positive and non-increasing.
    Strict,
    /// Remove zero entries, then stable-sort into non-increasing order.
    DropZerosAndSort,
}

/// Record of what normalization did, enough to undo it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NormalizationLog {
    /// 1-based positions of removed zero entries in the raw input.
    pub dropped: Vec<usize>,
    pub sorted: bool,
    /// For each normalized entry, its 1-based position in the raw input.
    pub source_index: Vec<usize>,
}

impl NormalizationLog {
    pub fn is_identity(&self) -> bool {
        self.dropped.is_empty() && !self.sorted
    }
}

/// Positive, non-increasing bound sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonSequence {
    values: Vec<f64>,
    log: NormalizationLog,
}

impl EpsilonSequence {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn log(&self) -> &NormalizationLog {
        &self.log
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// 1-based access.
    pub fn get(&self, n: usize) -> Result<f64> {
        checked(&self.values, n)
    }

    /// Entries from 1-based position `start` on, as a fresh sequence.
    pub fn tail(&self, start: usize) -> Result<EpsilonSequence> {
        if start == 0 || start > self.values.len() {
            return Err(Error::IndexOutOfRange { index: start, len: self.values.len() });
        }
        normalize_eps(&self.values[start - 1..], NormalizationPolicy::Strict)
    }
}

pub fn normalize_eps(raw: &[f64], policy: NormalizationPolicy) -> Result<EpsilonSequence> {
    if raw.is_empty() {
        return Err(Error::EmptyEpsilon);
    }
    match policy {
        NormalizationPolicy::Strict => {
            for (i, &v) in raw.iter().enumerate() {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::NotPositive { index: i + 1 });
                }
                if i > 0 && v > raw[i - 1] {
                    return Err(Error::NotNonIncreasing { index: i + 1 });
                }
            }
            Ok(EpsilonSequence {
                values: raw.to_vec(),
                log: NormalizationLog { dropped: Vec::new(), sorted: false, source_index: (1..=raw.len()).collect() },
            })
        }
        NormalizationPolicy::DropZerosAndSort => {
            let mut dropped = Vec::new();
            let mut kept = Vec::new();
            for (i, &v) in raw.iter().enumerate() {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::InvalidEntry { index: i + 1 });
                }
                if v == 0.0 {
                    dropped.push(i + 1);
                } else {
                    kept.push((i + 1, v));
                }
            }
            if kept.is_empty() {
                return Err(Error::EmptyEpsilon);
            }
            let sorted = kept.windows(2).any(|w| w[1].1 > w[0].1);
            if sorted {
                // stable: equal values keep their input order
                kept.sort_by(|a, b| b.1.total_cmp(&a.1));
            }
            let (source_index, values) = kept.into_iter().unzip();
            Ok(EpsilonSequence { values, log: NormalizationLog { dropped, sorted, source_index } })
        }
    }
}

/// `c_n`, `beta_n` and `1 + c_1 + ... + c_n` for the first `len()` indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    c: Vec<f64>,
    beta: Vec<f64>,
    /// `prefix[n] = 1 + c_1 + ... + c_n`, with `prefix[0] = 1`.
    prefix: Vec<f64>,
}

pub fn c_sequence(eps: &EpsilonSequence, n: usize) -> Result<CoefficientTable> {
    if n > eps.len() {
        return Err(Error::Length { requested: n, available: eps.len() });
    }
    let mut c = Vec::with_capacity(n);
    let mut prefix = Vec::with_capacity(n + 1);
    let mut acc = CompensatedSum::new(1.0);
    prefix.push(1.0);
    for &e in &eps.values()[..n] {
        // c_1 = eps_1 / 1 falls out of the same step
        let cn = e / acc.value();
        c.push(cn);
        acc.add(cn);
        prefix.push(acc.value());
    }
    Ok(CoefficientTable::assemble(c, prefix))
}

fn checked(v: &[f64], n: usize) -> Result<f64> {
    if n == 0 || n > v.len() {
        return Err(Error::IndexOutOfRange { index: n, len: v.len() });
    }
    Ok(v[n - 1])
}

impl CoefficientTable {
    fn assemble(c: Vec<f64>, prefix: Vec<f64>) -> Self {
        let beta = c.iter().map(|x| x.sqrt()).collect();
        CoefficientTable { c, beta, prefix }
    }

    /// Rebuilds a table from stored `c` values (as saved with a system file).
    pub fn from_c(c: Vec<f64>) -> Result<Self> {
        if let Some(i) = c.iter().position(|x| !(*x > 0.0) || !x.is_finite()) {
            return Err(Error::NotPositive { index: i + 1 });
        }
        let mut acc = CompensatedSum::new(1.0);
        let mut prefix = vec![1.0];
        for &x in &c {
            acc.add(x);
            prefix.push(acc.value());
        }
        Ok(Self::assemble(c, prefix))
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn c_values(&self) -> &[f64] {
        &self.c
    }

    pub fn beta_values(&self) -> &[f64] {
        &self.beta
    }

    pub fn c(&self, n: usize) -> Result<f64> {
        checked(&self.c, n)
    }

    pub fn beta(&self, n: usize) -> Result<f64> {
        checked(&self.beta, n)
    }

    /// `1 + c_1 + ... + c_n` for `0 <= n <= len()`.
    pub fn prefix_sum(&self, n: usize) -> Result<f64> {
        self.prefix.get(n).copied().ok_or(Error::IndexOutOfRange { index: n, len: self.c.len() })
    }

    /// Largest relative residual of `c_{n+1} (1 + c_1 + ... + c_n) = eps_{n+1}`.
    pub fn recursion_residual(&self, eps: &EpsilonSequence) -> f64 {
        self.c
            .iter()
            .zip(eps.values())
            .enumerate()
            .map(|(i, (c, e))| (c * self.prefix[i] - e).abs() / e)
            .fold(0.0, f64::max)
    }

    pub fn truncated(&self, n: usize) -> Result<CoefficientTable> {
        if n > self.len() {
            return Err(Error::Length { requested: n, available: self.len() });
        }
        Ok(CoefficientTable {
            c: self.c[..n].to_vec(),
            beta: self.beta[..n].to_vec(),
            prefix: self.prefix[..=n].to_vec(),
        })
    }
}

/// `-beta_m beta_n` if `m > n`, else `0`.
pub fn alpha(table: &CoefficientTable, m: usize, n: usize) -> Result<f64> {
    let (bm, bn) = (table.beta(m)?, table.beta(n)?);
    Ok(if m > n { -bm * bn } else { 0.0 })
}

fn check_target(c: f64) -> Result<()> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!("target constant C must be positive, got {c}")));
    }
    Ok(())
}

/// Smallest `L` with `sum_{l<=L} beta_{2l-1}^2 >= 64 C^2`.
#[allow(non_snake_case)]
pub fn select_L(table: &CoefficientTable, target_c: f64, scan_cap: usize) -> Result<usize> {
    check_target(target_c)?;
    let threshold = 64.0 * target_c * target_c;
    let mut odd = CompensatedSum::new(0.0);
    let mut l = 0;
    loop {
        if l == scan_cap {
            return Err(Error::TooSummable { inequality: Inequality::OddMass, scanned: l, exhausted: false });
        }
        if 2 * l + 1 > table.len() {
            return Err(Error::TooSummable { inequality: Inequality::OddMass, scanned: l, exhausted: true });
        }
        l += 1;
        odd.add(table.c[2 * l - 2]);
        if odd.value() >= threshold {
            return Ok(l);
        }
    }
}

/// Smallest `M > L` with `sum_{k<=L} beta_{2k}^2 <= (1/8) sum_{k<=M} beta_{2k}^2`
/// and `sum_{k<=M} beta_{2k}^2 > 1`.
#[allow(non_snake_case)]
pub fn select_M(table: &CoefficientTable, target_c: f64, l: usize, scan_cap: usize) -> Result<usize> {
    check_target(target_c)?;
    if l == 0 {
        return Err(Error::InvalidParameter("L must be at least 1".into()));
    }
    if 2 * l > table.len() {
        return Err(Error::TooSummable { inequality: Inequality::EvenRatio, scanned: 0, exhausted: true });
    }
    let mut even = CompensatedSum::new(0.0);
    for k in 1..=l {
        even.add(table.c[2 * k - 1]);
    }
    let head = even.value();
    let mut m = l;
    loop {
        let failing = if head > even.value() / 8.0 { Inequality::EvenRatio } else { Inequality::EvenMassAboveOne };
        if m >= scan_cap {
            return Err(Error::TooSummable { inequality: failing, scanned: m, exhausted: false });
        }
        if 2 * (m + 1) > table.len() {
            return Err(Error::TooSummable { inequality: failing, scanned: m, exhausted: true });
        }
        m += 1;
        even.add(table.c[2 * m - 1]);
        let mass = even.value();
        if head <= mass / 8.0 && mass > 1.0 {
            return Ok(m);
        }
    }
}

/// Returns `(gamma, B)` where `gamma` holds `gamma_1..gamma_{2M}` in order.
pub fn gammas(table: &CoefficientTable, m: usize) -> Result<(Vec<f64>, f64)> {
    if m == 0 {
        return Err(Error::InvalidParameter("M must be at least 1".into()));
    }
    if 2 * m > table.len() {
        return Err(Error::Length { requested: 2 * m, available: table.len() });
    }
    // tails[l-1] = sum_{k=l}^{M} c_{2k}, accumulated from the back
    let mut tails = vec![0.0; m];
    let mut acc = CompensatedSum::new(0.0);
    for k in (1..=m).rev() {
        acc.add(table.c[2 * k - 1]);
        tails[k - 1] = acc.value();
    }
    let b = tails[0];
    let mut gamma = vec![0.0; 2 * m];
    for k in 1..=m {
        gamma[2 * k - 1] = table.beta[2 * k - 1] / b;
        gamma[2 * k - 2] = table.beta[2 * k - 2] * (tails[k - 1] / b);
    }
    Ok((gamma, b))
}

/// Parameters certifying the permutation-resistant construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Params {
    #[serde(rename = "C")]
    pub target_c: f64,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "B")]
    pub b: f64,
    pub gamma: Vec<f64>,
    /// Witness element `z = sum gamma_n x_n` in ambient coordinates; filled by the builder.
    pub z: SparseVec,
}

/// One violated invariant, described for reports.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation(pub String);

impl Theorem2Params {
    /// Computes `B` and `gamma` for chosen `L`, `M` without checking the selection inequalities.
    pub fn assemble(table: &CoefficientTable, target_c: f64, l: usize, m: usize) -> Result<Self> {
        check_target(target_c)?;
        let (gamma, b) = gammas(table, m)?;
        Ok(Theorem2Params { target_c, l, m, n: 2 * m, b, gamma, z: SparseVec::new() })
    }

    /// Runs `select_L`, `select_M` and `gammas`.
    pub fn select(table: &CoefficientTable, target_c: f64, scan_cap: usize) -> Result<Self> {
        let l = select_L(table, target_c, scan_cap)?;
        let m = select_M(table, target_c, l, scan_cap)?;
        Self::assemble(table, target_c, l, m)
    }

    /// Sets `z = sum_n gamma_n x_n` for the given primal family.
    pub fn set_witness_element(&mut self, primal: &[SparseVec], dim: usize) {
        let mut z = vec![0.0; dim];
        for (x, g) in primal.iter().zip(&self.gamma) {
            x.axpy_into(*g, &mut z);
        }
        self.z = SparseVec::from_dense(&z);
    }

    pub fn z_norm(&self) -> f64 {
        self.z.norm()
    }

    /// Checks every selection inequality and the identities of `gamma` and `z`.
    pub fn check_invariants(&self, table: &CoefficientTable) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut fail = |msg: String| out.push(Violation(msg));
        if self.n != 2 * self.m || self.m <= self.l || table.len() < self.n || self.gamma.len() != self.n {
            fail(format!(
                "shape: L={} M={} N={} gamma={} table={}",
                self.l,
                self.m,
                self.n,
                self.gamma.len(),
                table.len()
            ));
            return out;
        }
        let c = &table.c;
        let odd: f64 = (1..=self.l).map(|l| c[2 * l - 2]).sum();
        if odd < 64.0 * self.target_c * self.target_c {
            fail(format!("odd mass {odd} < 64 C^2"));
        }
        let head: f64 = (1..=self.l).map(|k| c[2 * k - 1]).sum();
        let mass: f64 = (1..=self.m).map(|k| c[2 * k - 1]).sum();
        if head > mass / 8.0 * (1.0 + 1e-12) {
            fail(format!("even ratio {head} > {mass}/8"));
        }
        if !(self.b > 1.0) || (self.b - mass).abs() > 1e-12 * mass {
            fail(format!("B = {} (even mass {mass})", self.b));
        }
        let mut tail = 0.0;
        for l in (1..=self.m).rev() {
            tail += c[2 * l - 1];
            let even = table.beta[2 * l - 1] / self.b;
            let oddg = table.beta[2 * l - 2] / self.b * tail;
            if (self.gamma[2 * l - 1] - even).abs() > 1e-12 * even {
                fail(format!("gamma_{} = {} expected {even}", 2 * l, self.gamma[2 * l - 1]));
            }
            if (self.gamma[2 * l - 2] - oddg).abs() > 1e-12 * oddg {
                fail(format!("gamma_{} = {} expected {oddg}", 2 * l - 1, self.gamma[2 * l - 2]));
            }
        }
        if !self.z.is_empty() {
            let tol = 1e-12;
            if (self.z.get(0) - 1.0).abs() > tol {
                fail(format!("<z, e0> = {}", self.z.get(0)));
            }
            for l in 1..=self.m {
                let v = self.z.get(2 * l - 1);
                if v.abs() > tol {
                    fail(format!("<z, e_{}> = {v}", 2 * l - 1));
                }
                let expect = table.beta[2 * l - 1] / self.b;
                let got = self.z.get(2 * l);
                if (got - expect).abs() > tol {
                    fail(format!("<z, e_{}> = {got} expected {expect}", 2 * l));
                }
            }
            let expect = (1.0 + 1.0 / self.b).sqrt();
            if (self.z_norm() - expect).abs() > tol || self.z_norm() > 2.0 {
                fail(format!("|z| = {} expected {expect}", self.z_norm()));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ones(n: usize) -> EpsilonSequence {
        normalize_eps(&vec![1.0; n], NormalizationPolicy::Strict).unwrap()
    }

    #[test]
    fn strict_accepts_normalized_input() {
        let e = normalize_eps(&[1.0, 1.0, 1.0], NormalizationPolicy::Strict).unwrap();
        assert_eq!(e.values(), &[1.0, 1.0, 1.0]);
        assert!(e.log().is_identity());
    }

    #[test]
    fn drop_and_sort_logs_its_steps() {
        let e = normalize_eps(&[0.5, 0.0, 1.0], NormalizationPolicy::DropZerosAndSort).unwrap();
        assert_eq!(e.values(), &[1.0, 0.5]);
        assert_eq!(e.log().dropped, vec![2]);
        assert!(e.log().sorted);
        assert_eq!(e.log().source_index, vec![3, 1]);
    }

    #[test]
    fn strict_rejects_increase_with_index() {
        let err = normalize_eps(&[0.5, 1.0], NormalizationPolicy::Strict).unwrap_err();
        assert_eq!(err.to_string(), "not non-increasing at index 2");
        assert!(matches!(
            normalize_eps(&[1.0, 0.0], NormalizationPolicy::Strict),
            Err(Error::NotPositive { index: 2 })
        ));
        assert!(matches!(
            normalize_eps(&[1.0, -1.0], NormalizationPolicy::DropZerosAndSort),
            Err(Error::InvalidEntry { index: 2 })
        ));
        assert!(matches!(normalize_eps(&[], NormalizationPolicy::Strict), Err(Error::EmptyEpsilon)));
    }

    #[test]
    fn spec_strings_parse() {
        assert_eq!("const:1".parse::<EpsSpec>().unwrap(), EpsSpec::Const(1.0));
        assert_eq!("power:0.5".parse::<EpsSpec>().unwrap(), EpsSpec::Power(0.5));
        assert_eq!("geometric:0.5".parse::<EpsSpec>().unwrap(), EpsSpec::Geometric(0.5));
        assert!("const:-1".parse::<EpsSpec>().is_err());
        assert!("const".parse::<EpsSpec>().is_err());
        assert!("cubic:2".parse::<EpsSpec>().is_err());
        assert_eq!(EpsSpec::Power(1.0).materialize(4).unwrap(), vec![1.0, 0.5, 1.0 / 3.0, 0.25]);
        // 0.5^n underflows past n = 1074
        let g = EpsSpec::Geometric(0.5).materialize(5000).unwrap();
        assert_eq!(g.len(), 1074);
        assert!(g.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn base_case_is_eps_one() {
        let e = normalize_eps(&[0.3], NormalizationPolicy::Strict).unwrap();
        let t = c_sequence(&e, 1).unwrap();
        assert_eq!(t.c_values(), &[0.3]);
        assert!(matches!(c_sequence(&e, 2), Err(Error::Length { requested: 2, available: 1 })));
    }

    #[test]
    fn alpha_branches() {
        let t = c_sequence(&ones(5), 5).unwrap();
        assert!((alpha(&t, 3, 2).unwrap() + (0.4f64 * 0.5).sqrt()).abs() < 1e-15);
        assert!((alpha(&t, 3, 2).unwrap() - -0.447_213_595_499_958).abs() < 1e-12);
        assert_eq!(alpha(&t, 2, 3).unwrap(), 0.0);
        assert_eq!(alpha(&t, 5, 5).unwrap(), 0.0);
        assert!(alpha(&t, 6, 1).is_err());
        assert!(alpha(&t, 0, 1).is_err());
    }

    #[test]
    fn gamma_identities() {
        let t = c_sequence(&ones(60), 60).unwrap();
        let (g, b) = gammas(&t, 23).unwrap();
        assert_eq!(g[0], t.beta(1).unwrap());
        let s: f64 = (1..=23).map(|k| g[2 * k - 1] * t.beta(2 * k).unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-14);
        assert!(b > 1.0);
    }

    #[test]
    fn gammas_m2_matches_rational_value() {
        let t = c_sequence(&ones(4), 4).unwrap();
        let (g, b) = gammas(&t, 2).unwrap();
        // B = 1/2 + 10/29 = 49/58
        assert!((b - 49.0 / 58.0).abs() < 1e-15);
        assert!((g[3] - (10.0f64 / 29.0).sqrt() / (49.0 / 58.0)).abs() < 1e-15);
    }

    #[test]
    fn summable_sequence_fails_the_scan() {
        let raw = EpsSpec::Geometric(0.5).materialize(2_000_000).unwrap();
        let e = normalize_eps(&raw, NormalizationPolicy::Strict).unwrap();
        let t = c_sequence(&e, e.len()).unwrap();
        let err = select_L(&t, 1.0, 1_000_000).unwrap_err();
        assert!(matches!(err, Error::TooSummable { inequality: Inequality::OddMass, .. }));
        assert!(err.to_string().contains("64 C^2"));
    }

    #[test]
    fn scan_cap_is_respected() {
        let t = c_sequence(&ones(1000), 1000).unwrap();
        assert!(matches!(select_L(&t, 0.2, 3), Err(Error::TooSummable { exhausted: false, scanned: 3, .. })));
        assert!(matches!(select_M(&t, 0.05, 1, 10), Err(Error::TooSummable { .. })));
        assert!(select_L(&t, 0.0, 10).is_err());
    }

    #[test]
    fn params_check_flags_tampering() {
        let t = c_sequence(&ones(100), 100).unwrap();
        let mut p = Theorem2Params::select(&t, 0.05, 50).unwrap();
        assert!(p.check_invariants(&t).is_empty(), "{:?}", p.check_invariants(&t));
        p.gamma[3] *= 1.01;
        assert_eq!(p.check_invariants(&t).len(), 1);
    }

    fn arb_eps() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(1e-6..10.0f64, 1..300).prop_map(|mut v| {
            v.sort_by(|a, b| b.total_cmp(a));
            v
        })
    }

    proptest! {
        #[test]
        fn recursion_identity_and_monotonicity(raw in arb_eps()) {
            let e = normalize_eps(&raw, NormalizationPolicy::Strict).unwrap();
            let t = c_sequence(&e, e.len()).unwrap();
            prop_assert!(t.recursion_residual(&e) <= 1e-12);
            for w in t.c_values().windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
            for n in 1..=t.len() {
                let (c, b) = (t.c(n).unwrap(), t.beta(n).unwrap());
                prop_assert!((b * b - c).abs() <= 1e-14 * c);
            }
        }

        #[test]
        fn alpha_support_is_one_sided(raw in arb_eps(), m in 1usize..300, n in 1usize..300) {
            let e = normalize_eps(&raw, NormalizationPolicy::Strict).unwrap();
            let t = c_sequence(&e, e.len()).unwrap();
            prop_assume!(m <= t.len() && n <= t.len() && m != n);
            prop_assert_eq!(alpha(&t, m, n).unwrap() * alpha(&t, n, m).unwrap(), 0.0);
        }

        #[test]
        fn selections_are_minimal(c in 0.03..0.25f64) {
            let t = c_sequence(&ones(4000), 4000).unwrap();
            let l = select_L(&t, c, 2000).unwrap();
            let odd = |n: usize| (1..=n).map(|l| t.c(2 * l - 1).unwrap()).sum::<f64>();
            prop_assert!(odd(l) >= 64.0 * c * c);
            if l > 1 {
                prop_assert!(odd(l - 1) < 64.0 * c * c);
            }
            let m = select_M(&t, c, l, 2000).unwrap();
            prop_assert!(m > l);
            let even = |n: usize| (1..=n).map(|k| t.c(2 * k).unwrap()).sum::<f64>();
            prop_assert!(even(l) <= even(m) / 8.0 && even(m) > 1.0);
            if m - 1 > l {
                prop_assert!(!(even(l) <= even(m - 1) / 8.0 && even(m - 1) > 1.0));
            }
        }
    }
}
