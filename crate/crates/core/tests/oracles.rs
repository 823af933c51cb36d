//! Independent oracles for the coefficient recursion and parameter selection.
//!
//! Leading terms use exact rationals. Selection runs thousands of steps, where
//! rationals blow up, so it uses 256-bit fixed point with rigorous lower and
//! upper bounds; every comparison must be decided by the interval.

use mbasis::coefficients::{gammas, select_L, select_M, NormalizationPolicy};
use mbasis::{c_sequence, normalize_eps, CoefficientTable};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

fn ones(n: usize) -> mbasis::EpsilonSequence {
    normalize_eps(&vec![1.0; n], NormalizationPolicy::Strict).unwrap()
}

fn rational_c(eps: impl Fn(usize) -> BigRational, n: usize) -> Vec<BigRational> {
    let mut sum = BigRational::one();
    let mut out = Vec::new();
    for k in 1..=n {
        let c = eps(k) / &sum;
        sum += &c;
        out.push(c);
    }
    out
}

fn ratio(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

fn assert_rel(got: f64, want: &BigRational, tol: f64) {
    let w = want.to_f64().unwrap();
    assert!(((got - w) / w).abs() <= tol, "got {got}, want {w}");
}

#[test]
fn constant_eps_leading_terms_are_exact() {
    let exact = rational_c(|_| BigRational::one(), 5);
    let expected = [ratio(1, 1), ratio(1, 2), ratio(2, 5), ratio(10, 29), ratio(290, 941)];
    assert_eq!(exact, expected);
    let table = c_sequence(&ones(5), 5).unwrap();
    for (got, want) in table.c_values().iter().zip(&expected) {
        assert_rel(*got, want, 1e-12);
    }
    let (_, b) = gammas(&table.truncated(4).unwrap(), 2).unwrap();
    assert_rel(b, &ratio(49, 58), 1e-15);
}

#[test]
fn harmonic_eps_leading_terms_are_exact() {
    let exact = rational_c(|k| ratio(1, k as i64), 3);
    assert_eq!(exact, vec![ratio(1, 1), ratio(1, 4), ratio(4, 27)]);
    let eps: Vec<f64> = (1..=3).map(|k| 1.0 / k as f64).collect();
    let table = c_sequence(&normalize_eps(&eps, NormalizationPolicy::Strict).unwrap(), 3).unwrap();
    for (got, want) in table.c_values().iter().zip(&exact) {
        assert_rel(*got, want, 1e-12);
    }
}

#[test]
fn long_recursion_stays_tight() {
    let n = 10_000;
    let eps = ones(n);
    let table = c_sequence(&eps, n).unwrap();
    assert!(table.recursion_residual(&eps) <= 1e-11);
    // with eps = 1 the prefix sums satisfy S_{n+1}^2 = S_n^2 + 2 + 1/S_n^2 >= S_n^2 + 2
    let s = table.prefix_sum(n).unwrap();
    assert!(s * s >= 1.0 + 2.0 * n as f64 && s > 141.0);
    assert!(s * s <= 1.0 + 2.0 * n as f64 + 1.0 + (n as f64).ln() + 1.0);
}

/// `value / 2^FRAC` enclosed as `[lo, hi]`.
#[derive(Clone)]
struct Interval {
    lo: BigInt,
    hi: BigInt,
}

const FRAC: u32 = 256;

impl Interval {
    fn add(&mut self, o: &Interval) {
        self.lo += &o.lo;
        self.hi += &o.hi;
    }

    fn scaled(&self, k: i64) -> Interval {
        Interval { lo: &self.lo * k, hi: &self.hi * k }
    }

    fn to_f64(&self) -> f64 {
        let mid: BigInt = (&self.lo + &self.hi) >> 1u32;
        mid.to_f64().unwrap() / 2f64.powi(FRAC as i32)
    }
}

fn div_floor(a: &BigInt, b: &BigInt) -> BigInt {
    a / b
}

fn div_ceil(a: &BigInt, b: &BigInt) -> BigInt {
    (a + b - 1) / b
}

/// Enclosures of `c_1..c_n` for `eps_k = num_k / den_k`.
fn interval_c(eps: impl Fn(usize) -> (i64, i64), n: usize) -> Vec<Interval> {
    let one = BigInt::one() << FRAC;
    let mut s = Interval { lo: one.clone(), hi: one };
    let mut out = Vec::with_capacity(n);
    for k in 1..=n {
        let (p, q) = eps(k);
        let num = BigInt::from(p) << (2 * FRAC);
        let c = Interval { lo: div_floor(&num, &(&s.hi * q)), hi: div_ceil(&num, &(&s.lo * q)) };
        s.add(&c);
        out.push(c);
    }
    out
}

/// Three-valued comparison that must be decided.
fn decide_ge(a: &Interval, b: &Interval) -> bool {
    if a.lo >= b.hi {
        true
    } else if a.hi < b.lo {
        false
    } else {
        panic!("interval too wide to decide");
    }
}

fn constant(num: i64, den: i64) -> Interval {
    // num / den, enclosed
    let scaled = BigInt::from(num) << FRAC;
    let d = BigInt::from(den);
    Interval { lo: div_floor(&scaled, &d), hi: div_ceil(&scaled, &d) }
}

/// `(L, M, B)` for target `C = cp / cq`.
fn oracle_selection(c: &[Interval], cp: i64, cq: i64) -> (usize, usize, f64) {
    let threshold = constant(64 * cp * cp, cq * cq);
    let zero = || Interval { lo: BigInt::zero(), hi: BigInt::zero() };
    let mut odd = zero();
    let mut l = 0;
    loop {
        l += 1;
        odd.add(&c[2 * l - 2]);
        if decide_ge(&odd, &threshold) {
            break;
        }
    }
    let mut head = zero();
    for k in 1..=l {
        head.add(&c[2 * k - 1]);
    }
    let mut mass = head.clone();
    let one = constant(1, 1);
    let mut m = l;
    loop {
        m += 1;
        mass.add(&c[2 * m - 1]);
        let ratio_ok = decide_ge(&mass, &head.scaled(8));
        let above_one = !decide_ge(&one, &mass);
        if ratio_ok && above_one {
            return (l, m, mass.to_f64());
        }
    }
}

#[test]
fn selection_matches_interval_oracle() {
    let n = 2 * 6_000;
    let exact = interval_c(|_| (1, 1), n);
    let table = c_sequence(&ones(n), n).unwrap();
    for (k, iv) in exact.iter().enumerate().step_by(997) {
        assert!((table.c_values()[k] - iv.to_f64()).abs() <= 1e-13 * iv.to_f64());
    }
    // frozen from the oracle: (C numerator, denominator, L, M)
    for (cp, cq, l, m) in [(1, 20, 1, 23), (1, 5, 7, 277), (2, 5, 107, 5969)] {
        let (ol, om, ob) = oracle_selection(&exact, cp, cq);
        assert_eq!((ol, om), (l, m), "oracle drifted for C = {cp}/{cq}");
        let c = cp as f64 / cq as f64;
        assert_eq!(select_L(&table, c, 50_000).unwrap(), l);
        assert_eq!(select_M(&table, c, l, 50_000).unwrap(), m);
        let (_, b) = gammas(&table, m).unwrap();
        assert!(((b - ob) / ob).abs() <= 1e-12, "B {b} vs {ob}");
    }
}

#[test]
fn from_c_round_trips_a_table() {
    let t = c_sequence(&ones(50), 50).unwrap();
    let back = CoefficientTable::from_c(t.c_values().to_vec()).unwrap();
    assert_eq!(back.c_values(), t.c_values());
    assert_eq!(back.beta_values(), t.beta_values());
}
