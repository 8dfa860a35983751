//! Numeric utilities: compensated summation, log-domain sums, big-integer
//! combinatorics and exact-rational parsing.
//!
//! Partition-function style sums such as `sum_k N(k) * lambda^k` overflow
//! `f64` long before the sizes of interest (`lambda^50` at `lambda = 5`), so
//! every large sum in this crate is accumulated in the log domain. All the
//! summands involved are positive, which keeps the log-sum-exp route exact up
//! to rounding.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// Kahan compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// `ln(sum_i exp(terms_i))` without overflow; empty input gives `-inf`.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut acc = Kahan::new();
    for &t in terms {
        acc.add((t - max).exp());
    }
    max + acc.value().ln()
}

/// Table of `ln(n!)` built by compensated cumulative summation.
#[derive(Debug, Clone)]
pub struct LnFactorial {
    table: Vec<f64>,
}

impl LnFactorial {
    pub fn up_to(n: usize) -> Self {
        let mut table = Vec::with_capacity(n + 1);
        let mut acc = Kahan::new();
        table.push(0.0);
        for i in 1..=n {
            acc.add((i as f64).ln());
            table.push(acc.value());
        }
        Self { table }
    }

    pub fn get(&self, n: usize) -> f64 {
        self.table[n]
    }
}

pub fn factorial_big(n: u64) -> BigUint {
    let mut acc = BigUint::one();
    for i in 2..=n {
        acc *= i;
    }
    acc
}

/// Binomial coefficient in big integers; zero outside `0 <= k <= n`.
pub fn binomial_big(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Binomial coefficient under the reciprocal-gamma convention used by the
/// counting formulas: `C(-1,-1) = 1`, and any other index outside
/// `0 <= k <= n` gives zero. Poles of `1/Gamma` at nonpositive integers make
/// whole terms vanish rather than diverge.
pub fn binomial_gamma(n: i64, k: i64) -> BigUint {
    if n == -1 && k == -1 {
        return BigUint::one();
    }
    if n < 0 || k < 0 || k > n {
        return BigUint::zero();
    }
    binomial_big(n as u64, k as u64)
}

/// Parses `"p/q"`, an integer, or a finite decimal (`"0.8"` = 4/5) into an
/// exact rational in `[0,1]`-unchecked form.
pub fn parse_big_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = |_| Error::Parse(format!("cannot parse {s:?} as a rational number"));
    if let Some((num, den)) = s.split_once('/') {
        let n: num_bigint::BigInt = num.trim().parse().map_err(bad)?;
        let d: num_bigint::BigInt = den.trim().parse().map_err(bad)?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let digits = format!("{}{}", if int.is_empty() { "0" } else { int }, frac);
        let n: num_bigint::BigInt = digits.parse().map_err(bad)?;
        let d = num_bigint::BigInt::from(10u32).pow(frac.len() as u32);
        return Ok(BigRational::new(n, d));
    }
    let n: num_bigint::BigInt = s.parse().map_err(bad)?;
    Ok(BigRational::from_integer(n))
}
