//! Scalar abstraction over the two numeric modes of the exact engine.
//!
//! The Markov and conjecture machinery runs either on `f64` or on exact big
//! rationals; small-instance stationary vectors are rational functions of
//! the hop probabilities, so they can be reproduced with no rounding at
//! all. Everything generic in this crate is written against [`Scalar`].

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Send
    + Sync
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Whether arithmetic in this mode is exact (no rounding).
    const EXACT: bool;

    fn from_u64(n: u64) -> Self;

    fn to_f64(&self) -> f64;

    /// Pivot quality for Gaussian elimination.
    fn pivot_score(&self) -> f64;

    /// Equality up to `tol` in float mode, exact equality in rational mode.
    fn close_to(&self, other: &Self, tol: f64) -> bool;
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_u64(n: u64) -> Self {
        n as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn pivot_score(&self) -> f64 {
        self.abs()
    }

    fn close_to(&self, other: &Self, tol: f64) -> bool {
        (self - other).abs() <= tol
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn from_u64(n: u64) -> Self {
        BigRational::from_integer(n.into())
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn pivot_score(&self) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            1.0
        }
    }

    fn close_to(&self, other: &Self, _tol: f64) -> bool {
        self == other
    }
}

/// Hop probabilities in the active numeric mode, validated to `[0,1]`.
#[derive(Debug, Clone)]
pub struct HopProbs<S: Scalar> {
    pub alpha: S,
    pub beta: S,
}

impl<S: Scalar> HopProbs<S> {
    pub fn new(alpha: S, beta: S) -> Result<Self> {
        for (name, v) in [("alpha", &alpha), ("beta", &beta)] {
            let f = v.to_f64();
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Parameter(format!("{name} = {f} outside [0,1]")));
            }
        }
        Ok(Self { alpha, beta })
    }

    pub fn prob(&self, beta_coin: bool) -> &S {
        if beta_coin {
            &self.beta
        } else {
            &self.alpha
        }
    }

    /// Rejects endpoint values for the probabilities the model actually uses.
    pub fn require_interior(&self, uses_beta: bool) -> Result<()> {
        let mut named = vec![("alpha", self.alpha.to_f64())];
        if uses_beta {
            named.push(("beta", self.beta.to_f64()));
        }
        for (name, v) in named {
            if v <= 0.0 || v >= 1.0 {
                return Err(Error::EndpointParameter { name, value: v });
            }
        }
        Ok(())
    }
}

impl HopProbs<f64> {
    pub fn from_params(params: &crate::model::ModelParams) -> Self {
        Self {
            alpha: params.alpha,
            beta: params.beta,
        }
    }
}

/// `base^exp` by repeated multiplication (exponents are pattern counts, <= L).
pub fn pow_usize<S: Scalar>(base: &S, exp: usize) -> S {
    let mut acc = S::one();
    for _ in 0..exp {
        acc = acc * base.clone();
    }
    acc
}
