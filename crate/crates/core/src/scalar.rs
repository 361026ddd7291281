//! Numeric abstraction shared by every metric.
//!
//! All aggregates are built from integer counts, so the pipeline only needs a
//! handful of operations from its scalar: exact construction from a ratio of
//! counts, field arithmetic, ordering, and a natural logarithm for the
//! divergence. `f64`/`f32` use the hardware operations; [`BigRational`] keeps
//! every rational quantity exact and approximates `ln` through `f64`.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, ToPrimitive};

/// Scalar type a metric is evaluated in.
pub trait Scalar: Num + Clone + PartialOrd + Debug + Send + Sync + 'static {
    /// `num / den`, rounded once (floats) or exact (rationals). `den` must be non-zero.
    fn from_ratio(num: u64, den: u64) -> Self;

    /// Nearest representable value; rationals take the exact value of the float.
    fn from_f64(value: f64) -> Self;

    fn to_f64(&self) -> f64;

    /// Natural logarithm of a positive value.
    fn ln(&self) -> Self;

    fn from_count(n: u64) -> Self {
        Self::from_ratio(n, 1)
    }

    fn powu(&self, exp: usize) -> Self {
        num_traits::pow(self.clone(), exp)
    }
}

impl Scalar for f64 {
    fn from_ratio(num: u64, den: u64) -> Self {
        debug_assert!(den != 0);
        num as f64 / den as f64
    }

    fn from_f64(value: f64) -> Self {
        value
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn ln(&self) -> Self {
        f64::ln(*self)
    }

    fn powu(&self, exp: usize) -> Self {
        match i32::try_from(exp) {
            Ok(e) => self.powi(e),
            Err(_) => num_traits::pow(*self, exp),
        }
    }
}

impl Scalar for f32 {
    fn from_ratio(num: u64, den: u64) -> Self {
        debug_assert!(den != 0);
        (num as f64 / den as f64) as f32
    }

    fn from_f64(value: f64) -> Self {
        value as f32
    }

    fn to_f64(&self) -> f64 {
        f64::from(*self)
    }

    fn ln(&self) -> Self {
        f32::ln(*self)
    }
}

impl Scalar for BigRational {
    fn from_ratio(num: u64, den: u64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn from_f64(value: f64) -> Self {
        BigRational::from_float(value).expect("finite float")
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn ln(&self) -> Self {
        <Self as Scalar>::from_f64(Scalar::to_f64(self).ln())
    }
}
