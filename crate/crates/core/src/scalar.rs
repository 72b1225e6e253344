//! Floating-point abstraction used by the numeric modules.
//!
//! Everything that stores weights, vectors or probabilities is generic over
//! [`Scalar`], which is implemented for `f32` and `f64`. Counting and
//! bookkeeping stay in integers.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + FromStr
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal, rounding to the nearest representable value.
    fn lit(x: f64) -> Self;

    fn to_f64_lossy(self) -> f64;

    fn from_usize_lossy(n: usize) -> Self {
        Self::lit(n as f64)
    }
}

impl Scalar for f32 {
    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn lit(x: f64) -> Self {
        x
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

pub(crate) fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).fold(S::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Numerically stable softmax, written into `out`.
pub(crate) fn softmax_into<S: Scalar>(scores: &[S], out: &mut [S]) {
    let max = scores
        .iter()
        .copied()
        .fold(S::neg_infinity(), |m, x| if x > m { x } else { m });
    let mut total = S::zero();
    for (o, &s) in out.iter_mut().zip(scores) {
        *o = (s - max).exp();
        total = total + *o;
    }
    for o in out.iter_mut() {
        *o = *o / total;
    }
}

/// Index of the largest value; the earliest index wins ties.
pub(crate) fn argmax<S: Scalar>(values: &[S]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_sums_to_one_and_survives_large_scores() {
        let mut out = [0.0f64; 3];
        softmax_into(&[1000.0, 1000.0, 999.0], &mut out);
        let total: f64 = out.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((out[0] - out[1]).abs() < 1e-15);
    }

    #[test]
    fn argmax_prefers_first_on_ties() {
        assert_eq!(argmax(&[0.5f32, 0.5, 0.1]), 0);
        assert_eq!(argmax(&[0.1f64, 0.5, 0.5]), 1);
    }
}
