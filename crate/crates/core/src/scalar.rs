//! Numeric backends shared by the whole crate.
//!
//! Every algorithm is generic over [`Scalar`] and runs unchanged on exact
//! rationals ([`Rational`]) and on `f64`. Conversions between the two are
//! always explicit; nothing in the crate silently rounds.

use num::{BigInt, BigRational, Num, Signed, ToPrimitive};

/// Exact rational numbers with arbitrary-precision integer parts.
pub type Rational = BigRational;

/// Requirements on a number type used for mixture computations.
///
/// The arithmetic itself comes from `num_traits` (`Num` + `Signed`); this
/// trait only adds the few crate-specific hooks: construction from an integer
/// ratio, lossy conversion to `f64` for display and numeric hand-off, and the
/// slack allowed when checking that probabilities sum to one.
pub trait Scalar:
    Clone + PartialEq + PartialOrd + Num + Signed + std::fmt::Debug + std::fmt::Display + 'static
{
    /// True when arithmetic carries no rounding error.
    const EXACT: bool;

    /// The value `numer / denom`. Panics if `denom == 0`.
    fn from_int_ratio(numer: i64, denom: i64) -> Self;

    /// Best-effort conversion to `f64`.
    fn to_f64_lossy(&self) -> f64;

    /// Largest deviation from 1 tolerated when validating normalization.
    /// Zero for exact backends.
    fn normalization_slack() -> Self;
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn from_int_ratio(numer: i64, denom: i64) -> Self {
        Rational::new(BigInt::from(numer), BigInt::from(denom))
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn normalization_slack() -> Self {
        num::Zero::zero()
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_int_ratio(numer: i64, denom: i64) -> Self {
        assert!(denom != 0, "zero denominator");
        numer as f64 / denom as f64
    }

    fn to_f64_lossy(&self) -> f64 {
        *self
    }

    fn normalization_slack() -> Self {
        1e-9
    }
}

/// Shorthand for building a [`Rational`] from small integers.
pub fn rat(numer: i64, denom: i64) -> Rational {
    Rational::from_int_ratio(numer, denom)
}

/// `|a - b| <= tol`, false when any operand is NaN.
pub(crate) fn within<S: Scalar>(a: &S, b: &S, tol: &S) -> bool {
    let dev = (a.clone() - b.clone()).abs();
    dev <= *tol
}
