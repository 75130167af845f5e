//! Number types the recurrences can run in.
//!
//! Every recurrence in the crate is written once against [`Scalar`] and then
//! instantiated with `f64`, with exact [`Rational`] arithmetic, or with
//! arbitrary precision [`Float`]s.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub use rug::{Float, Rational};

/// Field operations plus the conversions the algorithms need.
pub trait Scalar:
    Clone
    + Debug
    + PartialOrd
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Construction context. `()` for `f64` and `Rational`, the precision in bits for `Float`.
    type Ctx: Copy + Debug + Send + Sync;

    /// Converts a double. Rationals use the shortest decimal that round-trips,
    /// so `0.3` becomes `3/10` rather than the nearest dyadic fraction.
    fn from_f64(v: f64, ctx: Self::Ctx) -> Self;
    fn from_i64(v: i64, ctx: Self::Ctx) -> Self;
    fn to_f64(&self) -> f64;
    fn ctx(&self) -> Self::Ctx;
    fn abs(&self) -> Self;
    fn is_exact() -> bool {
        false
    }

    fn zero(ctx: Self::Ctx) -> Self {
        Self::from_i64(0, ctx)
    }
    fn one(ctx: Self::Ctx) -> Self {
        Self::from_i64(1, ctx)
    }
    fn ratio(num: i64, den: i64, ctx: Self::Ctx) -> Self {
        Self::from_i64(num, ctx) / Self::from_i64(den, ctx)
    }
}

impl Scalar for f64 {
    type Ctx = ();

    fn from_f64(v: f64, _: ()) -> Self {
        v
    }
    fn from_i64(v: i64, _: ()) -> Self {
        v as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn ctx(&self) {}
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
}

impl Scalar for Rational {
    type Ctx = ();

    fn from_f64(v: f64, _: ()) -> Self {
        decimal_rational(v)
    }
    fn from_i64(v: i64, _: ()) -> Self {
        Rational::from(v)
    }
    fn to_f64(&self) -> f64 {
        // `Rational::to_f64` truncates; go through a 53-bit float to round to nearest.
        Float::with_val(53, self).to_f64()
    }
    fn ctx(&self) {}
    fn abs(&self) -> Self {
        Rational::from(self.abs_ref())
    }
    fn is_exact() -> bool {
        true
    }
}

impl Scalar for Float {
    type Ctx = u32;

    fn from_f64(v: f64, prec: u32) -> Self {
        Float::with_val(prec, v)
    }
    fn from_i64(v: i64, prec: u32) -> Self {
        Float::with_val(prec, v)
    }
    fn to_f64(&self) -> f64 {
        Float::to_f64(self)
    }
    fn ctx(&self) -> u32 {
        self.prec()
    }
    fn abs(&self) -> Self {
        Float::with_val(self.prec(), self.abs_ref())
    }
    fn ratio(num: i64, den: i64, prec: u32) -> Self {
        Float::with_val(prec, num) / Float::with_val(prec, den)
    }
}

/// Exact rational value of the shortest decimal representation of `v`.
///
/// Panics on non-finite input.
pub fn decimal_rational(v: f64) -> Rational {
    assert!(v.is_finite(), "cannot convert {v} to a rational");
    // `Display` for f64 prints the shortest round-trip digits and never uses an exponent.
    let text = format!("{v}");
    let (neg, digits) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.as_str()),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    let mut num = rug::Integer::from_str_radix(&format!("{int_part}{frac_part}"), 10)
        .expect("f64 display is a decimal literal");
    if neg {
        num = -num;
    }
    let den = rug::Integer::from(rug::Integer::u_pow_u(10, frac_part.len() as u32));
    Rational::from((num, den))
}

/// Rising factorial `(x)_n = x (x+1) ... (x+n-1)`.
pub fn pochhammer<S: Scalar>(x: &S, n: usize) -> S {
    let ctx = x.ctx();
    let mut acc = S::one(ctx);
    for i in 0..n {
        acc = acc * (x.clone() + S::from_i64(i as i64, ctx));
    }
    acc
}

/// `n!` in the scalar type.
pub fn factorial<S: Scalar>(n: usize, ctx: S::Ctx) -> S {
    pochhammer(&S::one(ctx), n)
}

/// Working precision for extended-precision recurrences.
///
/// Reads `BD_FACTOR_PRECISION_BITS` and falls back to 256 bits.
pub fn extended_precision_bits() -> u32 {
    std::env::var("BD_FACTOR_PRECISION_BITS")
        .ok()
        .and_then(|v| v.trim().parse::<u32>().ok())
        .filter(|&bits| bits >= 53)
        .unwrap_or(256)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_conversion_is_the_short_literal() {
        assert_eq!(decimal_rational(0.3), Rational::from((3, 10)));
        assert_eq!(decimal_rational(-1.25), Rational::from((-5, 4)));
        assert_eq!(decimal_rational(2.0), Rational::from(2));
        assert_eq!(decimal_rational(1e-5), Rational::from((1, 100_000)));
    }

    #[test]
    fn pochhammer_and_factorial() {
        assert_eq!(pochhammer(&3.0f64, 0), 1.0);
        assert_eq!(pochhammer(&3.0f64, 3), 60.0);
        let half = Rational::from((1, 2));
        assert_eq!(pochhammer(&half, 2), Rational::from((3, 4)));
        assert_eq!(factorial::<Rational>(5, ()), Rational::from(120));
    }

    #[test]
    fn float_context_is_precision() {
        let x = <Float as Scalar>::from_f64(0.5, 200);
        assert_eq!(x.ctx(), 200);
        assert_eq!(<Float as Scalar>::ratio(1, 3, 100).prec(), 100);
    }
}
