//! Numeric abstraction shared by the LP core and the lifting code.
//!
//! Everything downstream of grounding is generic over [`Scalar`], so the same
//! simplex and color-passing code runs on exact rationals (golden tests,
//! exact soundness checks) and on `f64`/`f32` (larger instances).

use std::fmt::{Debug, Display};
use std::hash::Hash;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};

/// Exact rational number used by the knowledge base and the grounder.
pub type Rational = BigRational;

/// Hashable, totally ordered identity of a scalar value.
///
/// Two scalars have equal keys iff they are equal as numbers. Used for
/// coefficient colors and for matching mirrored constraint rows.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScalarKey {
    Bits(u64),
    Exact(Rational),
}

pub trait Scalar:
    Clone
    + Debug
    + Display
    + PartialOrd
    + Signed
    + FromPrimitive
    + Send
    + Sync
    + 'static
{
    /// `true` when arithmetic is exact and comparisons need no tolerance.
    const EXACT: bool;

    /// Magnitude below which a value counts as zero in pivoting decisions.
    fn epsilon() -> Self;

    fn from_rational(value: &Rational) -> Self;

    fn to_f64(&self) -> f64;

    fn key(&self) -> ScalarKey;

    /// Rounds to `digits` decimal places (half away from zero).
    fn round_to_decimals(&self, digits: u32) -> Self;

    fn is_negligible(&self) -> bool {
        self.abs() <= Self::epsilon()
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn epsilon() -> Self {
        1e-9
    }

    fn from_rational(value: &Rational) -> Self {
        rational_to_f64(value)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn key(&self) -> ScalarKey {
        // +0.0 folds -0.0 into 0.0
        ScalarKey::Bits((*self + 0.0).to_bits())
    }

    fn round_to_decimals(&self, digits: u32) -> Self {
        let scale = 10f64.powi(digits as i32);
        (self * scale).round() / scale
    }
}

impl Scalar for f32 {
    const EXACT: bool = false;

    fn epsilon() -> Self {
        1e-5
    }

    fn from_rational(value: &Rational) -> Self {
        rational_to_f64(value) as f32
    }

    fn to_f64(&self) -> f64 {
        *self as f64
    }

    fn key(&self) -> ScalarKey {
        ScalarKey::Bits(((*self + 0.0) as f64).to_bits())
    }

    fn round_to_decimals(&self, digits: u32) -> Self {
        let scale = 10f32.powi(digits as i32);
        (self * scale).round() / scale
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn epsilon() -> Self {
        Rational::zero()
    }

    fn from_rational(value: &Rational) -> Self {
        value.clone()
    }

    fn to_f64(&self) -> f64 {
        rational_to_f64(self)
    }

    fn key(&self) -> ScalarKey {
        ScalarKey::Exact(self.clone())
    }

    fn round_to_decimals(&self, digits: u32) -> Self {
        let scale = BigInt::from(10u32).pow(digits);
        let scaled = self * Rational::from_integer(scale.clone());
        let half = Rational::new(BigInt::one(), BigInt::from(2));
        let rounded = if scaled.is_negative() {
            -((-scaled) + half).floor()
        } else {
            (scaled + half).floor()
        };
        rounded / Rational::from_integer(scale)
    }

    fn is_negligible(&self) -> bool {
        self.is_zero()
    }
}

pub fn rational_to_f64(value: &Rational) -> f64 {
    ToPrimitive::to_f64(value).unwrap_or_else(|| {
        let numer = value.numer().to_f64().unwrap_or(f64::NAN);
        let denom = value.denom().to_f64().unwrap_or(f64::NAN);
        numer / denom
    })
}

/// Parses a decimal literal such as `-0.021`, `4` or `1.5e3` exactly.
pub fn parse_decimal(text: &str) -> Option<Rational> {
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(pos) => (&text[..pos], text[pos + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all_digits = format!("{int_part}{frac_part}");
    let numer: BigInt = all_digits.parse().ok()?;
    let shift = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    let mut value = if shift >= 0 {
        Rational::from_integer(numer * ten.pow(shift as u32))
    } else {
        Rational::new(numer, ten.pow((-shift) as u32))
    };
    if negative {
        value = -value;
    }
    Some(value)
}

/// Formats a rational as a terminating decimal when possible, else `p/q`.
pub fn format_rational(value: &Rational) -> String {
    if value.is_integer() {
        return value.numer().to_string();
    }
    let mut denom = value.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let (mut twos, mut fives) = (0u32, 0u32);
    while denom.is_even() {
        denom /= &two;
        twos += 1;
    }
    while (&denom % &five).is_zero() {
        denom /= &five;
        fives += 1;
    }
    if !denom.is_one() {
        return format!("{}/{}", value.numer(), value.denom());
    }
    let places = twos.max(fives);
    let scaled = value * Rational::from_integer(BigInt::from(10u32).pow(places));
    let digits = scaled.to_integer().abs().to_string();
    let places = places as usize;
    let padded = if digits.len() <= places {
        format!("{}{}", "0".repeat(places - digits.len() + 1), digits)
    } else {
        digits
    };
    let (int_part, frac_part) = padded.split_at(padded.len() - places);
    let sign = if value.is_negative() { "-" } else { "" };
    format!("{sign}{int_part}.{frac_part}")
}

/// Shortest round-trip decimal for any scalar: exact decimals stay exact,
/// everything else goes through `f64`'s shortest representation.
pub fn format_scalar<T: Scalar>(value: &T) -> String {
    if let ScalarKey::Exact(r) = value.key() {
        let exact = format_rational(&r);
        if !exact.contains('/') {
            return exact;
        }
        return format_f64(rational_to_f64(&r));
    }
    format_f64(value.to_f64())
}

pub fn format_f64(value: f64) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    format!("{value}")
}
