//! Exact rational arithmetic for inequality coefficients and bounds.
//!
//! [`Rational`] is a thin newtype over an arbitrary-precision reduced
//! fraction. It exists to pin down the crate's serialization convention —
//! rationals travel as strings `"p"` or `"p/q"` with the sign on the
//! numerator and `q > 0` — and to keep the exact-arithmetic surface small
//! and explicit. Floating point never enters through this type; conversion
//! to `f64` happens once, at the quantum-module boundary.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{Integer, One, Signed, ToPrimitive, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// An exact rational number, always stored in reduced form with a positive
/// denominator.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Rational(BigRational);

impl Rational {
    /// Builds `n / d`, reducing to lowest terms. Fails on `d = 0`.
    pub fn new(n: impl Into<BigInt>, d: impl Into<BigInt>) -> Result<Self> {
        let (n, d) = (n.into(), d.into());
        if d.is_zero() {
            return Err(Error::InvalidInput(format!(
                "rational with zero denominator: {n}/0"
            )));
        }
        Ok(Self(BigRational::new(n, d)))
    }

    /// Builds `n / d` from machine integers; panics on `d = 0`.
    ///
    /// Convenience constructor for literals in code and tests, where a zero
    /// denominator is a programming error rather than an input error.
    pub fn ratio(n: i64, d: i64) -> Self {
        assert!(d != 0, "rational literal with zero denominator");
        Self(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn zero() -> Self {
        Self(BigRational::zero())
    }

    pub fn one() -> Self {
        Self(BigRational::one())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    /// True when the denominator is 1.
    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn abs(&self) -> Self {
        Self(self.0.abs())
    }

    /// Numerator of the reduced fraction (carries the sign).
    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    /// Denominator of the reduced fraction (always positive).
    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    /// Nearest-`f64` conversion; the single sanctioned exit to floating
    /// point.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }
}

/// Least common multiple of the denominators of `values` (1 when empty).
///
/// Multiplying a set of rationals by this factor clears all fractions; the
/// CLI's `--scale-integer` display option and the canonicalizer's integer
/// fast path both rely on it.
pub fn lcm_of_denominators<'a, I>(values: I) -> BigInt
where
    I: IntoIterator<Item = &'a Rational>,
{
    values
        .into_iter()
        .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()))
}

/// Shorthand for [`Rational::ratio`], the code/test literal constructor.
pub fn rat(n: i64, d: i64) -> Rational {
    Rational::ratio(n, d)
}

impl From<i64> for Rational {
    fn from(n: i64) -> Self {
        Self(BigRational::from_integer(BigInt::from(n)))
    }
}

impl From<i32> for Rational {
    fn from(n: i32) -> Self {
        Self(BigRational::from_integer(BigInt::from(n)))
    }
}

impl From<BigInt> for Rational {
    fn from(n: BigInt) -> Self {
        Self(BigRational::from_integer(n))
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational((self.0).$method(rhs.0))
            }
        }
        impl $trait<&Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational((self.0).$method(&rhs.0))
            }
        }
        impl $trait<Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational((&self.0).$method(rhs.0))
            }
        }
        impl $trait<&Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational((&self.0).$method(&rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-&self.0)
    }
}

impl AddAssign<&Rational> for Rational {
    fn add_assign(&mut self, rhs: &Rational) {
        self.0 += &rhs.0;
    }
}

impl AddAssign for Rational {
    fn add_assign(&mut self, rhs: Rational) {
        self.0 += rhs.0;
    }
}

impl SubAssign<&Rational> for Rational {
    fn sub_assign(&mut self, rhs: &Rational) {
        self.0 -= &rhs.0;
    }
}

impl SubAssign for Rational {
    fn sub_assign(&mut self, rhs: Rational) {
        self.0 -= rhs.0;
    }
}

impl MulAssign<&Rational> for Rational {
    fn mul_assign(&mut self, rhs: &Rational) {
        self.0 *= &rhs.0;
    }
}

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |acc, v| acc + v)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl FromStr for Rational {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let parse_int = |part: &str| -> Result<BigInt> {
            part.parse::<BigInt>().map_err(|e| {
                Error::InvalidInput(format!("bad rational literal {s:?}: {e}"))
            })
        };
        match s.split_once('/') {
            None => Ok(Self(BigRational::from_integer(parse_int(s)?))),
            Some((n, d)) => {
                let (n, d) = (parse_int(n)?, parse_int(d)?);
                if d.is_zero() {
                    return Err(Error::InvalidInput(format!(
                        "bad rational literal {s:?}: zero denominator"
                    )));
                }
                Ok(Self(BigRational::new(n, d)))
            }
        }
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

struct RationalVisitor;

impl Visitor<'_> for RationalVisitor {
    type Value = Rational;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a rational number as a string like \"3\" or \"-1/2\"")
    }

    fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Rational, E> {
        v.parse().map_err(|e| E::custom(format!("{e}")))
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        deserializer.deserialize_str(RationalVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduces_and_normalizes_sign() {
        let r = Rational::new(2, -4).unwrap();
        assert_eq!(r, rat(-1, 2));
        assert_eq!(r.to_string(), "-1/2");
        assert_eq!(r.numer(), &BigInt::from(-1));
        assert_eq!(r.denom(), &BigInt::from(2));
    }

    #[test]
    fn integer_display_omits_denominator() {
        assert_eq!(rat(6, 3).to_string(), "2");
        assert_eq!(Rational::from(-7).to_string(), "-7");
        assert!(rat(6, 3).is_integer());
        assert!(!rat(1, 3).is_integer());
    }

    #[test]
    fn zero_denominator_is_rejected() {
        assert!(Rational::new(1, 0).is_err());
        assert!("1/0".parse::<Rational>().is_err());
    }

    #[test]
    fn parses_both_literal_forms() {
        assert_eq!("3".parse::<Rational>().unwrap(), Rational::from(3));
        assert_eq!("-1/2".parse::<Rational>().unwrap(), rat(-1, 2));
        assert_eq!(" 4/6 ".parse::<Rational>().unwrap(), rat(2, 3));
        assert!("one".parse::<Rational>().is_err());
        assert!("1/2/3".parse::<Rational>().is_err());
    }

    #[test]
    fn arithmetic_is_exact() {
        let a = rat(1, 3);
        let b = rat(1, 6);
        assert_eq!(&a + &b, rat(1, 2));
        assert_eq!(&a - &b, rat(1, 6));
        assert_eq!(&a * &b, rat(1, 18));
        assert_eq!(&a / &b, Rational::from(2));
        assert_eq!(-&a, rat(-1, 3));
        let total: Rational = vec![rat(1, 2); 4].into_iter().sum();
        assert_eq!(total, Rational::from(2));
    }

    #[test]
    fn value_order() {
        assert!(rat(1, 3) < rat(1, 2));
        assert!(rat(-1, 2) < rat(-1, 3));
        assert!(rat(2, 4) == rat(1, 2));
    }

    #[test]
    fn serde_round_trip() {
        let vals = vec![rat(1, 2), rat(-3, 4), Rational::from(5)];
        let s = serde_json::to_string(&vals).unwrap();
        assert_eq!(s, r#"["1/2","-3/4","5"]"#);
        let back: Vec<Rational> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, vals);
        assert!(serde_json::from_str::<Rational>("0.5").is_err());
    }

    #[test]
    fn lcm_of_denominators_clears_fractions() {
        let vals = vec![rat(1, 2), rat(1, 3), Rational::from(4)];
        assert_eq!(lcm_of_denominators(&vals), BigInt::from(6));
        assert_eq!(lcm_of_denominators(&[]), BigInt::from(1));
    }

    #[test]
    fn float_conversion() {
        assert_eq!(rat(1, 2).to_f64(), 0.5);
        assert_eq!(rat(-3, 4).to_f64(), -0.75);
    }
}
