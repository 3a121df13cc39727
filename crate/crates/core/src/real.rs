//! Scalar backends: `f64`, binary floats of chosen precision, and exact rationals.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use dashu_base::SquareRoot;
use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use dashu_int::{IBig, UBig};
use dashu_ratio::RBig;

use crate::error::{Error, Result};

pub use dashu_ratio::RBig as Rational;

pub trait Real:
    Clone
    + PartialOrd
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// `precision` is in bits and ignored by fixed or exact backends.
    fn from_f64_prec(v: f64, precision: usize) -> Self;
    fn from_ratio_prec(r: &RBig, precision: usize) -> Self;
    /// Constant with the precision of `self`.
    fn lift(&self, v: f64) -> Self;
    fn lift_ratio(&self, r: &RBig) -> Self;
    fn to_f64(&self) -> f64;
    /// Relative rounding error of one operation; 0 for exact arithmetic.
    fn unit_roundoff(&self) -> f64;
    fn to_decimal(&self, digits: usize) -> String;

    fn abs(&self) -> Self {
        if self.is_negative() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    fn is_negative(&self) -> bool {
        *self < self.lift(0.0)
    }

    fn is_exact(&self) -> bool {
        self.unit_roundoff() == 0.0
    }

    fn recip(&self) -> Self {
        self.lift(1.0) / self.clone()
    }

    fn powi(&self, n: u32) -> Self {
        let mut acc = self.lift(1.0);
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc * base.clone();
            }
            base = base.clone() * base;
            n >>= 1;
        }
        acc
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl Real for f64 {
    fn from_f64_prec(v: f64, _: usize) -> Self {
        v
    }
    fn from_ratio_prec(r: &RBig, _: usize) -> Self {
        ratio_to_f64(r)
    }
    fn lift(&self, v: f64) -> Self {
        v
    }
    fn lift_ratio(&self, r: &RBig) -> Self {
        ratio_to_f64(r)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn unit_roundoff(&self) -> f64 {
        f64::EPSILON / 2.0
    }
    fn to_decimal(&self, _: usize) -> String {
        format!("{self:e}")
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
}

fn ratio_to_f64(r: &RBig) -> f64 {
    r.to_f64().value()
}

type Float = FBig<HalfEven, 2>;

/// Binary floating point with a fixed number of significand bits.
#[derive(Clone, Debug, PartialEq, PartialOrd)]
pub struct Hp(Float);

impl Hp {
    pub fn precision(&self) -> usize {
        self.0.precision()
    }

    pub fn sqrt(&self) -> Hp {
        Hp(self.0.sqrt())
    }

    /// `self^e` for `self > 0`.
    pub fn powf(&self, e: &Hp) -> Hp {
        Hp(self.0.powf(&e.0))
    }

    pub fn inner(&self) -> &FBig<HalfEven, 2> {
        &self.0
    }

    /// Exact value as a rational.
    pub fn to_ratio(&self) -> RBig {
        RBig::try_from(self.0.clone()).expect("finite float")
    }
}

macro_rules! hp_binop {
    ($tr:ident, $m:ident) => {
        impl $tr for Hp {
            type Output = Hp;
            fn $m(self, o: Hp) -> Hp {
                Hp($tr::$m(&self.0, &o.0))
            }
        }
    };
}
hp_binop!(Add, add);
hp_binop!(Sub, sub);
hp_binop!(Mul, mul);
hp_binop!(Div, div);

impl Neg for Hp {
    type Output = Hp;
    fn neg(self) -> Hp {
        Hp(-self.0)
    }
}

impl Real for Hp {
    fn from_f64_prec(v: f64, precision: usize) -> Self {
        Hp(Float::try_from(v)
            .expect("finite f64")
            .with_precision(precision)
            .value())
    }
    fn from_ratio_prec(r: &RBig, precision: usize) -> Self {
        Hp(r.to_float::<HalfEven, 2>(precision).value())
    }
    fn lift(&self, v: f64) -> Self {
        Self::from_f64_prec(v, self.precision())
    }
    fn lift_ratio(&self, r: &RBig) -> Self {
        Self::from_ratio_prec(r, self.precision())
    }
    fn to_f64(&self) -> f64 {
        self.0.to_f64().value()
    }
    fn unit_roundoff(&self) -> f64 {
        2f64.powi(-(self.precision() as i32))
    }
    fn to_decimal(&self, digits: usize) -> String {
        decimal_string(&self.to_ratio(), digits)
    }
}

impl Real for RBig {
    fn from_f64_prec(v: f64, _: usize) -> Self {
        RBig::try_from(v).expect("finite f64")
    }
    fn from_ratio_prec(r: &RBig, _: usize) -> Self {
        r.clone()
    }
    fn lift(&self, v: f64) -> Self {
        RBig::try_from(v).expect("finite f64")
    }
    fn lift_ratio(&self, r: &RBig) -> Self {
        r.clone()
    }
    fn to_f64(&self) -> f64 {
        ratio_to_f64(self)
    }
    fn unit_roundoff(&self) -> f64 {
        0.0
    }
    fn to_decimal(&self, digits: usize) -> String {
        decimal_string(self, digits)
    }
}

/// Plain positional decimal with `digits` significant digits, rounded to nearest.
pub fn decimal_string(r: &RBig, digits: usize) -> String {
    let digits = digits.max(1);
    let neg = r < &RBig::ZERO;
    let a = if neg { -r.clone() } else { r.clone() };
    if a == RBig::ZERO {
        return "0".into();
    }
    // exponent e with 10^e <= a < 10^(e+1)
    let mut e = (a.to_f64().value().log10().floor()) as i64;
    let pow10 = |k: i64| -> RBig {
        if k >= 0 {
            RBig::from(UBig::from(10u8).pow(k as usize))
        } else {
            RBig::ONE / RBig::from(UBig::from(10u8).pow((-k) as usize))
        }
    };
    while a >= pow10(e + 1) {
        e += 1;
    }
    while a < pow10(e) {
        e -= 1;
    }
    let frac_digits = digits as i64 - 1 - e;
    let scaled = a * pow10(frac_digits);
    let n: IBig = (scaled + RBig::from_parts(IBig::ONE, UBig::from(2u8))).floor();
    let mut s = n.to_string();
    if frac_digits > 0 {
        let fd = frac_digits as usize;
        if s.len() <= fd {
            s = "0".repeat(fd + 1 - s.len()) + &s;
        }
        let (int, frac) = s.split_at(s.len() - fd);
        let frac = frac.trim_end_matches('0');
        s = if frac.is_empty() {
            int.to_string()
        } else {
            format!("{int}.{frac}")
        };
    } else {
        s += &"0".repeat((-frac_digits) as usize);
    }
    if neg {
        format!("-{s}")
    } else {
        s
    }
}

/// Parses `p/q`, a decimal literal such as `1.25` or `-3e-2`, or an integer, exactly.
pub fn parse_rational(s: &str) -> Result<RBig> {
    let s = s.trim();
    let bad = || Error::Parse(format!("\"{s}\" is not a rational literal"));
    if let Some((p, q)) = s.split_once('/') {
        let p = parse_rational(p)?;
        let q = parse_rational(q)?;
        if q == RBig::ZERO {
            return Err(Error::Parse(format!("\"{s}\" has a zero denominator")));
        }
        return Ok(p / q);
    }
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i64>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (int, frac) = mant.split_once('.').unwrap_or((mant, ""));
    if int.is_empty() && frac.is_empty()
        || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit())
    {
        return Err(bad());
    }
    let digits = format!("{int}{frac}");
    let n = UBig::from_str(if digits.is_empty() { "0" } else { &digits }).map_err(|_| bad())?;
    let e = exp - frac.len() as i64;
    let mag = if e >= 0 {
        RBig::from(n * UBig::from(10u8).pow(e as usize))
    } else {
        RBig::from_parts(IBig::from(n), UBig::from(10u8).pow((-e) as usize))
    };
    Ok(if neg { -mag } else { mag })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_literals() {
        assert_eq!(parse_rational("3/2").unwrap(), RBig::from_parts(3.into(), 2u8.into()));
        assert_eq!(parse_rational("1.5").unwrap(), parse_rational("3/2").unwrap());
        assert_eq!(parse_rational("-25e-2").unwrap(), parse_rational("-1/4").unwrap());
        assert_eq!(parse_rational("2").unwrap(), RBig::from(2u8));
        assert!(parse_rational("x").is_err());
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational(".").is_err());
    }

    #[test]
    fn decimal_output() {
        let third = parse_rational("1/3").unwrap();
        assert_eq!(decimal_string(&third, 5), "0.33333");
        assert_eq!(decimal_string(&parse_rational("2").unwrap(), 10), "2");
        assert_eq!(decimal_string(&parse_rational("-2/3").unwrap(), 3), "-0.667");
        assert_eq!(decimal_string(&parse_rational("12345").unwrap(), 3), "12300");
        let phi = (Hp::from_f64_prec(5.0, 128).sqrt() + Hp::from_f64_prec(1.0, 128))
            / Hp::from_f64_prec(2.0, 128);
        assert_eq!(phi.to_decimal(30), "1.61803398874989484820458683437");
    }

    #[test]
    fn hp_keeps_precision() {
        let a = Hp::from_f64_prec(1.0, 200);
        let b = a.lift(3.0);
        let c = a / b;
        assert_eq!(c.precision(), 200);
        assert!(c.unit_roundoff() < 1e-59);
        assert!((c.to_f64() - 1.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn powi_matches() {
        assert_eq!(1.5f64.powi(0), 1.0);
        assert_eq!(Real::powi(&1.5f64, 3), 3.375);
        let r = parse_rational("3/2").unwrap();
        assert_eq!(Real::powi(&r, 3), parse_rational("27/8").unwrap());
    }
}
