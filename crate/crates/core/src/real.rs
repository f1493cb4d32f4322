//! Fixed-precision binary floating point used for every non-integer quantity.
//!
//! [`Real`] wraps an `astro_float::BigFloat` carried at [`PRECISION_BITS`]
//! bits (about 57 significant decimal digits). All arithmetic rounds to
//! nearest-even at that precision, so evaluation is deterministic and
//! independent of thread or call order.
//!
//! Decimal conversion is exact on output (the binary value is expanded to its
//! full decimal representation before rounding) and correctly rounded on
//! input for literals of up to ~57 significant digits.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use astro_float::{BigFloat, Consts, RoundingMode, Sign};
use num_bigint::{BigInt, BigUint, Sign as BigSign};
use num_traits::{Pow, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Working precision in bits.
pub const PRECISION_BITS: usize = 192;

/// Significant digits used when rendering values for humans and CSV files.
pub const DISPLAY_DIGITS: usize = 30;

/// Significant digits used in JSON documents.
pub const SERIAL_DIGITS: usize = 45;

const RM: RoundingMode = RoundingMode::ToEven;

thread_local! {
    static CONSTS: RefCell<Consts> =
        RefCell::new(Consts::new().expect("allocate astro-float constant cache"));
}

fn with_consts<T>(f: impl FnOnce(&mut Consts) -> T) -> T {
    CONSTS.with(|cc| f(&mut cc.borrow_mut()))
}

#[derive(Clone)]
pub struct Real(BigFloat);

impl Real {
    pub fn zero() -> Self {
        Real(BigFloat::from_u64(0, PRECISION_BITS))
    }

    pub fn one() -> Self {
        Real(BigFloat::from_u64(1, PRECISION_BITS))
    }

    pub fn from_u64(v: u64) -> Self {
        Real(BigFloat::from_u64(v, PRECISION_BITS))
    }

    pub fn from_i64(v: i64) -> Self {
        Real(BigFloat::from_i64(v, PRECISION_BITS))
    }

    /// Converts an integer, rounding once to working precision.
    pub fn from_bigint(v: &BigInt) -> Self {
        let (sign, mag) = v.clone().into_parts();
        let mut r = Self::from_biguint(&mag);
        if sign == BigSign::Minus {
            r.0.inv_sign();
        }
        r
    }

    pub fn from_biguint(v: &BigUint) -> Self {
        if v.is_zero() {
            return Self::zero();
        }
        let words = v.to_u64_digits();
        let exponent = (words.len() * 64) as i32;
        let mut f = BigFloat::from_words(&words, Sign::Pos, exponent);
        f.set_precision(PRECISION_BITS, RM)
            .expect("set precision of integer conversion");
        Real(f)
    }

    /// The ratio `num / den` of two small integers.
    pub fn ratio(num: i64, den: i64) -> Self {
        Self::from_i64(num) / Self::from_i64(den)
    }

    pub fn pi() -> Self {
        Real(with_consts(|cc| cc.pi(PRECISION_BITS, RM)))
    }

    /// Parses a decimal literal such as `-0.02651010067`, `4.188653689e7` or
    /// `-1.197477259E+5`.
    pub fn parse_decimal(s: &str) -> Result<Self> {
        let (mantissa, exp10) = split_decimal(s)?;
        if mantissa.is_zero() {
            return Ok(Self::zero());
        }
        if exp10 >= 0 {
            let scaled = mantissa * BigInt::from(10u32).pow(exp10 as u32);
            Ok(Self::from_bigint(&scaled))
        } else {
            let den = BigInt::from(10u32).pow((-exp10) as u32);
            Ok(Self::from_bigint(&mantissa) / Self::from_bigint(&den))
        }
    }

    pub fn sqrt(&self) -> Self {
        Real(self.0.sqrt(PRECISION_BITS, RM))
    }

    pub fn exp(&self) -> Self {
        Real(with_consts(|cc| self.0.exp(PRECISION_BITS, RM, cc)))
    }

    pub fn ln(&self) -> Self {
        Real(with_consts(|cc| self.0.ln(PRECISION_BITS, RM, cc)))
    }

    pub fn log2(&self) -> Self {
        Real(with_consts(|cc| self.0.log2(PRECISION_BITS, RM, cc)))
    }

    /// `self^e` for a real exponent; `self` must be positive.
    pub fn powf(&self, e: &Real) -> Self {
        Real(with_consts(|cc| self.0.pow(&e.0, PRECISION_BITS, RM, cc)))
    }

    pub fn powi(&self, n: usize) -> Self {
        Real(self.0.powi(n, PRECISION_BITS, RM))
    }

    pub fn recip(&self) -> Self {
        Real(self.0.reciprocal(PRECISION_BITS, RM))
    }

    pub fn abs(&self) -> Self {
        Real(self.0.abs())
    }

    pub fn square(&self) -> Self {
        self * self
    }

    pub fn is_finite(&self) -> bool {
        !(self.0.is_nan() || self.0.is_inf())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Strictly greater than zero (false for NaN).
    pub fn is_positive(&self) -> bool {
        self.is_finite() && !self.0.is_zero() && self.0.is_positive()
    }

    /// Strictly less than zero (false for NaN).
    pub fn is_negative(&self) -> bool {
        self.is_finite() && !self.0.is_zero() && self.0.is_negative()
    }

    /// Returns `self` or a domain error naming `what` when the value is NaN or
    /// infinite.
    pub fn finite_or(self, what: &str) -> Result<Self> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(Error::domain(format!("{what} is not a finite real number")))
        }
    }

    /// `⌊self⌋` as an exact integer.
    pub fn floor_to_bigint(&self) -> Option<BigInt> {
        let (mag, shift, negative) = self.binary_parts()?;
        let floor_mag = if shift >= 0 {
            mag << (shift as usize)
        } else {
            let s = (-shift) as usize;
            let q = &mag >> s;
            if negative && (q.clone() << s) != mag {
                q + 1u32
            } else {
                q
            }
        };
        Some(if negative {
            -BigInt::from(floor_mag)
        } else {
            BigInt::from(floor_mag)
        })
    }

    /// Approximate conversion for logging and plotting.
    pub fn to_f64(&self) -> f64 {
        if !self.is_finite() {
            return f64::NAN;
        }
        self.to_sci_string(20).parse().unwrap_or(f64::NAN)
    }

    /// Returns `|mantissa|`, the binary exponent shift and the sign such that
    /// `self = ±mantissa * 2^shift`.
    fn binary_parts(&self) -> Option<(BigUint, i64, bool)> {
        if self.0.is_zero() {
            return Some((BigUint::zero(), 0, false));
        }
        let (words, _, sign, exponent, _) = self.0.as_raw_parts()?;
        let bytes: Vec<u8> = words.iter().flat_map(|w| w.to_le_bytes()).collect();
        let mag = BigUint::from_bytes_le(&bytes);
        let shift = exponent as i64 - 64 * words.len() as i64;
        Some((mag, shift, sign == Sign::Neg))
    }

    /// Renders the value in scientific notation with `digits` significant
    /// digits, rounding the exact binary value half-to-even.
    ///
    /// The layout is `[-]d.ddd…e[+-]x`; zero renders as `0.000…e+0`.
    pub fn to_sci_string(&self, digits: usize) -> String {
        assert!(digits >= 1);
        if self.0.is_nan() {
            return "NaN".to_owned();
        }
        if self.0.is_inf() {
            return if self.0.is_negative() { "-inf" } else { "inf" }.to_owned();
        }
        let (mag, shift, negative) = self.binary_parts().expect("finite value");
        if mag.is_zero() {
            return format!("0.{}e+0", "0".repeat(digits - 1));
        }
        // Exact decimal expansion: value = int_digits * 10^exp10.
        let (int_digits, exp10) = if shift >= 0 {
            ((mag << (shift as usize)).to_string(), 0i64)
        } else {
            let k = (-shift) as u32;
            ((mag * BigUint::from(5u32).pow(k)).to_string(), -(k as i64))
        };
        let (rounded, carry) = round_digit_string(&int_digits, digits);
        let lead_exp = exp10 + int_digits.len() as i64 - 1 + carry as i64;
        let sign = if negative { "-" } else { "" };
        let esign = if lead_exp < 0 { '-' } else { '+' };
        if digits == 1 {
            format!("{sign}{rounded}e{esign}{}", lead_exp.abs())
        } else {
            format!(
                "{sign}{}.{}e{esign}{}",
                &rounded[..1],
                &rounded[1..],
                lead_exp.abs()
            )
        }
    }
}

/// Rounds a string of decimal digits to `digits` significant digits using
/// round-half-even. Returns the digits and whether rounding carried into a
/// new leading digit.
fn round_digit_string(all: &str, digits: usize) -> (String, bool) {
    let bytes = all.as_bytes();
    if bytes.len() <= digits {
        let mut s = all.to_owned();
        s.extend(std::iter::repeat_n('0', digits - bytes.len()));
        return (s, false);
    }
    let (head, tail) = bytes.split_at(digits);
    let round_up = match tail[0].cmp(&b'5') {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => {
            tail[1..].iter().any(|&d| d != b'0') || (head[digits - 1] - b'0') % 2 == 1
        }
    };
    let mut out: Vec<u8> = head.to_vec();
    if !round_up {
        return (String::from_utf8(out).unwrap(), false);
    }
    for d in out.iter_mut().rev() {
        if *d == b'9' {
            *d = b'0';
        } else {
            *d += 1;
            return (String::from_utf8(out).unwrap(), false);
        }
    }
    // 999… rounded up to 1000…
    out.insert(0, b'1');
    out.pop();
    (String::from_utf8(out).unwrap(), true)
}

/// Splits a decimal literal into an integer mantissa and power of ten.
fn split_decimal(s: &str) -> Result<(BigInt, i64)> {
    let bad = || Error::Parse(format!("invalid decimal literal {s:?}"));
    let t = s.trim();
    let (body, exp10) = match t.find(['e', 'E']) {
        Some(pos) => {
            let e: i64 = t[pos + 1..].parse().map_err(|_| bad())?;
            (&t[..pos], e)
        }
        None => (t, 0),
    };
    let (negative, body) = match body.as_bytes().first() {
        Some(b'-') => (true, &body[1..]),
        Some(b'+') => (false, &body[1..]),
        _ => (false, body),
    };
    let (int_part, frac_part) = match body.find('.') {
        Some(pos) => (&body[..pos], &body[pos + 1..]),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let mantissa: BigInt = digits.parse().map_err(|_| bad())?;
    let mantissa = if negative { -mantissa } else { mantissa };
    Ok((mantissa, exp10 - frac_part.len() as i64))
}

impl FromStr for Real {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Real::parse_decimal(s)
    }
}

impl From<u64> for Real {
    fn from(v: u64) -> Self {
        Real::from_u64(v)
    }
}

impl From<i64> for Real {
    fn from(v: i64) -> Self {
        Real::from_i64(v)
    }
}

impl From<&BigInt> for Real {
    fn from(v: &BigInt) -> Self {
        Real::from_bigint(v)
    }
}

impl PartialEq for Real {
    fn eq(&self, other: &Self) -> bool {
        self.0 == other.0
    }
}

impl PartialOrd for Real {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.0.partial_cmp(&other.0)
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = f.precision().unwrap_or(DISPLAY_DIGITS).max(1);
        f.write_str(&self.to_sci_string(digits))
    }
}

impl fmt::Debug for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Real({})", self.to_sci_string(DISPLAY_DIGITS))
    }
}

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_sci_string(SERIAL_DIGITS))
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Real::parse_decimal(&s).map_err(serde::de::Error::custom)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $inner:ident) => {
        impl $trait<&Real> for &Real {
            type Output = Real;
            fn $method(self, rhs: &Real) -> Real {
                Real(self.0.$inner(&rhs.0, PRECISION_BITS, RM))
            }
        }
        impl $trait<Real> for Real {
            type Output = Real;
            fn $method(self, rhs: Real) -> Real {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Real> for Real {
            type Output = Real;
            fn $method(self, rhs: &Real) -> Real {
                (&self).$method(rhs)
            }
        }
        impl $trait<Real> for &Real {
            type Output = Real;
            fn $method(self, rhs: Real) -> Real {
                self.$method(&rhs)
            }
        }
    };
}

binop!(Add, add, add);
binop!(Sub, sub, sub);
binop!(Mul, mul, mul);
binop!(Div, div, div);

impl Neg for Real {
    type Output = Real;
    fn neg(mut self) -> Real {
        self.0.inv_sign();
        self
    }
}

impl Neg for &Real {
    type Output = Real;
    fn neg(self) -> Real {
        -self.clone()
    }
}

impl std::iter::Sum for Real {
    fn sum<I: Iterator<Item = Real>>(iter: I) -> Real {
        iter.fold(Real::zero(), |acc, x| acc + x)
    }
}

impl<'a> std::iter::Sum<&'a Real> for Real {
    fn sum<I: Iterator<Item = &'a Real>>(iter: I) -> Real {
        iter.fold(Real::zero(), |acc, x| acc + x)
    }
}

/// Frequently used constants, computed once per thread.
pub mod consts {
    use super::Real;

    thread_local! {
        static CACHE: Cache = Cache::new();
    }

    struct Cache {
        pi: Real,
        sqrt3: Real,
        sqrt2: Real,
        exp_scale: Real,
    }

    impl Cache {
        fn new() -> Self {
            let pi = Real::pi();
            let exp_scale = Real::ratio(2, 3).sqrt() * &pi;
            Cache {
                sqrt3: Real::from_u64(3).sqrt(),
                sqrt2: Real::from_u64(2).sqrt(),
                pi,
                exp_scale,
            }
        }
    }

    pub fn pi() -> Real {
        CACHE.with(|c| c.pi.clone())
    }

    pub fn sqrt2() -> Real {
        CACHE.with(|c| c.sqrt2.clone())
    }

    pub fn sqrt3() -> Real {
        CACHE.with(|c| c.sqrt3.clone())
    }

    /// `√(2/3)·π`, the coefficient of `√n` in every exponent.
    pub fn exp_scale() -> Real {
        CACHE.with(|c| c.exp_scale.clone())
    }
}
