//! Numeric policy: exact rationals for checkers and oracles, binary64 for the
//! LP engines. Everything that has to work in both worlds is generic over
//! [`Scalar`].

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Arbitrary-precision rational in canonical form.
pub type Rat = BigRational;

/// Absolute tolerance used on constraint slacks in float mode.
pub const FLOAT_SLACK_TOL: f64 = 1e-9;

pub trait Scalar:
    Clone
    + fmt::Debug
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    const EXACT: bool;

    fn from_rat(r: &Rat) -> Self;
    fn from_f64(x: f64) -> Self;
    fn to_f64(&self) -> f64;
    fn to_num(&self) -> Num;

    /// Slack below which a constraint still counts as satisfied.
    fn slack_tol() -> Self;

    /// Smallest magnitude accepted as a pivot element.
    fn pivot_tol() -> Self;

    fn from_usize(n: usize) -> Self {
        Self::from_rat(&Rat::from_integer(BigInt::from(n)))
    }

    fn abs_val(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
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

    /// `self >= -slack_tol()`.
    fn is_nonneg_tol(&self) -> bool {
        *self >= -Self::slack_tol()
    }

    /// `self > slack_tol()`.
    fn is_pos_tol(&self) -> bool {
        *self > Self::slack_tol()
    }
}

impl Scalar for Rat {
    const EXACT: bool = true;

    fn from_rat(r: &Rat) -> Self {
        r.clone()
    }

    fn from_f64(x: f64) -> Self {
        Rat::from_float(x).expect("finite float")
    }

    fn to_f64(&self) -> f64 {
        rat_to_f64(self)
    }

    fn to_num(&self) -> Num {
        Num::Exact(self.clone())
    }

    fn slack_tol() -> Self {
        Rat::zero()
    }

    fn pivot_tol() -> Self {
        Rat::zero()
    }

    fn abs_val(&self) -> Self {
        self.abs()
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_rat(r: &Rat) -> Self {
        rat_to_f64(r)
    }

    fn from_f64(x: f64) -> Self {
        x
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn to_num(&self) -> Num {
        Num::Float(*self)
    }

    fn slack_tol() -> Self {
        FLOAT_SLACK_TOL
    }

    fn pivot_tol() -> Self {
        1e-11
    }

    fn from_usize(n: usize) -> Self {
        n as f64
    }

    fn abs_val(&self) -> Self {
        self.abs()
    }
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    match ToPrimitive::to_f64(r) {
        Some(x) => x,
        None => {
            // numerator/denominator overflowed f64; divide as big ints.
            let n = r.numer().to_f64().unwrap_or(f64::NAN);
            let d = r.denom().to_f64().unwrap_or(f64::NAN);
            n / d
        }
    }
}

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Parses `"p/q"`, integers and decimal literals (with optional exponent)
/// into an exact rational.
pub fn parse_rat(text: &str) -> Result<Rat> {
    let s = text.trim();
    if s.is_empty() {
        return Err(Error::Parse(format!("empty number {text:?}")));
    }
    if let Some((p, q)) = s.split_once('/') {
        let p = BigInt::from_str(p.trim())
            .map_err(|_| Error::Parse(format!("bad numerator in {text:?}")))?;
        let q = BigInt::from_str(q.trim())
            .map_err(|_| Error::Parse(format!("bad denominator in {text:?}")))?;
        if q.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {text:?}")));
        }
        return Ok(Rat::new(p, q));
    }
    parse_decimal(s).ok_or_else(|| Error::Parse(format!("not a number: {text:?}")))
}

fn parse_decimal(s: &str) -> Option<Rat> {
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((a, b)) => (a, b),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let all_digits = format!("{int_part}{frac_part}");
    let mut value = Rat::from_integer(BigInt::from_str(&all_digits).ok()?);
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    if scale >= 0 {
        value *= Rat::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= Rat::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if negative { -value } else { value })
}

/// Reads a JSON number or string into an exact rational. JSON numbers are
/// taken at their printed decimal value, so `0.1` becomes `1/10`.
pub fn rat_from_json(value: &serde_json::Value) -> Result<Rat> {
    match value {
        serde_json::Value::Number(n) => parse_rat(&n.to_string()),
        serde_json::Value::String(s) => parse_rat(s),
        other => Err(Error::Parse(format!("expected number or \"p/q\" string, got {other}"))),
    }
}

/// Rounds to 12 significant digits, the precision used for all printed output.
pub fn sig12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// A reported number: exact when it came out of rational arithmetic.
#[derive(Clone, Debug, PartialEq)]
pub enum Num {
    Exact(Rat),
    Float(f64),
}

impl Num {
    pub fn to_f64(&self) -> f64 {
        match self {
            Num::Exact(r) => rat_to_f64(r),
            Num::Float(x) => *x,
        }
    }

    pub fn exact(&self) -> Option<&Rat> {
        match self {
            Num::Exact(r) => Some(r),
            Num::Float(_) => None,
        }
    }
}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Num::Exact(r) => write!(f, "{r}"),
            Num::Float(x) => write!(f, "{}", sig12(*x)),
        }
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(None)?;
        let v = self.to_f64();
        if v.is_finite() {
            map.serialize_entry("value", &sig12(v))?;
        } else {
            map.serialize_entry("value", &format!("{v}"))?;
        }
        if let Num::Exact(r) = self {
            map.serialize_entry("exact", &r.to_string())?;
        }
        map.end()
    }
}
