//! Numeric values that are either exact rationals or MPFR floats with an
//! explicit precision.
//!
//! Every moment, determinant and variance in the crate is a [`Scalar`]. Exact
//! values stay exact through `+ - * /`; as soon as a float enters an
//! expression the result is a float at that float's precision. Two floats of
//! different precision combine at the lower precision and the result carries
//! a downgrade flag.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use serde::de::{self, Deserializer};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default working precision for high-precision values.
pub const DEFAULT_PRECISION: u32 = 256;

/// Hard ceiling for any precision escalation loop.
pub const PRECISION_CEILING: u32 = 1 << 16;

#[derive(Clone, Debug)]
pub enum Scalar {
    Exact(Rational),
    Approx { value: Float, downgraded: bool },
}

/// Whether a value (or a whole sequence) lives on the exact path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalarKind {
    Exact,
    HighPrecision,
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar::Exact(Rational::new())
    }

    pub fn one() -> Self {
        Scalar::Exact(Rational::from(1))
    }

    pub fn int(v: i64) -> Self {
        Scalar::Exact(Rational::from(v))
    }

    /// Exact `num/den`. Panics on a zero denominator.
    pub fn ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Scalar::Exact(Rational::from((num, den)))
    }

    pub fn from_rational(q: Rational) -> Self {
        Scalar::Exact(q)
    }

    pub fn from_float(value: Float) -> Self {
        Scalar::Approx {
            value,
            downgraded: false,
        }
    }

    /// Exact value of an `f64` (every finite double is a dyadic rational).
    pub fn from_f64_exact(v: f64) -> Result<Self> {
        Rational::from_f64(v)
            .map(Scalar::Exact)
            .ok_or_else(|| Error::Parse(format!("non-finite value {v}")))
    }

    pub fn kind(&self) -> ScalarKind {
        match self {
            Scalar::Exact(_) => ScalarKind::Exact,
            Scalar::Approx { .. } => ScalarKind::HighPrecision,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Scalar::Exact(_))
    }

    pub fn as_rational(&self) -> Option<&Rational> {
        match self {
            Scalar::Exact(q) => Some(q),
            Scalar::Approx { .. } => None,
        }
    }

    /// Precision in bits, `None` for exact values.
    pub fn precision(&self) -> Option<u32> {
        match self {
            Scalar::Exact(_) => None,
            Scalar::Approx { value, .. } => Some(value.prec()),
        }
    }

    pub fn is_downgraded(&self) -> bool {
        matches!(
            self,
            Scalar::Approx {
                downgraded: true,
                ..
            }
        )
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Exact(q) => q.cmp0() == Ordering::Equal,
            Scalar::Approx { value, .. } => value.is_zero(),
        }
    }

    pub fn signum(&self) -> Ordering {
        match self {
            Scalar::Exact(q) => q.cmp0(),
            Scalar::Approx { value, .. } => value.cmp0().unwrap_or(Ordering::Equal),
        }
    }

    pub fn is_positive(&self) -> bool {
        self.signum() == Ordering::Greater
    }

    /// Value rounded to a float of `prec` bits.
    pub fn to_float(&self, prec: u32) -> Float {
        match self {
            Scalar::Exact(q) => Float::with_val(prec, q),
            Scalar::Approx { value, .. } => Float::with_val(prec, value),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Exact(q) => q.to_f64(),
            Scalar::Approx { value, .. } => value.to_f64(),
        }
    }

    pub fn abs(&self) -> Scalar {
        match self {
            Scalar::Exact(q) => Scalar::Exact(q.clone().abs()),
            Scalar::Approx { value, downgraded } => Scalar::Approx {
                value: value.clone().abs(),
                downgraded: *downgraded,
            },
        }
    }

    pub fn recip(&self) -> Result<Scalar> {
        if self.is_zero() {
            return Err(Error::Domain("reciprocal of zero".into()));
        }
        Ok(&Scalar::one() / self)
    }

    pub fn powu(&self, exp: u32) -> Scalar {
        match self {
            Scalar::Exact(q) => Scalar::Exact(Rational::from(q.pow(exp))),
            Scalar::Approx { value, downgraded } => Scalar::Approx {
                value: Float::with_val(value.prec(), value.pow(exp)),
                downgraded: *downgraded,
            },
        }
    }

    /// Exact `k`-th root when the value is a perfect `k`-th power of a rational.
    pub fn exact_root(&self, k: u32) -> Option<Scalar> {
        let q = self.as_rational()?;
        if q.cmp0() == Ordering::Less || k == 0 {
            return None;
        }
        let num = perfect_root(q.numer(), k)?;
        let den = perfect_root(q.denom(), k)?;
        Some(Scalar::Exact(Rational::from((num, den))))
    }

    /// Relative difference `|a - b| / max(|a|, |b|)` as a float of `prec` bits.
    pub fn rel_diff(&self, other: &Scalar, prec: u32) -> Float {
        let a = self.to_float(prec);
        let b = other.to_float(prec);
        let scale = Float::with_val(prec, a.clone().abs().max(&b.clone().abs()));
        let diff = Float::with_val(prec, &a - &b).abs();
        if scale.is_zero() {
            diff
        } else {
            diff / scale
        }
    }

    /// Parse `"p/q"`, an integer, or a decimal such as `"0.25"` or `"1e-9"`
    /// into an exact rational.
    pub fn parse_exact(text: &str) -> Result<Scalar> {
        parse_rational(text).map(Scalar::Exact)
    }

    fn binary(&self, other: &Scalar, op: BinOp) -> Scalar {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => {
                let r = match op {
                    BinOp::Add => Rational::from(a + b),
                    BinOp::Sub => Rational::from(a - b),
                    BinOp::Mul => Rational::from(a * b),
                    BinOp::Div => {
                        assert!(b.cmp0() != Ordering::Equal, "exact division by zero");
                        Rational::from(a / b)
                    }
                };
                Scalar::Exact(r)
            }
            _ => {
                let (prec, downgraded) = combined_precision(self, other);
                let a = self.to_float(prec);
                let b = other.to_float(prec);
                let value = match op {
                    BinOp::Add => Float::with_val(prec, &a + &b),
                    BinOp::Sub => Float::with_val(prec, &a - &b),
                    BinOp::Mul => Float::with_val(prec, &a * &b),
                    BinOp::Div => Float::with_val(prec, &a / &b),
                };
                Scalar::Approx { value, downgraded }
            }
        }
    }
}

fn perfect_root(x: &Integer, k: u32) -> Option<Integer> {
    let (root, rem) = x.clone().root_rem(Integer::new(), k);
    (rem.cmp0() == Ordering::Equal).then_some(root)
}

#[derive(Clone, Copy)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

fn combined_precision(a: &Scalar, b: &Scalar) -> (u32, bool) {
    match (a, b) {
        (
            Scalar::Approx {
                value: x,
                downgraded: dx,
            },
            Scalar::Approx {
                value: y,
                downgraded: dy,
            },
        ) => {
            let downgrade = x.prec() != y.prec();
            (x.prec().min(y.prec()), *dx || *dy || downgrade)
        }
        (Scalar::Approx { value, downgraded }, Scalar::Exact(_))
        | (Scalar::Exact(_), Scalar::Approx { value, downgraded }) => (value.prec(), *downgraded),
        (Scalar::Exact(_), Scalar::Exact(_)) => (DEFAULT_PRECISION, false),
    }
}

pub(crate) fn parse_rational(text: &str) -> Result<Rational> {
    let t = text.trim();
    let bad = || Error::Parse(format!("not a rational number: {text:?}"));
    if t.is_empty() {
        return Err(bad());
    }
    if let Some((n, d)) = t.split_once('/') {
        let num = Integer::from_str(n.trim()).map_err(|_| bad())?;
        let den = Integer::from_str(d.trim()).map_err(|_| bad())?;
        if den.cmp0() == Ordering::Equal {
            return Err(Error::Parse(format!("zero denominator in {text:?}")));
        }
        return Ok(Rational::from((num, den)));
    }
    let (mantissa, exponent) = match t.find(['e', 'E']) {
        Some(pos) => {
            let e: i64 = t[pos + 1..].parse().map_err(|_| bad())?;
            (&t[..pos], e)
        }
        None => (t, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let all_digits = format!("{int_part}{frac_part}");
    let mut value = Rational::from(Integer::from_str(&all_digits).map_err(|_| bad())?);
    let scale = exponent - frac_part.len() as i64;
    let ten = Rational::from(10);
    if scale >= 0 {
        value *= Rational::from(ten.pow(scale as i32));
    } else {
        value /= Rational::from(ten.pow((-scale) as i32));
    }
    if negative {
        value = -value;
    }
    Ok(value)
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident, $op:expr) => {
        impl $trait<&Scalar> for &Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &Scalar) -> Scalar {
                self.binary(rhs, $op)
            }
        }
        impl $trait<Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                self.binary(&rhs, $op)
            }
        }
        impl $trait<&Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &Scalar) -> Scalar {
                self.binary(rhs, $op)
            }
        }
    };
}

impl_binop!(Add, add, BinOp::Add);
impl_binop!(Sub, sub, BinOp::Sub);
impl_binop!(Mul, mul, BinOp::Mul);
impl_binop!(Div, div, BinOp::Div);

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        match self {
            Scalar::Exact(q) => Scalar::Exact(Rational::from(-q)),
            Scalar::Approx { value, downgraded } => Scalar::Approx {
                value: Float::with_val(value.prec(), -value),
                downgraded: *downgraded,
            },
        }
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        -&self
    }
}

impl PartialEq for Scalar {
    fn eq(&self, other: &Self) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for Scalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => a.partial_cmp(b),
            (Scalar::Approx { value: a, .. }, Scalar::Approx { value: b, .. }) => {
                a.partial_cmp(b)
            }
            (Scalar::Approx { value: a, .. }, Scalar::Exact(b)) => a.partial_cmp(b),
            (Scalar::Exact(a), Scalar::Approx { value: b, .. }) => {
                b.partial_cmp(a).map(Ordering::reverse)
            }
        }
    }
}

impl From<i64> for Scalar {
    fn from(v: i64) -> Self {
        Scalar::int(v)
    }
}

impl From<Rational> for Scalar {
    fn from(q: Rational) -> Self {
        Scalar::Exact(q)
    }
}

impl From<Float> for Scalar {
    fn from(f: Float) -> Self {
        Scalar::from_float(f)
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Exact(q) => {
                if *q.denom() == 1 {
                    write!(f, "{}", q.numer())
                } else {
                    write!(f, "{}/{}", q.numer(), q.denom())
                }
            }
            Scalar::Approx { value, .. } => write!(f, "{}", value.to_string_radix(10, None)),
        }
    }
}

impl FromStr for Scalar {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scalar::parse_exact(s)
    }
}

// JSON form: exact values are strings ("3/4", "-2") and high-precision values
// are {"value": "...", "precision_bits": n}. Plain JSON numbers are read
// through their shortest decimal text, so 0.1 means 1/10.
impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Scalar::Exact(_) => serializer.serialize_str(&self.to_string()),
            Scalar::Approx { value, .. } => {
                let mut map = serializer.serialize_map(Some(2))?;
                map.serialize_entry("value", &value.to_string_radix(10, None))?;
                map.serialize_entry("precision_bits", &value.prec())?;
                map.end()
            }
        }
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = serde_json::Value::deserialize(deserializer)?;
        scalar_from_json(&raw).map_err(de::Error::custom)
    }
}

pub(crate) fn scalar_from_json(raw: &serde_json::Value) -> Result<Scalar> {
    use serde_json::Value;
    match raw {
        Value::Number(n) => Scalar::parse_exact(&n.to_string()),
        Value::String(s) => Scalar::parse_exact(s),
        Value::Object(map) => {
            let allowed = ["value", "precision_bits"];
            if let Some(k) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
                return Err(Error::Parse(format!("unknown key {k:?} in scalar")));
            }
            let text = match map.get("value") {
                Some(Value::String(s)) => s.clone(),
                Some(Value::Number(n)) => n.to_string(),
                _ => return Err(Error::Parse("scalar object needs a \"value\"".into())),
            };
            let bits = map
                .get("precision_bits")
                .and_then(Value::as_u64)
                .unwrap_or(DEFAULT_PRECISION as u64);
            if bits < 2 || bits > PRECISION_CEILING as u64 {
                return Err(Error::Parse(format!("precision_bits {bits} out of range")));
            }
            let value = Float::parse(&text)
                .map(|p| Float::with_val(bits as u32, p))
                .map_err(|_| Error::Parse(format!("bad float literal {text:?}")))?;
            Ok(Scalar::from_float(value))
        }
        other => Err(Error::Parse(format!("expected a number, got {other}"))),
    }
}

/// Exact binomial-style helpers used by several closed forms.
pub(crate) fn factorial(n: u32) -> Integer {
    Integer::from(Integer::factorial(n))
}

/// `(2n-1)!!` with the convention `(-1)!! = 1`.
pub(crate) fn odd_double_factorial(n: u32) -> Integer {
    if n == 0 {
        Integer::from(1)
    } else {
        Integer::from(Integer::factorial_2(2 * n - 1))
    }
}
