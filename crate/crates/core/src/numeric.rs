//! Scalar abstraction shared by every algorithm in the crate.
//!
//! Everything is generic over [`Scalar`], which is implemented for `f64`
//! (binary64 with an explicit tolerance) and [`Rational`] (exact arithmetic,
//! all comparisons exact). The numeric mode is therefore chosen at the type
//! level; front ends dispatch on [`NumericMode`] once.

use std::cmp::Ordering;
use std::fmt::{Debug, Display};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, Signed, ToPrimitive, Zero};
use serde_json::Value;

/// Exact rational scalar.
pub type Rational = BigRational;

static FLOAT_TOL_BITS: AtomicU64 = AtomicU64::new(0x3E11_2E0B_E826_D695); // 1e-9

/// Sets the process-wide tolerance used by `f64` comparisons.
pub fn set_float_tolerance(tol: f64) {
    assert!(tol.is_finite() && tol >= 0.0, "tolerance must be finite and nonnegative");
    FLOAT_TOL_BITS.store(tol.to_bits(), AtomicOrdering::Relaxed);
}

pub fn float_tolerance() -> f64 {
    f64::from_bits(FLOAT_TOL_BITS.load(AtomicOrdering::Relaxed))
}

/// Which arithmetic a computation runs in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NumericMode {
    Exact,
    Float,
}

impl NumericMode {
    pub fn as_str(self) -> &'static str {
        match self {
            NumericMode::Exact => "exact",
            NumericMode::Float => "float",
        }
    }
}

impl FromStr for NumericMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" | "rational" => Ok(NumericMode::Exact),
            "float" | "f64" => Ok(NumericMode::Float),
            other => Err(format!("unknown numeric mode '{other}' (expected exact or float)")),
        }
    }
}

pub trait Scalar:
    Num + Signed + Clone + PartialOrd + Debug + Display + Send + Sync + 'static
{
    const MODE: NumericMode;

    fn from_i64(v: i64) -> Self;

    fn from_ratio(num: i64, den: i64) -> Self;

    /// Exact conversion for rationals (binary expansion), identity for `f64`.
    /// `None` for non-finite input.
    fn from_f64(v: f64) -> Option<Self>;

    fn to_f64(&self) -> f64;

    /// Comparison tolerance: zero in exact mode.
    fn tol() -> Self;

    /// Slack below the maximum within which an affine piece still counts as
    /// active: `max(tol, tol * |max|)` for floats, zero for rationals.
    fn active_slack(max: &Self) -> Self;

    /// Threshold for treating a pivot or reduced cost as nonzero in the LP.
    fn pivot_eps() -> Self;

    /// Parses a decimal (`"0.25"`, `"1e-3"`) or fraction (`"1/3"`) literal.
    fn parse_literal(s: &str) -> Option<Self>;

    fn from_big_ratio(num: BigInt, den: BigInt) -> Option<Self>;

    /// Canonical JSON rendering: `{"num","den"}` for rationals, a 17
    /// significant digit decimal string for floats.
    fn to_json(&self) -> Value;

    /// Sum of many values. Rationals override this with a balanced reduction
    /// so denominators stay small for as long as possible.
    fn sum_all(values: Vec<Self>) -> Self {
        values.into_iter().fold(Self::zero(), |acc, v| acc + v)
    }

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }

    fn min_of(a: Self, b: Self) -> Self {
        if b < a {
            b
        } else {
            a
        }
    }
}

impl Scalar for f64 {
    const MODE: NumericMode = NumericMode::Float;

    fn from_i64(v: i64) -> Self {
        v as f64
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn from_f64(v: f64) -> Option<Self> {
        v.is_finite().then_some(v)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn tol() -> Self {
        float_tolerance()
    }

    fn active_slack(max: &Self) -> Self {
        let tol = float_tolerance();
        tol.max(tol * max.abs())
    }

    fn pivot_eps() -> Self {
        1e-11
    }

    fn parse_literal(s: &str) -> Option<Self> {
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n: f64 = n.trim().parse().ok()?;
            let d: f64 = d.trim().parse().ok()?;
            return (d != 0.0).then(|| n / d).filter(|v| v.is_finite());
        }
        s.parse::<f64>().ok().filter(|v| v.is_finite())
    }

    fn from_big_ratio(num: BigInt, den: BigInt) -> Option<Self> {
        if den.is_zero() {
            return None;
        }
        ToPrimitive::to_f64(&BigRational::new(num, den)).filter(|v| v.is_finite())
    }

    fn to_json(&self) -> Value {
        let v = if *self == 0.0 { 0.0 } else { *self };
        Value::String(format!("{v:.16e}"))
    }
}

impl Scalar for Rational {
    const MODE: NumericMode = NumericMode::Exact;

    fn from_i64(v: i64) -> Self {
        Rational::from_integer(BigInt::from(v))
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        Rational::new(BigInt::from(num), BigInt::from(den))
    }

    fn from_f64(v: f64) -> Option<Self> {
        Rational::from_float(v)
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn tol() -> Self {
        Rational::zero()
    }

    fn active_slack(_max: &Self) -> Self {
        Rational::zero()
    }

    fn pivot_eps() -> Self {
        Rational::zero()
    }

    fn parse_literal(s: &str) -> Option<Self> {
        parse_rational(s)
    }

    fn from_big_ratio(num: BigInt, den: BigInt) -> Option<Self> {
        (!den.is_zero()).then(|| Rational::new(num, den))
    }

    fn to_json(&self) -> Value {
        serde_json::json!({
            "num": bigint_json(self.numer()),
            "den": bigint_json(self.denom()),
        })
    }

    fn sum_all(mut values: Vec<Self>) -> Self {
        if values.is_empty() {
            return Rational::zero();
        }
        while values.len() > 1 {
            let mut next = Vec::with_capacity(values.len().div_ceil(2));
            let mut it = values.into_iter();
            while let Some(a) = it.next() {
                match it.next() {
                    Some(b) => next.push(a + b),
                    None => next.push(a),
                }
            }
            values = next;
        }
        values.pop().unwrap()
    }
}

fn bigint_json(v: &BigInt) -> Value {
    match v.to_i64() {
        Some(small) => Value::from(small),
        None => Value::String(v.to_string()),
    }
}

/// Exact parse of a decimal or fraction literal.
fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n = parse_rational(n)?;
        let d = parse_rational(d)?;
        return (!d.is_zero()).then(|| n / d);
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let joined = format!("{int_part}{frac_part}");
    let mut num = BigInt::from_str(if joined.is_empty() { "0" } else { &joined }).ok()?;
    if negative {
        num = -num;
    }
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    let value = if scale >= 0 {
        Rational::from_integer(num * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(num, num_traits::pow(ten, (-scale) as usize))
    };
    Some(value)
}

/// Parses a scalar from JSON: numbers, literal strings, or `{"num","den"}`.
pub fn scalar_from_json<S: Scalar>(v: &Value) -> Option<S> {
    match v {
        Value::Number(n) => S::parse_literal(&n.to_string()),
        Value::String(s) => S::parse_literal(s),
        Value::Object(map) => {
            let part = |key: &str| -> Option<BigInt> {
                match map.get(key)? {
                    Value::Number(n) => BigInt::from_str(&n.to_string()).ok(),
                    Value::String(s) => BigInt::from_str(s.trim()).ok(),
                    _ => None,
                }
            };
            S::from_big_ratio(part("num")?, part("den")?)
        }
        _ => None,
    }
}

/// `a <= b` up to the scalar tolerance (scaled by magnitude for floats).
pub fn approx_le<S: Scalar>(a: &S, b: &S) -> bool {
    if a <= b {
        return true;
    }
    let scale = S::max_of(S::one(), S::max_of(a.abs(), b.abs()));
    a.clone() - b.clone() <= S::tol() * scale
}

pub fn approx_eq<S: Scalar>(a: &S, b: &S) -> bool {
    approx_le(a, b) && approx_le(b, a)
}

/// Total order for sorting scalars; NaN never reaches this in practice.
pub fn cmp_scalar<S: Scalar>(a: &S, b: &S) -> Ordering {
    a.partial_cmp(b).unwrap_or(Ordering::Equal)
}

pub fn from_usize<S: Scalar>(v: usize) -> S {
    S::from_i64(v as i64)
}

/// Convenience for tests and generators: `num/den` in the target scalar.
pub fn ratio<S: Scalar>(num: i64, den: i64) -> S {
    S::from_ratio(num, den)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_bits_default_to_1e9() {
        assert_eq!(f64::from_bits(0x3E11_2E0B_E826_D695), 1e-9);
    }

    #[test]
    fn parses_decimal_and_fraction_literals_exactly() {
        assert_eq!(parse_rational("0.1"), Some(Rational::from_ratio(1, 10)));
        assert_eq!(parse_rational("-2.50"), Some(Rational::from_ratio(-5, 2)));
        assert_eq!(parse_rational("1/3"), Some(Rational::from_ratio(1, 3)));
        assert_eq!(parse_rational("1e-3"), Some(Rational::from_ratio(1, 1000)));
        assert_eq!(parse_rational("12E2"), Some(Rational::from_i64(1200)));
        assert_eq!(parse_rational("abc"), None);
        assert_eq!(parse_rational("1/0"), None);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let r = Rational::from_ratio(-7, 3);
        assert_eq!(scalar_from_json::<Rational>(&r.to_json()), Some(r));
        let f = 0.1_f64 + 0.2;
        assert_eq!(scalar_from_json::<f64>(&f.to_json()), Some(f));
        assert_eq!(scalar_from_json::<f64>(&serde_json::json!({"num": 1, "den": 4})), Some(0.25));
    }

    #[test]
    fn balanced_sum_matches_fold() {
        let vals: Vec<Rational> = (1..200).map(|n| Rational::from_ratio(1, n * (n + 1))).collect();
        let folded = vals.iter().cloned().fold(Rational::zero(), |a, b| a + b);
        assert_eq!(Rational::sum_all(vals), folded);
        assert_eq!(folded, Rational::from_ratio(199, 200));
    }
}
