//! Exact count values and confidence scores.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{Signed, ToPrimitive, Zero};
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

/// Exact rational used for counts, tolerances and metric fractions.
pub type Rational = Ratio<i128>;

/// A nonnegative, dimensionless count.
///
/// Counts are exact rationals so that band checks such as "within 10% of the
/// gold answer" have no rounding at the boundary. Integral counts serialize
/// as JSON integers, everything else as a decimal (or `p/q`) string.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Count(Rational);

impl Count {
    pub const ZERO: Count = Count(Ratio::new_raw(0, 1));

    /// Returns `None` for negative values.
    pub fn new(value: Rational) -> Option<Self> {
        if value.is_negative() {
            None
        } else {
            Some(Count(value))
        }
    }

    pub fn from_integer(n: u64) -> Self {
        Count(Rational::from_integer(n as i128))
    }

    pub fn value(&self) -> Rational {
        self.0
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Multiplies by a nonnegative factor, `None` on overflow.
    pub fn checked_scale(&self, factor: Rational) -> Option<Count> {
        if factor.is_negative() {
            return None;
        }
        let numer = self.0.numer().checked_mul(*factor.numer())?;
        let denom = self.0.denom().checked_mul(*factor.denom())?;
        Some(Count(Rational::new(numer, denom)))
    }

    pub fn abs_diff(&self, other: &Count) -> Rational {
        if self.0 >= other.0 {
            self.0 - other.0
        } else {
            other.0 - self.0
        }
    }

    /// `|self - target| <= tolerance * target`, boundary inclusive.
    pub fn within(&self, target: &Count, tolerance: Rational) -> bool {
        self.abs_diff(target) <= tolerance * target.0
    }

    /// Midpoint of two counts.
    pub fn midpoint(lo: &Count, hi: &Count) -> Count {
        Count((lo.0 + hi.0) / Rational::from_integer(2))
    }
}

impl fmt::Debug for Count {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Count({self})")
    }
}

impl fmt::Display for Count {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match terminating_decimal(&self.0) {
            Some(s) => f.write_str(&s),
            None => write!(f, "{}/{}", self.0.numer(), self.0.denom()),
        }
    }
}

/// Renders a rational as a plain decimal if its expansion terminates.
fn terminating_decimal(r: &Rational) -> Option<String> {
    if r.is_integer() {
        return Some(r.numer().to_string());
    }
    let mut denom = *r.denom();
    let (mut twos, mut fives) = (0u32, 0u32);
    while denom % 2 == 0 {
        denom /= 2;
        twos += 1;
    }
    while denom % 5 == 0 {
        denom /= 5;
        fives += 1;
    }
    if denom != 1 {
        return None;
    }
    let places = twos.max(fives);
    let scale = 10i128.checked_pow(places)?;
    let scaled = r.numer().checked_mul(scale)? / r.denom();
    let sign = if scaled < 0 { "-" } else { "" };
    let digits = format!("{:0>width$}", scaled.abs(), width = places as usize + 1);
    let (int_part, frac_part) = digits.split_at(digits.len() - places as usize);
    Some(format!("{sign}{int_part}.{frac_part}"))
}

/// Parses `"1,000"`, `"84.55"`, `"3/4"` or a plain integer into a rational.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    if text.is_empty() {
        return None;
    }
    if let Some((n, d)) = text.split_once('/') {
        let n: i128 = n.trim().parse().ok()?;
        let d: i128 = d.trim().parse().ok()?;
        if d == 0 {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let body: String = body.chars().filter(|&c| c != ',').collect();
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body.as_str(), ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: i128 = digits.parse().ok()?;
    let denom = 10i128.checked_pow(frac_part.len() as u32)?;
    let r = Rational::new(numer, denom);
    Some(if negative { -r } else { r })
}

/// Exact rational for the decimal a user would write for `x` (0.3 -> 3/10).
pub fn decimal_ratio(x: f64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    parse_rational(&format!("{x}"))
}

impl FromStr for Count {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_rational(s)
            .and_then(Count::new)
            .ok_or_else(|| format!("not a nonnegative count: {s:?}"))
    }
}

impl Serialize for Count {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.0.is_integer() {
            if let Ok(n) = u64::try_from(*self.0.numer()) {
                return serializer.serialize_u64(n);
            }
        }
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Count {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct CountVisitor;

        impl Visitor<'_> for CountVisitor {
            type Value = Count;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a nonnegative number or a decimal / fraction string")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Count, E> {
                Ok(Count::from_integer(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Count, E> {
                u64::try_from(v)
                    .map(Count::from_integer)
                    .map_err(|_| E::custom("count must be nonnegative"))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Count, E> {
                decimal_ratio(v)
                    .and_then(Count::new)
                    .ok_or_else(|| E::custom("count must be a finite nonnegative number"))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Count, E> {
                v.parse().map_err(E::custom)
            }
        }

        deserializer.deserialize_any(CountVisitor)
    }
}

/// A score in `[0, 1]`.
#[derive(Clone, Copy, PartialEq, PartialOrd, Debug, Serialize)]
#[serde(transparent)]
pub struct Confidence(f64);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("confidence {0} is outside [0, 1]")]
pub struct ConfidenceOutOfRange(pub f64);

impl Confidence {
    pub const ZERO: Confidence = Confidence(0.0);
    pub const ONE: Confidence = Confidence(1.0);

    pub fn new(value: f64) -> Result<Self, ConfidenceOutOfRange> {
        if (0.0..=1.0).contains(&value) {
            Ok(Confidence(value))
        } else {
            Err(ConfidenceOutOfRange(value))
        }
    }

    /// Clamps into range; NaN maps to 0.
    pub fn clamped(value: f64) -> Self {
        if value.is_nan() {
            Confidence(0.0)
        } else {
            Confidence(value.clamp(0.0, 1.0))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// The exact dyadic rational this float denotes.
    pub fn exact(self) -> BigRational {
        BigRational::from_float(self.0).unwrap_or_else(|| BigRational::from_integer(BigInt::zero()))
    }
}

impl<'de> Deserialize<'de> for Confidence {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(deserializer)?;
        Confidence::new(v).map_err(de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_terminating_and_repeating() {
        assert_eq!(Count::from_integer(700).to_string(), "700");
        assert_eq!("84.55".parse::<Count>().unwrap().to_string(), "84.55");
        assert_eq!(Count::new(Rational::new(1, 3)).unwrap().to_string(), "1/3");
        assert_eq!(Count::new(Rational::new(1, 20)).unwrap().to_string(), "0.05");
    }

    #[test]
    fn parse_with_separators() {
        assert_eq!(parse_rational("1,000,000"), Some(Rational::from_integer(1_000_000)));
        assert_eq!(parse_rational("0.3"), Some(Rational::new(3, 10)));
        assert_eq!(parse_rational("."), None);
        assert_eq!(parse_rational("1/0"), None);
        assert!("-5".parse::<Count>().is_err());
    }

    #[test]
    fn decimal_ratio_is_what_the_user_typed() {
        assert_eq!(decimal_ratio(0.3), Some(Rational::new(3, 10)));
        assert_eq!(decimal_ratio(0.1), Some(Rational::new(1, 10)));
        assert_eq!(decimal_ratio(f64::NAN), None);
    }

    #[test]
    fn within_is_boundary_inclusive() {
        let gold = Count::from_integer(200);
        let tol = Rational::new(1, 10);
        assert!(Count::from_integer(180).within(&gold, tol));
        assert!(Count::from_integer(220).within(&gold, tol));
        assert!(!Count::from_integer(179).within(&gold, tol));
        assert!(!Count::from_integer(221).within(&gold, tol));
    }

    #[test]
    fn serde_round_trip() {
        let values = ["700", "84.55", "1/3"];
        for v in values {
            let c: Count = v.parse().unwrap();
            let json = serde_json::to_string(&c).unwrap();
            let back: Count = serde_json::from_str(&json).unwrap();
            assert_eq!(back, c);
        }
        assert_eq!(serde_json::to_string(&Count::from_integer(5)).unwrap(), "5");
        let from_float: Count = serde_json::from_str("82.5").unwrap();
        assert_eq!(from_float.value(), Rational::new(165, 2));
    }

    #[test]
    fn confidence_range() {
        assert!(Confidence::new(1.2).is_err());
        assert!(Confidence::new(-0.1).is_err());
        assert!(Confidence::new(f64::NAN).is_err());
        assert_eq!(Confidence::clamped(1.5).get(), 1.0);
        assert_eq!(Confidence::clamped(f64::NAN).get(), 0.0);
        assert!(serde_json::from_str::<Confidence>("1.5").is_err());
    }
}
