//! Exact rational scalars used for radii, level values and table potentials.

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Rational scalar with 64-bit numerator and denominator.
pub type Q = Ratio<i64>;

pub fn q(num: i64, den: i64) -> Q {
    Q::new(num, den)
}

/// Parses `"p/q"`, `"p"` or a short decimal such as `"0.25"`.
pub fn parse_q(text: &str) -> Result<Q> {
    let t = text.trim();
    if let Ok(r) = t.parse::<Q>() {
        return Ok(r);
    }
    if let Some((int, frac)) = t.split_once('.') {
        if frac.len() <= 15 && frac.chars().all(|c| c.is_ascii_digit()) {
            let neg = int.starts_with('-');
            let int_part: i64 = if int.is_empty() || int == "-" {
                0
            } else {
                int.parse().map_err(|_| bad(t))?
            };
            let den = 10i64.pow(frac.len() as u32);
            let frac_part: i64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad(t))? };
            let mag = int_part.abs() * den + frac_part;
            return Ok(Q::new(if neg { -mag } else { mag }, den));
        }
    }
    Err(bad(t))
}

fn bad(t: &str) -> Error {
    Error::InvalidConfig(format!("cannot parse rational {t:?}"))
}

/// `"p/q"` rendering used by every serialized output.
pub fn format_q(r: &Q) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn to_f64(r: &Q) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Floor of a positive rational as an integer.
pub fn floor_q(r: &Q) -> i64 {
    r.numer().div_floor(r.denom())
}

/// Least common multiple of the denominators, or `None` on overflow.
pub fn common_denominator<'a>(values: impl IntoIterator<Item = &'a Q>) -> Option<u64> {
    let mut acc: u64 = 1;
    for v in values {
        let d = *v.denom() as u64;
        let g = acc.gcd(&d);
        acc = (acc / g).checked_mul(d)?;
    }
    Some(acc)
}

/// `floor(value * scale)` and `ceil(value * scale)` for a nonnegative rational,
/// saturating at `u128::MAX`.
pub fn scaled_floor_ceil(value: &Q, scale: u128) -> (u128, u128) {
    if value.is_zero() {
        return (0, 0);
    }
    debug_assert!(!value.is_negative());
    let p = *value.numer() as u128;
    let d = *value.denom() as u128;
    let whole = scale / d;
    let rem = scale % d;
    // value*scale = p*whole + p*rem/d
    let Some(a) = p.checked_mul(whole) else {
        return (u128::MAX, u128::MAX);
    };
    let b = p * rem; // both < 2^64
    let floor = a.saturating_add(b / d);
    let ceil = if b.is_multiple_of(d) { floor } else { floor.saturating_add(1) };
    (floor, ceil)
}

pub mod serde_q {
    //! Serde adapter writing rationals as `"p/q"` strings.
    use super::{format_q, parse_q, Q};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Q, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_q(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        let text = String::deserialize(d)?;
        parse_q(&text).map_err(serde::de::Error::custom)
    }

    pub mod vec {
        use super::super::{format_q, parse_q, Q};
        use serde::ser::SerializeSeq;
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &[Q], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for x in v {
                seq.serialize_element(&format_q(x))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Q>, D::Error> {
            let raw = Vec::<String>::deserialize(d)?;
            raw.iter()
                .map(|t| parse_q(t).map_err(serde::de::Error::custom))
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fraction_integer_and_decimal() {
        assert_eq!(parse_q("1/2").unwrap(), q(1, 2));
        assert_eq!(parse_q("3").unwrap(), q(3, 1));
        assert_eq!(parse_q("0.25").unwrap(), q(1, 4));
        assert_eq!(parse_q("-0.5").unwrap(), q(-1, 2));
        assert!(parse_q("abc").is_err());
    }

    #[test]
    fn scaled_rounding() {
        assert_eq!(scaled_floor_ceil(&q(1, 2), 10), (5, 5));
        assert_eq!(scaled_floor_ceil(&q(1, 3), 10), (3, 4));
        assert_eq!(scaled_floor_ceil(&q(0, 1), 10), (0, 0));
        assert_eq!(scaled_floor_ceil(&q(i64::MAX, 1), u128::MAX / 2).0, u128::MAX);
    }

    #[test]
    fn lcm_of_denominators() {
        assert_eq!(common_denominator(&[q(1, 2), q(1, 3), q(5, 6)]), Some(6));
    }
}
