//! Exact rational scalars.
//!
//! Every value in the crate is a `Ratio<i128>`. Overflow panics instead of
//! wrapping (debug builds, and release builds through the workspace profile),
//! so a result is either exact or absent.

use num_rational::Ratio;
use num_traits::{One, Zero};
use serde::{Deserialize, Deserializer, Serializer};
use thiserror::Error;

pub type Q = Ratio<i128>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid rational {text:?}: {reason}")]
pub struct ParseQError {
    pub text: String,
    pub reason: &'static str,
}

/// Parses `"p/q"`, `"p"` or `"-p/q"`.
pub fn parse_q(text: &str) -> Result<Q, ParseQError> {
    let err = |reason| ParseQError {
        text: text.to_string(),
        reason,
    };
    let t = text.trim();
    let (num, den) = match t.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (t, "1"),
    };
    let n: i128 = num.parse().map_err(|_| err("bad numerator"))?;
    let d: i128 = den.parse().map_err(|_| err("bad denominator"))?;
    if d <= 0 {
        return Err(err("denominator must be positive"));
    }
    Ok(Q::new(n, d))
}

pub fn q(n: i128, d: i128) -> Q {
    Q::new(n, d)
}

pub fn qi(n: i128) -> Q {
    Q::from_integer(n)
}

pub fn in_unit_interval(x: &Q) -> bool {
    !x.is_negative_q() && *x <= Q::one()
}

trait SignQ {
    fn is_negative_q(&self) -> bool;
}

impl SignQ for Q {
    fn is_negative_q(&self) -> bool {
        *self < Q::zero()
    }
}

/// `max(0, a - b)`.
pub fn trunc_sub(a: Q, b: Q) -> Q {
    if a > b {
        a - b
    } else {
        Q::zero()
    }
}

/// Serde adapter: a rational as a `"p/q"` string.
pub mod serde_q {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Q, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&x.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        let s = String::deserialize(d)?;
        parse_q(&s).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter: a list of rationals as `"p/q"` strings.
pub mod serde_q_vec {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(xs: &[Q], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(xs.len()))?;
        for x in xs {
            seq.serialize_element(&x.to_string())?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Q>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter()
            .map(|s| parse_q(s).map_err(serde::de::Error::custom))
            .collect()
    }
}
