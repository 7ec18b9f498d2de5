//! Extended reals for moduli and distances that may be `+inf`.
//!
//! Infinite values are serialized as the strings `"inf"` / `"-inf"` so that
//! reports stay valid JSON.

use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ExtReal(pub f64);

impl ExtReal {
    pub const INFINITY: ExtReal = ExtReal(f64::INFINITY);
    pub const ZERO: ExtReal = ExtReal(0.0);

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `num / den` with the conventions `c/0 = +inf` (c > 0) and `c/+inf = 0`.
    pub fn ratio(num: f64, den: ExtReal) -> ExtReal {
        if den.0.is_infinite() {
            ExtReal(0.0)
        } else if den.0 == 0.0 {
            if num == 0.0 {
                ExtReal(0.0)
            } else {
                ExtReal(f64::INFINITY)
            }
        } else {
            ExtReal(num / den.0)
        }
    }
}

impl From<f64> for ExtReal {
    fn from(v: f64) -> Self {
        ExtReal(v)
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == f64::INFINITY {
            write!(f, "inf")
        } else if self.0 == f64::NEG_INFINITY {
            write!(f, "-inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("inf")
        } else if self.0 == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct ExtVisitor;

        impl Visitor<'_> for ExtVisitor {
            type Value = ExtReal;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<ExtReal, E> {
                Ok(ExtReal(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<ExtReal, E> {
                Ok(ExtReal(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<ExtReal, E> {
                Ok(ExtReal(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<ExtReal, E> {
                match v {
                    "inf" | "+inf" => Ok(ExtReal(f64::INFINITY)),
                    "-inf" => Ok(ExtReal(f64::NEG_INFINITY)),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }

        d.deserialize_any(ExtVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinity_serializes_as_string() {
        let s = serde_json::to_string(&ExtReal::INFINITY).unwrap();
        assert_eq!(s, "\"inf\"");
        let back: ExtReal = serde_json::from_str(&s).unwrap();
        assert!(back.is_infinite());
        let v: ExtReal = serde_json::from_str("2.5").unwrap();
        assert_eq!(v.0, 2.5);
    }

    #[test]
    fn ratio_conventions() {
        assert_eq!(ExtReal::ratio(2.0, ExtReal(0.0)).0, f64::INFINITY);
        assert_eq!(ExtReal::ratio(2.0, ExtReal::INFINITY).0, 0.0);
        assert_eq!(ExtReal::ratio(2.0, ExtReal(1.0)).0, 2.0);
    }
}
