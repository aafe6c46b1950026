use core::fmt;
use core::ops::Add;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

/// A nonnegative processing time that may be unbounded.
///
/// `Unbounded` stands in for entries no finite-ratio mechanism may ever
/// assign; it compares greater than every finite value and absorbs addition.
/// Callers that need an all-finite matrix substitute a large surrogate via
/// [`crate::instances::CostMatrix::materialize`].
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub enum ExtendedCost {
    Finite(f64),
    Unbounded,
}

impl ExtendedCost {
    pub const ZERO: ExtendedCost = ExtendedCost::Finite(0.0);

    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedCost::Finite(_))
    }

    pub fn is_unbounded(self) -> bool {
        matches!(self, ExtendedCost::Unbounded)
    }

    pub fn value(self) -> Option<f64> {
        match self {
            ExtendedCost::Finite(v) => Some(v),
            ExtendedCost::Unbounded => None,
        }
    }

    /// Finite value or the given surrogate.
    pub fn unwrap_or(self, surrogate: f64) -> f64 {
        match self {
            ExtendedCost::Finite(v) => v,
            ExtendedCost::Unbounded => surrogate,
        }
    }

    /// True for values representable in a cost matrix: unbounded, or a
    /// nonnegative non-NaN real.
    pub fn is_valid(self) -> bool {
        match self {
            ExtendedCost::Finite(v) => v.is_finite() && v >= 0.0,
            ExtendedCost::Unbounded => true,
        }
    }

    pub fn max(self, other: ExtendedCost) -> ExtendedCost {
        match (self, other) {
            (ExtendedCost::Finite(a), ExtendedCost::Finite(b)) => {
                ExtendedCost::Finite(if a >= b { a } else { b })
            }
            _ => ExtendedCost::Unbounded,
        }
    }
}

impl Add for ExtendedCost {
    type Output = ExtendedCost;

    fn add(self, rhs: ExtendedCost) -> ExtendedCost {
        match (self, rhs) {
            (ExtendedCost::Finite(a), ExtendedCost::Finite(b)) => ExtendedCost::Finite(a + b),
            _ => ExtendedCost::Unbounded,
        }
    }
}

impl From<f64> for ExtendedCost {
    fn from(v: f64) -> Self {
        ExtendedCost::Finite(v)
    }
}

impl fmt::Display for ExtendedCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedCost::Finite(v) => write!(f, "{v}"),
            ExtendedCost::Unbounded => write!(f, "inf"),
        }
    }
}

// Wire format: a plain number, or the string "inf".
impl Serialize for ExtendedCost {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            ExtendedCost::Finite(v) => serializer.serialize_f64(*v),
            ExtendedCost::Unbounded => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtendedCost {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct CostVisitor;

        impl<'de> Visitor<'de> for CostVisitor {
            type Value = ExtendedCost;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a nonnegative number or the string \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<ExtendedCost, E> {
                let cost = ExtendedCost::Finite(v);
                if cost.is_valid() {
                    Ok(cost)
                } else {
                    Err(E::custom("cost entries must be nonnegative and finite"))
                }
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<ExtendedCost, E> {
                self.visit_f64(v as f64)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<ExtendedCost, E> {
                self.visit_f64(v as f64)
            }

            fn visit_str<E: de::Error>(self, s: &str) -> Result<ExtendedCost, E> {
                if s == "inf" {
                    Ok(ExtendedCost::Unbounded)
                } else {
                    Err(E::custom("expected \"inf\""))
                }
            }
        }

        deserializer.deserialize_any(CostVisitor)
    }
}
