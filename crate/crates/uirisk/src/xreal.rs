//! Extended reals as an explicit three-state value. Infinities appear as
//! symbolic outcomes (slope limits, folding ratios), never as float
//! sentinels, so the branching logic around them stays visible.

use std::cmp::Ordering;
use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XReal {
    NegInf,
    Finite(f64),
    PosInf,
}

impl XReal {
    pub fn finite(x: f64) -> Self {
        debug_assert!(x.is_finite());
        XReal::Finite(x)
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, XReal::Finite(_))
    }

    pub fn is_pos_inf(&self) -> bool {
        matches!(self, XReal::PosInf)
    }

    /// The finite payload, if any.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            XReal::Finite(x) => Some(*x),
            _ => None,
        }
    }

    /// Total order: -inf < any finite < +inf. Finite payloads must not be NaN.
    pub fn total_cmp(&self, other: &XReal) -> Ordering {
        use XReal::*;
        match (self, other) {
            (NegInf, NegInf) | (PosInf, PosInf) => Ordering::Equal,
            (NegInf, _) | (_, PosInf) => Ordering::Less,
            (_, NegInf) | (PosInf, _) => Ordering::Greater,
            (Finite(a), Finite(b)) => a.total_cmp(b),
        }
    }

    pub fn max(self, other: XReal) -> XReal {
        if self.total_cmp(&other) == Ordering::Less {
            other
        } else {
            self
        }
    }
}

/// Ratio `num/den` under the folding-score conventions: ∞/∞ = 1, 0/0 = 1,
/// and positive/0 = ∞. The case analysis happens symbolically before any
/// float division. A finite numerator over +∞ yields 0.
pub fn convention_ratio(num: XReal, den: XReal) -> XReal {
    use XReal::*;
    match (num, den) {
        (PosInf, PosInf) => Finite(1.0),
        (PosInf, _) => PosInf,
        (Finite(_), PosInf) => Finite(0.0),
        (Finite(n), Finite(d)) => {
            if d == 0.0 {
                if n == 0.0 {
                    Finite(1.0)
                } else if n > 0.0 {
                    PosInf
                } else {
                    NegInf
                }
            } else {
                Finite(n / d)
            }
        }
        // Negative infinities do not arise for normalized convex measures;
        // propagate them literally so misuse is loud in tests.
        (NegInf, _) => NegInf,
        (_, NegInf) => NegInf,
    }
}

impl fmt::Display for XReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            XReal::NegInf => write!(f, "-inf"),
            XReal::Finite(x) => write!(f, "{x}"),
            XReal::PosInf => write!(f, "inf"),
        }
    }
}

// JSON: finite values are numbers, infinities are the strings "inf"/"-inf"
// (JSON has no infinity literal).
impl Serialize for XReal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            XReal::Finite(x) => s.serialize_f64(*x),
            XReal::PosInf => s.serialize_str("inf"),
            XReal::NegInf => s.serialize_str("-inf"),
        }
    }
}

impl<'de> Deserialize<'de> for XReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = XReal;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                write!(f, "a number or \"inf\"/\"-inf\"")
            }
            fn visit_f64<E: de::Error>(self, x: f64) -> Result<XReal, E> {
                Ok(XReal::Finite(x))
            }
            fn visit_i64<E: de::Error>(self, x: i64) -> Result<XReal, E> {
                Ok(XReal::Finite(x as f64))
            }
            fn visit_u64<E: de::Error>(self, x: u64) -> Result<XReal, E> {
                Ok(XReal::Finite(x as f64))
            }
            fn visit_str<E: de::Error>(self, s: &str) -> Result<XReal, E> {
                match s {
                    "inf" => Ok(XReal::PosInf),
                    "-inf" => Ok(XReal::NegInf),
                    _ => Err(E::custom("expected \"inf\" or \"-inf\"")),
                }
            }
        }
        d.deserialize_any(V)
    }
}
