//! Scalar abstraction.
//!
//! The exponent calculus and the solver are generic over the floating-point
//! type; `f64` is the default used by the CLI, `f32` works for quick scans.

use std::fmt::{self, Debug, Display};
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};

/// Floating-point scalar: f32 or f64.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Lifts an `f64` constant into the generic scalar type.
pub fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("constant not representable in scalar type")
}

/// A finite scalar or +∞.
///
/// The Sobolev embedding exponent is ∞ in dimension one, so every formula
/// involving it is evaluated through `1/p` (zero in the infinite case),
/// which realizes the limits `1 - 2/p -> 1` and `p/(p-2) -> 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extended<T> {
    Finite(T),
    Infinity,
}

impl<T: Real> Extended<T> {
    /// `1/p`, with `1/∞ = 0`.
    pub fn inv(self) -> T {
        match self {
            Extended::Finite(p) => T::one() / p,
            Extended::Infinity => T::zero(),
        }
    }

    /// `p/(p-2)` evaluated as `1/(1 - 2/p)`, so `∞ -> 1`.
    pub fn over_minus_two(self) -> T {
        T::one() / (T::one() - real::<T>(2.0) * self.inv())
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Extended::Infinity)
    }

    pub fn finite(self) -> Option<T> {
        match self {
            Extended::Finite(p) => Some(p),
            Extended::Infinity => None,
        }
    }

    /// Whether the extended value strictly exceeds the finite `x`.
    pub fn exceeds(self, x: T) -> bool {
        match self {
            Extended::Finite(p) => p > x,
            Extended::Infinity => true,
        }
    }
}

impl<T: Display> Display for Extended<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(p) => write!(f, "{p}"),
            Extended::Infinity => write!(f, "inf"),
        }
    }
}

// JSON has no infinity literal, so ∞ serializes as the string "inf".
impl<T: Serialize> Serialize for Extended<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Extended::Finite(p) => p.serialize(serializer),
            Extended::Infinity => serializer.serialize_str("inf"),
        }
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for Extended<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr<T> {
            Num(T),
            Word(String),
        }
        match Repr::<T>::deserialize(deserializer)? {
            Repr::Num(p) => Ok(Extended::Finite(p)),
            Repr::Word(w) if w == "inf" || w == "infinity" => Ok(Extended::Infinity),
            Repr::Word(w) => Err(de::Error::custom(format!(
                "expected a number or \"inf\", got {w:?}"
            ))),
        }
    }
}
