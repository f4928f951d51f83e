//! Extended non-negative-capable reals: a finite `f64` or `+∞`.

use std::fmt;

/// A real number that may be `+∞`.
///
/// Divergent series and integrals are reported as [`ExtReal::PosInf`]
/// rather than through an `f64::INFINITY` sentinel, so callers have to
/// handle the infinite case explicitly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, ExtReal::PosInf)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::PosInf => None,
        }
    }

    /// `c / self` with the convention `c / ∞ = 0`.
    pub fn recip_scaled(self, c: f64) -> f64 {
        match self {
            ExtReal::Finite(v) => c / v,
            ExtReal::PosInf => 0.0,
        }
    }

    /// Multiplication by a positive finite scalar.
    pub fn scale(self, s: f64) -> ExtReal {
        match self {
            ExtReal::Finite(v) => ExtReal::Finite(v * s),
            ExtReal::PosInf if s > 0.0 => ExtReal::PosInf,
            ExtReal::PosInf => ExtReal::Finite(0.0),
        }
    }

    pub fn add(self, v: f64) -> ExtReal {
        match self {
            ExtReal::Finite(a) => ExtReal::Finite(a + v),
            ExtReal::PosInf => ExtReal::PosInf,
        }
    }

    /// Comparison against a finite value: `∞ > v` for every finite `v`.
    pub fn gt(self, v: f64) -> bool {
        match self {
            ExtReal::Finite(a) => a > v,
            ExtReal::PosInf => true,
        }
    }
}

impl From<f64> for ExtReal {
    fn from(v: f64) -> Self {
        ExtReal::Finite(v)
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{:.16e}", v),
            ExtReal::PosInf => write!(f, "inf"),
        }
    }
}
