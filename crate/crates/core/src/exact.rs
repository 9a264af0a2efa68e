//! Square roots of nonnegative rationals.
//!
//! All model weights are of the form `sqrt(p/q)` with small integers, so
//! products of creation-operator entries stay in this set and can be compared
//! without rounding.

use std::fmt;
use std::ops::{Div, Mul};

use num_rational::Ratio;

use crate::scalar::Real;

/// `sqrt(radicand)` for a nonnegative rational radicand.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SqrtRatio {
    radicand: Ratio<u64>,
}

impl SqrtRatio {
    pub fn new(radicand: Ratio<u64>) -> Self {
        SqrtRatio { radicand }
    }

    pub fn from_fraction(num: u64, den: u64) -> Self {
        SqrtRatio { radicand: Ratio::new(num, den) }
    }

    pub fn one() -> Self {
        SqrtRatio::from_fraction(1, 1)
    }

    /// The square of the value, exactly.
    pub fn radicand(&self) -> Ratio<u64> {
        self.radicand
    }

    pub fn is_zero(&self) -> bool {
        *self.radicand.numer() == 0
    }

    pub fn recip(&self) -> SqrtRatio {
        SqrtRatio { radicand: self.radicand.recip() }
    }

    pub fn to_real<T: Real>(&self) -> T {
        let num = T::from_u64(*self.radicand.numer()).expect("representable");
        let den = T::from_u64(*self.radicand.denom()).expect("representable");
        (num / den).sqrt()
    }

    pub fn to_f64(&self) -> f64 {
        self.to_real::<f64>()
    }
}

impl Mul for SqrtRatio {
    type Output = SqrtRatio;
    fn mul(self, rhs: SqrtRatio) -> SqrtRatio {
        SqrtRatio { radicand: self.radicand * rhs.radicand }
    }
}

impl Div for SqrtRatio {
    type Output = SqrtRatio;
    fn div(self, rhs: SqrtRatio) -> SqrtRatio {
        SqrtRatio { radicand: self.radicand / rhs.radicand }
    }
}

impl fmt::Display for SqrtRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self.radicand.denom() == 1 {
            write!(f, "sqrt({})", self.radicand.numer())
        } else {
            write!(f, "sqrt({}/{})", self.radicand.numer(), self.radicand.denom())
        }
    }
}
