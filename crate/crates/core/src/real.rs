//! Scalar abstraction for log-space recursions.
//!
//! Speaker recursions multiply any rounding error in a utility by `lambda` at
//! every level, so checks of exact identities at high `lambda` need more than
//! `f64`. [`Extended`] gives roughly 40 significant decimal digits.
//!
//! Only the operations the engines use are exposed. `ln(0) = -inf` and
//! `exp(-inf) = 0` are guaranteed for every implementation.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigfloat::BigFloat;

pub trait Real:
    Copy
    + Debug
    + PartialOrd
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(value: f64) -> Self;
    fn to_f64(self) -> f64;
    fn zero() -> Self;
    fn one() -> Self;
    fn neg_infinity() -> Self;
    fn is_neg_infinity(self) -> bool;
    /// Natural logarithm; `0 -> -inf`.
    fn ln(self) -> Self;
    /// Exponential; `-inf -> 0`.
    fn exp(self) -> Self;

    fn is_finite_value(self) -> bool {
        !self.is_neg_infinity()
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl Real for f64 {
    fn from_f64(value: f64) -> Self {
        value
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn neg_infinity() -> Self {
        f64::NEG_INFINITY
    }
    fn is_neg_infinity(self) -> bool {
        self == f64::NEG_INFINITY
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
}

/// ~40-digit decimal float. `-inf` is tracked explicitly because the backing
/// type's own `exp(-inf)` and `ln(0)` do not follow IEEE conventions.
#[derive(Clone, Copy, Debug)]
pub struct Extended(Option<BigFloat>);

impl Extended {
    fn value(self) -> Option<BigFloat> {
        self.0
    }

    fn wrap(v: BigFloat) -> Self {
        assert!(!v.is_nan() && !v.is_inf(), "extended arithmetic left the representable range: {v}");
        Extended(Some(v))
    }
}

impl PartialEq for Extended {
    fn eq(&self, other: &Self) -> bool {
        match (self.0, other.0) {
            (None, None) => true,
            (Some(a), Some(b)) => a.cmp(&b) == Some(0),
            _ => false,
        }
    }
}

impl PartialOrd for Extended {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        use std::cmp::Ordering;
        match (self.0, other.0) {
            (None, None) => Some(Ordering::Equal),
            (None, Some(_)) => Some(Ordering::Less),
            (Some(_), None) => Some(Ordering::Greater),
            (Some(a), Some(b)) => a.cmp(&b).map(|c| c.cmp(&0)),
        }
    }
}

impl Add for Extended {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        match (self.0, rhs.0) {
            (Some(a), Some(b)) => Extended::wrap(a.add(&b)),
            _ => Extended(None),
        }
    }
}

impl Sub for Extended {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        match (self.0, rhs.0) {
            (Some(a), Some(b)) => Extended::wrap(a.sub(&b)),
            (None, Some(_)) => Extended(None),
            _ => panic!("subtracting -inf in extended arithmetic"),
        }
    }
}

impl Mul for Extended {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        match (self.0, rhs.0) {
            (Some(a), Some(b)) => Extended::wrap(a.mul(&b)),
            (None, Some(b)) | (Some(b), None) if b.is_positive() && !b.is_zero() => {
                Extended(None)
            }
            _ => panic!("-inf times a non-positive value in extended arithmetic"),
        }
    }
}

impl Div for Extended {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let b = rhs.0.expect("division by -inf in extended arithmetic");
        match self.0 {
            Some(a) => Extended::wrap(a.div(&b)),
            None if b.is_positive() && !b.is_zero() => Extended(None),
            None => panic!("-inf divided by a non-positive value"),
        }
    }
}

impl Neg for Extended {
    type Output = Self;
    fn neg(self) -> Self {
        Extended(Some(
            self.0.expect("negating -inf in extended arithmetic").inv_sign(),
        ))
    }
}

impl Real for Extended {
    fn from_f64(value: f64) -> Self {
        if value == f64::NEG_INFINITY {
            Extended(None)
        } else {
            assert!(value.is_finite(), "non-finite value {value}");
            Extended(Some(BigFloat::from_f64(value)))
        }
    }
    fn to_f64(self) -> f64 {
        self.value().map_or(f64::NEG_INFINITY, |v| v.to_f64())
    }
    fn zero() -> Self {
        Extended(Some(BigFloat::from_u8(0)))
    }
    fn one() -> Self {
        Extended(Some(BigFloat::from_u8(1)))
    }
    fn neg_infinity() -> Self {
        Extended(None)
    }
    fn is_neg_infinity(self) -> bool {
        self.0.is_none()
    }
    fn ln(self) -> Self {
        let v = self.0.expect("ln of -inf");
        if v.is_zero() {
            Extended(None)
        } else {
            assert!(v.is_positive(), "ln of a negative value");
            Extended::wrap(v.ln())
        }
    }
    fn exp(self) -> Self {
        match self.0 {
            None => Self::zero(),
            // The backing exp misbehaves far below its exponent range;
            // e^-250 is already invisible at this precision.
            Some(v) if matches!(v.cmp(&BigFloat::from_i16(-250)), Some(c) if c < 0) => Self::zero(),
            Some(v) => Extended::wrap(v.exp()),
        }
    }
}

/// `log(sum(exp(v)))` for any [`Real`].
pub fn log_sum_exp<T: Real>(values: impl IntoIterator<Item = T> + Clone) -> T {
    let max = values
        .clone()
        .into_iter()
        .fold(T::neg_infinity(), T::max_of);
    if max.is_neg_infinity() {
        return max;
    }
    let sum = values
        .into_iter()
        .filter(|v| v.is_finite_value())
        .fold(T::zero(), |acc, v| acc + (v - max).exp());
    max + sum.ln()
}
