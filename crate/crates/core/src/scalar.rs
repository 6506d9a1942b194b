//! Scalar abstraction shared by the moment, estimator, program and solver layers.
//!
//! Everything that touches constraint coefficients or objective weights is
//! generic over [`Scalar`], so the same code runs in `f64` for speed and in
//! exact rational arithmetic ([`crate::Rational`]) where integrality matters
//! (marginal constraints at `ε = 0`, linearization checks).

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive, Zero};

pub trait Scalar:
    Clone + Debug + Display + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Slack allowed when comparing a constraint activity against its right-hand side.
    fn feasibility_tol() -> Self;

    /// Slack allowed when comparing two objective values.
    fn objective_tol() -> Self;

    /// Whether arithmetic in this type is exact.
    fn is_exact() -> bool;

    /// Converts a finite `f64`. Rational types take the exact binary value.
    fn from_f64_exact(x: f64) -> Self {
        Self::from_f64(x).unwrap_or_else(|| panic!("non-finite value {x} cannot become a scalar"))
    }

    fn from_usize_exact(n: usize) -> Self {
        Self::from_usize(n).expect("count fits the scalar type")
    }

    /// `num / den`, exact for rational types.
    fn ratio(num: i64, den: i64) -> Self {
        Self::from_i64(num).expect("fits") / Self::from_i64(den).expect("fits")
    }

    fn as_f64(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }

    fn min_of(a: Self, b: Self) -> Self {
        if b < a {
            b
        } else {
            a
        }
    }
}

impl Scalar for f64 {
    fn feasibility_tol() -> Self {
        1e-12
    }
    fn objective_tol() -> Self {
        1e-9
    }
    fn is_exact() -> bool {
        false
    }
}

impl Scalar for f32 {
    fn feasibility_tol() -> Self {
        1e-5
    }
    fn objective_tol() -> Self {
        1e-4
    }
    fn is_exact() -> bool {
        false
    }
}

impl Scalar for BigRational {
    fn feasibility_tol() -> Self {
        BigRational::zero()
    }
    fn objective_tol() -> Self {
        BigRational::zero()
    }
    fn is_exact() -> bool {
        true
    }
    fn ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
}

/// `a <= b` up to the scalar's feasibility tolerance.
pub fn le_tol<S: Scalar>(a: &S, b: &S) -> bool {
    *a <= b.clone() + S::feasibility_tol()
}

/// `|a - b|` within the feasibility tolerance.
pub fn eq_tol<S: Scalar>(a: &S, b: &S) -> bool {
    (a.clone() - b.clone()).abs() <= S::feasibility_tol()
}

pub fn sum<S: Scalar, I: IntoIterator<Item = S>>(items: I) -> S {
    items.into_iter().fold(S::zero(), |acc, x| acc + x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_conversion_is_exact() {
        let r = BigRational::from_f64_exact(0.1);
        assert_ne!(r, BigRational::ratio(1, 10));
        assert_eq!(r.as_f64(), 0.1);
        assert_eq!(BigRational::ratio(1, 3) * BigRational::from_usize_exact(3), BigRational::from_i64(1).unwrap());
    }

    #[test]
    fn tolerances() {
        assert!(le_tol(&(1.0 / 3.0 * 3.0), &1.0));
        assert!(!le_tol(&BigRational::ratio(1, 3), &BigRational::ratio(1, 4)));
        assert!(eq_tol(&0.3f64, &(0.1 + 0.2)));
    }
}
