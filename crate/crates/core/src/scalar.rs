//! Number types the expression evaluator can run on.
//!
//! Three implementations exist: plain `f64`, truncated Taylor jets
//! ([`crate::jets::Jet`]) and the extended-precision [`crate::quad::Quad`] used by
//! the finite-difference oracle. Every fallible primitive reports a
//! [`DomainError`] instead of producing NaN.

use thiserror::Error;

/// Why an elementary function could not be evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum DomainError {
    #[error("log of non-positive value {0}")]
    LogNonPositive(f64),
    #[error("sqrt of negative value {0}")]
    SqrtNegative(f64),
    #[error("division by zero")]
    DivisionByZero,
    #[error("fractional power of negative base {0}")]
    NegativeBase(f64),
    #[error("series pivot {0:e} below singularity threshold")]
    Singular(f64),
}

pub trait Scalar: Clone {
    /// A constant of the same kind (and, for jets, the same shape) as `self`.
    fn constant_like(&self, c: f64) -> Self;
    /// Point value, rounded to `f64`.
    fn value(&self) -> f64;

    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn neg(&self) -> Self;
    fn div(&self, rhs: &Self) -> Result<Self, DomainError>;
    fn sqrt(&self) -> Result<Self, DomainError>;
    fn exp(&self) -> Self;
    fn ln(&self) -> Result<Self, DomainError>;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;

    /// `self^n` for integer `n`; negative powers divide.
    fn powi(&self, n: i64) -> Result<Self, DomainError> {
        let mut acc = self.constant_like(1.0);
        let mut base = self.clone();
        let mut k = n.unsigned_abs();
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        if n < 0 {
            self.constant_like(1.0).div(&acc)
        } else {
            Ok(acc)
        }
    }

    /// `self^(num/den)` with `den > 1`; the base must be positive.
    fn pow_rational(&self, num: i64, den: i64) -> Result<Self, DomainError>;
}

impl Scalar for f64 {
    fn constant_like(&self, c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn neg(&self) -> Self {
        -self
    }
    fn div(&self, rhs: &Self) -> Result<Self, DomainError> {
        if *rhs == 0.0 {
            return Err(DomainError::DivisionByZero);
        }
        Ok(self / rhs)
    }
    fn sqrt(&self) -> Result<Self, DomainError> {
        if *self < 0.0 {
            return Err(DomainError::SqrtNegative(*self));
        }
        Ok(f64::sqrt(*self))
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Result<Self, DomainError> {
        if *self <= 0.0 {
            return Err(DomainError::LogNonPositive(*self));
        }
        Ok(f64::ln(*self))
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn pow_rational(&self, num: i64, den: i64) -> Result<Self, DomainError> {
        if *self < 0.0 {
            return Err(DomainError::NegativeBase(*self));
        }
        if *self == 0.0 {
            return if num > 0 {
                Ok(0.0)
            } else {
                Err(DomainError::DivisionByZero)
            };
        }
        if den == 2 {
            return Ok(f64::sqrt(*self).powi(num as i32));
        }
        Ok(self.powf(num as f64 / den as f64))
    }
}
