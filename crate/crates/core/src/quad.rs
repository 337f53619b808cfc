//! Extended-precision scalar for the finite-difference oracle.
//!
//! High-order difference quotients lose roughly `order * log10(1/step)` digits
//! to cancellation. Evaluating the metric in 192-bit binary floating point
//! keeps nested sixth-order stencils well below the `1e-5` comparison budget.

use std::cell::RefCell;

use astro_float::{BigFloat, Consts, RoundingMode, Sign};

use crate::scalar::{DomainError, Scalar};

/// Mantissa bits.
pub const PRECISION: usize = 192;
const RM: RoundingMode = RoundingMode::ToEven;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("astro-float constant cache"));
}

fn with_consts<T>(f: impl FnOnce(&mut Consts) -> T) -> T {
    CONSTS.with(|c| f(&mut c.borrow_mut()))
}

#[derive(Debug, Clone)]
pub struct Quad(BigFloat);

impl Quad {
    pub fn from_f64(v: f64) -> Quad {
        Quad(BigFloat::from_f64(v, PRECISION))
    }

    pub fn to_f64(&self) -> f64 {
        let Some((words, _, sign, exponent, _)) = self.0.as_raw_parts() else {
            return if self.0.is_inf_pos() {
                f64::INFINITY
            } else if self.0.is_inf_neg() {
                f64::NEG_INFINITY
            } else {
                f64::NAN
            };
        };
        let len = words.len();
        if len == 0 || words.iter().all(|&w| w == 0) {
            return 0.0;
        }
        let hi = words[len - 1] as f64;
        let lo = if len > 1 { words[len - 2] as f64 } else { 0.0 };
        // mantissa is 0.m * 2^e with the top word holding the leading bits
        let frac = (hi + lo / 18446744073709551616.0) / 18446744073709551616.0;
        let v = frac * 2f64.powi(exponent);
        match sign {
            Sign::Pos => v,
            Sign::Neg => -v,
        }
    }

    pub fn scale(&self, c: f64) -> Quad {
        self.mul(&Quad::from_f64(c))
    }

    fn is_negative(&self) -> bool {
        self.0.is_negative() && !self.0.is_zero()
    }
}

impl Scalar for Quad {
    fn constant_like(&self, c: f64) -> Self {
        Quad::from_f64(c)
    }
    fn value(&self) -> f64 {
        self.to_f64()
    }
    fn add(&self, rhs: &Self) -> Self {
        Quad(self.0.add(&rhs.0, PRECISION, RM))
    }
    fn sub(&self, rhs: &Self) -> Self {
        Quad(self.0.sub(&rhs.0, PRECISION, RM))
    }
    fn mul(&self, rhs: &Self) -> Self {
        Quad(self.0.mul(&rhs.0, PRECISION, RM))
    }
    fn neg(&self) -> Self {
        Quad(self.0.neg())
    }
    fn div(&self, rhs: &Self) -> Result<Self, DomainError> {
        if rhs.0.is_zero() {
            return Err(DomainError::DivisionByZero);
        }
        Ok(Quad(self.0.div(&rhs.0, PRECISION, RM)))
    }
    fn sqrt(&self) -> Result<Self, DomainError> {
        if self.is_negative() {
            return Err(DomainError::SqrtNegative(self.to_f64()));
        }
        if self.0.is_zero() {
            return Ok(self.clone());
        }
        Ok(Quad(self.0.sqrt(PRECISION, RM)))
    }
    fn exp(&self) -> Self {
        Quad(with_consts(|cc| self.0.exp(PRECISION, RM, cc)))
    }
    fn ln(&self) -> Result<Self, DomainError> {
        if self.is_negative() || self.0.is_zero() {
            return Err(DomainError::LogNonPositive(self.to_f64()));
        }
        Ok(Quad(with_consts(|cc| self.0.ln(PRECISION, RM, cc))))
    }
    fn sin(&self) -> Self {
        Quad(with_consts(|cc| self.0.sin(PRECISION, RM, cc)))
    }
    fn cos(&self) -> Self {
        Quad(with_consts(|cc| self.0.cos(PRECISION, RM, cc)))
    }
    fn pow_rational(&self, num: i64, den: i64) -> Result<Self, DomainError> {
        if self.is_negative() {
            return Err(DomainError::NegativeBase(self.to_f64()));
        }
        if self.0.is_zero() {
            return if num > 0 {
                Ok(self.clone())
            } else {
                Err(DomainError::DivisionByZero)
            };
        }
        if den == 2 {
            return self.sqrt()?.powi(num);
        }
        let q = Quad::from_f64(num as f64).div(&Quad::from_f64(den as f64))?;
        Ok(q.mul(&self.ln()?).exp())
    }
}
