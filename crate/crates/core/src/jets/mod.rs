//! Truncated multivariate Taylor series ("jets").
//!
//! A [`Jet`] stores the Taylor coefficients `c_α` of a scalar field around a
//! base point for every multi-index `|α| <= order`, so that the mixed partial
//! derivative is `∂^α f = α! c_α`. Arithmetic truncates at the smaller order
//! of the two operands; [`Jet::derivative`] shifts coefficients and lowers the
//! order by one, which lets whole formulas (matrix inverses, sprays, ...) be
//! differentiated after they have been assembled.
//!
//! Coefficients are stored densely in graded order (all degree-0 entries,
//! then degree 1, ...), so a jet of order `k` is a prefix of the storage for
//! any higher order. For 4 variables at order 6 that is 210 doubles.

pub mod fd;

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

use crate::expr::{ExprError, Expression};
use crate::scalar::{DomainError, Scalar};

pub use fd::fd_partial;

/// Highest total derivative order any jet carries.
pub const MAX_ORDER: usize = 6;

/// Series pivots smaller than this are treated as singular.
pub const PIVOT_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("jet order {0} outside [0, {MAX_ORDER}]")]
    OrderOutOfRange(usize),
    #[error("multi-index of order {requested} exceeds jet order {order}")]
    OrderExceeded { requested: usize, order: usize },
    #[error("multi-index has {got} entries, expected {expected}")]
    Shape { expected: usize, got: usize },
    #[error("finite-difference step must be positive, got {0}")]
    BadStep(f64),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

impl From<DomainError> for JetError {
    fn from(e: DomainError) -> Self {
        JetError::Expr(ExprError::Domain(e))
    }
}

/// Exponent counts per variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<u8>);

impl MultiIndex {
    pub fn zero(nvars: usize) -> Self {
        MultiIndex(vec![0; nvars])
    }

    pub fn from_counts(counts: &[u8]) -> Self {
        MultiIndex(counts.to_vec())
    }

    /// Builds `α` from a list of differentiated slots, e.g. `[2, 3]` for
    /// `∂²/∂y1∂y2` when `nvars = 4`.
    pub fn from_slots(nvars: usize, slots: &[usize]) -> Self {
        let mut c = vec![0u8; nvars];
        for &s in slots {
            c[s] += 1;
        }
        MultiIndex(c)
    }

    pub fn counts(&self) -> &[u8] {
        &self.0
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn order(&self) -> usize {
        self.0.iter().map(|&c| c as usize).sum()
    }

    /// `α! = Π α_i!`
    pub fn factorial(&self) -> f64 {
        self.0
            .iter()
            .map(|&c| (1..=c as u32).product::<u32>() as f64)
            .product()
    }
}

/// Index tables shared by every jet over the same number of variables.
#[derive(Debug)]
pub struct JetSpace {
    nvars: usize,
    indices: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
    /// `len[k]` = number of multi-indices with `|α| <= k`.
    len: [usize; MAX_ORDER + 1],
    /// `raise[v][p]` = position of `α_p + e_v`, for `|α_p| < MAX_ORDER`.
    raise: Vec<Vec<u32>>,
    /// For each position `γ`, all `(α, β)` with `α + β = γ`.
    pairs: Vec<Vec<(u32, u32)>>,
}

impl JetSpace {
    /// Shared space for `nvars` variables.
    pub fn shared(nvars: usize) -> Arc<JetSpace> {
        static SPACES: OnceLock<Mutex<HashMap<usize, Arc<JetSpace>>>> = OnceLock::new();
        let map = SPACES.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = map.lock().expect("jet space cache poisoned");
        guard
            .entry(nvars)
            .or_insert_with(|| Arc::new(JetSpace::build(nvars)))
            .clone()
    }

    fn build(nvars: usize) -> JetSpace {
        let mut indices = Vec::new();
        let mut len = [0; MAX_ORDER + 1];
        for (degree, slot) in len.iter_mut().enumerate() {
            let mut cur = vec![0u8; nvars];
            compositions(degree, 0, &mut cur, &mut indices);
            *slot = indices.len();
        }
        let lookup: HashMap<MultiIndex, usize> = indices
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i))
            .collect();
        let raise = (0..nvars)
            .map(|v| {
                indices
                    .iter()
                    .map(|a| {
                        if a.order() >= MAX_ORDER {
                            return u32::MAX;
                        }
                        let mut b = a.clone();
                        b.0[v] += 1;
                        lookup[&b] as u32
                    })
                    .collect()
            })
            .collect();
        let mut pairs = vec![Vec::new(); indices.len()];
        for (i, a) in indices.iter().enumerate() {
            for (j, b) in indices.iter().enumerate() {
                if a.order() + b.order() > MAX_ORDER {
                    continue;
                }
                let sum = MultiIndex(a.0.iter().zip(&b.0).map(|(x, y)| x + y).collect());
                pairs[lookup[&sum]].push((i as u32, j as u32));
            }
        }
        JetSpace {
            nvars,
            indices,
            lookup,
            len,
            raise,
            pairs,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    /// Number of coefficients of a jet of the given order.
    pub fn len(&self, order: usize) -> usize {
        self.len[order]
    }

    pub fn multi_indices(&self, order: usize) -> &[MultiIndex] {
        &self.indices[..self.len[order]]
    }

    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        self.lookup.get(alpha).copied()
    }
}

/// Multi-indices of exact `degree`, highest power on the first variable first.
fn compositions(degree: usize, var: usize, cur: &mut Vec<u8>, out: &mut Vec<MultiIndex>) {
    let n = cur.len();
    if var == n - 1 {
        cur[var] = degree as u8;
        out.push(MultiIndex(cur.clone()));
        cur[var] = 0;
        return;
    }
    for k in (0..=degree).rev() {
        cur[var] = k as u8;
        compositions(degree - k, var + 1, cur, out);
    }
    cur[var] = 0;
}

#[derive(Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    order: usize,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("nvars", &self.space.nvars)
            .field("order", &self.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, order: usize, c: f64) -> Jet {
        let mut coeffs = vec![0.0; space.len(order)];
        coeffs[0] = c;
        Jet {
            space: space.clone(),
            order,
            coeffs,
        }
    }

    /// The coordinate function `t_var` expanded around `base`.
    pub fn variable(space: &Arc<JetSpace>, order: usize, base: f64, var: usize) -> Jet {
        let mut j = Jet::constant(space, order, base);
        if order > 0 {
            let mut a = MultiIndex::zero(space.nvars);
            a.0[var] = 1;
            j.coeffs[space.lookup[&a]] = 1.0;
        }
        j
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nvars(&self) -> usize {
        self.space.nvars
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, alpha: &MultiIndex) -> Result<f64, JetError> {
        if alpha.nvars() != self.nvars() {
            return Err(JetError::Shape {
                expected: self.nvars(),
                got: alpha.nvars(),
            });
        }
        if alpha.order() > self.order {
            return Err(JetError::OrderExceeded {
                requested: alpha.order(),
                order: self.order,
            });
        }
        Ok(self.coeffs[self.space.lookup[alpha]])
    }

    /// Mixed partial derivative `∂^α f = α! c_α`.
    pub fn partial(&self, alpha: &MultiIndex) -> Result<f64, JetError> {
        Ok(alpha.factorial() * self.coeff(alpha)?)
    }

    /// Drops all coefficients above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order);
        Jet {
            space: self.space.clone(),
            order,
            coeffs: self.coeffs[..self.space.len(order)].to_vec(),
        }
    }

    /// `∂f/∂t_var` as a jet of one lower order.
    ///
    /// Panics on an order-0 jet; callers size their lifts so this never
    /// happens.
    pub fn derivative(&self, var: usize) -> Jet {
        assert!(self.order > 0, "derivative of an order-0 jet");
        let order = self.order - 1;
        let n = self.space.len(order);
        let raise = &self.space.raise[var];
        let coeffs = (0..n)
            .map(|p| {
                let k = self.space.indices[p].0[var] as f64 + 1.0;
                k * self.coeffs[raise[p] as usize]
            })
            .collect();
        Jet {
            space: self.space.clone(),
            order,
            coeffs,
        }
    }

    pub fn scale(&self, c: f64) -> Jet {
        Jet {
            space: self.space.clone(),
            order: self.order,
            coeffs: self.coeffs.iter().map(|v| v * c).collect(),
        }
    }

    fn zip(&self, rhs: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        let order = self.order.min(rhs.order);
        let n = self.space.len(order);
        Jet {
            space: self.space.clone(),
            order,
            coeffs: (0..n).map(|i| f(self.coeffs[i], rhs.coeffs[i])).collect(),
        }
    }

    fn product(&self, rhs: &Jet) -> Jet {
        debug_assert_eq!(self.nvars(), rhs.nvars());
        let order = self.order.min(rhs.order);
        let n = self.space.len(order);
        let coeffs = self.space.pairs[..n]
            .iter()
            .map(|pairs| {
                pairs
                    .iter()
                    .map(|&(a, b)| self.coeffs[a as usize] * rhs.coeffs[b as usize])
                    .sum()
            })
            .collect();
        Jet {
            space: self.space.clone(),
            order,
            coeffs,
        }
    }

    /// `Σ_m series[m] (f - f0)^m` by Horner's rule; `series[m]` is the m-th
    /// Taylor coefficient of the outer function at `f0`.
    fn compose(&self, series: &[f64]) -> Jet {
        let mut tail = self.clone();
        tail.coeffs[0] = 0.0;
        let mut acc = Jet::constant(&self.space, self.order, series[self.order]);
        for m in (0..self.order).rev() {
            acc = acc.product(&tail);
            acc.coeffs[0] += series[m];
        }
        acc
    }

    fn check_pivot(&self) -> Result<f64, DomainError> {
        let a0 = self.coeffs[0];
        if a0.abs() < PIVOT_THRESHOLD {
            return Err(DomainError::Singular(a0));
        }
        Ok(a0)
    }

    /// `self^r` for real `r`, base constant term positive (or any sign when
    /// `r` is an integer).
    fn power_series(&self, r: f64) -> Result<Jet, DomainError> {
        let a0 = self.check_pivot()?;
        let mut series = vec![0.0; self.order + 1];
        let mut binom = 1.0;
        for (m, s) in series.iter_mut().enumerate() {
            *s = binom * a0.powf(r - m as f64);
            binom *= (r - m as f64) / (m as f64 + 1.0);
        }
        Ok(self.compose(&series))
    }

    pub fn recip(&self) -> Result<Jet, DomainError> {
        self.check_pivot()?;
        self.power_series(-1.0)
    }
}

impl std::ops::Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.zip(rhs, |a, b| a + b)
    }
}

impl std::ops::Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.zip(rhs, |a, b| a - b)
    }
}

impl std::ops::Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.product(rhs)
    }
}

impl std::ops::Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Scalar for Jet {
    fn constant_like(&self, c: f64) -> Self {
        Jet::constant(&self.space, self.order, c)
    }
    fn value(&self) -> f64 {
        self.coeffs[0]
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
        if rhs.coeffs[0] == 0.0 {
            return Err(DomainError::DivisionByZero);
        }
        Ok(self.product(&rhs.recip()?))
    }
    fn sqrt(&self) -> Result<Self, DomainError> {
        if self.coeffs[0] < 0.0 {
            return Err(DomainError::SqrtNegative(self.coeffs[0]));
        }
        self.power_series(0.5)
    }
    fn exp(&self) -> Self {
        let e = self.coeffs[0].exp();
        let mut series = vec![0.0; self.order + 1];
        let mut fact = 1.0;
        for (m, s) in series.iter_mut().enumerate() {
            if m > 0 {
                fact *= m as f64;
            }
            *s = e / fact;
        }
        self.compose(&series)
    }
    fn ln(&self) -> Result<Self, DomainError> {
        let a0 = self.coeffs[0];
        if a0 <= 0.0 {
            return Err(DomainError::LogNonPositive(a0));
        }
        let a0 = self.check_pivot()?;
        let mut series = vec![0.0; self.order + 1];
        series[0] = a0.ln();
        for (m, s) in series.iter_mut().enumerate().skip(1) {
            let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
            *s = sign / (m as f64 * a0.powi(m as i32));
        }
        Ok(self.compose(&series))
    }
    fn sin(&self) -> Self {
        self.compose(&trig_series(self.coeffs[0], self.order, 0))
    }
    fn cos(&self) -> Self {
        self.compose(&trig_series(self.coeffs[0], self.order, 1))
    }
    fn pow_rational(&self, num: i64, den: i64) -> Result<Self, DomainError> {
        let a0 = self.coeffs[0];
        if a0 < 0.0 {
            return Err(DomainError::NegativeBase(a0));
        }
        self.power_series(num as f64 / den as f64)
    }
}

/// Taylor coefficients of `sin` (shift 0) or `cos` (shift 1) at `a`.
fn trig_series(a: f64, order: usize, shift: usize) -> Vec<f64> {
    let (s, c) = a.sin_cos();
    let cycle = [s, c, -s, -c];
    let mut fact = 1.0;
    (0..=order)
        .map(|m| {
            if m > 0 {
                fact *= m as f64;
            }
            cycle[(m + shift) % 4] / fact
        })
        .collect()
}

/// Taylor jet of `expr` at `point` (ordered `x1..xn, y1..yn`) up to `order`.
pub fn lift(expr: &Expression, point: &[f64], order: usize) -> Result<Jet, JetError> {
    if order > MAX_ORDER {
        return Err(JetError::OrderOutOfRange(order));
    }
    let space = JetSpace::shared(point.len());
    let vars: Vec<Jet> = point
        .iter()
        .enumerate()
        .map(|(i, &p)| Jet::variable(&space, order, p, i))
        .collect();
    Ok(expr.evaluate_with(&vars)?)
}
