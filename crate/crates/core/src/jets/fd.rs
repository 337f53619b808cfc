//! Central finite differences with one Richardson level.
//!
//! The `k`-th derivative along one axis uses the centred stencil
//! `δ^k f / h^k` with nodes at `(k/2 - j) h`, `j = 0..k`, which is second-order
//! accurate. Mixed partials take the tensor product of the one-axis stencils,
//! so the error expansion stays even in `h`, and `(4 D(h/2) - D(h)) / 3`
//! removes the leading `h²` term. Error model: `O(h⁴)` per differentiated
//! direction, plus rounding `~ eps / h^|α|` where `eps` is the working
//! precision of [`Quad`].
//!
//! Everything here is deliberately independent of the jet arithmetic in the
//! parent module: it only ever evaluates the expression tree at points.

use crate::expr::Expression;
use crate::quad::Quad;
use crate::scalar::Scalar;

use super::{JetError, MultiIndex, MAX_ORDER};

/// Default base step before coordinate scaling.
pub const DEFAULT_STEP: f64 = 1e-3;

/// Nodes (in units of `h`) and weights of the centred `k`-th difference.
pub fn central_stencil(k: usize) -> Vec<(f64, f64)> {
    let mut binom = 1.0;
    (0..=k)
        .map(|j| {
            let w = if j % 2 == 0 { binom } else { -binom };
            let node = (k as f64) / 2.0 - j as f64;
            binom = binom * (k - j) as f64 / (j + 1) as f64;
            (node, w)
        })
        .collect()
}

/// One centred difference quotient (no extrapolation) of `f` at `point`.
pub fn central_difference<E>(
    f: &mut impl FnMut(&[Quad]) -> Result<Quad, E>,
    point: &[Quad],
    alpha: &[u8],
    steps: &[f64],
) -> Result<Quad, E> {
    let axes: Vec<(usize, Vec<(f64, f64)>)> = alpha
        .iter()
        .enumerate()
        .filter(|(_, &k)| k > 0)
        .map(|(v, &k)| (v, central_stencil(k as usize)))
        .collect();
    let mut total = Quad::from_f64(0.0);
    let mut idx = vec![0usize; axes.len()];
    let mut shifted = point.to_vec();
    loop {
        let mut weight = 1.0;
        for (a, (v, stencil)) in axes.iter().enumerate() {
            let (node, w) = stencil[idx[a]];
            weight *= w;
            shifted[*v] = point[*v].add(&Quad::from_f64(node).mul(&Quad::from_f64(steps[*v])));
        }
        total = total.add(&f(&shifted)?.scale(weight));
        // odometer over the stencil product
        let mut a = 0;
        loop {
            if a == axes.len() {
                let mut denom = Quad::from_f64(1.0);
                for (v, &k) in alpha.iter().enumerate() {
                    for _ in 0..k {
                        denom = denom.mul(&Quad::from_f64(steps[v]));
                    }
                }
                return Ok(total
                    .div(&denom)
                    .expect("finite-difference steps are positive"));
            }
            idx[a] += 1;
            if idx[a] < axes[a].1.len() {
                break;
            }
            idx[a] = 0;
            a += 1;
        }
    }
}

/// Richardson-extrapolated mixed partial `∂^α f` of an arbitrary
/// extended-precision function, with per-axis steps.
pub fn richardson<E>(
    mut f: impl FnMut(&[Quad]) -> Result<Quad, E>,
    point: &[Quad],
    alpha: &[u8],
    steps: &[f64],
) -> Result<Quad, E> {
    if alpha.iter().all(|&k| k == 0) {
        return f(point);
    }
    let coarse = central_difference(&mut f, point, alpha, steps)?;
    let half: Vec<f64> = steps.iter().map(|h| h / 2.0).collect();
    let fine = central_difference(&mut f, point, alpha, &half)?;
    Ok(fine
        .scale(4.0)
        .sub(&coarse)
        .div(&Quad::from_f64(3.0))
        .expect("nonzero"))
}

/// Steps `step * max(1, |coordinate|)` per axis.
pub fn scaled_steps(point: &[f64], step: f64) -> Vec<f64> {
    point.iter().map(|p| step * p.abs().max(1.0)).collect()
}

/// Finite-difference estimate of `∂^α expr` at `point`.
///
/// Evaluates the expression in 192-bit arithmetic so cancellation in the
/// high-order stencils does not swamp the result.
pub fn fd_partial(
    expr: &Expression,
    point: &[f64],
    alpha: &MultiIndex,
    step: f64,
) -> Result<f64, JetError> {
    if !(step > 0.0) {
        return Err(JetError::BadStep(step));
    }
    if alpha.nvars() != point.len() {
        return Err(JetError::Shape {
            expected: point.len(),
            got: alpha.nvars(),
        });
    }
    if alpha.order() > MAX_ORDER {
        return Err(JetError::OrderOutOfRange(alpha.order()));
    }
    let base: Vec<Quad> = point.iter().map(|&p| Quad::from_f64(p)).collect();
    let steps = scaled_steps(point, step);
    let d = richardson(
        |z: &[Quad]| -> Result<Quad, JetError> {
            expr.evaluate_with(z).map_err(JetError::from)
        },
        &base,
        alpha.counts(),
        &steps,
    )?;
    Ok(d.to_f64())
}

/// Helper for callers that build their own extended-precision functions.
pub fn to_quad(v: &[f64]) -> Vec<Quad> {
    v.iter().map(|&x| Quad::from_f64(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::lift;

    fn parse(s: &str, n: usize) -> Expression {
        Expression::parse(s, n).unwrap()
    }

    #[test]
    fn stencils() {
        assert_eq!(central_stencil(1), vec![(0.5, 1.0), (-0.5, -1.0)]);
        assert_eq!(central_stencil(2), vec![(1.0, 1.0), (0.0, -2.0), (-1.0, 1.0)]);
        let s3: f64 = central_stencil(3).iter().map(|(_, w)| w).sum();
        assert_eq!(s3, 0.0);
    }

    #[test]
    fn square_second_derivative() {
        let d = fd_partial(
            &parse("y1^2", 1),
            &[0.0, 0.7],
            &MultiIndex::from_counts(&[0, 2]),
            1e-2,
        )
        .unwrap();
        assert!((d - 2.0).abs() < 1e-8);
    }

    #[test]
    fn exp_third_derivative() {
        let d = fd_partial(
            &parse("exp(y1)", 1),
            &[0.0, 0.0],
            &MultiIndex::from_counts(&[0, 3]),
            1e-2,
        )
        .unwrap();
        assert!((d - 1.0).abs() < 1e-6, "{d}");
    }

    #[test]
    fn sixth_order_mixed_against_jet() {
        let e = parse("sqrt(y1^2 + y2^2 + 0.1*sqrt(y1^4 + y2^4))*exp(x1/3)", 2);
        let p = [0.2, -0.4, 0.8, 0.6];
        let j = lift(&e, &p, 6).unwrap();
        for counts in [[0u8, 0, 3, 3], [1, 0, 2, 3], [0, 0, 6, 0], [2, 0, 1, 1]] {
            let a = MultiIndex::from_counts(&counts);
            let exact = j.partial(&a).unwrap();
            let fd = fd_partial(&e, &p, &a, DEFAULT_STEP).unwrap();
            assert!(
                (exact - fd).abs() <= 1e-7 * exact.abs().max(1.0),
                "{counts:?}: {exact} vs {fd}"
            );
        }
    }

    #[test]
    fn rejects_bad_input() {
        let e = parse("y1", 1);
        assert!(matches!(
            fd_partial(&e, &[0.0, 1.0], &MultiIndex::from_counts(&[0, 1]), 0.0),
            Err(JetError::BadStep(_))
        ));
        let e = parse("log(y1)", 1);
        assert!(fd_partial(&e, &[0.0, 1e-4], &MultiIndex::from_counts(&[0, 1]), 1e-3).is_err());
    }
}
