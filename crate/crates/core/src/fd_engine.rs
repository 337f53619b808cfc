//! Finite-difference evaluation of the tensor set.
//!
//! Shares nothing with the jet engine except the expression evaluator. `F` is
//! evaluated in 192-bit arithmetic; `g`, `C` and the spray at any point come
//! from central differences of `F²` with a tiny step, and every derivative of
//! the spray up to order four comes from Richardson-extrapolated differences
//! of that spray with step [`SPRAY_STEP`]. Spray values are memoised per
//! stencil node, so the many overlapping stencils cost one spray each.
//!
//! Expected accuracy is about `1e-8` relative on well-scaled points, which is
//! why classification with this engine uses the looser tolerance
//! [`FD_TOLERANCE`].

use std::cell::RefCell;
use std::collections::HashMap;

use crate::error::Result;
use crate::jets::fd::{central_difference, richardson, scaled_steps};
use crate::metrics::{MetricSpec, TangentPoint};
use crate::quad::Quad;
use crate::scalar::Scalar;
use crate::tensors::{index_tuples, invert, check_conditioning, IndexedTensor, PointTensors, Variance};

/// Base step of the inner differences that build `g`, `C` and `G`.
pub const INNER_STEP: f64 = 1e-12;
/// Base step of the outer differences of the spray.
pub const SPRAY_STEP: f64 = 1e-3;
/// Classification tolerance for this engine.
pub const FD_TOLERANCE: f64 = 1e-4;

struct Evaluator<'a> {
    spec: &'a MetricSpec,
    n: usize,
    cache: RefCell<HashMap<Vec<u64>, Vec<Quad>>>,
}

impl<'a> Evaluator<'a> {
    fn phi(&self, z: &[Quad]) -> Result<Quad> {
        let f = self.spec.expression().evaluate_with(z)?;
        Ok(f.mul(&f))
    }

    /// Plain central difference of `F²` at `z`.
    fn phi_partial(&self, z: &[Quad], slots: &[usize]) -> Result<Quad> {
        let mut alpha = vec![0u8; 2 * self.n];
        for &s in slots {
            alpha[s] += 1;
        }
        let zf: Vec<f64> = z.iter().map(Quad::to_f64).collect();
        let steps = scaled_steps(&zf, INNER_STEP);
        central_difference(&mut |w: &[Quad]| self.phi(w), z, &alpha, &steps)
    }

    fn metric(&self, z: &[Quad]) -> Result<Vec<Vec<Quad>>> {
        let n = self.n;
        let mut g = vec![vec![Quad::from_f64(0.0); n]; n];
        for i in 0..n {
            for j in i..n {
                let v = self.phi_partial(z, &[n + i, n + j])?.scale(0.5);
                g[i][j] = v.clone();
                g[j][i] = v;
            }
        }
        Ok(g)
    }

    /// `G^i` at `z`, in extended precision.
    fn spray(&self, z: &[Quad]) -> Result<Vec<Quad>> {
        let key: Vec<u64> = z.iter().map(|q| q.to_f64().to_bits()).collect();
        if let Some(v) = self.cache.borrow().get(&key) {
            return Ok(v.clone());
        }
        let n = self.n;
        let g = self.metric(z)?;
        let (ginv, _) = invert(&g)?;
        let mut bracket = Vec::with_capacity(n);
        for j in 0..n {
            let mut acc = self.phi_partial(z, &[j])?.neg();
            for k in 0..n {
                acc = acc.add(&self.phi_partial(z, &[k, n + j])?.mul(&z[n + k]));
            }
            bracket.push(acc);
        }
        let spray: Vec<Quad> = (0..n)
            .map(|i| {
                let mut acc = Quad::from_f64(0.0);
                for j in 0..n {
                    acc = acc.add(&ginv[i][j].mul(&bracket[j]));
                }
                acc.scale(0.25)
            })
            .collect();
        self.cache.borrow_mut().insert(key, spray.clone());
        Ok(spray)
    }

    /// `∂^α G^i` for every `i`, `α` given as slot list over `(x, y)`.
    fn spray_partial(&self, base: &[Quad], steps: &[f64], slots: &[usize]) -> Result<Vec<f64>> {
        let mut alpha = vec![0u8; 2 * self.n];
        for &s in slots {
            alpha[s] += 1;
        }
        (0..self.n)
            .map(|i| {
                let d = richardson(|w: &[Quad]| -> Result<Quad> { Ok(self.spray(w)?[i].clone()) }, base, &alpha, steps)?;
                Ok(d.to_f64())
            })
            .collect()
    }
}

/// All tensors at `p` by finite differences. Alternative-route fields repeat
/// the primary values.
pub fn compute(spec: &MetricSpec, p: &TangentPoint) -> Result<PointTensors> {
    use Variance::{Down as D, Up as U};
    let n = spec.dimension();
    let ev = Evaluator {
        spec,
        n,
        cache: RefCell::new(HashMap::new()),
    };
    let coords = p.coordinates();
    let base: Vec<Quad> = coords.iter().map(|&v| Quad::from_f64(v)).collect();
    let steps = scaled_steps(&coords, SPRAY_STEP);
    let f = spec.eval(&p.x, &p.y)?;
    let y = &p.y;

    let gq = ev.metric(&base)?;
    let g_vals: Vec<f64> = gq.iter().flatten().map(Quad::to_f64).collect();
    check_conditioning(&g_vals, n)?;
    let (ginv_q, _) = invert(&gq)?;
    let g = IndexedTensor::new(p, vec![D, D], g_vals);
    let g_inv = IndexedTensor::new(p, vec![U, U], ginv_q.iter().flatten().map(Quad::to_f64).collect());
    let gi = |i: usize, j: usize| g_inv.components[i * n + j];

    let cartan = IndexedTensor::new(
        p,
        vec![D, D, D],
        index_tuples(n, 3)
            .iter()
            .map(|t| Ok(ev.phi_partial(&base, &[n + t[0], n + t[1], n + t[2]])?.scale(0.25).to_f64()))
            .collect::<Result<_>>()?,
    );
    let trace = |t: &IndexedTensor| {
        IndexedTensor::new(
            p,
            vec![D],
            (0..n)
                .map(|i| {
                    let mut acc = 0.0;
                    for j in 0..n {
                        for k in 0..n {
                            acc += gi(j, k) * t.get(&[i, j, k]);
                        }
                    }
                    acc
                })
                .collect(),
        )
    };
    let mean_cartan = trace(&cartan);

    // every spray derivative that is needed, keyed by sorted slot list
    let mut parts: HashMap<Vec<usize>, Vec<f64>> = HashMap::new();
    let mut need = |slots: Vec<usize>| -> Result<()> {
        let mut s = slots;
        s.sort_unstable();
        if let std::collections::hash_map::Entry::Vacant(e) = parts.entry(s) {
            let v = ev.spray_partial(&base, &steps, e.key())?;
            e.insert(v);
        }
        Ok(())
    };
    let ys = |t: &[usize]| t.iter().map(|i| n + i).collect::<Vec<_>>();
    for r in 0..=4 {
        for t in index_tuples(n, r) {
            if t.windows(2).all(|w| w[0] <= w[1]) {
                need(ys(&t))?;
                if r <= 3 {
                    for s in 0..n {
                        let mut v = ys(&t);
                        v.push(s);
                        need(v)?;
                    }
                }
            }
        }
    }
    let gp = |slots: Vec<usize>, i: usize| -> f64 {
        let mut s = slots;
        s.sort_unstable();
        parts[&s][i]
    };

    let spray = IndexedTensor::new(p, vec![U], parts[&Vec::new()].clone());
    let connection = IndexedTensor::from_fn(p, vec![U, D], |t| gp(vec![n + t[1]], t[0]));
    let nc = |i: usize, j: usize| connection.components[i * n + j];
    let berwald_connection = IndexedTensor::from_fn(p, vec![U, D, D], |t| gp(ys(&t[1..]), t[0]));
    let berwald = IndexedTensor::from_fn(p, vec![U, D, D, D], |t| gp(ys(&t[1..]), t[0]));
    let mean_berwald = IndexedTensor::from_fn(p, vec![D, D], |t| {
        0.5 * (0..n).map(|m| berwald.get(&[m, m, t[0], t[1]])).sum::<f64>()
    });
    // ∂E_ij/∂y^l and ∂E_ij/∂x^s
    let e_dy = |i: usize, j: usize, l: usize| -> f64 {
        0.5 * (0..n).map(|m| gp(ys(&[m, i, j, l]), m)).sum::<f64>()
    };
    let e_dx = |i: usize, j: usize, s: usize| -> f64 {
        let mut v = ys(&[i, j]);
        v.push(s);
        0.5 * (0..n)
            .map(|m| {
                let mut w = v.clone();
                w.push(n + m);
                gp(w, m)
            })
            .sum::<f64>()
    };

    let kappa = 2.0 / (n as f64 + 1.0);
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let douglas = IndexedTensor::from_fn(p, vec![U, D, D, D], |t| {
        let (i, j, k, l) = (t[0], t[1], t[2], t[3]);
        let e = |a: usize, b: usize| mean_berwald.get(&[a, b]);
        berwald.get(t)
            - kappa * (e(j, k) * delta(i, l) + e(k, l) * delta(i, j) + e(l, j) * delta(i, k) + e_dy(j, k, l) * y[i])
    });

    let y_down: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|m| g.components[i * n + m] * y[m]).sum())
        .collect();
    let landsberg = IndexedTensor::from_fn(p, vec![D, D, D], |t| {
        -0.5 * (0..n).map(|i| y_down[i] * berwald.get(&[i, t[0], t[1], t[2]])).sum::<f64>()
    });
    let mean_landsberg = trace(&landsberg);

    let h_curvature = IndexedTensor::from_fn(p, vec![D, D], |t| {
        let (i, j) = (t[0], t[1]);
        (0..n)
            .map(|s| {
                y[s] * e_dx(i, j, s) - 2.0 * spray.components[s] * e_dy(i, j, s)
                    - mean_berwald.get(&[s, j]) * nc(s, i)
                    - mean_berwald.get(&[i, s]) * nc(s, j)
            })
            .sum()
    });

    let riemann = IndexedTensor::from_fn(p, vec![U, D], |t| {
        let (i, k) = (t[0], t[1]);
        let mut r = 2.0 * gp(vec![k], i);
        for j in 0..n {
            r -= y[j] * gp(vec![j, n + k], i);
            r += 2.0 * spray.components[j] * berwald_connection.get(&[i, j, k]);
            r -= nc(i, j) * nc(j, k);
        }
        r
    });

    Ok(PointTensors {
        point: p.clone(),
        f,
        mean_berwald_alt: mean_berwald.clone(),
        mean_cartan_alt: mean_cartan.clone(),
        landsberg_alt: landsberg.clone(),
        mean_landsberg_alt: mean_landsberg.clone(),
        douglas_alt: douglas.clone(),
        g,
        g_inv,
        cartan,
        mean_cartan,
        spray,
        connection,
        berwald_connection,
        berwald,
        mean_berwald,
        douglas,
        landsberg,
        mean_landsberg,
        h_curvature,
        riemann,
    })
}

/// Relative agreement `|a - b| ≤ rel · max(|b|_∞, floor)` used to compare the
/// two engines; returns the worst ratio `|a - b| / max(|b|_∞, floor)`.
pub fn relative_gap(a: &IndexedTensor, b: &IndexedTensor, floor: f64) -> f64 {
    a.max_diff(b) / b.max_abs().max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hyperbolic_spray_and_curvature() {
        let m = MetricSpec::builtin_named("hyperbolic").unwrap();
        let p = TangentPoint { x: vec![0.0, 1.0], y: vec![1.0, 1.0] };
        let t = compute(&m, &p).unwrap();
        assert!((t.spray.components[0] + 1.0).abs() < 1e-10);
        assert!(t.spray.components[1].abs() < 1e-10);
        let k = t.flag_curvature(&[1.0, -1.0]).unwrap();
        assert!((k + 1.0).abs() < 1e-6, "{k}");
        assert!(t.landsberg.max_abs() < 1e-7);
    }

    #[test]
    fn agrees_with_jets_on_randers_var() {
        let m = MetricSpec::builtin_named("randers_var").unwrap();
        let p = TangentPoint { x: vec![0.3, 0.7], y: vec![1.0, 0.4] };
        let fd = compute(&m, &p).unwrap();
        let jet = PointTensors::compute(&m, &p).unwrap();
        for ((name, a), (_, b)) in jet.named().into_iter().zip(fd.named()) {
            let gap = relative_gap(b, a, 1e-3);
            assert!(gap < 1e-5, "{name}: {gap:e}");
        }
    }
}
