//! Curvature tensors of a Finsler metric at a tangent point.
//!
//! Everything is read off Taylor jets of `Φ = F²` in the `2n` variables
//! `(x, y)`. Lifting `F` to order 6 leaves enough derivatives for the
//! third y-derivatives of the spray, one more derivative of the mean Berwald
//! tensor, and the mixed second derivatives in the Riemann curvature.
//!
//! Several quantities are computed along two unrelated routes and the
//! disagreement is kept in [`PointTensors::identities`]:
//!
//! - `E` as `½ B^m_mij` and as `½ ∂²(∂_m G^m)/∂y^i∂y^j`;
//! - `I` as `g^{jk} C_ijk` and as `½ ∂ ln det g / ∂y^i`;
//! - `L` as `-½ y_i B^i_jkl` and as the horizontal derivative `C_ijk|s y^s`;
//! - `J` as `g^{jk} L_ijk` and via `y^m ∂_m I_i - I_m N^m_i - 2 G^m ∂I_i/∂y^m`;
//! - `D` as `∂³/∂y³ [G^i - (∂_m G^m) y^i/(n+1)]` and through the
//!   decomposition `B - 2/(n+1){E_jk δ^i_l + E_kl δ^i_j + E_lj δ^i_k + E_jk,l y^i}`.
//!   The coefficient `1/(n+1)` in the first form is the one for which the
//!   two agree when `E = ½ tr B`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jets::{lift, Jet, MAX_ORDER};
use crate::metrics::{MetricSpec, TangentPoint};
use crate::scalar::Scalar;

/// Largest admissible condition number of `g`.
pub const MAX_CONDITION: f64 = 1e12;
/// Flags whose Gram determinant falls below this are rejected.
pub const MIN_FLAG_AREA: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variance {
    Up,
    Down,
}

/// Dense components `T[i0][i1]...` in row-major slot order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexedTensor {
    pub point: TangentPoint,
    pub variance: Vec<Variance>,
    pub dimension: usize,
    pub components: Vec<f64>,
}

/// All index tuples of the given rank in row-major order.
pub fn index_tuples(n: usize, rank: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..rank {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..n).map(move |i| {
                    let mut t = t.clone();
                    t.push(i);
                    t
                })
            })
            .collect();
    }
    out
}

impl IndexedTensor {
    pub fn new(point: &TangentPoint, variance: Vec<Variance>, components: Vec<f64>) -> Self {
        let n = point.dimension();
        assert_eq!(components.len(), n.pow(variance.len() as u32));
        IndexedTensor {
            point: point.clone(),
            variance,
            dimension: n,
            components,
        }
    }

    pub fn from_fn(
        point: &TangentPoint,
        variance: Vec<Variance>,
        f: impl Fn(&[usize]) -> f64,
    ) -> Self {
        let n = point.dimension();
        let components = index_tuples(n, variance.len()).iter().map(|t| f(t)).collect();
        IndexedTensor::new(point, variance, components)
    }

    pub fn rank(&self) -> usize {
        self.variance.len()
    }

    pub fn offset(&self, index: &[usize]) -> usize {
        index.iter().fold(0, |acc, &i| acc * self.dimension + i)
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.components[self.offset(index)]
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_diff(&self, other: &IndexedTensor) -> f64 {
        self.components
            .iter()
            .zip(&other.components)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Contraction of `slot` with the direction `y` of the base point.
    pub fn contract_y(&self, slot: usize) -> IndexedTensor {
        let n = self.dimension;
        let mut variance = self.variance.clone();
        variance.remove(slot);
        IndexedTensor::from_fn(&self.point, variance, |rest| {
            (0..n)
                .map(|s| {
                    let mut idx = rest.to_vec();
                    idx.insert(slot, s);
                    self.get(&idx) * self.point.y[s]
                })
                .sum()
        })
    }

    /// Largest violation of symmetry under swapping slots `a` and `b`.
    pub fn asymmetry(&self, a: usize, b: usize) -> f64 {
        index_tuples(self.dimension, self.rank())
            .iter()
            .map(|t| {
                let mut s = t.clone();
                s.swap(a, b);
                (self.get(t) - self.get(&s)).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Frobenius norm of the components in a `g`-orthonormal frame.
    ///
    /// `g` holds `g_ij` at the same point, row-major.
    pub fn g_norm(&self, g: &[f64]) -> f64 {
        let n = self.dimension;
        let eig = SymmetricEigen::new(DMatrix::from_row_slice(n, n, g));
        // frame e_a = v_a / sqrt(λ_a); dual coframe θ^a = sqrt(λ_a) v_a
        let down = DMatrix::from_fn(n, n, |i, a| eig.eigenvectors[(i, a)] / eig.eigenvalues[a].sqrt());
        let up = DMatrix::from_fn(n, n, |a, i| eig.eigenvectors[(i, a)] * eig.eigenvalues[a].sqrt());
        let mut comps = self.components.clone();
        for (slot, v) in self.variance.iter().enumerate() {
            comps = transform_slot(&comps, n, self.rank(), slot, |out, k| match v {
                Variance::Down => down[(k, out)],
                Variance::Up => up[(out, k)],
            });
        }
        comps.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

fn transform_slot(
    comps: &[f64],
    n: usize,
    rank: usize,
    slot: usize,
    m: impl Fn(usize, usize) -> f64,
) -> Vec<f64> {
    let stride = n.pow((rank - slot - 1) as u32);
    let mut out = vec![0.0; comps.len()];
    for (pos, o) in out.iter_mut().enumerate() {
        let a = (pos / stride) % n;
        let base = pos - a * stride;
        *o = (0..n).map(|k| m(a, k) * comps[base + k * stride]).sum();
    }
    out
}

/// Gauss–Jordan inverse and determinant over any scalar type, pivoting on
/// the magnitude of the value part.
pub(crate) fn invert<S: Scalar>(m: &[Vec<S>]) -> Result<(Vec<Vec<S>>, S)> {
    let n = m.len();
    let mut a: Vec<Vec<S>> = m.to_vec();
    let one = m[0][0].constant_like(1.0);
    let zero = m[0][0].constant_like(0.0);
    let mut inv: Vec<Vec<S>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { one.clone() } else { zero.clone() }).collect())
        .collect();
    let mut det = one.clone();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&r, &s| a[r][col].value().abs().total_cmp(&a[s][col].value().abs()))
            .expect("nonempty");
        if piv != col {
            a.swap(piv, col);
            inv.swap(piv, col);
            det = det.neg();
        }
        let p = a[col][col].clone();
        det = det.mul(&p);
        for j in 0..n {
            a[col][j] = a[col][j].div(&p)?;
            inv[col][j] = inv[col][j].div(&p)?;
        }
        for r in 0..n {
            if r != col {
                let f = a[r][col].clone();
                for j in 0..n {
                    a[r][j] = a[r][j].sub(&f.mul(&a[col][j]));
                    inv[r][j] = inv[r][j].sub(&f.mul(&inv[col][j]));
                }
            }
        }
    }
    Ok((inv, det))
}

/// Rejects fundamental tensors that are not positive definite or are too
/// badly conditioned to invert.
pub(crate) fn check_conditioning(g: &[f64], n: usize) -> Result<()> {
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(n, n, g)).eigenvalues;
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(0.0, f64::max);
    if !(lo > 0.0) || hi / lo > MAX_CONDITION {
        return Err(Error::Numerical(format!(
            "degenerate fundamental tensor (eigenvalues {lo:e} .. {hi:e})"
        )));
    }
    Ok(())
}

/// Jets of `Φ`, `g`, `g⁻¹` and the spray at one point.
pub(crate) struct SprayJets {
    pub n: usize,
    pub y: Vec<Jet>,
    pub phi: Jet,
    pub g: Vec<Vec<Jet>>,
    pub ginv: Vec<Vec<Jet>>,
    pub det_g: Jet,
    pub spray: Vec<Jet>,
}

impl SprayJets {
    /// `order` is the lift order of `F`; the spray comes out two orders
    /// lower. Needs `order ≥ 2`.
    pub fn new(spec: &MetricSpec, x: &[f64], y: &[f64], order: usize) -> Result<SprayJets> {
        let n = spec.dimension();
        assert!((2..=MAX_ORDER).contains(&order));
        let point: Vec<f64> = x.iter().chain(y).copied().collect();
        let f = lift(spec.expression(), &point, order)?;
        let space = f.space().clone();
        let phi = &f * &f;
        let dphi_y: Vec<Jet> = (0..n).map(|i| phi.derivative(n + i)).collect();
        let g: Vec<Vec<Jet>> = (0..n)
            .map(|i| (0..n).map(|j| dphi_y[i].derivative(n + j).scale(0.5)).collect())
            .collect();
        let gv: Vec<f64> = g.iter().flatten().map(Jet::value).collect();
        check_conditioning(&gv, n)?;
        let (ginv, det_g) = invert(&g)?;
        let yv: Vec<Jet> = (0..n).map(|k| Jet::variable(&space, order, y[k], n + k)).collect();
        let mut spray = Vec::with_capacity(n);
        {
            let bracket: Vec<Jet> = (0..n)
                .map(|j| {
                    let mut acc = phi.derivative(j).scale(-1.0);
                    for (k, yk) in yv.iter().enumerate() {
                        acc = &acc + &(&dphi_y[j].derivative(k) * yk);
                    }
                    acc
                })
                .collect();
            for row in &ginv {
                let mut acc = Jet::constant(&space, order - 2, 0.0);
                for (gij, bj) in row.iter().zip(&bracket) {
                    acc = &acc + &(gij * bj);
                }
                spray.push(acc.scale(0.25));
            }
        }
        Ok(SprayJets {
            n,
            y: yv,
            phi,
            g,
            ginv,
            det_g,
            spray,
        })
    }

    fn dy(&self, j: &Jet, i: usize) -> Jet {
        j.derivative(self.n + i)
    }

    fn dx(&self, j: &Jet, i: usize) -> Jet {
        j.derivative(i)
    }

    pub fn g_values(&self) -> Vec<f64> {
        self.g.iter().flatten().map(Jet::value).collect()
    }

    pub fn ginv_values(&self) -> Vec<f64> {
        self.ginv.iter().flatten().map(Jet::value).collect()
    }

    pub fn spray_values(&self) -> Vec<f64> {
        self.spray.iter().map(Jet::value).collect()
    }

    /// `N^i_j`, row-major. Needs lift order ≥ 3.
    pub fn connection_values(&self) -> Vec<f64> {
        let n = self.n;
        (0..n * n)
            .map(|p| self.dy(&self.spray[p / n], p % n).value())
            .collect()
    }

    /// `Γ^i_jk`, row-major. Needs lift order ≥ 4.
    pub fn gamma_values(&self) -> Vec<f64> {
        let n = self.n;
        index_tuples(n, 3)
            .iter()
            .map(|t| self.dy(&self.dy(&self.spray[t[0]], t[1]), t[2]).value())
            .collect()
    }
}

/// Pointwise residuals of the identities the tensors must satisfy. Each is
/// an absolute discrepancy divided by `max(1, size of the quantities)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Identities {
    pub cartan_y: f64,
    pub landsberg_y: f64,
    pub berwald_y: f64,
    pub douglas_y: f64,
    pub riemann_y: f64,
    pub mean_berwald_trace: f64,
    pub mean_cartan_trace: f64,
    pub mean_landsberg_trace: f64,
    pub landsberg_routes: f64,
    pub douglas_routes: f64,
    pub projection_idempotence: f64,
    pub spray_connection: f64,
    pub connection_gamma: f64,
    pub inverse: f64,
}

impl Identities {
    pub fn max(&self) -> f64 {
        [
            self.cartan_y,
            self.landsberg_y,
            self.berwald_y,
            self.douglas_y,
            self.riemann_y,
            self.mean_berwald_trace,
            self.mean_cartan_trace,
            self.mean_landsberg_trace,
            self.landsberg_routes,
            self.douglas_routes,
            self.projection_idempotence,
            self.spray_connection,
            self.connection_gamma,
            self.inverse,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn named(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("C(y,.,.)", self.cartan_y),
            ("L(y,.,.)", self.landsberg_y),
            ("B(.,.,y)", self.berwald_y),
            ("D(.,.,y)", self.douglas_y),
            ("R y", self.riemann_y),
            ("E = tr B / 2", self.mean_berwald_trace),
            ("I = tr_g C", self.mean_cartan_trace),
            ("J = tr_g L", self.mean_landsberg_trace),
            ("L = -<y, B>/2", self.landsberg_routes),
            ("Douglas routes", self.douglas_routes),
            ("h idempotent", self.projection_idempotence),
            ("N y = 2G", self.spray_connection),
            ("Gamma y = N", self.connection_gamma),
            ("g g^-1 = 1", self.inverse),
        ]
    }
}

/// Every tensor at one tangent point, plus the alternative routes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointTensors {
    pub point: TangentPoint,
    pub f: f64,
    pub g: IndexedTensor,
    pub g_inv: IndexedTensor,
    pub cartan: IndexedTensor,
    pub mean_cartan: IndexedTensor,
    pub spray: IndexedTensor,
    pub connection: IndexedTensor,
    pub berwald_connection: IndexedTensor,
    pub berwald: IndexedTensor,
    pub mean_berwald: IndexedTensor,
    pub douglas: IndexedTensor,
    pub landsberg: IndexedTensor,
    pub mean_landsberg: IndexedTensor,
    pub h_curvature: IndexedTensor,
    pub riemann: IndexedTensor,
    /// `E` from the jet of `∂_m G^m`.
    pub mean_berwald_alt: IndexedTensor,
    /// `I` from `ln det g`.
    pub mean_cartan_alt: IndexedTensor,
    /// `L` as the horizontal derivative of `C` along `y`.
    pub landsberg_alt: IndexedTensor,
    /// `J` from the `I`, `N`, `G` formula.
    pub mean_landsberg_alt: IndexedTensor,
    /// `D` from the `B`, `E` decomposition.
    pub douglas_alt: IndexedTensor,
}

fn scale_of(ts: &[&IndexedTensor]) -> f64 {
    ts.iter().map(|t| t.max_abs()).fold(1.0, f64::max)
}

impl PointTensors {
    pub fn compute(spec: &MetricSpec, p: &TangentPoint) -> Result<PointTensors> {
        use Variance::{Down as D, Up as U};
        let n = spec.dimension();
        let sj = SprayJets::new(spec, &p.x, &p.y, MAX_ORDER)?;
        let f = spec.eval(&p.x, &p.y)?;
        let y = &p.y;

        let g = IndexedTensor::new(p, vec![D, D], sj.g_values());
        let g_inv = IndexedTensor::new(p, vec![U, U], sj.ginv_values());
        let gi = |i: usize, j: usize| g_inv.components[i * n + j];
        let gd = |i: usize, j: usize| g.components[i * n + j];

        // C_ijk = ½ ∂g_ij/∂y^k
        let c_jets: Vec<Jet> = index_tuples(n, 3)
            .iter()
            .map(|t| sj.dy(&sj.g[t[0]][t[1]], t[2]).scale(0.5))
            .collect();
        let cartan = IndexedTensor::new(p, vec![D, D, D], c_jets.iter().map(Jet::value).collect());
        let c_at = |i: usize, j: usize, k: usize| &c_jets[(i * n + j) * n + k];

        // I_i = g^{jk} C_ijk, kept as jets for the J formula
        let i_jets: Vec<Jet> = (0..n)
            .map(|i| {
                let mut acc = Jet::constant(sj.phi.space(), 3, 0.0);
                for j in 0..n {
                    for k in 0..n {
                        acc = &acc + &(&sj.ginv[j][k] * c_at(i, j, k));
                    }
                }
                acc
            })
            .collect();
        let mean_cartan = IndexedTensor::new(p, vec![D], i_jets.iter().map(Jet::value).collect());
        let log_det = sj.det_g.ln()?;
        let mean_cartan_alt =
            IndexedTensor::from_fn(p, vec![D], |t| 0.5 * sj.dy(&log_det, t[0]).value());

        let spray = IndexedTensor::new(p, vec![U], sj.spray_values());
        let n_jets: Vec<Jet> = index_tuples(n, 2)
            .iter()
            .map(|t| sj.dy(&sj.spray[t[0]], t[1]))
            .collect();
        let connection = IndexedTensor::new(p, vec![U, D], n_jets.iter().map(Jet::value).collect());
        let nc = |i: usize, j: usize| connection.components[i * n + j];
        let gamma_jets: Vec<Jet> = index_tuples(n, 3)
            .iter()
            .map(|t| sj.dy(&n_jets[t[0] * n + t[1]], t[2]))
            .collect();
        let berwald_connection =
            IndexedTensor::new(p, vec![U, D, D], gamma_jets.iter().map(Jet::value).collect());
        let berwald = IndexedTensor::from_fn(p, vec![U, D, D, D], |t| {
            sj.dy(&gamma_jets[(t[0] * n + t[1]) * n + t[2]], t[3]).value()
        });

        // E = ½ B^m_mij by contraction, and independently from S = ∂_m G^m
        let mean_berwald = IndexedTensor::from_fn(p, vec![D, D], |t| {
            0.5 * (0..n).map(|m| berwald.get(&[m, m, t[0], t[1]])).sum::<f64>()
        });
        let mut s_jet = n_jets[0].clone();
        for m in 1..n {
            s_jet = &s_jet + &n_jets[m * n + m];
        }
        let e_jets: Vec<Jet> = index_tuples(n, 2)
            .iter()
            .map(|t| sj.dy(&sj.dy(&s_jet, t[0]), t[1]).scale(0.5))
            .collect();
        let mean_berwald_alt = IndexedTensor::new(p, vec![D, D], e_jets.iter().map(Jet::value).collect());

        // Douglas, route (i): ∂³_y [G^i - 1/(n+1) S y^i]
        let kappa = 2.0 / (n as f64 + 1.0);
        let projective: Vec<Jet> = (0..n)
            .map(|i| &sj.spray[i].truncate(3) - &(&s_jet * &sj.y[i]).scale(0.5 * kappa))
            .collect();
        let douglas = IndexedTensor::from_fn(p, vec![U, D, D, D], |t| {
            sj.dy(&sj.dy(&sj.dy(&projective[t[0]], t[1]), t[2]), t[3]).value()
        });
        // route (ii): B - 2/(n+1){E_jk δ^i_l + E_kl δ^i_j + E_lj δ^i_k + E_jk,l y^i}
        let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        let douglas_alt = IndexedTensor::from_fn(p, vec![U, D, D, D], |t| {
            let (i, j, k, l) = (t[0], t[1], t[2], t[3]);
            let e = |a: usize, b: usize| mean_berwald.get(&[a, b]);
            let e_dy = sj.dy(&e_jets[j * n + k], l).value();
            berwald.get(t)
                - kappa
                    * (e(j, k) * delta(i, l)
                        + e(k, l) * delta(i, j)
                        + e(l, j) * delta(i, k)
                        + e_dy * y[i])
        });

        // L_jkl = -½ y_i B^i_jkl with y_i = g_im y^m
        let y_down: Vec<f64> = (0..n).map(|i| (0..n).map(|m| gd(i, m) * y[m]).sum()).collect();
        let landsberg = IndexedTensor::from_fn(p, vec![D, D, D], |t| {
            -0.5 * (0..n).map(|i| y_down[i] * berwald.get(&[i, t[0], t[1], t[2]])).sum::<f64>()
        });
        let spray_v = &spray.components;
        let horizontal = |jet: &Jet| -> f64 {
            (0..n)
                .map(|s| y[s] * sj.dx(jet, s).value() - 2.0 * spray_v[s] * sj.dy(jet, s).value())
                .sum()
        };
        let landsberg_alt = IndexedTensor::from_fn(p, vec![D, D, D], |t| {
            let (i, j, k) = (t[0], t[1], t[2]);
            horizontal(c_at(i, j, k))
                - (0..n)
                    .map(|m| {
                        cartan.get(&[m, j, k]) * nc(m, i)
                            + cartan.get(&[i, m, k]) * nc(m, j)
                            + cartan.get(&[i, j, m]) * nc(m, k)
                    })
                    .sum::<f64>()
        });

        let mean_landsberg = IndexedTensor::from_fn(p, vec![D], |t| {
            let mut acc = 0.0;
            for j in 0..n {
                for k in 0..n {
                    acc += gi(j, k) * landsberg.get(&[t[0], j, k]);
                }
            }
            acc
        });
        let mean_landsberg_alt = IndexedTensor::from_fn(p, vec![D], |t| {
            let i = t[0];
            horizontal(&i_jets[i]) - (0..n).map(|m| mean_cartan.components[m] * nc(m, i)).sum::<f64>()
        });

        // H_ij = E_ij|s y^s
        let h_curvature = IndexedTensor::from_fn(p, vec![D, D], |t| {
            let (i, j) = (t[0], t[1]);
            horizontal(&e_jets[i * n + j])
                - (0..n)
                    .map(|m| mean_berwald_alt.get(&[m, j]) * nc(m, i) + mean_berwald_alt.get(&[i, m]) * nc(m, j))
                    .sum::<f64>()
        });

        let riemann = IndexedTensor::from_fn(p, vec![U, D], |t| {
            let (i, k) = (t[0], t[1]);
            let gi_jet = &sj.spray[i];
            let mut r = 2.0 * sj.dx(gi_jet, k).value();
            for j in 0..n {
                r -= y[j] * sj.dy(&sj.dx(gi_jet, j), k).value();
                r += 2.0 * spray_v[j] * berwald_connection.get(&[i, j, k]);
                r -= nc(i, j) * nc(j, k);
            }
            r
        });

        Ok(PointTensors {
            point: p.clone(),
            f,
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
            mean_berwald_alt,
            mean_cartan_alt,
            landsberg_alt,
            mean_landsberg_alt,
            douglas_alt,
        })
    }

    pub fn dimension(&self) -> usize {
        self.point.dimension()
    }

    /// `g_y(u, v)`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let n = self.dimension();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += self.g.components[i * n + j] * u[i] * v[j];
            }
        }
        acc
    }

    /// `h_y(u) = u - F⁻² g_y(u, y) y`.
    pub fn project(&self, u: &[f64]) -> Vec<f64> {
        let y = &self.point.y;
        let c = self.inner(u, y) / (self.f * self.f);
        u.iter().zip(y).map(|(a, b)| a - c * b).collect()
    }

    /// `R_y(u)^i = R^i_k u^k`.
    pub fn riemann_apply(&self, u: &[f64]) -> Vec<f64> {
        let n = self.dimension();
        (0..n)
            .map(|i| (0..n).map(|k| self.riemann.components[i * n + k] * u[k]).sum())
            .collect()
    }

    /// Flag curvature of the flag spanned by `y` and `u`.
    pub fn flag_curvature(&self, u: &[f64]) -> Result<f64> {
        let y = &self.point.y;
        let denom = self.inner(y, y) * self.inner(u, u) - self.inner(y, u).powi(2);
        if !(denom > MIN_FLAG_AREA) {
            return Err(Error::Numerical(format!(
                "degenerate flag: Gram determinant {denom:e}"
            )));
        }
        Ok(self.inner(u, &self.riemann_apply(u)) / denom)
    }

    /// `Q_ijkl = C_isk C^s_jl - C_isl C^s_jk`.
    pub fn vv_curvature(&self) -> IndexedTensor {
        let n = self.dimension();
        let c = &self.cartan;
        let raised = IndexedTensor::from_fn(&self.point, vec![Variance::Up, Variance::Down, Variance::Down], |t| {
            (0..n)
                .map(|m| self.g_inv.components[t[0] * n + m] * c.get(&[m, t[1], t[2]]))
                .sum()
        });
        IndexedTensor::from_fn(&self.point, vec![Variance::Down; 4], |t| {
            let (i, j, k, l) = (t[0], t[1], t[2], t[3]);
            (0..n)
                .map(|s| c.get(&[i, s, k]) * raised.get(&[s, j, l]) - c.get(&[i, s, l]) * raised.get(&[s, j, k]))
                .sum()
        })
    }

    pub fn identities(&self) -> Identities {
        let n = self.dimension();
        let y = &self.point.y;
        let ymax = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let contraction = |t: &IndexedTensor, slot: usize| t.contract_y(slot).max_abs() / (scale_of(&[t]) * ymax);
        let route = |a: &IndexedTensor, b: &IndexedTensor| a.max_diff(b) / scale_of(&[a, b]);

        let mut inverse: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let v: f64 = (0..n)
                    .map(|k| self.g.components[i * n + k] * self.g_inv.components[k * n + j])
                    .sum();
                inverse = inverse.max((v - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        let mut spray_connection: f64 = 0.0;
        let mut connection_gamma: f64 = 0.0;
        for i in 0..n {
            let ny: f64 = (0..n).map(|j| self.connection.get(&[i, j]) * y[j]).sum();
            spray_connection = spray_connection.max((ny - 2.0 * self.spray.components[i]).abs());
            for j in 0..n {
                let gy: f64 = (0..n).map(|k| self.berwald_connection.get(&[i, j, k]) * y[k]).sum();
                connection_gamma = connection_gamma.max((gy - self.connection.get(&[i, j])).abs());
            }
        }
        let spray_scale = scale_of(&[&self.spray, &self.connection, &self.berwald_connection]) * ymax;

        let mut idem: f64 = 0.0;
        for k in 0..n {
            let mut u = vec![0.0; n];
            u[k] = 1.0;
            let h = self.project(&u);
            let hh = self.project(&h);
            let orth = self.inner(&h, y) / self.f;
            idem = idem
                .max(h.iter().zip(&hh).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
                .max(orth.abs());
        }
        idem = idem.max(self.project(y).iter().fold(0.0f64, |m, v| m.max(v.abs())) / ymax);

        Identities {
            cartan_y: contraction(&self.cartan, 2),
            landsberg_y: contraction(&self.landsberg, 2),
            berwald_y: contraction(&self.berwald, 3),
            douglas_y: contraction(&self.douglas, 3),
            riemann_y: contraction(&self.riemann, 1),
            mean_berwald_trace: route(&self.mean_berwald, &self.mean_berwald_alt),
            mean_cartan_trace: route(&self.mean_cartan, &self.mean_cartan_alt),
            mean_landsberg_trace: route(&self.mean_landsberg, &self.mean_landsberg_alt),
            landsberg_routes: route(&self.landsberg, &self.landsberg_alt),
            douglas_routes: route(&self.douglas, &self.douglas_alt),
            projection_idempotence: idem,
            spray_connection: spray_connection / spray_scale,
            connection_gamma: connection_gamma / spray_scale,
            inverse,
        }
    }

    /// The named tensors in a fixed order.
    pub fn named(&self) -> Vec<(&'static str, &IndexedTensor)> {
        vec![
            ("g", &self.g),
            ("g_inv", &self.g_inv),
            ("C", &self.cartan),
            ("I", &self.mean_cartan),
            ("G", &self.spray),
            ("N", &self.connection),
            ("Gamma", &self.berwald_connection),
            ("B", &self.berwald),
            ("E", &self.mean_berwald),
            ("D", &self.douglas),
            ("L", &self.landsberg),
            ("J", &self.mean_landsberg),
            ("H", &self.h_curvature),
            ("R", &self.riemann),
        ]
    }
}

/// `(g_ij, g^ij)`.
pub fn fundamental_tensor(spec: &MetricSpec, p: &TangentPoint) -> Result<(IndexedTensor, IndexedTensor)> {
    let sj = SprayJets::new(spec, &p.x, &p.y, 2)?;
    Ok((
        IndexedTensor::new(p, vec![Variance::Down; 2], sj.g_values()),
        IndexedTensor::new(p, vec![Variance::Up; 2], sj.ginv_values()),
    ))
}

pub fn cartan_torsion(spec: &MetricSpec, p: &TangentPoint) -> Result<IndexedTensor> {
    Ok(PointTensors::compute(spec, p)?.cartan)
}

pub fn mean_cartan(spec: &MetricSpec, p: &TangentPoint) -> Result<IndexedTensor> {
    Ok(PointTensors::compute(spec, p)?.mean_cartan)
}

pub fn spray(spec: &MetricSpec, p: &TangentPoint) -> Result<IndexedTensor> {
    let sj = SprayJets::new(spec, &p.x, &p.y, 3)?;
    Ok(IndexedTensor::new(p, vec![Variance::Up], sj.spray_values()))
}

pub fn nonlinear_connection(spec: &MetricSpec, p: &TangentPoint) -> Result<IndexedTensor> {
    let sj = SprayJets::new(spec, &p.x, &p.y, 3)?;
    Ok(IndexedTensor::new(p, vec![Variance::Up, Variance::Down], sj.connection_values()))
}

pub fn berwald_connection(spec: &MetricSpec, p: &TangentPoint) -> Result<IndexedTensor> {
    let sj = SprayJets::new(spec, &p.x, &p.y, 4)?;
    Ok(IndexedTensor::new(
        p,
        vec![Variance::Up, Variance::Down, Variance::Down],
        sj.gamma_values(),
    ))
}

pub fn berwald_curvature(spec: &MetricSpec, p: &TangentPoint) -> Result<IndexedTensor> {
    Ok(PointTensors::compute(spec, p)?.berwald)
}

pub fn mean_berwald(spec: &MetricSpec, p: &TangentPoint) -> Result<IndexedTensor> {
    Ok(PointTensors::compute(spec, p)?.mean_berwald)
}

/// Douglas curvature by both routes, with their largest disagreement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Douglas {
    pub definition: IndexedTensor,
    pub decomposition: IndexedTensor,
    pub residual: f64,
}

/// Disagreement between the Douglas routes beyond which the computation is
/// considered broken.
pub const DOUGLAS_CONSISTENCY: f64 = 1e-6;

pub fn douglas_curvature(spec: &MetricSpec, p: &TangentPoint) -> Result<Douglas> {
    let t = PointTensors::compute(spec, p)?;
    let residual = t.identities().douglas_routes;
    if residual > DOUGLAS_CONSISTENCY {
        return Err(Error::Numerical(format!(
            "Douglas routes disagree by {residual:e}"
        )));
    }
    Ok(Douglas {
        definition: t.douglas,
        decomposition: t.douglas_alt,
        residual,
    })
}

pub fn landsberg_curvature(spec: &MetricSpec, p: &TangentPoint) -> Result<IndexedTensor> {
    Ok(PointTensors::compute(spec, p)?.landsberg)
}

/// Mean Landsberg curvature by trace and by the `I`, `N`, `G` formula.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanLandsberg {
    pub trace: IndexedTensor,
    pub formula: IndexedTensor,
    pub residual: f64,
}

pub fn mean_landsberg(spec: &MetricSpec, p: &TangentPoint) -> Result<MeanLandsberg> {
    let t = PointTensors::compute(spec, p)?;
    let residual = t.identities().mean_landsberg_trace;
    Ok(MeanLandsberg {
        trace: t.mean_landsberg,
        formula: t.mean_landsberg_alt,
        residual,
    })
}

pub fn h_curvature(spec: &MetricSpec, p: &TangentPoint) -> Result<IndexedTensor> {
    Ok(PointTensors::compute(spec, p)?.h_curvature)
}

pub fn riemann_curvature(spec: &MetricSpec, p: &TangentPoint) -> Result<IndexedTensor> {
    Ok(PointTensors::compute(spec, p)?.riemann)
}

/// Flag curvature `K(x, y, span{y, u})`. Without `u` a surface uses the
/// Berwald-frame vector `m`.
pub fn flag_curvature(spec: &MetricSpec, p: &TangentPoint, u: Option<&[f64]>) -> Result<f64> {
    let t = PointTensors::compute(spec, p)?;
    match u {
        Some(u) => t.flag_curvature(u),
        None if spec.dimension() == 2 => {
            let m = crate::surface::frame_from_tensors(&t).m;
            t.flag_curvature(&m)
        }
        None => Err(Error::Validation(
            "flag curvature needs a transverse vector when n > 2".into(),
        )),
    }
}

pub fn h_projection(spec: &MetricSpec, p: &TangentPoint, u: &[f64]) -> Result<Vec<f64>> {
    if u.len() != spec.dimension() {
        return Err(Error::Validation("vector has the wrong dimension".into()));
    }
    let (g, _) = fundamental_tensor(spec, p)?;
    let n = spec.dimension();
    let y = &p.y;
    let gy = |v: &[f64]| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += g.components[i * n + j] * v[i] * y[j];
            }
        }
        acc
    };
    let c = gy(u) / gy(y);
    Ok(u.iter().zip(y).map(|(a, b)| a - c * b).collect())
}

pub fn vv_curvature(spec: &MetricSpec, p: &TangentPoint) -> Result<IndexedTensor> {
    Ok(PointTensors::compute(spec, p)?.vv_curvature())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{zoo, Sampler};

    fn member(name: &str) -> MetricSpec {
        MetricSpec::builtin_named(name).unwrap()
    }

    fn tp(x: [f64; 2], y: [f64; 2]) -> TangentPoint {
        TangentPoint {
            x: x.to_vec(),
            y: y.to_vec(),
        }
    }

    #[test]
    fn euclidean_is_flat() {
        let t = PointTensors::compute(&member("euclidean"), &tp([0.3, -1.0], [0.6, 0.8])).unwrap();
        assert!(t.g.max_diff(&IndexedTensor::new(&t.point, vec![Variance::Down; 2], vec![1.0, 0.0, 0.0, 1.0])) < 1e-14);
        for (name, tensor) in t.named().into_iter().skip(2) {
            assert!(tensor.max_abs() < 1e-12, "{name}");
        }
    }

    #[test]
    fn hyperbolic_values() {
        let m = member("hyperbolic");
        let (g, _) = fundamental_tensor(&m, &tp([0.0, 2.0], [1.0, 0.3])).unwrap();
        assert!((g.get(&[0, 0]) - 0.25).abs() < 1e-14);
        assert!(g.get(&[0, 1]).abs() < 1e-14);
        let s = spray(&m, &tp([0.0, 1.0], [1.0, 1.0])).unwrap();
        assert!((s.components[0] + 1.0).abs() < 1e-12);
        assert!(s.components[1].abs() < 1e-12);
        let t = PointTensors::compute(&m, &tp([0.5, 1.5], [0.2, -0.7])).unwrap();
        assert!(t.cartan.max_abs() < 1e-12);
        assert!(t.landsberg.max_abs() < 1e-12);
        let k = t.flag_curvature(&[0.7, 0.2]).unwrap();
        assert!((k + 1.0).abs() < 1e-10, "{k}");
    }

    #[test]
    fn position_independent_spray_vanishes() {
        for name in ["minkowski_smooth_quartic", "randers_const"] {
            let t = PointTensors::compute(&member(name), &tp([1.0, 2.0], [0.3, 0.9])).unwrap();
            assert!(t.spray.max_abs() == 0.0);
            assert!(t.berwald.max_abs() == 0.0);
            assert!(t.douglas.max_abs() == 0.0);
            assert!(t.riemann.max_abs() == 0.0);
            assert!(t.mean_cartan.g_norm(&t.g.components) > 1e-3);
        }
    }

    #[test]
    fn randers_var_is_not_landsberg() {
        let m = member("randers_var");
        // on the y1-axis at x2 = 0 every third y-derivative of the spray cancels
        let t = PointTensors::compute(&m, &tp([0.0, 0.0], [1.0, 0.0])).unwrap();
        assert!(t.berwald.max_abs() < 1e-14);
        for (x, y) in [([0.0, 0.0], [1.0, 1.0]), ([0.3, 0.7], [1.0, 0.4]), ([0.0, 1.5], [0.0, 1.0])] {
            let t = PointTensors::compute(&m, &tp(x, y)).unwrap();
            assert!(t.berwald.max_abs() > 1e-3);
            assert!(t.landsberg.g_norm(&t.g.components) > 1e-3);
            assert!(t.identities().max() < 1e-10, "{:?}", t.identities());
        }
    }

    #[test]
    fn funk_spray_is_projective() {
        let m = member("funk");
        for p in Sampler::new(5, 4, 3).points(&m) {
            let t = PointTensors::compute(&m, &p).unwrap();
            for i in 0..2 {
                assert!((t.spray.components[i] - 0.5 * t.f * p.y[i]).abs() < 1e-10);
            }
            assert!(t.douglas.max_abs() < 1e-9);
            let u = [-p.y[1], p.y[0]];
            assert!((t.flag_curvature(&u).unwrap() + 0.25).abs() < 1e-9);
        }
    }

    #[test]
    fn identities_hold_across_zoo() {
        for m in zoo() {
            for p in Sampler::new(5, 4, 11).points(&m) {
                let t = PointTensors::compute(&m, &p).unwrap();
                let id = t.identities();
                assert!(id.max() < 1e-9, "{}: {:?}", m.name, id);
                assert!(t.vv_curvature().max_abs() < 1e-9);
                for (a, b) in [(0, 1), (1, 2)] {
                    assert!(t.cartan.asymmetry(a, b) < 1e-10);
                    assert!(t.landsberg.asymmetry(a, b) < 1e-10);
                }
                assert!(t.berwald.asymmetry(1, 2) < 1e-10 && t.berwald.asymmetry(2, 3) < 1e-10);
                assert!(t.mean_berwald.asymmetry(0, 1) < 1e-10);
                assert!(t.h_curvature.asymmetry(0, 1) < 1e-9);
            }
        }
    }

    #[test]
    fn spray_homogeneity() {
        let m = member("randers_var");
        let p = tp([0.4, 1.1], [0.3, -0.8]);
        let q = p.with_y(p.y.iter().map(|v| 3.0 * v).collect());
        let a = PointTensors::compute(&m, &p).unwrap();
        let b = PointTensors::compute(&m, &q).unwrap();
        for i in 0..2 {
            assert!((b.spray.components[i] - 9.0 * a.spray.components[i]).abs() < 1e-12);
        }
        for (x, y) in a.riemann.components.iter().zip(&b.riemann.components) {
            assert!((y - 9.0 * x).abs() < 1e-10);
        }
    }

    #[test]
    fn projection_examples() {
        let m = member("euclidean");
        let p = tp([0.0, 0.0], [1.0, 0.0]);
        assert_eq!(h_projection(&m, &p, &[0.0, 1.0]).unwrap(), vec![0.0, 1.0]);
        assert_eq!(h_projection(&m, &p, &[1.0, 1.0]).unwrap(), vec![0.0, 1.0]);
        assert_eq!(h_projection(&m, &p, &[1.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn degenerate_flag_is_an_error() {
        let m = member("sphere");
        let p = tp([0.1, 0.2], [1.0, 0.5]);
        assert!(flag_curvature(&m, &p, Some(&[2.0, 1.0])).is_err());
        let k = flag_curvature(&m, &p, None).unwrap();
        assert!((k - 1.0).abs() < 1e-10);
    }

    #[test]
    fn g_norm_is_frame_invariant() {
        let m = member("randers_const");
        let t = PointTensors::compute(&m, &tp([0.0, 0.0], [0.0, 1.0])).unwrap();
        let n = t.mean_cartan.g_norm(&t.g.components);
        let mut direct = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                direct += t.g_inv.get(&[i, j]) * t.mean_cartan.components[i] * t.mean_cartan.components[j];
            }
        }
        assert!((n - f64::sqrt(direct)).abs() < 1e-12);
        assert!(n > 0.01);
    }
}
