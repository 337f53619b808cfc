//! Two-dimensional structure: the Berwald frame, the main scalar, rank-one
//! forms of `C`, `L` and `D`, and the indicatrix curve.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{MetricSpec, TangentPoint};
use crate::ode::{integrate_grid, uniform_grid, Tolerances};
use crate::tensors::{index_tuples, IndexedTensor, PointTensors, SprayJets};

/// Below this `|C(m,m,m)|` the Landsberg/Cartan ratio is left undefined.
pub const CARTAN_FLOOR: f64 = 1e-9;
/// Curves with `|K|` at or below this are not tested against the main scalar.
pub const K_FLOOR: f64 = 1e-8;
pub const CLOSURE_TOL: f64 = 1e-6;

fn require_surface(spec: &MetricSpec) -> Result<()> {
    if spec.dimension() != 2 {
        return Err(Error::Validation(format!(
            "surface operation on a {}-dimensional metric",
            spec.dimension()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BerwaldFrame {
    pub point: TangentPoint,
    pub ell: Vec<f64>,
    pub m: Vec<f64>,
    pub ell_down: Vec<f64>,
    pub m_down: Vec<f64>,
}

fn lower(g: &[f64], v: &[f64]) -> Vec<f64> {
    vec![g[0] * v[0] + g[1] * v[1], g[2] * v[0] + g[3] * v[1]]
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// `ℓ = y/F` and the `g`-unit vector `m ⟂ ℓ` with `det(ℓ, m) > 0`.
pub(crate) fn frame_from_metric(point: &TangentPoint, g: &[f64]) -> BerwaldFrame {
    let y = &point.y;
    let f = dot(&lower(g, y), y).sqrt();
    let ell: Vec<f64> = y.iter().map(|v| v / f).collect();
    let ell_down = lower(g, &ell);
    let rot = [-ell[1], ell[0]];
    let c = dot(&ell_down, &rot);
    let v = [rot[0] - c * ell[0], rot[1] - c * ell[1]];
    let len = dot(&lower(g, &v), &v).sqrt();
    let m = vec![v[0] / len, v[1] / len];
    let m_down = lower(g, &m);
    BerwaldFrame {
        point: point.clone(),
        ell,
        m,
        ell_down,
        m_down,
    }
}

pub(crate) fn frame_from_tensors(t: &PointTensors) -> BerwaldFrame {
    frame_from_metric(&t.point, &t.g.components)
}

impl BerwaldFrame {
    /// Largest deviation from `g(ℓ,ℓ) = g(m,m) = 1`, `g(ℓ,m) = 0`.
    pub fn orthonormality(&self) -> f64 {
        let a = (dot(&self.ell_down, &self.ell) - 1.0).abs();
        let b = (dot(&self.m_down, &self.m) - 1.0).abs();
        let c = dot(&self.ell_down, &self.m).abs();
        a.max(b).max(c)
    }

    /// Largest deviation of `ℓ_i ℓ_j + m_i m_j` from `g_ij`.
    pub fn reconstruction(&self, g: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let r = self.ell_down[i] * self.ell_down[j] + self.m_down[i] * self.m_down[j];
                worst = worst.max((r - g[i * 2 + j]).abs());
            }
        }
        worst
    }

    fn basis(&self) -> [&[f64]; 2] {
        [&self.ell, &self.m]
    }
}

/// Evaluates an all-lower tensor on vectors.
fn eval_down(t: &IndexedTensor, vs: &[&[f64]]) -> f64 {
    index_tuples(t.dimension, t.rank())
        .iter()
        .map(|idx| t.get(idx) * idx.iter().zip(vs).map(|(&i, v)| v[i]).product::<f64>())
        .sum()
}

pub fn berwald_frame(spec: &MetricSpec, p: &TangentPoint) -> Result<BerwaldFrame> {
    require_surface(spec)?;
    let sj = SprayJets::new(spec, &p.x, &p.y, 2)?;
    Ok(frame_from_metric(p, &sj.g_values()))
}

/// Main scalar `I = F · C(m, m, m)`.
pub fn main_scalar(spec: &MetricSpec, p: &TangentPoint) -> Result<f64> {
    require_surface(spec)?;
    let t = PointTensors::compute(spec, p)?;
    Ok(main_scalar_of(&t))
}

pub(crate) fn main_scalar_of(t: &PointTensors) -> f64 {
    let fr = frame_from_tensors(t);
    t.f * eval_down(&t.cartan, &[&fr.m, &fr.m, &fr.m])
}

/// `g_y(h_y u, h_y v)`.
fn h_form(t: &PointTensors, u: &[f64], v: &[f64]) -> f64 {
    t.inner(&t.project(u), &t.project(v))
}

/// Sup over the frame basis of `C(u,v,w) - ⅓ Σ I(u) h(v,w)`, relative to
/// `max(1, |C|)`.
pub fn c_reducibility_of(t: &PointTensors) -> f64 {
    let fr = frame_from_tensors(t);
    let basis = fr.basis();
    let i_of = |u: &[f64]| dot(&t.mean_cartan.components, u);
    let mut worst: f64 = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                let (u, v, w) = (basis[a], basis[b], basis[c]);
                let lhs = eval_down(&t.cartan, &[u, v, w]);
                let rhs = (i_of(u) * h_form(t, v, w) + i_of(v) * h_form(t, u, w) + i_of(w) * h_form(t, u, v)) / 3.0;
                worst = worst.max((lhs - rhs).abs());
            }
        }
    }
    worst / t.cartan.max_abs().max(1.0)
}

pub fn c_reducibility_residual(spec: &MetricSpec, p: &TangentPoint) -> Result<f64> {
    require_surface(spec)?;
    Ok(c_reducibility_of(&PointTensors::compute(spec, p)?))
}

/// Residual of `T ≈ T(m,m,m) m ⊗ m ⊗ m` on the frame basis, relative to
/// `max(1, |T|)`.
fn rank_one_of(t: &IndexedTensor, fr: &BerwaldFrame) -> f64 {
    let basis = fr.basis();
    let mmm = eval_down(t, &[&fr.m, &fr.m, &fr.m]);
    let mut worst: f64 = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                let v = eval_down(t, &[basis[a], basis[b], basis[c]]);
                let model = if a == 1 && b == 1 && c == 1 { mmm } else { 0.0 };
                worst = worst.max((v - model).abs());
            }
        }
    }
    worst / t.max_abs().max(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LandsbergRatio {
    /// `-L(m,m,m) / (F C(m,m,m))`, absent when `C(m,m,m)` is negligible.
    pub kappa: Option<f64>,
    pub l_mmm: f64,
    pub c_mmm: f64,
    /// Rank-one residual of `L`.
    pub residual: f64,
}

pub fn landsberg_ratio_of(t: &PointTensors) -> LandsbergRatio {
    let fr = frame_from_tensors(t);
    let l_mmm = eval_down(&t.landsberg, &[&fr.m, &fr.m, &fr.m]);
    let c_mmm = eval_down(&t.cartan, &[&fr.m, &fr.m, &fr.m]);
    LandsbergRatio {
        kappa: (c_mmm.abs() > CARTAN_FLOOR).then(|| -l_mmm / (t.f * c_mmm)),
        l_mmm,
        c_mmm,
        residual: rank_one_of(&t.landsberg, &fr),
    }
}

pub fn landsberg_c_proportionality(spec: &MetricSpec, p: &TangentPoint) -> Result<LandsbergRatio> {
    require_surface(spec)?;
    Ok(landsberg_ratio_of(&PointTensors::compute(spec, p)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DouglasRankOne {
    /// Least-squares coefficient of `m_j m_k m_l y^i`.
    pub tau: f64,
    pub residual: f64,
}

pub fn douglas_rank_one_of(t: &PointTensors) -> DouglasRankOne {
    let fr = frame_from_tensors(t);
    let y = &t.point.y;
    let model: Vec<f64> = index_tuples(2, 4)
        .iter()
        .map(|i| y[i[0]] * fr.m_down[i[1]] * fr.m_down[i[2]] * fr.m_down[i[3]])
        .collect();
    let d = &t.douglas.components;
    let tau = dot(d, &model) / dot(&model, &model);
    let residual = d
        .iter()
        .zip(&model)
        .fold(0.0f64, |w, (a, b)| w.max((a - tau * b).abs()))
        / t.douglas.max_abs().max(1.0);
    DouglasRankOne { tau, residual }
}

pub fn douglas_rank1_residual(spec: &MetricSpec, p: &TangentPoint) -> Result<DouglasRankOne> {
    require_surface(spec)?;
    Ok(douglas_rank_one_of(&PointTensors::compute(spec, p)?))
}

/// Every surface identity at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceIdentities {
    pub frame_orthonormality: f64,
    pub frame_reconstruction: f64,
    pub c_reducibility: f64,
    pub cartan_rank_one: f64,
    pub landsberg_rank_one: f64,
    pub douglas_rank_one: f64,
    pub vv_curvature: f64,
    /// `g`-norm of `I_i - C(m,m,m) m_i`.
    pub mean_cartan_alignment: f64,
    /// `| |I|_g - |C(m,m,m)| |`.
    pub mean_cartan_norm: f64,
}

impl SurfaceIdentities {
    pub fn of(t: &PointTensors) -> SurfaceIdentities {
        let fr = frame_from_tensors(t);
        let c_mmm = eval_down(&t.cartan, &[&fr.m, &fr.m, &fr.m]);
        let diff = IndexedTensor::new(
            &t.point,
            t.mean_cartan.variance.clone(),
            (0..2).map(|i| t.mean_cartan.components[i] - c_mmm * fr.m_down[i]).collect(),
        );
        SurfaceIdentities {
            frame_orthonormality: fr.orthonormality(),
            frame_reconstruction: fr.reconstruction(&t.g.components),
            c_reducibility: c_reducibility_of(t),
            cartan_rank_one: rank_one_of(&t.cartan, &fr),
            landsberg_rank_one: rank_one_of(&t.landsberg, &fr),
            douglas_rank_one: douglas_rank_one_of(t).residual,
            vv_curvature: t.vv_curvature().max_abs(),
            mean_cartan_alignment: diff.g_norm(&t.g.components),
            mean_cartan_norm: (t.mean_cartan.g_norm(&t.g.components) - c_mmm.abs()).abs(),
        }
    }

    pub fn max(&self) -> f64 {
        self.named().into_iter().map(|(_, v)| v).fold(0.0, f64::max)
    }

    pub fn named(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("frame orthonormality", self.frame_orthonormality),
            ("frame reconstruction", self.frame_reconstruction),
            ("C-reducibility", self.c_reducibility),
            ("C rank one", self.cartan_rank_one),
            ("L rank one", self.landsberg_rank_one),
            ("D rank one", self.douglas_rank_one),
            ("vv-curvature", self.vv_curvature),
            ("mean Cartan alignment", self.mean_cartan_alignment),
            ("mean Cartan norm", self.mean_cartan_norm),
        ]
    }
}

/// The unit indicatrix at a fixed `x`, parametrised by arclength of the
/// induced metric and traversed once counter-clockwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndicatrixCurve {
    pub x: Vec<f64>,
    /// Total length.
    pub length: f64,
    pub t: Vec<f64>,
    pub y: Vec<[f64; 2]>,
    pub main_scalar: Vec<f64>,
    pub flag_curvature: Vec<f64>,
    /// `|y(T) - y(0)|`.
    pub closure: f64,
}

impl IndicatrixCurve {
    pub fn csv_rows(&self) -> Vec<Vec<f64>> {
        (0..self.t.len())
            .map(|k| {
                vec![
                    self.t[k],
                    self.y[k][0],
                    self.y[k][1],
                    self.main_scalar[k],
                    self.flag_curvature[k],
                ]
            })
            .collect()
    }

    pub const CSV_HEADER: [&'static str; 5] = ["t", "y1", "y2", "I", "K"];
}

pub const MIN_INDICATRIX_STEPS: usize = 64;

fn tangent_field<'a>(spec: &'a MetricSpec, x: &[f64]) -> impl FnMut(f64, &[f64], &mut [f64]) -> Result<()> + 'a {
    let x = x.to_vec();
    move |_t, y: &[f64], out: &mut [f64]| {
        let sj = SprayJets::new(spec, &x, y, 2)?;
        let p = TangentPoint { x: x.clone(), y: y.to_vec() };
        let fr = frame_from_metric(&p, &sj.g_values());
        out.copy_from_slice(&fr.m);
        Ok(())
    }
}

/// Traces the indicatrix `{F(x, ·) = 1}` with `steps` equal arclength
/// intervals and samples the main scalar and flag curvature.
pub fn indicatrix_flow(spec: &MetricSpec, x: &[f64], steps: usize) -> Result<IndicatrixCurve> {
    require_surface(spec)?;
    if steps < MIN_INDICATRIX_STEPS {
        return Err(Error::Validation(format!(
            "indicatrix needs at least {MIN_INDICATRIX_STEPS} steps"
        )));
    }
    if !spec.in_chart(x) {
        return Err(Error::Validation(format!("x = {x:?} outside chart")));
    }
    let f0 = spec.eval(x, &[1.0, 0.0])?;
    let y0 = vec![1.0 / f0, 0.0];
    let tol = Tolerances {
        atol: 1e-12,
        rtol: 1e-10,
        ..Tolerances::default()
    };

    // the period comes from integrating in the polar angle, where
    // ds/dθ = |y|² / det(y, m)
    let mut field = tangent_field(spec, x);
    let by_angle = move |_th: f64, z: &[f64], out: &mut [f64]| -> Result<()> {
        let mut m = [0.0; 2];
        field(0.0, &z[..2], &mut m)?;
        let r2 = z[0] * z[0] + z[1] * z[1];
        let rate = r2 / (z[0] * m[1] - z[1] * m[0]);
        out[0] = m[0] * rate;
        out[1] = m[1] * rate;
        out[2] = rate;
        Ok(())
    };
    let lap = integrate_grid(by_angle, vec![y0[0], y0[1], 0.0], &[0.0, std::f64::consts::TAU], tol, |_, _| Ok(()))?;
    if let Some(msg) = lap.stopped {
        return Err(Error::Numerical(format!("indicatrix integration failed: {msg}")));
    }
    let period = lap.states[1][2];

    let grid = uniform_grid(0.0, period, steps);
    let sol = integrate_grid(tangent_field(spec, x), y0.clone(), &grid, tol, |_, _| Ok(()))?;
    if let Some(msg) = sol.stopped {
        return Err(Error::Numerical(format!("indicatrix integration failed: {msg}")));
    }
    let last = sol.states.last().expect("grid is nonempty");
    let closure = ((last[0] - y0[0]).powi(2) + (last[1] - y0[1]).powi(2)).sqrt();
    if closure > CLOSURE_TOL {
        return Err(Error::Numerical(format!("indicatrix failed to close: gap {closure:e}")));
    }
    let samples: Vec<(f64, f64)> = sol
        .states
        .iter()
        .map(|y| {
            let p = TangentPoint { x: x.to_vec(), y: y.clone() };
            let t = PointTensors::compute(spec, &p)?;
            let m = frame_from_tensors(&t).m;
            Ok((main_scalar_of(&t), t.flag_curvature(&m)?))
        })
        .collect::<Result<_>>()?;
    Ok(IndicatrixCurve {
        x: x.to_vec(),
        length: period,
        t: sol.times,
        y: sol.states.iter().map(|s| [s[0], s[1]]).collect(),
        main_scalar: samples.iter().map(|s| s.0).collect(),
        flag_curvature: samples.iter().map(|s| s.1).collect(),
        closure,
    })
}

fn cumulative_trapezoid(t: &[f64], v: &[f64]) -> Vec<f64> {
    let mut acc = vec![0.0; t.len()];
    for k in 1..t.len() {
        acc[k] = acc[k - 1] + 0.5 * (t[k] - t[k - 1]) * (v[k] + v[k - 1]);
    }
    acc
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KCartanRelation {
    pub applicable: bool,
    /// Why the relation was not tested.
    pub reason: Option<String>,
    /// `max_t | ln|K(t)| - ln|K(0)| - ∫₀ᵗ I |`.
    pub residual: Option<f64>,
    /// `max_t | ln|I(t)| - ln|I(0)| - ∫₀ᵗ K |`, recorded only.
    pub cartan_growth: Option<f64>,
}

/// Tests `K(t) = K(0) exp ∫₀ᵗ I` on an indicatrix curve. `landsberg` says
/// whether the metric was classified Landsberg; the relation is only
/// claimed there.
pub fn k_cartan_relation_residual(curve: &IndicatrixCurve, landsberg: bool) -> KCartanRelation {
    let k = &curve.flag_curvature;
    let i = &curve.main_scalar;
    let cartan_growth = {
        let s0 = i[0].signum();
        (i.iter().all(|v| v.abs() > K_FLOOR && v.signum() == s0)).then(|| {
            let int_k = cumulative_trapezoid(&curve.t, k);
            (0..i.len())
                .map(|n| (i[n].abs().ln() - i[0].abs().ln() - int_k[n]).abs())
                .fold(0.0, f64::max)
        })
    };
    let reason = if !landsberg {
        Some("metric is not Landsberg".to_string())
    } else if k.iter().any(|v| v.abs() <= K_FLOOR) {
        Some("flag curvature vanishes on the curve".to_string())
    } else if k.iter().any(|v| v.signum() != k[0].signum()) {
        Some("flag curvature changes sign".to_string())
    } else {
        None
    };
    let residual = reason.is_none().then(|| {
        let int_i = cumulative_trapezoid(&curve.t, i);
        (0..k.len())
            .map(|n| (k[n].abs().ln() - k[0].abs().ln() - int_i[n]).abs())
            .fold(0.0, f64::max)
    });
    KCartanRelation {
        applicable: reason.is_none(),
        reason,
        residual,
        cartan_growth,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{zoo, Sampler};

    fn member(name: &str) -> MetricSpec {
        MetricSpec::builtin_named(name).unwrap()
    }

    fn tp(x: [f64; 2], y: [f64; 2]) -> TangentPoint {
        TangentPoint { x: x.to_vec(), y: y.to_vec() }
    }

    #[test]
    fn euclidean_frames() {
        let m = member("euclidean");
        let f = berwald_frame(&m, &tp([0.0, 0.0], [1.0, 0.0])).unwrap();
        assert_eq!((f.ell.clone(), f.m.clone()), (vec![1.0, 0.0], vec![0.0, 1.0]));
        let f = berwald_frame(&m, &tp([0.0, 0.0], [0.0, 2.0])).unwrap();
        assert!((f.ell[1] - 1.0).abs() < 1e-15 && (f.m[0] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn frame_orientation_and_reconstruction() {
        let m = member("randers_const");
        let p = tp([0.0, 0.0], [0.0, 1.0]);
        let f = berwald_frame(&m, &p).unwrap();
        assert!(f.ell[0] * f.m[1] - f.ell[1] * f.m[0] > 0.0);
        let (g, _) = crate::tensors::fundamental_tensor(&m, &p).unwrap();
        assert!(f.reconstruction(&g.components) < 1e-12);
        assert!(f.orthonormality() < 1e-12);
    }

    #[test]
    fn main_scalar_cases() {
        assert!(main_scalar(&member("hyperbolic"), &tp([0.0, 1.0], [1.0, 2.0])).unwrap().abs() < 1e-15);
        let q = member("minkowski_smooth_quartic");
        let a = main_scalar(&q, &tp([0.0, 0.0], [1.0, 1.0])).unwrap();
        let b = main_scalar(&q, &tp([0.0, 0.0], [1.0, 0.0])).unwrap();
        let c = main_scalar(&q, &tp([0.0, 0.0], [1.0, 0.3])).unwrap();
        assert!((a - b).abs() > 1e-6 || (a - c).abs() > 1e-6);
        // 0-homogeneous in y
        let d = main_scalar(&q, &tp([0.0, 0.0], [3.0, 0.9])).unwrap();
        assert!((c - d).abs() < 1e-12);
    }

    #[test]
    fn surface_identities_on_zoo() {
        for m in zoo() {
            for p in Sampler::new(5, 4, 5).points(&m) {
                let t = PointTensors::compute(&m, &p).unwrap();
                let s = SurfaceIdentities::of(&t);
                assert!(s.max() < 1e-9, "{}: {s:?}", m.name);
            }
        }
    }

    #[test]
    fn landsberg_ratio_cases() {
        let r = landsberg_c_proportionality(&member("hyperbolic"), &tp([0.0, 1.0], [1.0, 0.0])).unwrap();
        assert!(r.kappa.is_none());
        let r = landsberg_c_proportionality(&member("minkowski_smooth_quartic"), &tp([0.0, 0.0], [1.0, 0.4])).unwrap();
        assert_eq!(r.kappa, Some(0.0));
        let r = landsberg_c_proportionality(&member("randers_var"), &tp([0.3, 0.7], [1.0, 0.4])).unwrap();
        assert!(r.kappa.unwrap().is_finite() && r.residual < 1e-9);
        let d = douglas_rank1_residual(&member("randers_var"), &tp([0.3, 0.7], [1.0, 0.4])).unwrap();
        assert!(d.residual < 1e-9 && d.tau.abs() > 0.0);
    }

    #[test]
    fn euclidean_indicatrix_is_the_circle() {
        let c = indicatrix_flow(&member("euclidean"), &[0.0, 0.0], 64).unwrap();
        assert!((c.length - std::f64::consts::TAU).abs() < 1e-6, "{}", c.length);
        assert!(c.main_scalar.iter().all(|v| v.abs() < 1e-12));
        assert!(c.flag_curvature.iter().all(|v| v.abs() < 1e-12));
        let r = k_cartan_relation_residual(&c, true);
        assert!(!r.applicable);
    }

    #[test]
    fn hyperbolic_indicatrix() {
        let c = indicatrix_flow(&member("hyperbolic"), &[0.0, 1.0], 64).unwrap();
        assert!(c.flag_curvature.iter().all(|k| (k + 1.0).abs() < 1e-9));
        let r = k_cartan_relation_residual(&c, true);
        assert!(r.applicable && r.residual.unwrap() < 1e-9);
        assert!(!k_cartan_relation_residual(&c, false).applicable);
    }

    #[test]
    fn quartic_indicatrix_has_varying_main_scalar() {
        let c = indicatrix_flow(&member("minkowski_smooth_quartic"), &[0.0, 0.0], 128).unwrap();
        let spread = c.main_scalar.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
            - c.main_scalar.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        assert!(spread > 1e-3);
        assert!(c.flag_curvature.iter().all(|k| k.abs() < 1e-12));
        assert!(c.closure < 1e-8);
        assert_eq!(
            k_cartan_relation_residual(&c, true).reason.as_deref(),
            Some("flag curvature vanishes on the curve")
        );
    }

    #[test]
    fn rejects_non_surfaces_and_short_curves() {
        let m3 = MetricSpec::from_expression("e3", 3, "sqrt(y1^2+y2^2+y3^2)", vec![(-1.0, 1.0); 3]).unwrap();
        assert!(berwald_frame(&m3, &TangentPoint { x: vec![0.0; 3], y: vec![1.0, 0.0, 0.0] }).is_err());
        assert!(indicatrix_flow(&member("euclidean"), &[0.0, 0.0], 10).is_err());
    }
}
