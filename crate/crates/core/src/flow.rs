//! Geodesics, parallel transport and scalar curves along geodesics.
//!
//! Geodesics solve `c̈ = -2 G(c, ċ)`. Two transports are provided:
//!
//! - linear: `U̇ + N(c, ċ) U = 0`, the Berwald parallel transport of a
//!   vector along `c`, which preserves `g_ċ(U, V)`;
//! - nonlinear: `Ẇ + N(c, W) ċ = 0`, the parallel translation of a
//!   direction. It preserves `F(c, W)`. Its linearisation
//!   `Ȧ + Γ(c, W)(ċ, A) = 0` preserves `g_W(A, A)` exactly when the metric
//!   is Landsberg, which is what the transported-frame check measures.
//!
//! Along a geodesic with linearly parallel `U`, `E(t) = E_ċ(U, U)` and
//! `I(t) = I_ċ(U)` have derivatives `H(t) = H_ċ(U, U)` and
//! `J(t) = J_ċ(U)`; both relations are checked against five-point
//! differences on the output grid.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{MetricSpec, TangentPoint};
use crate::ode::{integrate_grid, uniform_grid, GridSolution, Tolerances};
use crate::tensors::{PointTensors, SprayJets};

/// Discretised geodesic.
#[derive(Debug, Clone, Serialize)]
pub struct GeodesicTrace {
    #[serde(skip)]
    spec: MetricSpec,
    pub metric: String,
    pub initial: TangentPoint,
    /// Requested span; the grid may end early, see `truncated`.
    pub t_span: (f64, f64),
    pub steps: usize,
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    /// `F(c(t), ċ(t))`.
    pub speed: Vec<f64>,
    /// Reason the integration stopped before the end of the span.
    pub truncated: Option<String>,
    #[serde(skip)]
    tol: Tolerances,
}

fn chart_guard<'a>(spec: &'a MetricSpec) -> impl FnMut(f64, &[f64]) -> std::result::Result<(), String> + 'a {
    let n = spec.dimension();
    move |t, z| {
        if spec.in_chart(&z[..n]) {
            Ok(())
        } else {
            Err(format!("left the chart at t = {t}"))
        }
    }
}

fn spray_at(spec: &MetricSpec, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    Ok(SprayJets::new(spec, x, y, 2)?.spray_values())
}

/// `N^i_j` at `(x, y)`, row-major.
fn connection_at(spec: &MetricSpec, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    Ok(SprayJets::new(spec, x, y, 3)?.connection_values())
}

fn check_span(spec: &MetricSpec, p0: &TangentPoint, t_span: (f64, f64), steps: usize) -> Result<()> {
    if steps < 4 {
        return Err(Error::Validation("flows need at least 4 steps".into()));
    }
    if !(t_span.0.is_finite() && t_span.1.is_finite()) || t_span.0 == t_span.1 {
        return Err(Error::Validation(format!("bad time span {t_span:?}")));
    }
    TangentPoint::new(spec, p0.x.clone(), p0.y.clone())?;
    Ok(())
}

/// Integrates the geodesic with `c(t₀) = x`, `ċ(t₀) = y` over `t_span`
/// starting from its first end.
pub fn geodesic(spec: &MetricSpec, p0: &TangentPoint, t_span: (f64, f64), steps: usize) -> Result<GeodesicTrace> {
    geodesic_with(spec, p0, t_span, steps, Tolerances::default())
}

pub fn geodesic_with(
    spec: &MetricSpec,
    p0: &TangentPoint,
    t_span: (f64, f64),
    steps: usize,
    tol: Tolerances,
) -> Result<GeodesicTrace> {
    check_span(spec, p0, t_span, steps)?;
    let n = spec.dimension();
    let grid = uniform_grid(t_span.0, t_span.1, steps);
    let rhs = |_t: f64, z: &[f64], out: &mut [f64]| -> Result<()> {
        let g = spray_at(spec, &z[..n], &z[n..])?;
        for i in 0..n {
            out[i] = z[n + i];
            out[n + i] = -2.0 * g[i];
        }
        Ok(())
    };
    let sol = integrate_grid(rhs, p0.coordinates(), &grid, tol, chart_guard(spec))?;
    let speed = sol
        .states
        .iter()
        .map(|z| spec.eval(&z[..n], &z[n..]))
        .collect::<Result<_>>()?;
    Ok(GeodesicTrace {
        spec: spec.clone(),
        metric: spec.name.clone(),
        initial: p0.clone(),
        t_span,
        steps,
        positions: sol.states.iter().map(|z| z[..n].to_vec()).collect(),
        velocities: sol.states.iter().map(|z| z[n..].to_vec()).collect(),
        times: sol.times,
        speed,
        truncated: sol.stopped,
        tol,
    })
}

/// Nonlinear transport of a direction with its linearised frame.
#[derive(Debug, Clone, Serialize)]
pub struct NonlinearTransport {
    pub w: Vec<Vec<f64>>,
    /// `frame[k][a]` is the `a`-th transported frame vector at `t_k`.
    pub frame: Vec<Vec<Vec<f64>>>,
}

impl GeodesicTrace {
    pub fn spec(&self) -> &MetricSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn grid(&self) -> Vec<f64> {
        self.times.clone()
    }

    fn coupled(
        &self,
        extra0: Vec<f64>,
        mut extra_rhs: impl FnMut(&[f64], &[f64], &[f64], &mut [f64]) -> Result<()>,
    ) -> Result<GridSolution> {
        let spec = &self.spec;
        let n = spec.dimension();
        let mut z0 = self.initial.coordinates();
        z0.extend(extra0);
        let rhs = move |_t: f64, z: &[f64], out: &mut [f64]| -> Result<()> {
            let (c, v) = (&z[..n], &z[n..2 * n]);
            let g = spray_at(spec, c, v)?;
            for i in 0..n {
                out[i] = v[i];
                out[n + i] = -2.0 * g[i];
            }
            extra_rhs(c, v, &z[2 * n..], &mut out[2 * n..])
        };
        let sol = integrate_grid(rhs, z0, &self.grid(), self.tol, |_, _| Ok(()))?;
        if let Some(msg) = &sol.stopped {
            return Err(Error::Numerical(format!("transport failed: {msg}")));
        }
        Ok(sol)
    }

    /// Linearly parallel `U(t)` with `U(t₀) = u0`.
    pub fn linear_transport(&self, u0: &[f64]) -> Result<Vec<Vec<f64>>> {
        let spec = &self.spec;
        let n = spec.dimension();
        if u0.len() != n {
            return Err(Error::Validation("transported vector has the wrong dimension".into()));
        }
        let sol = self.coupled(u0.to_vec(), |c, v, u, out| {
            let nc = connection_at(spec, c, v)?;
            for i in 0..n {
                out[i] = -(0..n).map(|j| nc[i * n + j] * u[j]).sum::<f64>();
            }
            Ok(())
        })?;
        Ok(sol.states.iter().map(|z| z[2 * n..].to_vec()).collect())
    }

    /// Nonlinearly parallel `W(t)` with `W(t₀) = w0`, and the solutions of
    /// the linearised equation started from `frame0`.
    pub fn nonlinear_transport(&self, w0: &[f64], frame0: &[Vec<f64>]) -> Result<NonlinearTransport> {
        let spec = &self.spec;
        let n = spec.dimension();
        if w0.len() != n || frame0.iter().any(|a| a.len() != n) {
            return Err(Error::Validation("transported vector has the wrong dimension".into()));
        }
        if w0.iter().all(|v| *v == 0.0) {
            return Err(Error::Validation("nonlinear transport of the zero vector".into()));
        }
        let k = frame0.len();
        let mut z0 = w0.to_vec();
        for a in frame0 {
            z0.extend(a);
        }
        let sol = self.coupled(z0, |c, v, z, out| {
            let w = &z[..n];
            if w.iter().map(|a| a * a).sum::<f64>() < 1e-24 {
                return Err(Error::Numerical("transported direction collapsed to zero".into()));
            }
            let sj = SprayJets::new(spec, c, w, 4)?;
            let nc = sj.connection_values();
            let gamma = sj.gamma_values();
            for i in 0..n {
                out[i] = -(0..n).map(|j| nc[i * n + j] * v[j]).sum::<f64>();
            }
            for a in 0..k {
                let aa = &z[n * (a + 1)..n * (a + 2)];
                for i in 0..n {
                    let mut acc = 0.0;
                    for j in 0..n {
                        for l in 0..n {
                            acc += gamma[(i * n + j) * n + l] * v[j] * aa[l];
                        }
                    }
                    out[n * (a + 1) + i] = -acc;
                }
            }
            Ok(())
        })?;
        Ok(NonlinearTransport {
            w: sol.states.iter().map(|z| z[2 * n..3 * n].to_vec()).collect(),
            frame: sol
                .states
                .iter()
                .map(|z| (0..k).map(|a| z[n * (3 + a)..n * (4 + a)].to_vec()).collect())
                .collect(),
        })
    }
}

/// `I(t)`, `J(t)`, `E(t)`, `H(t)` along a trace for a linearly parallel
/// field, with the grid derivatives of `I` and `E`.
#[derive(Debug, Clone, Serialize)]
pub struct ScalarCurves {
    pub u: Vec<Vec<f64>>,
    pub i: Vec<f64>,
    pub j: Vec<f64>,
    pub e: Vec<f64>,
    pub h: Vec<f64>,
    /// Five-point derivative of `I`; `None` within two samples of an end.
    pub di_dt: Vec<Option<f64>>,
    pub de_dt: Vec<Option<f64>>,
    pub dh_dt: Vec<Option<f64>>,
}

/// Five-point central differences on a uniform grid.
pub fn grid_derivative(t: &[f64], v: &[f64]) -> Vec<Option<f64>> {
    let len = v.len();
    (0..len)
        .map(|k| {
            if k < 2 || k + 2 >= len {
                return None;
            }
            let dt = (t[k + 1] - t[k - 1]) / 2.0;
            Some((v[k - 2] - 8.0 * v[k - 1] + 8.0 * v[k + 1] - v[k + 2]) / (12.0 * dt))
        })
        .collect()
}

pub fn scalar_curves(spec: &MetricSpec, trace: &GeodesicTrace, u0: &[f64]) -> Result<ScalarCurves> {
    let n = spec.dimension();
    let u = trace.linear_transport(u0)?;
    let pts: Vec<Result<[f64; 4]>> = (0..trace.len())
        .into_par_iter()
        .map(|k| {
            let p = TangentPoint {
                x: trace.positions[k].clone(),
                y: trace.velocities[k].clone(),
            };
            let t = PointTensors::compute(spec, &p)?;
            let uk = &u[k];
            let one = |v: &[f64]| (0..n).map(|i| v[i] * uk[i]).sum::<f64>();
            let two = |m: &[f64]| {
                let mut acc = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        acc += m[i * n + j] * uk[i] * uk[j];
                    }
                }
                acc
            };
            Ok([
                one(&t.mean_cartan.components),
                one(&t.mean_landsberg.components),
                two(&t.mean_berwald.components),
                two(&t.h_curvature.components),
            ])
        })
        .collect();
    let pts: Vec<[f64; 4]> = pts.into_iter().collect::<Result<_>>()?;
    let col = |c: usize| pts.iter().map(|r| r[c]).collect::<Vec<f64>>();
    let (i, j, e, h) = (col(0), col(1), col(2), col(3));
    Ok(ScalarCurves {
        di_dt: grid_derivative(&trace.times, &i),
        de_dt: grid_derivative(&trace.times, &e),
        dh_dt: grid_derivative(&trace.times, &h),
        u,
        i,
        j,
        e,
        h,
    })
}

fn max_rel_drift(v: &[f64]) -> f64 {
    let v0 = v[0];
    let scale = v0.abs().max(1e-300);
    v.iter().map(|x| (x - v0).abs() / scale).fold(0.0, f64::max)
}

fn derivative_gap(exact: &[f64], approx: &[Option<f64>]) -> f64 {
    exact
        .iter()
        .zip(approx)
        .filter_map(|(a, b)| b.map(|b| (a - b).abs()))
        .fold(0.0, f64::max)
}

/// Residuals along one geodesic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceChecks {
    pub initial: TangentPoint,
    pub samples: usize,
    pub truncated: Option<String>,
    /// Relative drift of `F(c, ċ)`.
    pub speed_drift: f64,
    /// Relative drift of `g_ċ(U, U)` for the linearly parallel field.
    pub linear_norm_drift: f64,
    /// Relative drift of `F(c, W)`.
    pub nonlinear_norm_drift: f64,
    /// Largest relative drift of `g_W(A, A)` over the transported frame.
    pub induced_metric_drift: f64,
    /// `max |J - dI/dt|`.
    pub j_vs_di: f64,
    /// `max |H - dE/dt|`.
    pub h_vs_de: f64,
    /// `max |dH/dt|`.
    pub h_slope: f64,
    /// `max |E(t) - E(t₀) - H(t₀)(t - t₀)|`.
    pub e_affinity: f64,
}

/// Default transported vectors for a direction `y`: the quarter-turn of `y`
/// blended with `y` itself, so no component is special.
pub fn default_vectors(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    (0..n).map(|i| -y[(i + 1) % n] * if i == 0 { 1.0 } else { -1.0 } + 0.3 * y[i]).collect()
}

pub fn check_trace(
    spec: &MetricSpec,
    p0: &TangentPoint,
    t_span: (f64, f64),
    steps: usize,
    u0: Option<&[f64]>,
) -> Result<(GeodesicTrace, ScalarCurves, TraceChecks)> {
    let trace = geodesic(spec, p0, t_span, steps)?;
    if trace.len() < 5 {
        return Err(Error::Numerical(format!(
            "geodesic too short to check: {}",
            trace.truncated.clone().unwrap_or_default()
        )));
    }
    let n = spec.dimension();
    let u0 = u0.map(<[f64]>::to_vec).unwrap_or_else(|| default_vectors(&p0.y));
    let curves = scalar_curves(spec, &trace, &u0)?;

    let g_uu: Vec<f64> = (0..trace.len())
        .map(|k| {
            let sj = SprayJets::new(spec, &trace.positions[k], &trace.velocities[k], 2)?;
            let g = sj.g_values();
            let u = &curves.u[k];
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += g[i * n + j] * u[i] * u[j];
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;

    // W = ċ would just reproduce the geodesic, so transport the test vector
    let w0 = &u0;
    let frame0 = vec![p0.y.clone(), default_vectors(w0)];
    let nl = trace.nonlinear_transport(w0, &frame0)?;
    let mut f_w = Vec::with_capacity(trace.len());
    let mut g_aa: Vec<Vec<f64>> = vec![Vec::new(); frame0.len()];
    for k in 0..trace.len() {
        f_w.push(spec.eval(&trace.positions[k], &nl.w[k])?);
        let g = SprayJets::new(spec, &trace.positions[k], &nl.w[k], 2)?.g_values();
        for (a, v) in nl.frame[k].iter().enumerate() {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += g[i * n + j] * v[i] * v[j];
                }
            }
            g_aa[a].push(acc);
        }
    }

    let t0 = trace.times[0];
    let e_affinity = trace
        .times
        .iter()
        .zip(&curves.e)
        .map(|(t, e)| (e - curves.e[0] - curves.h[0] * (t - t0)).abs())
        .fold(0.0, f64::max);
    let checks = TraceChecks {
        initial: p0.clone(),
        samples: trace.len(),
        truncated: trace.truncated.clone(),
        speed_drift: max_rel_drift(&trace.speed),
        linear_norm_drift: max_rel_drift(&g_uu),
        nonlinear_norm_drift: max_rel_drift(&f_w),
        induced_metric_drift: g_aa.iter().map(|v| max_rel_drift(v)).fold(0.0, f64::max),
        j_vs_di: derivative_gap(&curves.j, &curves.di_dt),
        h_vs_de: derivative_gap(&curves.h, &curves.de_dt),
        h_slope: curves.dh_dt.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())),
        e_affinity,
    };
    Ok((trace, curves, checks))
}

pub const DRIFT_TOL: f64 = 1e-6;
pub const DERIVATIVE_TOL: f64 = 1e-4;
pub const INDUCED_METRIC_TOL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowViolation {
    pub initial: TangentPoint,
    pub check: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowAudit {
    pub metric: String,
    /// Whether the Landsberg-only checks were applied.
    pub landsberg: bool,
    pub t_span: (f64, f64),
    pub steps: usize,
    pub traces: Vec<TraceChecks>,
    pub failures: Vec<String>,
    pub violations: Vec<FlowViolation>,
}

impl FlowAudit {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.failures.is_empty()
    }
}

/// Runs [`check_trace`] from each start point and lists every check that
/// exceeds its tolerance. `landsberg` switches on the checks that only hold
/// for Landsberg metrics (frame preservation, `H' = 0`, affine `E`).
pub fn landsberg_flow_audit(
    spec: &MetricSpec,
    starts: &[TangentPoint],
    t_span: (f64, f64),
    steps: usize,
    landsberg: bool,
) -> FlowAudit {
    let results: Vec<Result<TraceChecks>> = starts
        .par_iter()
        .map(|p| check_trace(spec, p, t_span, steps, None).map(|r| r.2))
        .collect();
    let mut audit = FlowAudit {
        metric: spec.name.clone(),
        landsberg,
        t_span,
        steps,
        traces: Vec::new(),
        failures: Vec::new(),
        violations: Vec::new(),
    };
    for (p, r) in starts.iter().zip(results) {
        match r {
            Ok(c) => {
                let mut flag = |check: &str, value: f64, tol: f64| {
                    if !(value < tol) {
                        audit.violations.push(FlowViolation {
                            initial: p.clone(),
                            check: check.to_string(),
                            value,
                        });
                    }
                };
                flag("speed drift", c.speed_drift, DRIFT_TOL);
                flag("linear transport g drift", c.linear_norm_drift, DRIFT_TOL);
                flag("nonlinear transport F drift", c.nonlinear_norm_drift, DRIFT_TOL);
                flag("J = dI/dt", c.j_vs_di, DERIVATIVE_TOL);
                flag("H = dE/dt", c.h_vs_de, DERIVATIVE_TOL);
                if landsberg {
                    flag("induced metric drift", c.induced_metric_drift, INDUCED_METRIC_TOL);
                    flag("dH/dt = 0", c.h_slope, DERIVATIVE_TOL);
                    flag("E affine", c.e_affinity, DERIVATIVE_TOL);
                }
                audit.traces.push(c);
            }
            Err(e) => audit.failures.push(format!("{p:?}: {e}")),
        }
    }
    audit
}

/// Rescales `y` so that `F(x, y) = speed`.
pub fn with_speed(spec: &MetricSpec, p: &TangentPoint, speed: f64) -> Result<TangentPoint> {
    let f = spec.eval(&p.x, &p.y)?;
    Ok(p.with_y(p.y.iter().map(|v| v * speed / f).collect()))
}

/// Outcome of integrating one geodesic over a long symmetric span.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Completeness {
    pub initial: TangentPoint,
    pub t_max: f64,
    /// Time at which the forward geodesic left the chart, if it did.
    pub forward_exit: Option<f64>,
    pub backward_exit: Option<f64>,
    /// Set when the run hit the edge of the coordinate box.
    pub note: Option<String>,
}

impl Completeness {
    pub fn complete_in_chart(&self) -> bool {
        self.forward_exit.is_none() && self.backward_exit.is_none()
    }
}

/// Integrates forwards and backwards to `±t_max`. An exit only means the
/// geodesic left the coordinate box; the chart, not the manifold, ends there.
pub fn completeness(spec: &MetricSpec, p0: &TangentPoint, t_max: f64, steps: usize) -> Result<Completeness> {
    let fwd = geodesic(spec, p0, (0.0, t_max), steps)?;
    let bwd = geodesic(spec, p0, (0.0, -t_max), steps)?;
    let exit = |t: &GeodesicTrace| t.truncated.as_ref().map(|_| *t.times.last().expect("nonempty"));
    let (forward_exit, backward_exit) = (exit(&fwd), exit(&bwd));
    let note = (forward_exit.is_some() || backward_exit.is_some())
        .then(|| "chart artifact: the geodesic left the coordinate box, not the manifold".to_string());
    Ok(Completeness {
        initial: p0.clone(),
        t_max,
        forward_exit,
        backward_exit,
        note,
    })
}

/// CSV rows `t, c.., v.., U.., F, E, H, I, J, H - dE/dt, J - dI/dt`.
pub fn trace_csv(trace: &GeodesicTrace, curves: &ScalarCurves) -> (Vec<String>, Vec<Vec<f64>>) {
    let n = trace.initial.dimension();
    let mut header = vec!["t".to_string()];
    for prefix in ["c", "v", "U"] {
        header.extend((1..=n).map(|i| format!("{prefix}{i}")));
    }
    header.extend(["F", "E", "H", "I", "J", "H_res", "J_res"].map(String::from));
    let rows = (0..trace.len())
        .map(|k| {
            let mut row = vec![trace.times[k]];
            row.extend(&trace.positions[k]);
            row.extend(&trace.velocities[k]);
            row.extend(&curves.u[k]);
            row.extend([trace.speed[k], curves.e[k], curves.h[k], curves.i[k], curves.j[k]]);
            row.push(curves.de_dt[k].map_or(f64::NAN, |d| curves.h[k] - d));
            row.push(curves.di_dt[k].map_or(f64::NAN, |d| curves.j[k] - d));
            row
        })
        .collect();
    (header, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn member(name: &str) -> MetricSpec {
        MetricSpec::builtin_named(name).unwrap()
    }

    fn tp(x: [f64; 2], y: [f64; 2]) -> TangentPoint {
        TangentPoint { x: x.to_vec(), y: y.to_vec() }
    }

    #[test]
    fn euclidean_geodesic_is_a_line() {
        let tr = geodesic(&member("euclidean"), &tp([0.0, 0.0], [1.0, 0.0]), (0.0, 4.0), 40).unwrap();
        for (t, c) in tr.times.iter().zip(&tr.positions) {
            assert!((c[0] - t).abs() < 1e-12 && c[1].abs() < 1e-12);
        }
        let u = tr.linear_transport(&[0.3, 0.7]).unwrap();
        assert!(u.iter().all(|v| (v[0] - 0.3).abs() < 1e-12 && (v[1] - 0.7).abs() < 1e-12));
    }

    #[test]
    fn hyperbolic_vertical_geodesic() {
        let tr = geodesic(&member("hyperbolic"), &tp([0.0, 1.0], [0.0, 1.0]), (0.0, 3.0), 60).unwrap();
        for (t, c) in tr.times.iter().zip(&tr.positions) {
            assert!(c[0].abs() < 1e-12);
            assert!((c[1] - t.exp()).abs() < 1e-7 * t.exp(), "{t} {c:?}");
        }
        assert!(max_rel_drift(&tr.speed) < 1e-8);
    }

    #[test]
    fn hyperbolic_long_run_leaves_chart() {
        let tr = geodesic(&member("hyperbolic"), &tp([0.0, 1.0], [0.0, -1.0]), (0.0, 10.0), 100).unwrap();
        assert!(tr.truncated.is_some());
        assert!(*tr.times.last().unwrap() < 10.0);
    }

    #[test]
    fn backwards_span_returns_to_start() {
        let m = member("sphere");
        let fwd = geodesic(&m, &tp([0.2, 0.1], [0.3, -0.2]), (0.0, 1.0), 10).unwrap();
        let end = TangentPoint { x: fwd.positions[10].clone(), y: fwd.velocities[10].clone() };
        let rev = geodesic(&m, &end, (1.0, 0.0), 10).unwrap();
        assert_eq!(*rev.times.last().unwrap(), 0.0);
        let start = rev.positions.last().unwrap();
        assert!((start[0] - 0.2).abs() < 1e-8 && (start[1] - 0.1).abs() < 1e-8, "{start:?}");
    }

    #[test]
    fn randers_var_derivative_relations() {
        let m = member("randers_var");
        let p = with_speed(&m, &tp([0.3, 0.5], [0.6, 0.8]), 1.0).unwrap();
        let (_, curves, c) = check_trace(&m, &p, (0.0, 5.0), 200, None).unwrap();
        assert!(c.speed_drift < 1e-7, "{c:?}");
        assert!(c.linear_norm_drift < 1e-7);
        assert!(c.nonlinear_norm_drift < 1e-7);
        assert!(c.j_vs_di < 1e-5 && c.h_vs_de < 1e-5, "{c:?}");
        assert!(curves.e.iter().any(|e| e.abs() > 1e-3));
        assert!(c.induced_metric_drift > 1e-4, "{c:?}");
    }

    #[test]
    fn minkowski_transport_is_trivial() {
        let m = member("minkowski_smooth_quartic");
        let (tr, curves, c) = check_trace(&m, &tp([0.0, 0.0], [0.5, 0.2]), (0.0, 5.0), 50, Some(&[0.1, 0.9])).unwrap();
        assert!(tr.velocities.iter().all(|v| v == &vec![0.5, 0.2]));
        assert!(curves.u.iter().all(|u| u == &vec![0.1, 0.9]));
        assert!(curves.i.iter().all(|i| (i - curves.i[0]).abs() < 1e-15));
        assert!(c.induced_metric_drift == 0.0 && c.e_affinity == 0.0);
    }

    #[test]
    fn hyperbolic_checks() {
        let m = member("hyperbolic");
        let (_, _, c) = check_trace(&m, &tp([0.0, 1.0], [0.4, 0.3]), (0.0, 5.0), 100, None).unwrap();
        assert!(c.linear_norm_drift < 1e-6 && c.induced_metric_drift < 1e-6, "{c:?}");
        assert!(c.h_vs_de < 1e-6 && c.e_affinity < 1e-6);
    }

    #[test]
    fn euclidean_exit_is_a_chart_artifact() {
        let c = completeness(&member("euclidean"), &tp([0.0, 0.0], [1.0, 0.0]), 10.0, 40).unwrap();
        assert_eq!(c.forward_exit, Some(5.25));
        assert_eq!(c.backward_exit, Some(-5.25));
        assert!(c.note.unwrap().contains("chart artifact"));
    }

    #[test]
    fn grid_derivative_is_exact_on_quartics() {
        let t = uniform_grid(0.0, 1.0, 10);
        let v: Vec<f64> = t.iter().map(|s| s.powi(4) - s).collect();
        let d = grid_derivative(&t, &v);
        assert!(d[0].is_none() && d[10].is_none());
        for k in 2..9 {
            assert!((d[k].unwrap() - (4.0 * t[k].powi(3) - 1.0)).abs() < 1e-12);
        }
    }
}
