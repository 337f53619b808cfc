//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Reference values come from oracles defined here or from the
//! finite-difference engine, never from the jet code under test.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;

use rayon::prelude::*;

use finsler::classify::{classify, theorem_audit, ClassificationReport, JET_TOLERANCE};
use finsler::fd_engine;
use finsler::flow::{self, TraceChecks};
use finsler::metrics::{zoo, MetricSpec, Sampler, TangentPoint};
use finsler::report::to_json;
use finsler::surface::{indicatrix_flow, k_cartan_relation_residual, SurfaceIdentities};
use finsler::tensors::PointTensors;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn member(name: &str) -> MetricSpec {
    MetricSpec::builtin_named(name).expect("zoo member")
}

fn tensors_at(spec: &MetricSpec, points: &[TangentPoint]) -> Vec<PointTensors> {
    points
        .par_iter()
        .map(|p| PointTensors::compute(spec, p).expect("evaluation"))
        .collect()
}

fn landsberg(spec: &MetricSpec) -> bool {
    classify(spec, &Sampler::default(), JET_TOLERANCE).expect("classification").flags.landsberg
}

fn identity_suite() -> Outcome {
    let limit = 1e-8;
    let mut worst = (0.0, String::new());
    for spec in zoo() {
        let pts = Sampler::new(10, 5, 101).points(&spec);
        assert_eq!(pts.len(), 50);
        for t in tensors_at(&spec, &pts) {
            for (name, r) in t.identities().named() {
                if r > worst.0 {
                    worst = (r, format!("{} / {name}", spec.name));
                }
            }
        }
    }
    outcome(worst.0 < limit, format!("max residual {:.2e} at {} (limit {limit:e})", worst.0, worst.1))
}

fn oracle_equivalence() -> Outcome {
    let limit = 1e-5;
    let mut worst = (0.0, String::new());
    for spec in zoo() {
        let pts = Sampler::new(10, 1, 202).points(&spec);
        let gaps: Vec<(f64, String)> = pts
            .par_iter()
            .map(|p| {
                let jet = PointTensors::compute(&spec, p).expect("jets");
                let fd = fd_engine::compute(&spec, p).expect("finite differences");
                jet.named()
                    .into_iter()
                    .zip(fd.named())
                    .map(|((name, a), (_, b))| (fd_engine::relative_gap(a, b, 1e-3), name.to_string()))
                    .fold((0.0, String::new()), |m, v| if v.0 > m.0 { v } else { m })
            })
            .collect();
        for (g, name) in gaps {
            if g > worst.0 {
                worst = (g, format!("{} / {name}", spec.name));
            }
        }
    }
    outcome(worst.0 < limit, format!("max relative gap {:.2e} at {} (limit {limit:e})", worst.0, worst.1))
}

fn surface_identities() -> Outcome {
    let limit = 1e-8;
    let mut worst = (0.0, String::new());
    for spec in zoo().into_iter().filter(|s| s.dimension() == 2) {
        let pts = Sampler::new(10, 5, 303).points(&spec);
        for t in tensors_at(&spec, &pts) {
            for (name, r) in SurfaceIdentities::of(&t).named() {
                if r > worst.0 {
                    worst = (r, format!("{} / {name}", spec.name));
                }
            }
        }
    }
    outcome(worst.0 < limit, format!("max residual {:.2e} at {} (limit {limit:e})", worst.0, worst.1))
}

/// Gaussian curvature `-e^{-2φ} Δφ` of a conformal metric `e^φ |y|`, with
/// the Laplacian from central differences of `φ = ln F(x, e₁)`. The step
/// grows with `|x|` so cancellation stays below truncation far out.
fn conformal_curvature(spec: &MetricSpec, x: &[f64]) -> f64 {
    let phi = |a: f64, b: f64| spec.eval(&[a, b], &[1.0, 0.0]).expect("in domain").ln();
    let h = 1e-3 * x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let (a, b) = (x[0], x[1]);
    let lap = (phi(a + h, b) + phi(a - h, b) + phi(a, b + h) + phi(a, b - h) - 4.0 * phi(a, b)) / (h * h);
    -(-2.0 * phi(a, b)).exp() * lap
}

fn quarter_turn(y: &[f64]) -> Vec<f64> {
    vec![-y[1], y[0]]
}

fn curvature_constants() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    let mut check = |label: &str, err: f64, limit: f64| {
        pass &= err < limit;
        lines.push(format!("{label} {err:.1e}"));
    };

    for (name, k) in [("hyperbolic", -1.0), ("sphere", 1.0)] {
        let spec = member(name);
        let pts = Sampler::new(10, 5, 404).points(&spec);
        let mut worst: f64 = 0.0;
        for (p, t) in pts.iter().zip(tensors_at(&spec, &pts)) {
            let lambda = spec.eval(&p.x, &[1.0, 0.0]).unwrap();
            let conformal = (spec.eval(&p.x, &p.y).unwrap() - lambda * p.y.iter().map(|v| v * v).sum::<f64>().sqrt()).abs();
            assert!(conformal < 1e-12, "{name} is not conformally flat at {p:?}");
            let oracle = conformal_curvature(&spec, &p.x);
            let engine = t.flag_curvature(&quarter_turn(&p.y)).unwrap();
            worst = worst.max((oracle - k).abs()).max((engine - oracle).abs());
        }
        check(name, worst, 1e-5);
    }

    let funk = member("funk");
    let pts = Sampler::new(10, 1, 405).points(&funk);
    let worst = pts
        .par_iter()
        .map(|p| {
            let t = fd_engine::compute(&funk, p).unwrap();
            (t.flag_curvature(&quarter_turn(&p.y)).unwrap() + 0.25).abs()
        })
        .reduce(|| 0.0, f64::max);
    check("funk", worst, 1e-4);

    for name in ["euclidean", "minkowski_smooth_quartic", "randers_const"] {
        let spec = member(name);
        let pts = Sampler::new(10, 2, 406).points(&spec);
        let worst = pts
            .par_iter()
            .map(|p| {
                let fd = fd_engine::compute(&spec, p).unwrap();
                let jet = PointTensors::compute(&spec, p).unwrap();
                let u = quarter_turn(&p.y);
                fd.flag_curvature(&u).unwrap().abs().max(jet.flag_curvature(&u).unwrap().abs())
            })
            .reduce(|| 0.0, f64::max);
        check(name, worst, 1e-8);
    }
    outcome(pass, format!("|K - K_ref|: {}", lines.join(", ")))
}

/// Rescales `p` until its geodesic stays in the chart for the whole span.
fn in_chart_start(spec: &MetricSpec, p: &TangentPoint, span: (f64, f64)) -> Option<TangentPoint> {
    let mut speed = 0.5;
    for _ in 0..8 {
        let q = flow::with_speed(spec, p, speed).ok()?;
        if flow::geodesic(spec, &q, span, 20).ok()?.truncated.is_none() {
            return Some(q);
        }
        speed /= 2.0;
    }
    None
}

fn flow_suite() -> Outcome {
    let span = (0.0, 5.0);
    let mut failures = Vec::new();
    let mut traces = 0;
    let mut worst = [0.0f64; 3];
    for spec in zoo() {
        let lands = landsberg(&spec);
        let starts: Vec<TangentPoint> = Sampler::new(4, 1, 505)
            .points(&spec)
            .iter()
            .filter_map(|p| in_chart_start(&spec, p, span))
            .collect();
        if starts.len() < 3 {
            failures.push(format!("{}: too few in-chart geodesics", spec.name));
        }
        let results: Vec<finsler::Result<(flow::GeodesicTrace, flow::ScalarCurves, TraceChecks)>> = starts
            .par_iter()
            .map(|p| flow::check_trace(&spec, p, span, 200, None))
            .collect();
        for r in results {
            let c = match r {
                Ok((_, _, c)) => c,
                Err(e) => {
                    failures.push(format!("{}: {e}", spec.name));
                    continue;
                }
            };
            traces += 1;
            let drift = c.speed_drift.max(c.linear_norm_drift).max(c.nonlinear_norm_drift);
            let deriv = c.j_vs_di.max(c.h_vs_de);
            worst[0] = worst[0].max(drift);
            worst[1] = worst[1].max(deriv);
            if drift >= 1e-6 || deriv >= 1e-4 || c.truncated.is_some() {
                failures.push(format!("{}: {c:?}", spec.name));
            }
            if lands {
                worst[2] = worst[2].max(c.e_affinity).max(c.induced_metric_drift);
                if c.e_affinity >= 1e-4 || c.induced_metric_drift >= 1e-5 {
                    failures.push(format!("{}: Landsberg checks {c:?}", spec.name));
                }
            }
        }
    }
    for f in &failures {
        eprintln!("  flow: {f}");
    }
    outcome(
        failures.is_empty(),
        format!(
            "{traces} traces; drift {:.1e} (1e-6), derivative gaps {:.1e} (1e-4), Landsberg affinity/frame {:.1e}",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn zoo_reports(sampler: &Sampler, tol: f64) -> Vec<(MetricSpec, ClassificationReport)> {
    zoo()
        .into_iter()
        .map(|s| {
            let r = classify(&s, sampler, tol).expect("classification");
            (s, r)
        })
        .collect()
}

fn theorem_audit_suite() -> Outcome {
    let reports = zoo_reports(&Sampler::default(), JET_TOLERANCE);
    let pairs: Vec<_> = reports.iter().map(|(s, r)| (s.metadata.clone(), r.clone())).collect();
    let audit = theorem_audit(&pairs);
    let rv = &reports.iter().find(|(s, _)| s.name == "randers_var").expect("member").1;
    let covered = audit
        .members
        .iter()
        .filter(|m| m.rigidity.is_some())
        .map(|m| m.metric.as_str())
        .collect::<Vec<_>>();
    let excluded = !rv.flags.landsberg && rv.norms.landsberg > 1e-3;
    outcome(
        audit.passed() && excluded && covered.len() >= 5,
        format!(
            "{} violation(s); in hypothesis: {}; randers_var |L| = {:.3}",
            audit.violations,
            covered.join(" "),
            rv.norms.landsberg
        ),
    )
}

fn lattice_suite() -> Outcome {
    let tols = [1e-3, 1e-4, 1e-6, 1e-7, 1e-9, 1e-11];
    let mut runs = 0;
    let mut violations = Vec::new();
    let mut nonmonotone = Vec::new();
    let mut nondeterministic = Vec::new();
    for seed in [0, 1, 2] {
        let sampler = Sampler::new(25, 8, seed);
        for spec in zoo() {
            let reports: Vec<ClassificationReport> =
                tols.iter().map(|&t| classify(&spec, &sampler, t).expect("classification")).collect();
            runs += reports.len();
            for r in &reports {
                violations.extend(r.lattice_violations.iter().map(|v| format!("{} tol {:e}: {v}", r.metric, r.tolerance)));
            }
            for w in reports.windows(2) {
                if !w[1].flags.is_subset_of(&w[0].flags) {
                    nonmonotone.push(format!("{} {:e}->{:e}", spec.name, w[0].tolerance, w[1].tolerance));
                }
            }
            let again = classify(&spec, &sampler, JET_TOLERANCE).unwrap();
            let first = &reports[3];
            if to_json(first) != to_json(&again) {
                nondeterministic.push(spec.name.clone());
            }
        }
    }
    for v in violations.iter().chain(&nonmonotone).chain(&nondeterministic) {
        eprintln!("  lattice: {v}");
    }
    outcome(
        violations.is_empty() && nonmonotone.is_empty() && nondeterministic.is_empty(),
        format!(
            "{runs} runs; {} implication violation(s), {} monotonicity failure(s), {} nondeterministic",
            violations.len(),
            nonmonotone.len(),
            nondeterministic.len()
        ),
    )
}

fn indicatrix_suite() -> Outcome {
    let euclid = member("euclidean");
    let mut length_err: f64 = 0.0;
    for x in [[0.0, 0.0], [0.7, -1.2]] {
        let c = indicatrix_flow(&euclid, &x, 256).unwrap();
        length_err = length_err.max((c.length - std::f64::consts::TAU).abs());
    }
    let mut worst: f64 = 0.0;
    let mut applicable = Vec::new();
    for spec in zoo().into_iter().filter(|s| s.dimension() == 2) {
        let lands = landsberg(&spec);
        for site in Sampler::new(3, 1, 808).sites(&spec) {
            let curve = indicatrix_flow(&spec, &site.x, 512).unwrap();
            let rel = k_cartan_relation_residual(&curve, lands);
            if let Some(r) = rel.residual {
                worst = worst.max(r);
                if !applicable.contains(&spec.name) {
                    applicable.push(spec.name.clone());
                }
            }
        }
    }
    outcome(
        length_err < 1e-6 && worst < 1e-5 && !applicable.is_empty(),
        format!(
            "euclidean length error {length_err:.1e} (1e-6); K-Cartan residual {worst:.1e} (1e-5) on {}",
            applicable.join(" ")
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("identity suite", identity_suite),
        ("oracle equivalence", oracle_equivalence),
        ("surface identities", surface_identities),
        ("curvature constants", curvature_constants),
        ("flow suite", flow_suite),
        ("theorem audit", theorem_audit_suite),
        ("classifier lattice", lattice_suite),
        ("indicatrix", indicatrix_suite),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !o.pass {
            failed += 1;
        }
        println!("criterion {} {name}: {} - {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion/criteria failed");
        ExitCode::FAILURE
    }
}
