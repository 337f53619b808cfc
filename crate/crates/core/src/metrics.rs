//! Finsler metrics: specification, built-in zoo, sampling and validity checks.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::jets::{lift, MultiIndex};

/// Class a zoo member is expected to fall in. Only the theorem audit reads
/// this; classification never does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedClass {
    Riemannian,
    LocallyMinkowskian,
    Berwald,
    Landsberg,
    NonLandsberg,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Metadata {
    #[serde(default)]
    pub is_homogeneous_space: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_class: Option<ExpectedClass>,
}

/// Admissible directions at every point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum YDomain {
    /// The whole slit tangent space.
    Slit,
    /// Directions within `half_angle` radians of `axis` (Euclidean angle in
    /// the chart).
    Cone { axis: Vec<f64>, half_angle: f64 },
}

impl YDomain {
    pub fn contains(&self, y: &[f64]) -> bool {
        match self {
            YDomain::Slit => true,
            YDomain::Cone { axis, half_angle } => {
                let dot: f64 = axis.iter().zip(y).map(|(a, b)| a * b).sum();
                let c = dot / (norm(axis) * norm(y));
                c.clamp(-1.0, 1.0).acos() < *half_angle
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetricSource {
    Expression(String),
    Builtin(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpec {
    pub name: String,
    pub source: MetricSource,
    /// Axis-aligned chart box for `x`.
    pub chart: Vec<(f64, f64)>,
    pub y_domain: YDomain,
    pub metadata: Metadata,
    expr: Expression,
}

/// On-disk form: `{name, dimension, F, chart, metadata}` plus an optional
/// `y_domain`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricFile {
    pub name: String,
    pub dimension: usize,
    #[serde(rename = "F")]
    pub f: String,
    pub chart: Vec<[f64; 2]>,
    #[serde(default)]
    pub metadata: Metadata,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_domain: Option<YDomain>,
}

impl MetricSpec {
    pub fn from_expression(
        name: &str,
        dimension: usize,
        source: &str,
        chart: Vec<(f64, f64)>,
    ) -> Result<MetricSpec> {
        if dimension < 1 {
            return Err(Error::Validation("dimension must be positive".into()));
        }
        if chart.len() != dimension {
            return Err(Error::Validation(format!(
                "chart has {} intervals for dimension {dimension}",
                chart.len()
            )));
        }
        if let Some((lo, hi)) = chart.iter().find(|(lo, hi)| !(lo < hi)) {
            return Err(Error::Validation(format!("empty chart interval [{lo}, {hi}]")));
        }
        let expr = Expression::parse(source, dimension)?;
        Ok(MetricSpec {
            name: name.to_string(),
            source: MetricSource::Expression(source.to_string()),
            chart,
            y_domain: YDomain::Slit,
            metadata: Metadata::default(),
            expr,
        })
    }

    pub fn with_metadata(mut self, metadata: Metadata) -> Self {
        self.metadata = metadata;
        self
    }

    pub fn with_y_domain(mut self, y_domain: YDomain) -> Self {
        self.y_domain = y_domain;
        self
    }

    fn builtin(name: &str, source: &str, chart: Vec<(f64, f64)>, meta: Metadata) -> MetricSpec {
        let mut spec = MetricSpec::from_expression(name, chart.len(), source, chart)
            .expect("zoo expressions parse")
            .with_metadata(meta);
        spec.source = MetricSource::Builtin(name.to_string());
        spec
    }

    pub fn dimension(&self) -> usize {
        self.expr.dimension()
    }

    pub fn expression(&self) -> &Expression {
        &self.expr
    }

    /// Source text of `F`.
    pub fn source_text(&self) -> String {
        match &self.source {
            MetricSource::Expression(s) => s.clone(),
            MetricSource::Builtin(_) => self.expr.to_string(),
        }
    }

    pub fn is_position_independent(&self) -> bool {
        self.expr.is_position_independent()
    }

    pub fn in_chart(&self, x: &[f64]) -> bool {
        x.len() == self.dimension()
            && x.iter()
                .zip(&self.chart)
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    /// `F(x, y)`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let z: Vec<f64> = x.iter().chain(y).copied().collect();
        Ok(self.expr.evaluate(&z)?)
    }

    pub fn to_file(&self) -> MetricFile {
        MetricFile {
            name: self.name.clone(),
            dimension: self.dimension(),
            f: self.source_text(),
            chart: self.chart.iter().map(|&(a, b)| [a, b]).collect(),
            metadata: self.metadata.clone(),
            y_domain: match &self.y_domain {
                YDomain::Slit => None,
                d => Some(d.clone()),
            },
        }
    }

    pub fn from_file(file: &MetricFile) -> Result<MetricSpec> {
        let chart = file.chart.iter().map(|c| (c[0], c[1])).collect();
        let spec = MetricSpec::from_expression(&file.name, file.dimension, &file.f, chart)?
            .with_metadata(file.metadata.clone());
        Ok(match &file.y_domain {
            Some(d) => spec.with_y_domain(d.clone()),
            None => spec,
        })
    }

    pub fn from_json(text: &str) -> Result<MetricSpec> {
        let file: MetricFile = serde_json::from_str(text)?;
        MetricSpec::from_file(&file)
    }

    pub fn to_json(&self) -> String {
        crate::report::to_json(&self.to_file())
    }

    pub fn load(path: &Path) -> Result<MetricSpec> {
        let text = std::fs::read_to_string(path)?;
        MetricSpec::from_json(&text)
    }

    /// A builtin zoo member by name.
    pub fn builtin_named(name: &str) -> Option<MetricSpec> {
        zoo().into_iter().find(|m| m.name == name)
    }
}

/// A tangent vector `y ≠ 0` based at `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl TangentPoint {
    /// Checks the point against the spec's chart and direction domain.
    pub fn new(spec: &MetricSpec, x: Vec<f64>, y: Vec<f64>) -> Result<TangentPoint> {
        let n = spec.dimension();
        if x.len() != n || y.len() != n {
            return Err(Error::Validation(format!(
                "point needs {n} position and {n} direction components"
            )));
        }
        if !spec.in_chart(&x) {
            return Err(Error::Validation(format!("x = {x:?} outside chart")));
        }
        if norm(&y) <= 1e-12 {
            return Err(Error::Validation("direction y is (numerically) zero".into()));
        }
        if !spec.y_domain.contains(&y) {
            return Err(Error::Validation(format!("y = {y:?} outside direction domain")));
        }
        Ok(TangentPoint { x, y })
    }

    pub fn dimension(&self) -> usize {
        self.x.len()
    }

    /// `(x1..xn, y1..yn)`.
    pub fn coordinates(&self) -> Vec<f64> {
        self.x.iter().chain(&self.y).copied().collect()
    }

    pub fn with_y(&self, y: Vec<f64>) -> TangentPoint {
        TangentPoint { x: self.x.clone(), y }
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// The built-in metric zoo. Every member is two-dimensional.
pub fn zoo() -> Vec<MetricSpec> {
    let homogeneous = |class| Metadata {
        is_homogeneous_space: true,
        expected_class: Some(class),
    };
    vec![
        MetricSpec::builtin(
            "euclidean",
            "sqrt(y1^2 + y2^2)",
            vec![(-5.0, 5.0), (-5.0, 5.0)],
            homogeneous(ExpectedClass::Riemannian),
        ),
        MetricSpec::builtin(
            "hyperbolic",
            "sqrt(y1^2 + y2^2)/x2",
            vec![(-10.0, 10.0), (0.005, 100.0)],
            homogeneous(ExpectedClass::Riemannian),
        ),
        MetricSpec::builtin(
            "sphere",
            "2*sqrt(y1^2 + y2^2)/(1 + x1^2 + x2^2)",
            vec![(-2.0, 2.0), (-2.0, 2.0)],
            homogeneous(ExpectedClass::Riemannian),
        ),
        MetricSpec::builtin(
            "minkowski_smooth_quartic",
            "sqrt(y1^2 + y2^2 + 0.1*sqrt(y1^4 + y2^4))",
            vec![(-5.0, 5.0), (-5.0, 5.0)],
            homogeneous(ExpectedClass::LocallyMinkowskian),
        ),
        MetricSpec::builtin(
            "randers_const",
            "sqrt(y1^2 + y2^2) + 0.5*y1",
            vec![(-5.0, 5.0), (-5.0, 5.0)],
            homogeneous(ExpectedClass::LocallyMinkowskian),
        ),
        MetricSpec::builtin(
            "randers_var",
            "sqrt(y1^2 + y2^2) + 0.3*sin(x2)*y1",
            vec![(-5.0, 5.0), (-5.0, 5.0)],
            Metadata {
                is_homogeneous_space: false,
                expected_class: Some(ExpectedClass::NonLandsberg),
            },
        ),
        MetricSpec::builtin(
            "funk",
            "(sqrt((1 - x1^2 - x2^2)*(y1^2 + y2^2) + (x1*y1 + x2*y2)^2) + x1*y1 + x2*y2)/(1 - x1^2 - x2^2)",
            vec![(-0.63, 0.63), (-0.63, 0.63)],
            Metadata {
                is_homogeneous_space: false,
                expected_class: Some(ExpectedClass::NonLandsberg),
            },
        ),
    ]
}

/// Deterministic low-discrepancy sampler over chart × direction sphere.
///
/// Positions come from a Cranley–Patterson-shifted Halton sequence over the
/// chart box shrunk by `margin` on each side; every site carries
/// `y_per_site` Euclidean-unit directions. In two dimensions the directions
/// are equally spaced angles with a per-site Halton offset.
#[derive(Debug, Clone, PartialEq)]
pub struct Sampler {
    pub x_sites: usize,
    pub y_per_site: usize,
    pub seed: u64,
    /// Fraction of each chart interval excluded at both ends.
    pub margin: f64,
}

impl Default for Sampler {
    fn default() -> Self {
        Sampler {
            x_sites: 25,
            y_per_site: 8,
            seed: 0,
            margin: 0.1,
        }
    }
}

/// One sampled position with its directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Site {
    pub x: Vec<f64>,
    pub directions: Vec<Vec<f64>>,
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    let mut f = inv;
    while i > 0 {
        out += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    inv = out;
    inv
}

impl Sampler {
    pub fn new(x_sites: usize, y_per_site: usize, seed: u64) -> Sampler {
        Sampler {
            x_sites,
            y_per_site,
            seed,
            ..Sampler::default()
        }
    }

    pub fn len(&self) -> usize {
        self.x_sites * self.y_per_site
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sites(&self, spec: &MetricSpec) -> Vec<Site> {
        let n = spec.dimension();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let shift: Vec<f64> = (0..=n).map(|_| rng.random::<f64>()).collect();
        (0..self.x_sites)
            .map(|s| {
                let idx = s as u64 + 1;
                let x = (0..n)
                    .map(|d| {
                        let u = (radical_inverse(idx, PRIMES[d % PRIMES.len()]) + shift[d]).fract();
                        let (lo, hi) = spec.chart[d];
                        let w = hi - lo;
                        lo + w * self.margin + u * w * (1.0 - 2.0 * self.margin)
                    })
                    .collect();
                let offset = (radical_inverse(idx, PRIMES[n % PRIMES.len()]) + shift[n]).fract();
                let directions = self.directions(spec, offset, &mut rng);
                Site { x, directions }
            })
            .collect()
    }

    fn directions(&self, spec: &MetricSpec, offset: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let n = spec.dimension();
        let k = self.y_per_site;
        if n == 2 {
            let (center, width) = match &spec.y_domain {
                YDomain::Slit => (0.0, 2.0 * PI),
                YDomain::Cone { axis, half_angle } => (axis[1].atan2(axis[0]), 2.0 * half_angle * 0.98),
            };
            return (0..k)
                .map(|j| {
                    let t = center - width / 2.0 + width * (j as f64 + offset) / k as f64;
                    vec![t.cos(), t.sin()]
                })
                .collect();
        }
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            let v: Vec<f64> = (0..n)
                .map(|_| {
                    let (u1, u2): (f64, f64) = (rng.random(), rng.random());
                    (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * PI * u2).cos()
                })
                .collect();
            let r = norm(&v);
            if r < 1e-9 {
                continue;
            }
            let v: Vec<f64> = v.iter().map(|a| a / r).collect();
            if spec.y_domain.contains(&v) {
                out.push(v);
            }
        }
        out
    }

    /// All sampled tangent points, site-major.
    pub fn points(&self, spec: &MetricSpec) -> Vec<TangentPoint> {
        self.sites(spec)
            .into_iter()
            .flat_map(|s| {
                let x = s.x;
                s.directions
                    .into_iter()
                    .map(move |y| TangentPoint { x: x.clone(), y })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointIssue {
    pub point: TangentPoint,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidityReport {
    pub metric: String,
    pub points_checked: usize,
    /// Largest `|F(x, λy) - λF(x, y)| / (λ|F(x, y)|)` over λ ∈ {0.5, 2, 7}.
    pub max_homogeneity_residual: f64,
    pub min_g_eigenvalue: f64,
    pub positivity_violations: usize,
    pub domain_errors: Vec<PointIssue>,
    pub passed: bool,
}

pub const HOMOGENEITY_TOL: f64 = 1e-10;
pub const MIN_EIGENVALUE: f64 = 1e-10;
const LAMBDAS: [f64; 3] = [0.5, 2.0, 7.0];

struct PointCheck {
    homogeneity: f64,
    min_eig: f64,
    positive: bool,
}

fn check_point(spec: &MetricSpec, p: &TangentPoint) -> Result<PointCheck> {
    let f = spec.eval(&p.x, &p.y)?;
    if !(f > 0.0) {
        return Ok(PointCheck {
            homogeneity: 0.0,
            min_eig: f64::NAN,
            positive: false,
        });
    }
    let mut homogeneity: f64 = 0.0;
    for lam in LAMBDAS {
        let ys: Vec<f64> = p.y.iter().map(|v| v * lam).collect();
        let fl = spec.eval(&p.x, &ys)?;
        homogeneity = homogeneity.max((fl - lam * f).abs() / (lam * f));
    }
    let g = fundamental_matrix(spec, p)?;
    let eig = SymmetricEigen::new(g).eigenvalues;
    // g is 0-homogeneous, so no normalisation of y is needed
    let min_eig = eig.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(PointCheck {
        homogeneity,
        min_eig,
        positive: true,
    })
}

/// `g_ij = ½ ∂²F²/∂y^i∂y^j` straight from a second-order jet.
pub(crate) fn fundamental_matrix(spec: &MetricSpec, p: &TangentPoint) -> Result<DMatrix<f64>> {
    let n = spec.dimension();
    let f = lift(spec.expression(), &p.coordinates(), 2)?;
    let f2 = &f * &f;
    Ok(DMatrix::from_fn(n, n, |i, j| {
        0.5 * f2
            .partial(&MultiIndex::from_slots(2 * n, &[n + i, n + j]))
            .expect("order-2 jet")
    }))
}

/// Checks positivity, positive homogeneity and strong convexity on the
/// sampler's points. Evaluation failures are itemised, not fatal.
pub fn validate(spec: &MetricSpec, sampler: &Sampler) -> ValidityReport {
    let points = sampler.points(spec);
    let checks: Vec<(TangentPoint, Result<PointCheck>)> = points
        .into_par_iter()
        .map(|p| {
            let c = check_point(spec, &p);
            (p, c)
        })
        .collect();
    let mut report = ValidityReport {
        metric: spec.name.clone(),
        points_checked: checks.len(),
        max_homogeneity_residual: 0.0,
        min_g_eigenvalue: f64::INFINITY,
        positivity_violations: 0,
        domain_errors: Vec::new(),
        passed: false,
    };
    for (p, c) in checks {
        match c {
            Ok(c) if !c.positive => report.positivity_violations += 1,
            Ok(c) => {
                report.max_homogeneity_residual = report.max_homogeneity_residual.max(c.homogeneity);
                report.min_g_eigenvalue = report.min_g_eigenvalue.min(c.min_eig);
            }
            Err(e) => report.domain_errors.push(PointIssue {
                point: p,
                message: e.to_string(),
            }),
        }
    }
    report.passed = report.points_checked > 0
        && report.positivity_violations == 0
        && report.domain_errors.is_empty()
        && report.max_homogeneity_residual < HOMOGENEITY_TOL
        && report.min_g_eigenvalue > MIN_EIGENVALUE;
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn by_name(name: &str) -> MetricSpec {
        MetricSpec::builtin_named(name).unwrap()
    }

    #[test]
    fn zoo_membership() {
        let z = zoo();
        assert!(z.len() >= 7);
        for name in [
            "euclidean",
            "hyperbolic",
            "sphere",
            "minkowski_smooth_quartic",
            "randers_const",
            "randers_var",
            "funk",
        ] {
            assert!(z.iter().any(|m| m.name == name), "{name}");
        }
        assert_eq!(
            by_name("euclidean").metadata.expected_class,
            Some(ExpectedClass::Riemannian)
        );
        assert_eq!(
            by_name("minkowski_smooth_quartic").metadata.expected_class,
            Some(ExpectedClass::LocallyMinkowskian)
        );
        assert_eq!(
            by_name("randers_var").metadata.expected_class,
            Some(ExpectedClass::NonLandsberg)
        );
        assert!(by_name("hyperbolic").metadata.is_homogeneous_space);
    }

    #[test]
    fn every_zoo_member_validates() {
        for m in zoo() {
            let r = validate(&m, &Sampler::default());
            assert!(r.points_checked >= 100);
            assert!(r.passed, "{}: {r:?}", m.name);
        }
    }

    #[test]
    fn euclidean_min_eigenvalue_is_one() {
        let r = validate(&by_name("euclidean"), &Sampler::default());
        assert!((r.min_g_eigenvalue - 1.0).abs() < 1e-12);
        assert!(r.max_homogeneity_residual < 1e-15);
    }

    #[test]
    fn strong_randers_fails_positivity() {
        let m = MetricSpec::from_expression(
            "randers_strong",
            2,
            "sqrt(y1^2 + y2^2) + 1.5*y1",
            vec![(-1.0, 1.0), (-1.0, 1.0)],
        )
        .unwrap();
        assert!(m.eval(&[0.0, 0.0], &[-1.0, 0.0]).unwrap() < 0.0);
        let r = validate(&m, &Sampler::default());
        assert!(!r.passed);
        assert!(r.positivity_violations > 0);
    }

    #[test]
    fn non_homogeneous_expression_fails() {
        let m = MetricSpec::from_expression("bad", 2, "y1^2 + y2^2", vec![(-1.0, 1.0); 2]).unwrap();
        let r = validate(&m, &Sampler::default());
        assert!(!r.passed);
        assert!(r.max_homogeneity_residual > 0.1);
    }

    #[test]
    fn position_independent_members_have_no_x_partials() {
        for m in zoo().into_iter().filter(|m| m.is_position_independent()) {
            for p in Sampler::new(4, 3, 1).points(&m) {
                let f = lift(m.expression(), &p.coordinates(), 6).unwrap();
                let f2 = &f * &f;
                let space = f2.space().clone();
                for (pos, a) in space.multi_indices(6).iter().enumerate() {
                    if a.counts()[..2].iter().any(|&c| c > 0) {
                        assert!(f2.coefficients()[pos].abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn sampler_is_deterministic_and_inside_chart() {
        let m = by_name("funk");
        let s = Sampler::default();
        let a = s.points(&m);
        assert_eq!(a, s.points(&m));
        assert_eq!(a.len(), 200);
        assert!(a.iter().all(|p| m.in_chart(&p.x)));
        assert!(a.iter().all(|p| (norm(&p.y) - 1.0).abs() < 1e-12));
        let other = Sampler { seed: 7, ..s }.points(&m);
        assert_ne!(a, other);
    }

    #[test]
    fn cone_domain_restricts_directions() {
        let m = by_name("euclidean").with_y_domain(YDomain::Cone {
            axis: vec![1.0, 0.0],
            half_angle: 0.5,
        });
        for p in Sampler::default().points(&m) {
            assert!(m.y_domain.contains(&p.y));
        }
        assert!(TangentPoint::new(&m, vec![0.0, 0.0], vec![-1.0, 0.0]).is_err());
    }

    #[test]
    fn tangent_point_checks() {
        let m = by_name("hyperbolic");
        assert!(TangentPoint::new(&m, vec![0.0, 1.0], vec![1.0, 0.0]).is_ok());
        assert!(TangentPoint::new(&m, vec![0.0, -1.0], vec![1.0, 0.0]).is_err());
        assert!(TangentPoint::new(&m, vec![0.0, 1.0], vec![0.0, 0.0]).is_err());
        assert!(TangentPoint::new(&m, vec![0.0], vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn file_round_trip_is_bit_exact() {
        for m in zoo() {
            let text = m.to_json();
            let back = MetricSpec::from_json(&text).unwrap();
            assert_eq!(back.to_file(), m.to_file());
            assert_eq!(back.expression(), m.expression());
        }
        let m = MetricSpec::from_expression("odd", 2, "sqrt(y1^2+y2^2)", vec![(0.1, 0.30000000000000004), (-1e-300, 7.0)]).unwrap();
        let back = MetricSpec::from_json(&m.to_json()).unwrap();
        assert_eq!(back.chart, m.chart);
    }

    #[test]
    fn rejects_bad_files() {
        let err = MetricSpec::from_json(r#"{"name":"x","dimension":2,"F":"sqrt(y1^2+","chart":[[0,1],[0,1]]}"#);
        assert!(matches!(err, Err(Error::Parse(_))));
        let err = MetricSpec::from_json(r#"{"name":"x","dimension":2,"F":"y1","chart":[[0,1]]}"#);
        assert!(matches!(err, Err(Error::Validation(_))));
    }
}
