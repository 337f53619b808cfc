//! Classification of metrics from sampled curvature norms, and the audit of
//! the rigidity statements for homogeneous Landsberg surfaces.
//!
//! Every flag is a threshold on a sup norm (or on flag-curvature spread)
//! over the sample, so tightening the tolerance can only clear flags.
//! Metadata is consulted only by [`theorem_audit`].

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{ExpectedClass, Metadata, MetricSpec, PointIssue, Sampler, TangentPoint};
use crate::tensors::PointTensors;

pub const JET_TOLERANCE: f64 = 1e-7;
pub const FD_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    #[default]
    Jets,
    FiniteDifference,
}

impl Engine {
    pub fn default_tolerance(self) -> f64 {
        match self {
            Engine::Jets => JET_TOLERANCE,
            Engine::FiniteDifference => FD_TOLERANCE,
        }
    }

    pub fn compute(self, spec: &MetricSpec, p: &TangentPoint) -> Result<PointTensors> {
        match self {
            Engine::Jets => PointTensors::compute(spec, p),
            Engine::FiniteDifference => crate::fd_engine::compute(spec, p),
        }
    }
}

/// Sup norms over the sample, measured in a `g_y`-orthonormal frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct Norms {
    #[serde(rename = "C")]
    pub cartan: f64,
    #[serde(rename = "I")]
    pub mean_cartan: f64,
    #[serde(rename = "B")]
    pub berwald: f64,
    #[serde(rename = "E")]
    pub mean_berwald: f64,
    #[serde(rename = "L")]
    pub landsberg: f64,
    #[serde(rename = "J")]
    pub mean_landsberg: f64,
    #[serde(rename = "D")]
    pub douglas: f64,
    #[serde(rename = "H")]
    pub h_curvature: f64,
}

impl Norms {
    fn of(t: &PointTensors) -> Norms {
        let g = &t.g.components;
        Norms {
            cartan: t.cartan.g_norm(g),
            mean_cartan: t.mean_cartan.g_norm(g),
            berwald: t.berwald.g_norm(g),
            mean_berwald: t.mean_berwald.g_norm(g),
            landsberg: t.landsberg.g_norm(g),
            mean_landsberg: t.mean_landsberg.g_norm(g),
            douglas: t.douglas.g_norm(g),
            h_curvature: t.h_curvature.g_norm(g),
        }
    }

    fn sup(self, o: Norms) -> Norms {
        Norms {
            cartan: self.cartan.max(o.cartan),
            mean_cartan: self.mean_cartan.max(o.mean_cartan),
            berwald: self.berwald.max(o.berwald),
            mean_berwald: self.mean_berwald.max(o.mean_berwald),
            landsberg: self.landsberg.max(o.landsberg),
            mean_landsberg: self.mean_landsberg.max(o.mean_landsberg),
            douglas: self.douglas.max(o.douglas),
            h_curvature: self.h_curvature.max(o.h_curvature),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub struct Flags {
    pub riemannian: bool,
    pub berwald: bool,
    pub landsberg: bool,
    pub weakly_landsberg: bool,
    pub weakly_berwald: bool,
    pub douglas: bool,
    #[serde(rename = "isotropic_K")]
    pub isotropic_k: bool,
    #[serde(rename = "constant_K")]
    pub constant_k: bool,
    pub locally_minkowski_candidate: bool,
}

impl Flags {
    pub fn named(&self) -> [(&'static str, bool); 9] {
        [
            ("riemannian", self.riemannian),
            ("berwald", self.berwald),
            ("landsberg", self.landsberg),
            ("weakly_landsberg", self.weakly_landsberg),
            ("weakly_berwald", self.weakly_berwald),
            ("douglas", self.douglas),
            ("isotropic_K", self.isotropic_k),
            ("constant_K", self.constant_k),
            ("locally_minkowski_candidate", self.locally_minkowski_candidate),
        ]
    }

    /// Broken implications, empty for a valid report.
    pub fn lattice_violations(&self) -> Vec<String> {
        let rules = [
            ("riemannian", self.riemannian, "berwald", self.berwald),
            ("berwald", self.berwald, "landsberg", self.landsberg),
            ("landsberg", self.landsberg, "weakly_landsberg", self.weakly_landsberg),
            ("berwald", self.berwald, "douglas", self.douglas),
            ("berwald", self.berwald, "weakly_berwald", self.weakly_berwald),
        ];
        rules
            .iter()
            .filter(|(_, a, _, b)| *a && !*b)
            .map(|(a, _, b, _)| format!("{a} without {b}"))
            .collect()
    }

    /// True when every flag set here is also set in `other`.
    pub fn is_subset_of(&self, other: &Flags) -> bool {
        self.named().iter().zip(other.named()).all(|((_, a), (_, b))| !*a || b)
    }
}

/// Flag curvature spread at one base point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SiteCurvature {
    pub x: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureStats {
    pub sites: Vec<SiteCurvature>,
    /// Largest per-site variance of `K` over directions.
    pub max_variance: f64,
    pub min: f64,
    pub max: f64,
    pub range: f64,
    pub max_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleDescription {
    pub x_sites: usize,
    pub y_per_site: usize,
    pub seed: u64,
    pub margin: f64,
    pub points_evaluated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub metric: String,
    pub engine: Engine,
    pub tolerance: f64,
    pub sample: SampleDescription,
    pub norms: Norms,
    pub flags: Flags,
    #[serde(rename = "K")]
    pub curvature: CurvatureStats,
    pub lattice_violations: Vec<String>,
    pub failures: Vec<PointIssue>,
}

impl ClassificationReport {
    pub fn is_valid(&self) -> bool {
        self.lattice_violations.is_empty()
    }
}

struct PointResult {
    norms: Norms,
    k: Vec<f64>,
}

/// Flag curvatures at a point: the Berwald-frame flag on surfaces, the flags
/// through each coordinate axis otherwise.
fn flag_values(t: &PointTensors) -> Result<Vec<f64>> {
    let n = t.dimension();
    if n == 2 {
        let m = crate::surface::frame_from_tensors(t).m;
        return Ok(vec![t.flag_curvature(&m)?]);
    }
    let mut out = Vec::new();
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        match t.flag_curvature(&e) {
            Ok(v) => out.push(v),
            Err(Error::Numerical(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

fn evaluate(spec: &MetricSpec, p: &TangentPoint, engine: Engine) -> Result<PointResult> {
    let t = engine.compute(spec, p)?;
    Ok(PointResult {
        norms: Norms::of(&t),
        k: flag_values(&t)?,
    })
}

fn variance(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|k| (k - mean) * (k - mean)).sum::<f64>() / v.len() as f64
}

struct Sweep {
    norms: Norms,
    curvature: CurvatureStats,
    failures: Vec<PointIssue>,
    evaluated: usize,
    /// Point with the largest `‖H‖`.
    h_witness: Option<TangentPoint>,
}

fn sweep(spec: &MetricSpec, sampler: &Sampler, engine: Engine) -> Result<Sweep> {
    let sites = sampler.sites(spec);
    let jobs: Vec<TangentPoint> = sites
        .iter()
        .flat_map(|s| s.directions.iter().map(|y| TangentPoint { x: s.x.clone(), y: y.clone() }))
        .collect();
    let results: Vec<Result<PointResult>> = jobs.par_iter().map(|p| evaluate(spec, p, engine)).collect();

    let mut norms = Norms::default();
    let mut failures = Vec::new();
    let mut site_stats = Vec::new();
    let mut all_k = Vec::new();
    let mut evaluated = 0;
    let mut h_best = (-1.0, None);
    let mut results = results.into_iter();
    let mut jobs_iter = jobs.iter();
    for site in &sites {
        let mut ks = Vec::new();
        for _ in &site.directions {
            let p = jobs_iter.next().expect("one job per direction");
            match results.next().expect("one result per job") {
                Ok(r) => {
                    evaluated += 1;
                    if r.norms.h_curvature > h_best.0 {
                        h_best = (r.norms.h_curvature, Some(p.clone()));
                    }
                    norms = norms.sup(r.norms);
                    ks.extend(r.k);
                }
                Err(e) => failures.push(PointIssue {
                    point: p.clone(),
                    message: e.to_string(),
                }),
            }
        }
        if !ks.is_empty() {
            site_stats.push(SiteCurvature {
                x: site.x.clone(),
                mean: ks.iter().sum::<f64>() / ks.len() as f64,
                variance: variance(&ks),
            });
            all_k.extend(ks);
        }
    }
    if evaluated == 0 {
        return Err(Error::Numerical(format!(
            "no sample point of {} could be evaluated",
            spec.name
        )));
    }
    let min = all_k.iter().copied().fold(f64::INFINITY, f64::min);
    let max = all_k.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Sweep {
        norms,
        curvature: CurvatureStats {
            max_variance: site_stats.iter().map(|s| s.variance).fold(0.0, f64::max),
            sites: site_stats,
            min,
            max,
            range: max - min,
            max_abs: min.abs().max(max.abs()),
        },
        failures,
        evaluated,
        h_witness: h_best.1,
    })
}

/// Classifies with the jet engine.
pub fn classify(spec: &MetricSpec, sampler: &Sampler, tol: f64) -> Result<ClassificationReport> {
    classify_with(spec, sampler, tol, Engine::Jets)
}

pub fn classify_with(spec: &MetricSpec, sampler: &Sampler, tol: f64, engine: Engine) -> Result<ClassificationReport> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::Validation(format!("tolerance must be positive, got {tol}")));
    }
    let s = sweep(spec, sampler, engine)?;
    let n = &s.norms;
    let k = &s.curvature;
    let riemannian = n.mean_cartan < tol;
    // Deicke: I = 0 forces C = 0, so the two tests may only disagree near the threshold
    if riemannian && n.cartan > 100.0 * tol || !riemannian && n.cartan < tol / 100.0 {
        return Err(Error::Numerical(format!(
            "{}: mean Cartan norm {:e} and Cartan norm {:e} disagree",
            spec.name, n.mean_cartan, n.cartan
        )));
    }
    let berwald = n.berwald < tol;
    let constant_k = k.range < tol;
    let flags = Flags {
        riemannian,
        berwald,
        landsberg: n.landsberg < tol,
        weakly_landsberg: n.mean_landsberg < tol,
        weakly_berwald: n.mean_berwald < tol,
        douglas: n.douglas < tol,
        isotropic_k: k.max_variance < tol,
        constant_k,
        locally_minkowski_candidate: berwald && constant_k && k.max_abs < tol,
    };
    Ok(ClassificationReport {
        metric: spec.name.clone(),
        engine,
        tolerance: tol,
        sample: SampleDescription {
            x_sites: sampler.x_sites,
            y_per_site: sampler.y_per_site,
            seed: sampler.seed,
            margin: sampler.margin,
            points_evaluated: s.evaluated,
        },
        norms: s.norms,
        lattice_violations: flags.lattice_violations(),
        flags,
        curvature: s.curvature,
        failures: s.failures,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditStatus {
    Pass,
    Fail,
    /// The member does not satisfy the hypotheses.
    Vacuous,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemberAudit {
    pub metric: String,
    pub is_homogeneous_space: bool,
    pub landsberg: bool,
    pub status: AuditStatus,
    /// Riemannian or locally Minkowskian; `None` when vacuous.
    pub rigidity: Option<bool>,
    /// Isotropic flag curvature; `None` when vacuous.
    pub isotropy: Option<bool>,
    pub expected_class: Option<ExpectedClass>,
    /// Whether the flags agree with the declared class, when one is given.
    pub matches_expected: Option<bool>,
    pub lattice_violations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremAudit {
    pub members: Vec<MemberAudit>,
    pub violations: usize,
}

impl TheoremAudit {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        for m in &self.members {
            let status = match m.status {
                AuditStatus::Pass => "pass",
                AuditStatus::Fail => "FAIL",
                AuditStatus::Vacuous => "vacuous (out of hypothesis)",
            };
            out.push_str(&format!("{:<28} {status}", m.metric));
            if let (Some(r), Some(i)) = (m.rigidity, m.isotropy) {
                out.push_str(&format!("  rigidity={r} isotropy={i}"));
            }
            if m.matches_expected == Some(false) {
                out.push_str("  (flags disagree with declared class)");
            }
            if !m.lattice_violations.is_empty() {
                out.push_str(&format!("  lattice: {}", m.lattice_violations.join(", ")));
            }
            out.push('\n');
        }
        out.push_str(&format!(
            "{} member(s), {} violation(s)\n",
            self.members.len(),
            self.violations
        ));
        out
    }
}

fn matches(class: ExpectedClass, f: &Flags) -> bool {
    match class {
        ExpectedClass::Riemannian => f.riemannian,
        ExpectedClass::LocallyMinkowskian => f.locally_minkowski_candidate,
        ExpectedClass::Berwald => f.berwald,
        ExpectedClass::Landsberg => f.landsberg,
        ExpectedClass::NonLandsberg => !f.landsberg,
    }
}

/// Checks that each homogeneous Landsberg member is Riemannian or locally
/// Minkowskian and has isotropic flag curvature. Members outside the
/// hypotheses pass vacuously; lattice violations count as failures.
pub fn theorem_audit(members: &[(Metadata, ClassificationReport)]) -> TheoremAudit {
    let mut violations = 0;
    let members = members
        .iter()
        .map(|(meta, r)| {
            let f = &r.flags;
            let applies = meta.is_homogeneous_space && f.landsberg;
            let (rigidity, isotropy) = if applies {
                (Some(f.riemannian || f.locally_minkowski_candidate), Some(f.isotropic_k))
            } else {
                (None, None)
            };
            let ok = rigidity != Some(false) && isotropy != Some(false) && r.is_valid();
            let status = match (applies, ok) {
                (_, false) => AuditStatus::Fail,
                (true, true) => AuditStatus::Pass,
                (false, true) => AuditStatus::Vacuous,
            };
            if !ok {
                violations += 1;
            }
            MemberAudit {
                metric: r.metric.clone(),
                is_homogeneous_space: meta.is_homogeneous_space,
                landsberg: f.landsberg,
                status,
                rigidity,
                isotropy,
                expected_class: meta.expected_class,
                matches_expected: meta.expected_class.map(|c| matches(c, f)),
                lattice_violations: r.lattice_violations.clone(),
            }
        })
        .collect();
    TheoremAudit { members, violations }
}

/// Co-occurrence of `H = 0` and direction-independent flag curvature.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AkbarZadehReport {
    pub metric: String,
    pub tolerance: f64,
    pub h_sup: f64,
    pub k_max_variance: f64,
    pub h_vanishes: bool,
    pub k_isotropic: bool,
    /// `H = 0 ⇒ K = K(x)` held on the sample.
    pub forward: bool,
    /// `K = K(x) ⇒ H = 0` held on the sample.
    pub backward: bool,
    /// Largest `‖H‖` point, or the site with the largest `K` variance,
    /// depending on which side failed.
    pub witness: Option<Vec<f64>>,
}

impl AkbarZadehReport {
    pub fn agrees(&self) -> bool {
        self.forward && self.backward
    }
}

pub fn akbar_zadeh_check(spec: &MetricSpec, sampler: &Sampler, tol: f64) -> Result<AkbarZadehReport> {
    if spec.dimension() != 2 {
        return Err(Error::Validation("the H/K check is implemented for surfaces".into()));
    }
    let s = sweep(spec, sampler, Engine::Jets)?;
    let h_vanishes = s.norms.h_curvature < tol;
    let k_isotropic = s.curvature.max_variance < tol;
    let forward = !h_vanishes || k_isotropic;
    let backward = !k_isotropic || h_vanishes;
    let witness = if !forward {
        s.curvature
            .sites
            .iter()
            .max_by(|a, b| a.variance.total_cmp(&b.variance))
            .map(|site| site.x.clone())
    } else if !backward {
        s.h_witness.map(|p| p.coordinates())
    } else {
        None
    };
    Ok(AkbarZadehReport {
        metric: spec.name.clone(),
        tolerance: tol,
        h_sup: s.norms.h_curvature,
        k_max_variance: s.curvature.max_variance,
        h_vanishes,
        k_isotropic,
        forward,
        backward,
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn member(name: &str) -> MetricSpec {
        MetricSpec::builtin_named(name).unwrap()
    }

    fn small() -> Sampler {
        Sampler::new(8, 4, 3)
    }

    #[test]
    fn euclidean_is_riemannian_and_flat() {
        let r = classify(&member("euclidean"), &small(), JET_TOLERANCE).unwrap();
        assert!(r.flags.riemannian && r.flags.locally_minkowski_candidate);
        assert!(r.curvature.max_abs < 1e-12);
        assert!(r.is_valid());
    }

    #[test]
    fn quartic_is_flat_but_not_riemannian() {
        let r = classify(&member("minkowski_smooth_quartic"), &small(), JET_TOLERANCE).unwrap();
        assert!(!r.flags.riemannian && r.norms.mean_cartan > 1e-2);
        assert!(r.flags.berwald && r.flags.landsberg && r.flags.locally_minkowski_candidate);
    }

    #[test]
    fn randers_var_is_not_landsberg() {
        let r = classify(&member("randers_var"), &small(), JET_TOLERANCE).unwrap();
        assert!(!r.flags.landsberg && !r.flags.berwald);
        assert!(r.norms.landsberg > 1e-3);
        assert!(r.is_valid());
    }

    #[test]
    fn hyperbolic_has_constant_negative_curvature() {
        let r = classify(&member("hyperbolic"), &small(), JET_TOLERANCE).unwrap();
        assert!(r.flags.riemannian && r.flags.isotropic_k && r.flags.constant_k);
        assert!(!r.flags.locally_minkowski_candidate);
        assert!((r.curvature.min + 1.0).abs() < 1e-9 && (r.curvature.max + 1.0).abs() < 1e-9);
    }

    #[test]
    fn lattice_detects_broken_implications() {
        let f = Flags {
            riemannian: true,
            ..Flags::default()
        };
        assert_eq!(f.lattice_violations(), vec!["riemannian without berwald".to_string()]);
    }

    #[test]
    fn tighter_tolerance_never_adds_flags() {
        let m = member("funk");
        let loose = classify(&m, &small(), 1e-4).unwrap();
        let tight = classify(&m, &small(), 1e-10).unwrap();
        assert!(tight.flags.is_subset_of(&loose.flags));
    }

    #[test]
    fn audit_marks_non_homogeneous_members_vacuous() {
        let m = member("randers_var");
        let r = classify(&m, &small(), JET_TOLERANCE).unwrap();
        let audit = theorem_audit(&[(m.metadata.clone(), r)]);
        assert_eq!(audit.members[0].status, AuditStatus::Vacuous);
        assert!(audit.passed());
    }

    #[test]
    fn audit_flags_a_counterexample() {
        let m = member("randers_var");
        let mut r = classify(&m, &small(), JET_TOLERANCE).unwrap();
        r.flags.landsberg = true;
        r.flags.isotropic_k = false;
        let meta = Metadata {
            is_homogeneous_space: true,
            expected_class: None,
        };
        let audit = theorem_audit(&[(meta, r)]);
        assert_eq!(audit.members[0].status, AuditStatus::Fail);
        assert!(audit.summary_text().contains("FAIL"));
    }

    #[test]
    fn akbar_zadeh_on_riemannian_members() {
        for name in ["euclidean", "hyperbolic", "sphere"] {
            let r = akbar_zadeh_check(&member(name), &small(), JET_TOLERANCE).unwrap();
            assert!(r.h_vanishes && r.k_isotropic && r.agrees(), "{r:?}");
        }
    }

    #[test]
    fn bad_tolerance_is_rejected() {
        assert!(matches!(
            classify(&member("euclidean"), &small(), 0.0),
            Err(Error::Validation(_))
        ));
    }
}
