//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage, 2 invalid input, 3 runtime or domain
//! failure, 4 audit violation.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::classify::{self, AkbarZadehReport, ClassificationReport, Engine, TheoremAudit};
use crate::error::{Error, Result};
use crate::flow;
use crate::metrics::{self, MetricSpec, Sampler, TangentPoint};
use crate::report::{to_csv, to_json};
use crate::surface;
use crate::tensors::IndexedTensor;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VIOLATION: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "finsler", version, about = "Curvature, geodesic flows and classification of Finsler metrics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    Jets,
    Fd,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Engine {
        match e {
            EngineArg::Jets => Engine::Jets,
            EngineArg::Fd => Engine::FiniteDifference,
        }
    }
}

#[derive(Debug, Args)]
pub struct Output {
    /// Write the main output here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct Sampling {
    /// Number of sampled tangent vectors (rounded up to whole sites).
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    /// Directions per sampled position.
    #[arg(long, default_value_t = 8)]
    pub directions: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl Sampling {
    fn sampler(&self) -> Result<Sampler> {
        if self.samples == 0 || self.directions == 0 {
            return Err(Error::Validation("--samples and --directions must be positive".into()));
        }
        Ok(Sampler::new(self.samples.div_ceil(self.directions), self.directions, self.seed))
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the built-in metrics.
    Zoo {
        #[command(flatten)]
        output: Output,
    },
    /// Curvature tensors at one tangent vector.
    Tensor {
        /// Built-in name or path to a metric file.
        #[arg(long)]
        metric: String,
        /// "x1,x2;y1,y2"
        #[arg(long)]
        point: String,
        /// Comma-separated subset of g,g_inv,C,I,G,N,Gamma,B,E,D,L,J,H,R,Q.
        #[arg(long)]
        tensors: Option<String>,
        /// Transverse vector for the flag curvature.
        #[arg(long)]
        vector: Option<String>,
        #[arg(long, value_enum, default_value = "jets")]
        engine: EngineArg,
        #[command(flatten)]
        output: Output,
    },
    /// Classify a metric from sampled curvature norms.
    Classify {
        #[arg(long)]
        metric: String,
        #[command(flatten)]
        sampling: Sampling,
        /// Defaults to 1e-7 for jets and 1e-4 for fd.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, value_enum, default_value = "jets")]
        engine: EngineArg,
        #[command(flatten)]
        output: Output,
    },
    /// Geodesic with transported vector and scalar curves.
    Flow {
        #[arg(long)]
        metric: String,
        #[arg(long)]
        point: String,
        /// "a:b"; the initial data sit at t = a.
        #[arg(long, default_value = "0:5")]
        t_span: String,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        /// Linearly transported vector; defaults to a tilted normal of y.
        #[arg(long)]
        vector: Option<String>,
        /// Where to write the audit JSON in CSV mode.
        #[arg(long)]
        audit_out: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Indicatrix at a point with main scalar and flag curvature.
    Indicatrix {
        #[arg(long)]
        metric: String,
        /// "x1,x2" or "x1,x2;y1,y2" (y is ignored).
        #[arg(long)]
        point: String,
        #[arg(long, default_value_t = 512)]
        steps: usize,
        /// Where to write the relation JSON in CSV mode.
        #[arg(long)]
        audit_out: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Classify the whole zoo and audit the rigidity statements.
    Audit {
        #[command(flatten)]
        sampling: Sampling,
        #[arg(long, default_value_t = classify::JET_TOLERANCE)]
        tol: f64,
        #[command(flatten)]
        output: Output,
    },
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Normal output goes to `stdout` unless `--out` is given.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn emit(output: &Output, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match &output.out {
        Some(path) => std::fs::write(path, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Resolves a built-in name or a metric file, then checks it on a small
/// sample so that invalid metrics never reach the tensor code.
pub fn load_metric(source: &str) -> Result<MetricSpec> {
    let spec = match MetricSpec::builtin_named(source) {
        Some(s) => s,
        None if Path::new(source).exists() => MetricSpec::load(Path::new(source))?,
        None => {
            return Err(Error::Validation(format!(
                "'{source}' is neither a built-in metric nor a readable file"
            )))
        }
    };
    let report = metrics::validate(&spec, &Sampler::new(8, 4, 0));
    if !report.passed {
        return Err(Error::Validation(format!(
            "metric '{}' failed validation: homogeneity residual {:e}, smallest g eigenvalue {:e}, {} domain error(s)",
            spec.name,
            report.max_homogeneity_residual,
            report.min_g_eigenvalue,
            report.domain_errors.len()
        )));
    }
    Ok(spec)
}

fn parse_vector(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Validation(format!("'{s}' is not a number")))
        })
        .collect()
}

/// Parses `"x1,..,xn;y1,..,yn"`.
pub fn parse_point(spec: &MetricSpec, text: &str) -> Result<TangentPoint> {
    let (x, y) = text
        .split_once(';')
        .ok_or_else(|| Error::Validation(format!("point '{text}' is not of the form x1,x2;y1,y2")))?;
    TangentPoint::new(spec, parse_vector(x)?, parse_vector(y)?)
}

fn parse_span(text: &str) -> Result<(f64, f64)> {
    let (a, b) = text
        .split_once(':')
        .ok_or_else(|| Error::Validation(format!("time span '{text}' is not of the form a:b")))?;
    let v = parse_vector(&format!("{a},{b}"))?;
    Ok((v[0], v[1]))
}

fn sidecar(out: &Option<PathBuf>, explicit: &Option<PathBuf>, suffix: &str) -> Option<PathBuf> {
    explicit.clone().or_else(|| {
        out.as_ref().map(|p| {
            let mut s = p.clone().into_os_string();
            s.push(suffix);
            PathBuf::from(s)
        })
    })
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

fn is_landsberg(spec: &MetricSpec) -> Result<bool> {
    Ok(classify::classify(spec, &Sampler::default(), classify::JET_TOLERANCE)?.flags.landsberg)
}

fn execute(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Zoo { output } => cmd_zoo(&output, stdout),
        Command::Tensor {
            metric,
            point,
            tensors,
            vector,
            engine,
            output,
        } => cmd_tensor(&metric, &point, tensors.as_deref(), vector.as_deref(), engine.into(), &output, stdout),
        Command::Classify {
            metric,
            sampling,
            tol,
            engine,
            output,
        } => {
            let spec = load_metric(&metric)?;
            let engine: Engine = engine.into();
            let report = classify::classify_with(&spec, &sampling.sampler()?, tol.unwrap_or(engine.default_tolerance()), engine)?;
            emit(&output, &classification_text(&report, output.format), stdout)?;
            if !report.is_valid() {
                writeln!(stderr, "lattice violation: {}", report.lattice_violations.join(", "))?;
                return Ok(EXIT_VIOLATION);
            }
            Ok(0)
        }
        Command::Flow {
            metric,
            point,
            t_span,
            steps,
            vector,
            audit_out,
            output,
        } => cmd_flow(&metric, &point, &t_span, steps, vector.as_deref(), audit_out, &output, stdout, stderr),
        Command::Indicatrix {
            metric,
            point,
            steps,
            audit_out,
            output,
        } => cmd_indicatrix(&metric, &point, steps, audit_out, &output, stdout, stderr),
        Command::Audit { sampling, tol, output } => cmd_audit(&sampling, tol, &output, stdout, stderr),
    }
}

#[derive(Serialize)]
struct ZooEntry {
    name: String,
    dimension: usize,
    #[serde(rename = "F")]
    f: String,
    expected_class: Option<metrics::ExpectedClass>,
    is_homogeneous_space: bool,
}

fn cmd_zoo(output: &Output, stdout: &mut dyn Write) -> Result<i32> {
    let entries: Vec<ZooEntry> = metrics::zoo()
        .into_iter()
        .map(|s| ZooEntry {
            dimension: s.dimension(),
            f: s.source_text(),
            expected_class: s.metadata.expected_class,
            is_homogeneous_space: s.metadata.is_homogeneous_space,
            name: s.name,
        })
        .collect();
    let text = match output.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&entries),
        Format::Csv => {
            let mut t = String::from("name,dimension,expected_class,is_homogeneous_space,F\n");
            for e in &entries {
                let class = e
                    .expected_class
                    .map(|c| serde_json::to_value(c).expect("enum").as_str().unwrap_or_default().to_string())
                    .unwrap_or_default();
                t.push_str(&format!("{},{},{},{},{}\n", e.name, e.dimension, class, e.is_homogeneous_space, quote(&e.f)));
            }
            t
        }
    };
    emit(output, &text, stdout)?;
    Ok(0)
}

#[derive(Serialize)]
struct NamedTensor<'a> {
    name: &'a str,
    variance: &'a [crate::tensors::Variance],
    components: &'a [f64],
    /// Norm in a `g_y`-orthonormal frame.
    norm: f64,
}

#[derive(Serialize)]
struct FlagValue {
    vector: Vec<f64>,
    value: f64,
}

#[derive(Serialize)]
struct SurfaceData {
    main_scalar: f64,
    ell: Vec<f64>,
    m: Vec<f64>,
    identities: BTreeMap<&'static str, f64>,
}

#[derive(Serialize)]
struct TensorOutput<'a> {
    metric: &'a str,
    engine: Engine,
    point: &'a TangentPoint,
    #[serde(rename = "F")]
    f: f64,
    tensors: Vec<NamedTensor<'a>>,
    flag_curvature: Option<FlagValue>,
    /// Dual-route and structural residuals.
    identities: BTreeMap<&'static str, f64>,
    surface: Option<SurfaceData>,
}

const TENSOR_NAMES: [&str; 15] = ["g", "g_inv", "C", "I", "G", "N", "Gamma", "B", "E", "D", "L", "J", "H", "R", "Q"];

fn cmd_tensor(
    metric: &str,
    point: &str,
    wanted: Option<&str>,
    vector: Option<&str>,
    engine: Engine,
    output: &Output,
    stdout: &mut dyn Write,
) -> Result<i32> {
    let spec = load_metric(metric)?;
    let p = parse_point(&spec, point)?;
    let wanted: Vec<String> = match wanted {
        Some(list) => list.split(',').map(|s| s.trim().to_string()).collect(),
        None => TENSOR_NAMES[..14].iter().map(|s| s.to_string()).collect(),
    };
    if let Some(bad) = wanted.iter().find(|w| !TENSOR_NAMES.contains(&w.as_str())) {
        return Err(Error::Validation(format!("unknown tensor '{bad}'")));
    }
    let vector = vector.map(parse_vector).transpose()?;
    if vector.as_ref().is_some_and(|v| v.len() != spec.dimension()) {
        return Err(Error::Validation("--vector has the wrong dimension".into()));
    }
    let t = engine.compute(&spec, &p)?;
    let q = t.vv_curvature();
    let mut all: Vec<(&str, &IndexedTensor)> = t.named();
    all.push(("Q", &q));
    let g = &t.g.components;
    let tensors = wanted
        .iter()
        .map(|w| {
            let (name, tensor) = all.iter().find(|(n, _)| n == w).expect("validated name");
            NamedTensor {
                name,
                variance: &tensor.variance,
                components: &tensor.components,
                norm: tensor.g_norm(g),
            }
        })
        .collect();
    let frame = (spec.dimension() == 2).then(|| surface::frame_from_tensors(&t));
    let flag_vector = vector.clone().or_else(|| frame.as_ref().map(|f| f.m.clone()));
    let flag_curvature = flag_vector
        .map(|u| t.flag_curvature(&u).map(|value| FlagValue { vector: u, value }))
        .transpose()?;
    let surface = frame.map(|fr| SurfaceData {
        main_scalar: surface::main_scalar_of(&t),
        identities: surface::SurfaceIdentities::of(&t).named().into_iter().collect(),
        ell: fr.ell,
        m: fr.m,
    });
    let out = TensorOutput {
        metric: &spec.name,
        engine,
        point: &p,
        f: t.f,
        tensors,
        flag_curvature,
        identities: t.identities().named().into_iter().collect(),
        surface,
    };
    let text = match output.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&out),
        Format::Csv => {
            let mut s = String::from("tensor,index,value\n");
            for nt in &out.tensors {
                let rank = nt.variance.len();
                for (idx, v) in crate::tensors::index_tuples(spec.dimension(), rank).iter().zip(nt.components) {
                    let idx: Vec<String> = idx.iter().map(|i| (i + 1).to_string()).collect();
                    s.push_str(&format!("{},{},{v:.16e}\n", nt.name, idx.join(" ")));
                }
            }
            s
        }
    };
    emit(output, &text, stdout)?;
    Ok(0)
}

fn classification_text(r: &ClassificationReport, format: Option<Format>) -> String {
    match format.unwrap_or(Format::Json) {
        Format::Json => to_json(r),
        Format::Csv => {
            let mut s = String::from("quantity,value\n");
            let norms = serde_json::to_value(r.norms).expect("plain struct");
            for (k, v) in norms.as_object().expect("object") {
                s.push_str(&format!("norm_{k},{:.16e}\n", v.as_f64().unwrap_or(f64::NAN)));
            }
            for (k, v) in r.flags.named() {
                s.push_str(&format!("{k},{v}\n"));
            }
            s.push_str(&format!("K_min,{:.16e}\nK_max,{:.16e}\nK_max_variance,{:.16e}\n", r.curvature.min, r.curvature.max, r.curvature.max_variance));
            s
        }
    }
}

#[derive(Serialize)]
struct FlowOutput<'a> {
    metric: &'a str,
    landsberg: bool,
    chart_exit: Option<&'a str>,
    checks: &'a flow::TraceChecks,
    violations: Vec<&'static str>,
}

#[allow(clippy::too_many_arguments)]
fn cmd_flow(
    metric: &str,
    point: &str,
    t_span: &str,
    steps: usize,
    vector: Option<&str>,
    audit_out: Option<PathBuf>,
    output: &Output,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32> {
    let spec = load_metric(metric)?;
    let p = parse_point(&spec, point)?;
    let span = parse_span(t_span)?;
    let u0 = vector.map(parse_vector).transpose()?;
    if u0.as_ref().is_some_and(|v| v.len() != spec.dimension()) {
        return Err(Error::Validation("--vector has the wrong dimension".into()));
    }
    let landsberg = is_landsberg(&spec)?;
    let (trace, curves, checks) = flow::check_trace(&spec, &p, span, steps, u0.as_deref())?;
    let mut violations = Vec::new();
    let mut flag = |name: &'static str, v: f64, tol: f64| {
        if !(v < tol) {
            violations.push(name);
        }
    };
    flag("speed drift", checks.speed_drift, flow::DRIFT_TOL);
    flag("linear transport g drift", checks.linear_norm_drift, flow::DRIFT_TOL);
    flag("nonlinear transport F drift", checks.nonlinear_norm_drift, flow::DRIFT_TOL);
    flag("J = dI/dt", checks.j_vs_di, flow::DERIVATIVE_TOL);
    flag("H = dE/dt", checks.h_vs_de, flow::DERIVATIVE_TOL);
    if landsberg {
        flag("induced metric drift", checks.induced_metric_drift, flow::INDUCED_METRIC_TOL);
        flag("dH/dt = 0", checks.h_slope, flow::DERIVATIVE_TOL);
        flag("E affine", checks.e_affinity, flow::DERIVATIVE_TOL);
    }
    let audit = FlowOutput {
        metric: &spec.name,
        landsberg,
        chart_exit: trace.truncated.as_deref(),
        checks: &checks,
        violations,
    };
    match output.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let (header, rows) = flow::trace_csv(&trace, &curves);
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            emit(output, &to_csv(&header, &rows), stdout)?;
            match sidecar(&output.out, &audit_out, ".audit.json") {
                Some(path) => std::fs::write(path, to_json(&audit))?,
                None => stderr.write_all(to_json(&audit).as_bytes())?,
            }
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Full<'a> {
                audit: &'a FlowOutput<'a>,
                trace: &'a flow::GeodesicTrace,
                curves: &'a flow::ScalarCurves,
            }
            emit(output, &to_json(&Full { audit: &audit, trace: &trace, curves: &curves }), stdout)?;
        }
    }
    if let Some(msg) = &trace.truncated {
        writeln!(stderr, "note: trace truncated ({msg})")?;
    }
    Ok(if audit.violations.is_empty() { 0 } else { EXIT_VIOLATION })
}

#[derive(Serialize)]
struct IndicatrixOutput<'a> {
    metric: &'a str,
    x: &'a [f64],
    length: f64,
    closure: f64,
    landsberg: bool,
    relation: surface::KCartanRelation,
}

fn cmd_indicatrix(
    metric: &str,
    point: &str,
    steps: usize,
    audit_out: Option<PathBuf>,
    output: &Output,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32> {
    let spec = load_metric(metric)?;
    let x = parse_vector(point.split(';').next().unwrap_or_default())?;
    if x.len() != spec.dimension() || !spec.in_chart(&x) {
        return Err(Error::Validation(format!("{x:?} is not a point of the chart")));
    }
    let curve = surface::indicatrix_flow(&spec, &x, steps)?;
    let landsberg = is_landsberg(&spec)?;
    let summary = IndicatrixOutput {
        metric: &spec.name,
        x: &x,
        length: curve.length,
        closure: curve.closure,
        landsberg,
        relation: surface::k_cartan_relation_residual(&curve, landsberg),
    };
    match output.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            emit(output, &to_csv(&surface::IndicatrixCurve::CSV_HEADER, &curve.csv_rows()), stdout)?;
            match sidecar(&output.out, &audit_out, ".relation.json") {
                Some(path) => std::fs::write(path, to_json(&summary))?,
                None => stderr.write_all(to_json(&summary).as_bytes())?,
            }
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Full<'a> {
                summary: &'a IndicatrixOutput<'a>,
                curve: &'a surface::IndicatrixCurve,
            }
            emit(output, &to_json(&Full { summary: &summary, curve: &curve }), stdout)?;
        }
    }
    Ok(0)
}

#[derive(Serialize)]
struct AuditOutput {
    tolerance: f64,
    theorems: TheoremAudit,
    akbar_zadeh: Vec<AkbarZadehReport>,
    reports: Vec<ClassificationReport>,
    violations: usize,
}

fn cmd_audit(sampling: &Sampling, tol: f64, output: &Output, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let sampler = sampling.sampler()?;
    let mut pairs = Vec::new();
    let mut az = Vec::new();
    for spec in metrics::zoo() {
        let report = classify::classify(&spec, &sampler, tol)?;
        if spec.dimension() == 2 {
            az.push(classify::akbar_zadeh_check(&spec, &sampler, tol)?);
        }
        pairs.push((spec.metadata.clone(), report));
    }
    let theorems = classify::theorem_audit(&pairs);
    let violations = theorems.violations + az.iter().filter(|r| !r.agrees()).count();
    let text = theorems.summary_text();
    let out = AuditOutput {
        tolerance: tol,
        theorems,
        akbar_zadeh: az,
        reports: pairs.into_iter().map(|(_, r)| r).collect(),
        violations,
    };
    match output.format.unwrap_or(Format::Json) {
        Format::Json => {
            emit(output, &to_json(&out), stdout)?;
            stderr.write_all(text.as_bytes())?;
        }
        Format::Csv => {
            let mut s = String::from("metric,status,rigidity,isotropy,akbar_zadeh\n");
            for m in &out.theorems.members {
                let status = serde_json::to_value(m.status).expect("enum");
                let opt = |b: Option<bool>| b.map_or(String::new(), |b| b.to_string());
                let azr = out.akbar_zadeh.iter().find(|r| r.metric == m.metric).map(|r| r.agrees());
                s.push_str(&format!(
                    "{},{},{},{},{}\n",
                    m.metric,
                    status.as_str().unwrap_or_default(),
                    opt(m.rigidity),
                    opt(m.isotropy),
                    opt(azr)
                ));
            }
            emit(output, &s, stdout)?;
        }
    }
    Ok(if violations == 0 { 0 } else { EXIT_VIOLATION })
}

/// Binary entry point.
pub fn main_with_args() -> i32 {
    let mut out = std::io::stdout().lock();
    let mut err = std::io::stderr().lock();
    run(std::env::args_os(), &mut out, &mut err)
}

