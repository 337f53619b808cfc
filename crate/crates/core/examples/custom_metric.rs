//! Defining a metric, validating it and saving it to a metric file.
//!
//! cargo run --example custom_metric

use finsler::metrics::{validate, ExpectedClass, Metadata, MetricSpec, Sampler};

fn main() -> finsler::Result<()> {
    // a Randers metric whose drift term stays well inside the unit ball
    let spec = MetricSpec::from_expression(
        "randers_tilted",
        2,
        "sqrt(y1^2 + y2^2) + 0.2*(cos(x1)*y1 + sin(x1)*y2)",
        vec![(-3.0, 3.0), (-3.0, 3.0)],
    )?
    .with_metadata(Metadata {
        is_homogeneous_space: false,
        expected_class: Some(ExpectedClass::NonLandsberg),
    });
    let report = validate(&spec, &Sampler::default());
    println!(
        "{}: {} points, homogeneity residual {:.1e}, smallest g eigenvalue {:.3}, passed {}",
        report.metric, report.points_checked, report.max_homogeneity_residual, report.min_g_eigenvalue, report.passed
    );

    let dir = std::env::temp_dir().join("finsler-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("randers_tilted.json");
    std::fs::write(&path, spec.to_json())?;
    let back = MetricSpec::load(&path)?;
    println!("saved to {} and reloaded: {}", path.display(), back.source_text());

    // strong drift breaks convexity and is rejected
    let bad = MetricSpec::from_expression("too_strong", 2, "sqrt(y1^2 + y2^2) + 1.5*y1", vec![(-1.0, 1.0); 2])?;
    let r = validate(&bad, &Sampler::default());
    println!("too_strong passed {} ({} positivity violations)", r.passed, r.positivity_violations);
    Ok(())
}
