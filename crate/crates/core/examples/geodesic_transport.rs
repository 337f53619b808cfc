//! Geodesics, linear and nonlinear parallel transport, and the scalar
//! curves E, H, I, J along them. Writes a trace CSV to the temp directory.
//!
//! cargo run --release --example geodesic_transport

use finsler::flow::{check_trace, trace_csv, with_speed};
use finsler::metrics::{MetricSpec, TangentPoint};
use finsler::report::to_csv;

fn main() -> finsler::Result<()> {
    for name in ["hyperbolic", "minkowski_smooth_quartic", "randers_var", "funk"] {
        let spec = MetricSpec::builtin_named(name).unwrap();
        let start = TangentPoint::new(&spec, vec![0.1, 0.4], vec![0.8, 0.6])?;
        let start = with_speed(&spec, &start, 0.2)?;
        let (trace, curves, c) = check_trace(&spec, &start, (0.0, 5.0), 200, None)?;
        let end = trace.positions.last().unwrap();
        println!("{name}: c(5) = ({:.5}, {:.5})", end[0], end[1]);
        println!(
            "  drifts: F {:.1e}, g(U,U) {:.1e}, F(W) {:.1e}, g_W(A,A) {:.1e}",
            c.speed_drift, c.linear_norm_drift, c.nonlinear_norm_drift, c.induced_metric_drift
        );
        println!(
            "  |J - I'| {:.1e}, |H - E'| {:.1e}, max|H'| {:.1e}, E affinity {:.1e}",
            c.j_vs_di, c.h_vs_de, c.h_slope, c.e_affinity
        );
        let (header, rows) = trace_csv(&trace, &curves);
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let path = std::env::temp_dir().join(format!("trace_{name}.csv"));
        std::fs::write(&path, to_csv(&header, &rows))?;
        println!("  trace written to {}", path.display());
    }
    Ok(())
}
