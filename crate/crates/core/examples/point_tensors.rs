//! All curvature tensors at one tangent vector, with their consistency
//! residuals.
//!
//! cargo run --example point_tensors [metric] ["x1,x2;y1,y2"]

use finsler::cli::{load_metric, parse_point};
use finsler::tensors::PointTensors;

fn main() -> finsler::Result<()> {
    let mut args = std::env::args().skip(1);
    let metric = args.next().unwrap_or_else(|| "randers_var".into());
    let point = args.next().unwrap_or_else(|| "0.3,0.7;1,0.4".into());
    let spec = load_metric(&metric)?;
    let p = parse_point(&spec, &point)?;
    let t = PointTensors::compute(&spec, &p)?;

    println!("{} at x = {:?}, y = {:?}, F = {:.6}", spec.name, p.x, p.y, t.f);
    let g = &t.g.components;
    for (name, tensor) in t.named() {
        println!("{name:>6}  rank {}  norm {:.6e}", tensor.rank(), tensor.g_norm(g));
    }
    println!("spray G = {:?}", t.spray.components);
    println!("residuals:");
    for (name, r) in t.identities().named() {
        println!("  {name:<24} {r:.1e}");
    }
    Ok(())
}
