//! The unit indicatrix traced by the Berwald frame, with the main scalar and
//! flag curvature along it.
//!
//! cargo run --release --example indicatrix

use finsler::metrics::MetricSpec;
use finsler::surface::{indicatrix_flow, k_cartan_relation_residual};

fn main() -> finsler::Result<()> {
    for (name, x, landsberg) in [
        ("euclidean", [0.0, 0.0], true),
        ("hyperbolic", [0.0, 1.0], true),
        ("minkowski_smooth_quartic", [0.0, 0.0], true),
        ("randers_const", [0.0, 0.0], true),
        ("funk", [0.1, -0.2], false),
    ] {
        let spec = MetricSpec::builtin_named(name).unwrap();
        let c = indicatrix_flow(&spec, &x, 256)?;
        let (ilo, ihi) = c.main_scalar.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        println!("{name}: length {:.10}, closure {:.1e}, I in [{ilo:+.4}, {ihi:+.4}]", c.length, c.closure);
        let rel = k_cartan_relation_residual(&c, landsberg);
        match (rel.residual, rel.reason) {
            (Some(r), _) => println!("  K(t) = K(0) exp(int I): residual {r:.1e}"),
            (None, Some(why)) => println!("  relation not tested: {why}"),
            _ => {}
        }
    }
    Ok(())
}
