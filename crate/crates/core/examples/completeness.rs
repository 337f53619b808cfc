//! Long geodesics on the homogeneous members. Exits here are exits from the
//! coordinate box, not ends of the geodesic.
//!
//! cargo run --release --example completeness

use finsler::flow::{completeness, with_speed};
use finsler::metrics::{zoo, Sampler};

fn main() -> finsler::Result<()> {
    for spec in zoo().into_iter().filter(|s| s.metadata.is_homogeneous_space) {
        for p in Sampler::new(2, 1, 4).points(&spec) {
            let p = with_speed(&spec, &p, 1.0)?;
            let c = completeness(&spec, &p, 10.0, 100)?;
            let show = |e: Option<f64>| e.map_or("none".to_string(), |t| format!("t = {t:+.1}"));
            println!(
                "{:<26} x = ({:+.2}, {:+.2})  chart exit forward {}, backward {}",
                spec.name,
                p.x[0],
                p.x[1],
                show(c.forward_exit),
                show(c.backward_exit)
            );
        }
    }
    Ok(())
}
