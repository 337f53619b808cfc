//! Flag curvature over sampled directions for every built-in metric.
//!
//! cargo run --release --example flag_curvature

use finsler::metrics::{zoo, Sampler};
use finsler::tensors::flag_curvature;

fn main() -> finsler::Result<()> {
    for spec in zoo() {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in Sampler::new(6, 6, 9).points(&spec) {
            let k = flag_curvature(&spec, &p, None)?;
            lo = lo.min(k);
            hi = hi.max(k);
        }
        println!("{:<26} K in [{lo:+.8}, {hi:+.8}]", spec.name);
    }
    Ok(())
}
