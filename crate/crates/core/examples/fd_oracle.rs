//! Cross-checks the jet engine against the extended-precision finite
//! difference engine at one point.
//!
//! cargo run --release --example fd_oracle

use finsler::fd_engine::{compute, relative_gap};
use finsler::metrics::{MetricSpec, TangentPoint};
use finsler::tensors::PointTensors;

fn main() -> finsler::Result<()> {
    let spec = MetricSpec::builtin_named("funk").unwrap();
    let p = TangentPoint::new(&spec, vec![0.2, -0.1], vec![0.6, 0.8])?;
    let jets = PointTensors::compute(&spec, &p)?;
    let fd = compute(&spec, &p)?;
    for ((name, a), (_, b)) in jets.named().into_iter().zip(fd.named()) {
        println!("{name:>6}  max|jet| {:.4e}  relative gap {:.1e}", a.max_abs(), relative_gap(a, b, 1e-3));
    }
    Ok(())
}
