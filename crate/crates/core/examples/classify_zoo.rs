//! Classifies every built-in metric and runs the rigidity audit.
//!
//! cargo run --release --example classify_zoo

use finsler::classify::{akbar_zadeh_check, classify, theorem_audit, JET_TOLERANCE};
use finsler::metrics::{zoo, Sampler};

fn main() -> finsler::Result<()> {
    let sampler = Sampler::default();
    let mut reports = Vec::new();
    println!(
        "{:<26} {:>9} {:>9} {:>9} {:>9} {:>9} {:>12} {:>12}  flags",
        "metric", "|I|", "|B|", "|L|", "|D|", "|H|", "K min", "K max"
    );
    for spec in zoo() {
        let r = classify(&spec, &sampler, JET_TOLERANCE)?;
        let n = &r.norms;
        let on: Vec<&str> = r.flags.named().iter().filter(|(_, v)| *v).map(|(k, _)| *k).collect();
        println!(
            "{:<26} {:>9.2e} {:>9.2e} {:>9.2e} {:>9.2e} {:>9.2e} {:>12.6} {:>12.6}  {}",
            r.metric,
            n.mean_cartan,
            n.berwald,
            n.landsberg,
            n.douglas,
            n.h_curvature,
            r.curvature.min,
            r.curvature.max,
            on.join(" ")
        );
        if spec.dimension() == 2 {
            let az = akbar_zadeh_check(&spec, &sampler, JET_TOLERANCE)?;
            println!(
                "{:<26} H=0: {}  K=K(x): {}  (max K variance {:.2e})",
                "", az.h_vanishes, az.k_isotropic, az.k_max_variance
            );
        }
        reports.push((spec.metadata.clone(), r));
    }
    println!();
    print!("{}", theorem_audit(&reports).summary_text());
    Ok(())
}
