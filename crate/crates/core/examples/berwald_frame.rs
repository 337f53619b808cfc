//! Surface structure: Berwald frame, main scalar and the rank-one forms of
//! the Cartan, Landsberg and Douglas tensors.
//!
//! cargo run --example berwald_frame

use finsler::metrics::{zoo, Sampler};
use finsler::surface::{douglas_rank_one_of, landsberg_ratio_of, SurfaceIdentities};
use finsler::tensors::PointTensors;

fn main() -> finsler::Result<()> {
    for spec in zoo() {
        let p = &Sampler::new(1, 1, 5).points(&spec)[0];
        let t = PointTensors::compute(&spec, p)?;
        let frame = finsler::surface::berwald_frame(&spec, p)?;
        let ratio = landsberg_ratio_of(&t);
        let douglas = douglas_rank_one_of(&t);
        let ids = SurfaceIdentities::of(&t);
        println!("{}", spec.name);
        println!("  l = {:.4?}  m = {:.4?}", frame.ell, frame.m);
        println!("  main scalar I = {:.6}", finsler::surface::main_scalar(&spec, p)?);
        match ratio.kappa {
            Some(k) => println!("  L = kappa * F * C with kappa = {k:.6}"),
            None => println!("  C vanishes; L(m,m,m) = {:.2e}", ratio.l_mmm),
        }
        println!("  D = tau * (rank-one form), tau = {:.6}", douglas.tau);
        println!("  worst surface identity residual {:.1e}", ids.max());
    }
    Ok(())
}
