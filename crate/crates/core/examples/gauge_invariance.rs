//! Moves a whole scene by random rigid gauges and compares the conditioning
//! images, which should not change.
//!
//! cargo run --example gauge_invariance

use projcond::bench::random_gauge;
use projcond::conditioning::{projective_condition_with, ContextView, RasterConfig};
use projcond::synthetic;
use projcond::verify::compare_conditioning;

fn main() -> projcond::Result<()> {
    let cfg = RasterConfig::default();
    let scene = synthetic::scene(3, 64, 2);
    let base = projective_condition_with(&scene.contexts, &scene.target, &cfg)?;

    for seed in 0..5 {
        let g = random_gauge(seed, std::f64::consts::PI, 10.0)?;
        let moved: Vec<ContextView> = scene.contexts.iter().map(|c| c.apply_gauge(&g)).collect();
        let img = projective_condition_with(&moved, &scene.target.apply_gauge(&g), &cfg)?;
        let diff = compare_conditioning(&base, &img);
        println!(
            "gauge {seed}: rotation {:6.1} deg, |t| {:5.2}, differing {:.4}%, psnr {:.1} dB",
            g.angle().to_degrees(),
            g.translation().norm(),
            100.0 * diff.differing_fraction,
            diff.psnr_db
        );
    }
    Ok(())
}
