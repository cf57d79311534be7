//! Unprojects two RGB-D context views into one point cloud and splats it into
//! a target camera, then checks that re-rendering a context into its own
//! camera reproduces it exactly.
//!
//! cargo run --example projective_conditioning -- [OUT_DIR]

use projcond::conditioning::{projective_condition_with, unproject_all, RasterConfig};
use projcond::synthetic;

fn main() -> projcond::Result<()> {
    let out = std::env::args().nth(1).map(std::path::PathBuf::from);
    let scene = synthetic::scene(11, 96, 2);

    let cloud = unproject_all(&scene.contexts)?;
    println!(
        "point cloud: {} points from {} views",
        cloud.len(),
        scene.contexts.len()
    );

    for radius in [0.0, 1.0, 2.0] {
        let img = projective_condition_with(
            &scene.contexts,
            &scene.target,
            &RasterConfig::with_radius(radius),
        )?;
        println!(
            "radius {radius}: coverage {:.1}%",
            100.0 * img.coverage.fraction()
        );
    }

    let ctx = &scene.contexts[0];
    let own = projective_condition_with(
        std::slice::from_ref(ctx),
        &ctx.camera,
        &RasterConfig::with_radius(0.0),
    )?;
    let mut mismatched = 0;
    for row in 0..ctx.camera.height() {
        for col in 0..ctx.camera.width() {
            if ctx.depth.is_valid(col, row) && own.color.get(col, row) != ctx.color.get(col, row) {
                mismatched += 1;
            }
        }
    }
    println!("self-reprojection: {mismatched} mismatched pixels");

    if let Some(dir) = out {
        std::fs::create_dir_all(&dir).map_err(|e| projcond::Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        let img =
            projective_condition_with(&scene.contexts, &scene.target, &RasterConfig::default())?;
        img.save(&dir, "target_")?;
        println!("wrote conditioning artifacts to {}", dir.display());
    }
    Ok(())
}
