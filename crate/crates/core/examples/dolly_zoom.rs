//! Dolly-zoom trajectory: the camera moves along its optical axis while the
//! focal length shrinks so the anchor plane keeps its on-screen size.
//!
//! cargo run --example dolly_zoom

use projcond::bench::{center_anchor_depth, dolly_zoom_trajectory, DollyZoomParams};
use projcond::conditioning::{projective_condition_with, RasterConfig};
use projcond::synthetic;

fn main() -> projcond::Result<()> {
    let scene = synthetic::scene(2, 64, 2);
    let start = scene.contexts[0].camera;
    let z0 = center_anchor_depth(&scene.contexts[0].depth).unwrap_or(4.0);
    let params = DollyZoomParams::linear_fovs(z0, 50f64.to_radians(), 100f64.to_radians(), 8);
    let frames = dolly_zoom_trajectory(&start, &params)?;

    let anchor = start.center()
        + start.forward() * z0
        + start.extrinsics.rotation().row(0).transpose() * 0.5;
    for (i, cam) in frames.iter().enumerate() {
        let (u, _, _) = cam.project(&anchor)?;
        let img = projective_condition_with(&scene.contexts, cam, &RasterConfig::default())?;
        println!(
            "frame {i}: fov {:5.1} deg  fy {:6.2}  anchor offset {:.9} px  coverage {:.1}%",
            cam.intrinsics.vertical_fov().to_degrees(),
            cam.intrinsics.fy,
            u - cam.intrinsics.cx,
            100.0 * img.coverage.fraction()
        );
    }
    Ok(())
}
