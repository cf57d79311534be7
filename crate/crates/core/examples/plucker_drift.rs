//! Shows how a gauge change shifts a camera's Plücker ray map: the shift is
//! different at every pixel, unlike the conditioning image, which is unchanged.
//!
//! cargo run --example plucker_drift

use nalgebra::Vector3;
use projcond::camera::{Camera, Intrinsics, RigidTransform};
use projcond::plucker::{perturbation_field, PluckerMap};

fn main() -> projcond::Result<()> {
    let k = Intrinsics::new(70.0, 66.0, 31.3, 33.1, 64, 64)?;
    let pose = RigidTransform::from_axis_angle(
        Vector3::new(0.2, 1.0, 0.1),
        0.3,
        Vector3::new(0.4, -0.1, 2.0),
    );
    let camera = Camera::new(k, pose)?;
    let map = PluckerMap::from_camera(&camera);
    let (ortho, norm) = map.max_klein_residual();
    println!("max |m.d| {ortho:.1e}, max ||d|-1| {norm:.1e}");

    for (label, g) in [
        (
            "pure translation",
            RigidTransform::from_translation(Vector3::new(1.0, 0.0, 0.0)),
        ),
        (
            "rotation 30 deg",
            RigidTransform::from_axis_angle(Vector3::y(), 30f64.to_radians(), Vector3::zeros()),
        ),
        (
            "rotation + translation",
            RigidTransform::from_axis_angle(
                Vector3::new(1.0, 1.0, 0.0),
                0.5,
                Vector3::new(0.0, 0.6, 0.8),
            ),
        ),
    ] {
        let field = perturbation_field(&g, &map);
        println!(
            "{label:<24} mean {:.3}  min {:.3}  max {:.3}  max/mean {:.2}",
            field.mean(),
            field.min(),
            field.max(),
            field.max() / field.mean()
        );
    }
    Ok(())
}
