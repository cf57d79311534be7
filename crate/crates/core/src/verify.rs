//! Runtime invariant suite behind the `verify` command.
//!
//! Each check exercises one property on seeded synthetic data at a size that
//! runs in a few seconds.

use nalgebra::Vector3;
use rand::Rng;
use serde::Serialize;

use crate::bench::{self, DollyZoomParams, TransformSpec};
use crate::camera::{Camera, Intrinsics, RigidTransform};
use crate::conditioning::{
    projective_condition_with, unproject_all, ContextView, ProjectionImage, RasterConfig,
};
use crate::corruption::{self, CorruptionSpec};
use crate::image::{ColorImage, Mask};
use crate::metrics;
use crate::plucker::{PluckerMap, PluckerRay};
use crate::synthetic;

/// Fraction of pixels allowed to differ between gauge-equivalent conditioning images.
pub const GAUGE_MAX_DIFF_FRACTION: f64 = 1e-3;
/// Minimum PSNR between gauge-equivalent conditioning images.
pub const GAUGE_MIN_PSNR_DB: f64 = 45.0;
pub const PLUCKER_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub property: String,
    pub pass: bool,
    pub detail: String,
}

/// Pixel disagreement and PSNR between two conditioning images.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditioningDiff {
    pub differing_fraction: f64,
    /// Over pixels covered in either image; `+∞` if identical.
    pub psnr_db: f64,
}

impl ConditioningDiff {
    pub fn within_gauge_tolerance(&self) -> bool {
        self.differing_fraction <= GAUGE_MAX_DIFF_FRACTION && self.psnr_db >= GAUGE_MIN_PSNR_DB
    }
}

pub fn compare_conditioning(a: &ProjectionImage, b: &ProjectionImage) -> ConditioningDiff {
    let n = (a.width() * a.height()) as f64;
    let differing_fraction = a.differing_pixels(b) as f64 / n;
    let union: Mask = a.coverage.or(&b.coverage);
    // an empty union means both images are blank
    let psnr_db = metrics::masked_psnr(&a.color, &b.color, &union).unwrap_or(f64::INFINITY);
    ConditioningDiff {
        differing_fraction,
        psnr_db,
    }
}

fn check(property: &str, pass: bool, detail: String) -> CheckResult {
    CheckResult {
        property: property.to_string(),
        pass,
        detail,
    }
}

pub fn run(seed: u64) -> Vec<CheckResult> {
    vec![
        gauge_invariance(seed),
        world_scale_invariance(seed),
        camera_gauge_consistency(seed),
        plucker_commutation(seed),
        plucker_group_law(seed),
        plucker_klein_chain(seed),
        plucker_two_point_oracle(seed),
        raster_serial_parallel(seed),
        reprojection_identity(seed),
        dolly_zoom(seed),
        fov_validity(),
        corruption_determinism(seed),
        psnr_formula(),
    ]
}

fn gauge_invariance(seed: u64) -> CheckResult {
    let cfg = RasterConfig::default();
    let mut worst = ConditioningDiff {
        differing_fraction: 0.0,
        psnr_db: f64::INFINITY,
    };
    let mut pass = true;
    for i in 0..8 {
        let s = synthetic::scene(seed.wrapping_add(i), 48, 2);
        let g = bench::random_gauge(seed.wrapping_add(1000 + i), std::f64::consts::PI, 10.0)
            .expect("valid bounds");
        let base = projective_condition_with(&s.contexts, &s.target, &cfg).expect("valid scene");
        let moved: Vec<ContextView> = s.contexts.iter().map(|c| c.apply_gauge(&g)).collect();
        let other = projective_condition_with(&moved, &s.target.apply_gauge(&g), &cfg)
            .expect("valid scene");
        let d = compare_conditioning(&base, &other);
        pass &= d.within_gauge_tolerance();
        worst.differing_fraction = worst.differing_fraction.max(d.differing_fraction);
        worst.psnr_db = worst.psnr_db.min(d.psnr_db);
    }
    check(
        "gauge_invariance",
        pass,
        format!(
            "max differing fraction {:.2e}, min psnr {:.2} dB",
            worst.differing_fraction, worst.psnr_db
        ),
    )
}

fn world_scale_invariance(seed: u64) -> CheckResult {
    let cfg = RasterConfig::default();
    let s = synthetic::scene(seed, 48, 2);
    let base = projective_condition_with(&s.contexts, &s.target, &cfg).expect("valid scene");
    let mut pass = true;
    let mut worst = 0.0f64;
    for scale in [0.1, 0.5, 2.0, 10.0] {
        let case = bench::apply_transform(
            &TransformSpec::WorldScale { scale },
            &s.target,
            &s.target_color,
            &s.contexts,
        )
        .expect("valid spec");
        let img = projective_condition_with(&case.contexts, &case.transformed_target, &cfg)
            .expect("valid scene");
        let d = compare_conditioning(&base, &img);
        pass &= d.within_gauge_tolerance();
        worst = worst.max(d.differing_fraction);
    }
    check(
        "world_scale_invariance",
        pass,
        format!("max differing fraction {worst:.2e}"),
    )
}

fn camera_gauge_consistency(seed: u64) -> CheckResult {
    let s = synthetic::scene(seed, 32, 1);
    let cam = s.contexts[0].camera;
    let mut rng = corruption::stream(seed, 77);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let g = bench::random_gauge(seed.wrapping_add(i), std::f64::consts::PI, 10.0)
            .expect("valid bounds");
        let x = cam.unproject(
            rng.random_range(0.0..32.0),
            rng.random_range(0.0..32.0),
            rng.random_range(1.0..8.0),
        );
        let (u0, v0, _) = cam.project(&x).expect("in front");
        let (u1, v1, _) = cam
            .apply_gauge(&g)
            .project(&g.transform_point(&x))
            .expect("in front");
        worst = worst.max((u0 - u1).abs()).max((v0 - v1).abs());
    }
    check(
        "camera_gauge_consistency",
        worst <= 1e-6,
        format!("max pixel error {worst:.2e}"),
    )
}

fn plucker_commutation(seed: u64) -> CheckResult {
    let intrinsics = Intrinsics::new(40.0, 38.0, 15.2, 17.9, 32, 32).expect("valid");
    let mut worst = 0.0f64;
    for i in 0..4 {
        let g0 = bench::random_gauge(seed.wrapping_add(i), std::f64::consts::PI, 5.0)
            .expect("valid bounds");
        let cam = Camera::new(intrinsics, g0).expect("valid camera");
        let g = bench::random_gauge(seed.wrapping_add(100 + i), std::f64::consts::PI, 10.0)
            .expect("valid bounds");
        let lhs = PluckerMap::from_camera(&cam.apply_gauge(&g));
        let rhs = PluckerMap::from_camera(&cam).transformed(&g);
        for (a, b) in lhs.rays().iter().zip(rhs.rays()) {
            worst = worst.max(a.distance(b));
        }
    }
    check(
        "plucker_commutation",
        worst <= PLUCKER_TOLERANCE,
        format!("max 6D deviation {worst:.2e}"),
    )
}

fn random_line(rng: &mut rand_chacha::ChaCha8Rng) -> PluckerRay {
    let o = Vector3::new(
        rng.random_range(-5.0..5.0),
        rng.random_range(-5.0..5.0),
        rng.random_range(-5.0..5.0),
    );
    let d = Vector3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    PluckerRay::from_ray(&o, &d.normalize()).expect("unit direction")
}

fn plucker_group_law(seed: u64) -> CheckResult {
    let mut rng = corruption::stream(seed, 78);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let g1 = bench::random_gauge(seed.wrapping_add(2 * i), std::f64::consts::PI, 10.0)
            .expect("valid");
        let g2 = bench::random_gauge(seed.wrapping_add(2 * i + 1), std::f64::consts::PI, 10.0)
            .expect("valid");
        let l = random_line(&mut rng);
        let chained = l.transformed(&g1).transformed(&g2);
        let composed = l.transformed(&g2.compose(&g1));
        worst = worst.max(chained.distance(&composed));
    }
    check(
        "plucker_group_law",
        worst <= PLUCKER_TOLERANCE,
        format!("max residual {worst:.2e}"),
    )
}

fn plucker_klein_chain(seed: u64) -> CheckResult {
    let mut rng = corruption::stream(seed, 79);
    let mut l = random_line(&mut rng);
    for i in 0..100 {
        let g =
            bench::random_gauge(seed.wrapping_add(i), std::f64::consts::PI, 10.0).expect("valid");
        l = l.transformed(&g);
    }
    let (ortho, norm) = l.klein_residual();
    let worst = ortho.abs().max(norm.abs());
    check(
        "plucker_klein_chain",
        worst <= PLUCKER_TOLERANCE,
        format!("residual after 100 actions {worst:.2e}"),
    )
}

fn plucker_two_point_oracle(seed: u64) -> CheckResult {
    let mut rng = corruption::stream(seed, 80);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let g =
            bench::random_gauge(seed.wrapping_add(i), std::f64::consts::PI, 10.0).expect("valid");
        let o = Vector3::new(
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
        );
        let d = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
        .normalize();
        let line = PluckerRay::from_ray(&o, &d).expect("unit direction");
        let oracle =
            PluckerRay::through_points(&g.transform_point(&o), &g.transform_point(&(o + d)))
                .expect("distinct");
        worst = worst.max(line.transformed(&g).distance(&oracle));
    }
    check(
        "plucker_two_point_oracle",
        worst <= PLUCKER_TOLERANCE,
        format!("max deviation {worst:.2e}"),
    )
}

fn raster_serial_parallel(seed: u64) -> CheckResult {
    let s = synthetic::scene(seed, 48, 2);
    let cloud = unproject_all(&s.contexts).expect("valid scene");
    let mut pass = true;
    for radius in [0.0, 1.0, 2.5] {
        let par = crate::conditioning::rasterize_with(
            &cloud,
            &s.target,
            &RasterConfig::with_radius(radius),
        )
        .expect("valid radius");
        let ser = crate::conditioning::rasterize_with(
            &cloud,
            &s.target,
            &RasterConfig::with_radius(radius).serial(),
        )
        .expect("valid radius");
        pass &= par == ser;
    }
    check(
        "raster_serial_equals_parallel",
        pass,
        format!("{} points, radii 0/1/2.5", cloud.len()),
    )
}

fn reprojection_identity(seed: u64) -> CheckResult {
    let s = synthetic::scene(seed, 48, 1);
    let ctx = &s.contexts[0];
    let img = projective_condition_with(
        std::slice::from_ref(ctx),
        &ctx.camera,
        &RasterConfig::with_radius(0.0),
    )
    .expect("valid scene");
    let mut bad = 0;
    for row in 0..ctx.camera.height() {
        for col in 0..ctx.camera.width() {
            let valid = ctx.depth.is_valid(col, row);
            if img.coverage.get(col, row) != valid
                || (valid && img.color.get(col, row) != ctx.color.get(col, row))
            {
                bad += 1;
            }
        }
    }
    check(
        "reprojection_identity",
        bad == 0,
        format!("{bad} differing pixels"),
    )
}

fn dolly_zoom(seed: u64) -> CheckResult {
    let s = synthetic::scene(seed, 64, 1);
    let cam = s.contexts[0].camera;
    let z0 = 4.0;
    let traj =
        match bench::dolly_zoom_trajectory(&cam, &DollyZoomParams::linear_deltas(z0, 3.0, 30)) {
            Ok(t) => t,
            Err(e) => return check("dolly_zoom", false, e.to_string()),
        };
    let right = cam.extrinsics.rotation().row(0).transpose();
    let anchor = cam.center() + cam.forward() * z0 + right * 0.5;
    let k = cam.intrinsics;
    let size = |c: &Camera| {
        let (u, v, _) = c.project(&anchor).expect("anchor in front");
        ((u - k.cx).powi(2) + (v - k.cy).powi(2)).sqrt()
    };
    let s0 = size(&cam);
    let drift = traj
        .iter()
        .map(|c| ((size(c) - s0) / s0).abs())
        .fold(0.0, f64::max);
    let fov0 = cam.intrinsics.vertical_fov();
    let round_trip = (0..30)
        .map(|i| {
            let d = -2.0 + 5.5 * i as f64 / 29.0;
            (bench::delta_for_fov(fov0, z0, bench::fov_for_delta(fov0, z0, d)) - d).abs()
        })
        .fold(0.0, f64::max);
    let exact = bench::dolly_focal(100.0, 4.0, 2.0) == 50.0
        && bench::dolly_tan_half_fov(0.5, 4.0, 2.0) == 1.0;
    check(
        "dolly_zoom",
        drift <= 1e-6 && round_trip <= 1e-9 && exact,
        format!("anchor drift {drift:.2e}, schedule round trip {round_trip:.2e}, substitutions exact {exact}"),
    )
}

fn fov_validity() -> CheckResult {
    let cam = Camera::new(
        Intrinsics::centered(100.0, 100, 100).expect("valid"),
        RigidTransform::identity(),
    )
    .expect("valid camera");
    let frac = bench::validity_mask(&TransformSpec::Fov { zoom: 0.5 }, &cam)
        .expect("valid spec")
        .fraction();
    check(
        "fov_validity_fraction",
        frac == 0.25,
        format!("valid fraction {frac}"),
    )
}

fn corruption_determinism(seed: u64) -> CheckResult {
    let mut rng = corruption::stream(seed, 81);
    let img = synthetic::smooth_image(&mut rng, 32, 32);
    let spec = CorruptionSpec {
        patch_mask_ratio: 0.5,
        ..CorruptionSpec::sampled(seed)
    };
    let (a, b) = match (
        corruption::corrupt(&img, &spec),
        corruption::corrupt(&img, &spec),
    ) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return check("corruption_determinism", false, e.to_string()),
    };
    let removed = a.patch_mask.count();
    check(
        "corruption_determinism",
        a == b && removed == 8,
        format!("identical {}, removed {removed}/16 patches", a == b),
    )
}

fn psnr_formula() -> CheckResult {
    let gt = ColorImage::filled(16, 16, [0.3, 0.5, 0.7]);
    let pred = ColorImage::filled(16, 16, [0.4, 0.6, 0.8]);
    let v = metrics::psnr(&pred, &gt).unwrap_or(f64::NAN);
    let same = metrics::psnr(&gt, &gt).unwrap_or(f64::NAN);
    check(
        "psnr_formula",
        (v - 20.0).abs() <= 1e-10 && same == f64::INFINITY,
        format!("offset 0.1 -> {v:.12} dB, identical -> {same}"),
    )
}
