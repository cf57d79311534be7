mod common;

use nalgebra::Vector3;
use projcond::bench;
use projcond::camera::{Camera, Intrinsics, RigidTransform};
use projcond::conditioning::{rasterize_with, RasterConfig};
use projcond::corruption::{corrupt, CorruptionSpec};
use projcond::image::{ColorImage, Mask};
use projcond::metrics;
use projcond::plucker::{PluckerMap, PluckerRay};
use projcond::synthetic;
use proptest::prelude::*;
use rand::Rng;

fn vec3(extent: f64) -> impl Strategy<Value = Vector3<f64>> {
    (-extent..extent, -extent..extent, -extent..extent).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

fn unit() -> impl Strategy<Value = Vector3<f64>> {
    vec3(1.0)
        .prop_filter("nonzero", |v| v.norm() > 1e-3)
        .prop_map(|v| v.normalize())
}

fn rigid() -> impl Strategy<Value = RigidTransform> {
    (unit(), 0.0..std::f64::consts::PI, vec3(10.0))
        .prop_map(|(a, angle, t)| RigidTransform::from_axis_angle(a, angle, t))
}

fn camera() -> impl Strategy<Value = Camera> {
    (
        20.0..200.0f64,
        0.5..2.0f64,
        0.3..0.7f64,
        0.3..0.7f64,
        8usize..64,
        8usize..64,
        rigid(),
    )
        .prop_map(|(f, aspect, cx, cy, w, h, pose)| {
            let k = Intrinsics::new(f, f * aspect, cx * w as f64, cy * h as f64, w, h).unwrap();
            Camera::new(k, pose).unwrap()
        })
}

fn close(a: &Vector3<f64>, b: &Vector3<f64>, tol: f64) -> bool {
    (a - b).norm() <= tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn pixel_round_trip(cam in camera(), u in 0.0..1.0f64, v in 0.0..1.0f64, z in 0.1..50.0f64) {
        let (pu, pv) = (u * cam.width() as f64, v * cam.height() as f64);
        let (ru, rv, rz) = cam.project(&cam.unproject(pu, pv, z)).unwrap();
        prop_assert!((ru - pu).abs() <= 1e-6 && (rv - pv).abs() <= 1e-6 && (rz - z).abs() <= 1e-9 * z.max(1.0));
    }

    #[test]
    fn pixel_ray_is_unit_and_starts_at_center(cam in camera(), u in -50.0..150.0f64, v in -50.0..150.0f64) {
        let (o, d) = cam.pixel_ray(u, v);
        prop_assert!((d.norm() - 1.0).abs() <= 1e-12);
        prop_assert!(close(&o, &cam.center(), 1e-12 * (1.0 + o.norm())));
    }

    #[test]
    fn gauge_consistency(cam in camera(), g in rigid(), u in 0.0..1.0f64, v in 0.0..1.0f64, z in 0.5..20.0f64) {
        let x = cam.unproject(u * cam.width() as f64, v * cam.height() as f64, z);
        let (u0, v0, _) = cam.project(&x).unwrap();
        let (u1, v1, _) = cam.apply_gauge(&g).project(&g.transform_point(&x)).unwrap();
        prop_assert!((u0 - u1).abs() <= 1e-6 && (v0 - v1).abs() <= 1e-6);
        prop_assert!(close(&cam.apply_gauge(&g).center(), &g.transform_point(&cam.center()), 1e-9));
    }

    #[test]
    fn group_law(a in rigid(), b in rigid(), c in rigid(), cam in camera()) {
        let left = a.compose(&b).compose(&c);
        let right = a.compose(&b.compose(&c));
        prop_assert!((left.rotation() - right.rotation()).norm() <= 1e-9);
        prop_assert!((left.translation() - right.translation()).norm() <= 1e-9);
        let chained = cam.apply_gauge(&b).apply_gauge(&a);
        let once = cam.apply_gauge(&a.compose(&b));
        prop_assert!((chained.extrinsics.rotation() - once.extrinsics.rotation()).norm() <= 1e-9);
        prop_assert!((chained.extrinsics.translation() - once.extrinsics.translation()).norm() <= 1e-9);
        prop_assert!(a.compose(&b).orthonormality_error() <= 1e-9);
        prop_assert!(a.inverse().orthonormality_error() <= 1e-9);
        let id = a.compose(&a.inverse());
        prop_assert!((id.rotation() - nalgebra::Matrix3::identity()).norm() <= 1e-9 && id.translation().norm() <= 1e-9);
    }

    #[test]
    fn plucker_action_laws(g1 in rigid(), g2 in rigid(), o in vec3(5.0), d in unit(), s in 0.5..3.0f64) {
        let l = PluckerRay::from_ray(&o, &d).unwrap();
        prop_assert!(l.transformed(&g1).transformed(&g2).distance(&l.transformed(&g2.compose(&g1))) <= 1e-9);
        let oracle = common::line_through(&g1.transform_point(&o), &g1.transform_point(&(o + s * d)));
        prop_assert!(common::plucker_gap(&l.transformed(&g1), &oracle) <= 1e-9);
        let (ortho, norm) = l.transformed(&g1).klein_residual();
        prop_assert!(ortho.abs() <= 1e-9 && norm.abs() <= 1e-9);
    }

    #[test]
    fn plucker_map_commutes_with_gauge(cam in camera(), g in rigid()) {
        let lhs = PluckerMap::from_camera(&cam.apply_gauge(&g));
        let rhs = PluckerMap::from_camera(&cam).transformed(&g);
        for (a, b) in lhs.rays().iter().zip(rhs.rays()) {
            prop_assert!(a.distance(b) <= 1e-9);
        }
        prop_assert_eq!(PluckerMap::from_camera(&cam), PluckerMap::from_camera_serial(&cam));
    }

    #[test]
    fn tensor_round_trip(h in 1usize..6, w in 1usize..6, c in 1usize..7, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let data: Vec<f32> = (0..h * w * c).map(|_| f32::from_bits(rng.random::<u32>() & 0x7f7f_ffff)).collect();
        let t = projcond::io::Tensor::new(h, w, c, data).unwrap();
        let back = projcond::io::Tensor::from_bytes(&t.to_bytes(), std::path::Path::new("mem")).unwrap();
        prop_assert_eq!(back.to_bytes(), t.to_bytes());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn raster_is_schedule_independent(seed in any::<u64>(), n in 0usize..3000, radius in 0.0..3.0f64, tile in 1usize..40) {
        let k = Intrinsics::new(40.0, 44.0, 17.3, 12.1, 35, 26).unwrap();
        let cam = Camera::new(k, bench::random_gauge(seed, 3.0, 2.0).unwrap()).unwrap();
        let cloud = synthetic::random_cloud(seed, n, &cam);
        let cfg = RasterConfig { tile_size: tile, ..RasterConfig::with_radius(radius) };
        let par = rasterize_with(&cloud, &cam, &cfg).unwrap();
        prop_assert_eq!(&par, &rasterize_with(&cloud, &cam, &cfg.serial()).unwrap());
        prop_assert_eq!(&par, &rasterize_with(&cloud, &cam, &RasterConfig::with_radius(radius)).unwrap());
    }

    #[test]
    fn corruption_is_deterministic(seed in any::<u64>(), ratio in 0.0..=1.0f64, drop in 0.0..=1.0f64) {
        let mut rng = common::rng(seed);
        let img = ColorImage::from_fn(24, 16, |_, _| std::array::from_fn(|_| rng.random::<f64>()));
        let spec = CorruptionSpec { patch_mask_ratio: ratio, pixel_drop_prob: drop, patch_size: 8, ..CorruptionSpec::sampled(seed) };
        let a = corrupt(&img, &spec).unwrap();
        prop_assert_eq!(a.removed_patches().len(), (ratio * 6.0).round() as usize);
        prop_assert_eq!(a, corrupt(&img, &spec).unwrap());
    }

    #[test]
    fn dolly_schedule_round_trip(fov0 in 0.2..2.5f64, z0 in 0.5..20.0f64, frac in -3.0..0.99f64) {
        let d = frac * z0;
        let back = bench::delta_for_fov(fov0, z0, bench::fov_for_delta(fov0, z0, d));
        prop_assert!((back - d).abs() <= 1e-9 * z0.max(1.0));
    }
}

fn image_pair(seed: u64, w: usize, h: usize) -> (ColorImage, ColorImage) {
    let mut rng = common::rng(seed);
    let a = ColorImage::from_fn(w, h, |_, _| std::array::from_fn(|_| rng.random::<f64>()));
    let b = ColorImage::from_fn(w, h, |c, r| {
        a.get(c, r)
            .map(|v| (v + rng.random_range(-0.2..0.2)).clamp(0.0, 1.0))
    });
    (a, b)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn full_mask_psnr_equals_unmasked(seed in any::<u64>(), w in 1usize..20, h in 1usize..20) {
        let (a, b) = image_pair(seed, w, h);
        let full = metrics::masked_psnr(&a, &b, &Mask::new(w, h, true)).unwrap();
        let plain = metrics::psnr(&a, &b).unwrap();
        prop_assert!(full == plain || (full - plain).abs() <= 1e-10);
    }

    #[test]
    fn masked_psnr_is_permutation_invariant(seed in any::<u64>(), w in 2usize..16, h in 2usize..16) {
        let (a, b) = image_pair(seed, w, h);
        let mut rng = common::rng(seed ^ 0xABCD);
        let mask = Mask::from_fn(w, h, |_, _| rng.random::<bool>());
        prop_assume!(mask.count() > 0);
        let idx: Vec<usize> = (0..w * h).filter(|&i| mask.data()[i]).collect();
        let mut perm = idx.clone();
        for i in (1..perm.len()).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let mut pa = a.clone();
        let mut pb = b.clone();
        for (&src, &dst) in idx.iter().zip(&perm) {
            pa.set(dst % w, dst / w, a.get(src % w, src / w));
            pb.set(dst % w, dst / w, b.get(src % w, src / w));
        }
        let x = metrics::masked_psnr(&a, &b, &mask).unwrap();
        let y = metrics::masked_psnr(&pa, &pb, &mask).unwrap();
        prop_assert!(x == y || (x - y).abs() <= 1e-10);
    }

    #[test]
    fn ssim_symmetric_and_bounded(seed in any::<u64>(), w in 11usize..24, h in 11usize..24) {
        let (a, b) = image_pair(seed, w, h);
        let ab = metrics::ssim(&a, &b).unwrap();
        let ba = metrics::ssim(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-9);
        prop_assert!(ab <= 1.0);
    }

    #[test]
    fn seen_unseen_split_recombines(seed in any::<u64>(), w in 2usize..20, h in 2usize..20, dilate in 0usize..3) {
        let (a, b) = image_pair(seed, w, h);
        let mut rng = common::rng(seed ^ 7);
        let coverage = Mask::from_fn(w, h, |_, _| rng.random::<f64>() < 0.3);
        let (seen, unseen) = metrics::seen_unseen_split(&coverage, dilate);
        prop_assert!(seen.or(&unseen).all() && seen.and(&unseen).none());
        let full = metrics::mse(&a, &b).unwrap();
        let part = |m: &Mask| if m.count() == 0 { 0.0 } else { metrics::masked_mse(&a, &b, m).unwrap() * m.count() as f64 };
        let combined = (part(&seen) + part(&unseen)) / (w * h) as f64;
        prop_assert!((combined - full).abs() <= 1e-10);
    }
}
