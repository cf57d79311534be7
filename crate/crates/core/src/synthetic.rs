//! Seeded synthetic RGB-D scenes for tests, examples and self-verification.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::camera::{Camera, Intrinsics};
use crate::conditioning::{ContextView, PointCloud};
use crate::corruption::stream;
use crate::image::{ColorImage, DepthMap};
use crate::io::{SceneBundle, View};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub contexts: Vec<ContextView>,
    pub target: Camera,
    pub target_color: ColorImage,
    pub target_depth: DepthMap,
}

/// Low-frequency color pattern with a little texture, values in `[0, 1]`.
pub fn smooth_image(rng: &mut ChaCha8Rng, width: usize, height: usize) -> ColorImage {
    let waves: Vec<[f64; 4]> = (0..9)
        .map(|_| {
            [
                rng.random_range(-6.0..6.0),
                rng.random_range(-6.0..6.0),
                rng.random_range(0.0..2.0 * PI),
                rng.random_range(0.05..0.2),
            ]
        })
        .collect();
    ColorImage::from_fn(width, height, |c, r| {
        let (x, y) = (c as f64 / width as f64, r as f64 / height as f64);
        std::array::from_fn(|ch| {
            let v: f64 = waves[ch * 3..ch * 3 + 3]
                .iter()
                .map(|[a, b, p, amp]| amp * (a * x + b * y + p).sin())
                .sum();
            0.5 + v
        })
    })
}

/// Smooth random depth surface in roughly `[2, 6]` with a nearer rectangular
/// occluder and a sprinkling of invalid (`0`) samples.
pub fn random_depth(rng: &mut ChaCha8Rng, width: usize, height: usize) -> DepthMap {
    let base: f64 = rng.random_range(3.5..5.0);
    let bumps: Vec<[f64; 4]> = (0..3)
        .map(|_| {
            [
                rng.random_range(-8.0..8.0),
                rng.random_range(-8.0..8.0),
                rng.random_range(0.0..2.0 * PI),
                rng.random_range(0.1..0.4),
            ]
        })
        .collect();
    let (bx0, by0) = (rng.random_range(0.1..0.5), rng.random_range(0.1..0.5));
    let (bx1, by1) = (
        bx0 + rng.random_range(0.15..0.4),
        by0 + rng.random_range(0.15..0.4),
    );
    let box_depth = base - rng.random_range(1.0..1.5);
    let hole_prob = 0.02;
    let holes: Vec<bool> = (0..width * height)
        .map(|_| rng.random::<f64>() < hole_prob)
        .collect();
    DepthMap::from_fn(width, height, |c, r| {
        if holes[r * width + c] {
            return 0.0;
        }
        let (x, y) = (c as f64 / width as f64, r as f64 / height as f64);
        if x >= bx0 && x < bx1 && y >= by0 && y < by1 {
            return box_depth + 0.1 * (3.0 * x).sin();
        }
        base + bumps
            .iter()
            .map(|[a, b, p, amp]| amp * (a * x + b * y + p).sin())
            .sum::<f64>()
    })
    .expect("depths are positive and finite")
}

fn jitter(rng: &mut ChaCha8Rng, s: f64) -> Vector3<f64> {
    Vector3::new(
        rng.random_range(-s..s),
        rng.random_range(-s..s),
        rng.random_range(-s..s),
    )
}

/// `contexts` RGB-D views of a `size×size` scene looking toward `+z`, plus a
/// target camera placed among them.
pub fn scene(seed: u64, size: usize, contexts: usize) -> SyntheticScene {
    let mut rng = stream(seed, 0x5CE7E);
    let intrinsics = Intrinsics::centered(size as f64, size, size).expect("valid intrinsics");
    let look = Vector3::new(0.0, 0.0, 4.0);
    let up = Vector3::new(0.0, -1.0, 0.0);
    let mut views = Vec::with_capacity(contexts);
    for i in 0..contexts {
        let side = if contexts == 1 {
            0.0
        } else {
            -0.5 + i as f64 / (contexts - 1) as f64
        };
        let eye = Vector3::new(side * 0.8, 0.0, 0.0) + jitter(&mut rng, 0.1);
        let cam = Camera::look_at(intrinsics, eye, look + jitter(&mut rng, 0.3), up)
            .expect("non-degenerate look-at");
        let color = smooth_image(&mut rng, size, size);
        let depth = random_depth(&mut rng, size, size);
        views.push(ContextView::new(color, depth, cam).expect("matching buffers"));
    }
    let target = Camera::look_at(
        intrinsics,
        Vector3::new(0.0, 0.05, 0.2) + jitter(&mut rng, 0.1),
        look + jitter(&mut rng, 0.3),
        up,
    )
    .expect("non-degenerate look-at");
    let target_color = smooth_image(&mut rng, size, size);
    let target_depth = random_depth(&mut rng, size, size);
    SyntheticScene {
        contexts: views,
        target,
        target_color,
        target_depth,
    }
}

impl SyntheticScene {
    /// Bundle with views `ctx0..ctxN` and `target`.
    pub fn to_bundle(&self) -> SceneBundle {
        let mut views: Vec<View> = self
            .contexts
            .iter()
            .enumerate()
            .map(|(i, c)| View {
                id: format!("ctx{i}"),
                camera: c.camera,
                color_file: format!("ctx{i}.png"),
                depth_file: Some(format!("ctx{i}.pfm")),
                color: c.color.clone(),
                depth: Some(c.depth.clone()),
            })
            .collect();
        views.push(View {
            id: "target".into(),
            camera: self.target,
            color_file: "target.png".into(),
            depth_file: Some("target.pfm".into()),
            color: self.target_color.clone(),
            depth: Some(self.target_depth.clone()),
        });
        SceneBundle {
            context_ids: (0..self.contexts.len())
                .map(|i| format!("ctx{i}"))
                .collect(),
            target_ids: vec!["target".into()],
            world_unit: "unit".into(),
            views,
        }
    }
}

/// `n` random colored points, most inside the camera frustum between depth
/// 0.5 and 8, some behind the camera or off-frame.
pub fn random_cloud(seed: u64, n: usize, camera: &Camera) -> PointCloud {
    let mut rng = stream(seed, 0xC10D);
    let k = camera.intrinsics;
    let mut cloud = PointCloud::default();
    for i in 0..n {
        let u = rng.random_range(-0.2..1.2) * k.width as f64;
        let v = rng.random_range(-0.2..1.2) * k.height as f64;
        // coarse depth levels make exact depth ties between points likely
        let depth = if rng.random::<f64>() < 0.3 {
            rng.random_range(1..8) as f64
        } else {
            rng.random_range(0.5..8.0)
        };
        let depth = if rng.random::<f64>() < 0.05 {
            -depth
        } else {
            depth
        };
        let p = camera.unproject(u, v, depth);
        let rgb = [rng.random(), rng.random(), rng.random()];
        cloud.push(p, rgb, 0, (0, i as u32));
    }
    cloud
}
