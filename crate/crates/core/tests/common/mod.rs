//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use nalgebra::{Matrix3, Vector3};
use projcond::camera::{Camera, Intrinsics};
use projcond::conditioning::PointCloud;
use projcond::image::ColorImage;
use projcond::plucker::PluckerRay;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Per-pixel argmin over every point, no culling or binning.
pub struct OracleRaster {
    pub colors: Vec<[f64; 3]>,
    pub covered: Vec<bool>,
    pub depth: Vec<f64>,
    pub winner: Vec<u32>,
}

pub fn brute_force_rasterize(cloud: &PointCloud, camera: &Camera, radius: f64) -> OracleRaster {
    let (w, h) = (camera.width(), camera.height());
    let projected: Vec<Option<(f64, f64, f64)>> = cloud
        .positions
        .iter()
        .map(|p| camera.project(p).ok())
        .collect();
    let mut out = OracleRaster {
        colors: vec![[0.0; 3]; w * h],
        covered: vec![false; w * h],
        depth: vec![f64::INFINITY; w * h],
        winner: vec![u32::MAX; w * h],
    };
    for row in 0..h {
        for col in 0..w {
            let (px, py) = (col as f64 + 0.5, row as f64 + 0.5);
            let mut best: Option<(f64, usize)> = None;
            for (i, p) in projected.iter().enumerate() {
                let Some((u, v, z)) = *p else { continue };
                let hit = if radius == 0.0 {
                    u.floor() as i64 == col as i64 && v.floor() as i64 == row as i64
                } else {
                    (px - u).powi(2) + (py - v).powi(2) <= radius * radius
                };
                if !hit {
                    continue;
                }
                // strict less keeps the lowest index among equal depths
                if best.is_none_or(|(bz, _)| z < bz) {
                    best = Some((z, i));
                }
            }
            if let Some((z, i)) = best {
                let k = row * w + col;
                out.colors[k] = cloud.colors[i];
                out.covered[k] = true;
                out.depth[k] = z;
                out.winner[k] = i as u32;
            }
        }
    }
    out
}

/// SSIM from the textbook formula: full 2D Gaussian window evaluated directly
/// at every valid window position, averaged over positions then channels.
pub fn reference_ssim(a: &ColorImage, b: &ColorImage) -> f64 {
    const N: usize = 11;
    let sigma = 1.5f64;
    let mut weights = [[0.0f64; N]; N];
    let mut total = 0.0;
    for (i, row) in weights.iter_mut().enumerate() {
        for (j, w) in row.iter_mut().enumerate() {
            let (dy, dx) = (i as f64 - 5.0, j as f64 - 5.0);
            *w = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
            total += *w;
        }
    }
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let (w, h) = (a.width(), a.height());
    let mut sum = 0.0;
    for ch in 0..3 {
        let mut acc = 0.0;
        let mut n = 0usize;
        for r0 in 0..=h - N {
            for c0 in 0..=w - N {
                let (mut mx, mut my) = (0.0, 0.0);
                for i in 0..N {
                    for j in 0..N {
                        let wt = weights[i][j] / total;
                        mx += wt * a.get(c0 + j, r0 + i)[ch];
                        my += wt * b.get(c0 + j, r0 + i)[ch];
                    }
                }
                let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
                for i in 0..N {
                    for j in 0..N {
                        let wt = weights[i][j] / total;
                        let dx = a.get(c0 + j, r0 + i)[ch] - mx;
                        let dy = b.get(c0 + j, r0 + i)[ch] - my;
                        vx += wt * dx * dx;
                        vy += wt * dy * dy;
                        cov += wt * dx * dy;
                    }
                }
                acc += ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                    / ((mx * mx + my * my + c1) * (vx + vy + c2));
                n += 1;
            }
        }
        sum += acc / n as f64;
    }
    sum / 3.0
}

/// Fraction of uniformly sampled points of the destination frame whose
/// preimage under the homography `K_src R_relᵀ K_dst⁻¹` lands between the
/// outermost source pixel centers.
pub fn monte_carlo_validity(
    k_src: &Intrinsics,
    k_dst: &Intrinsics,
    r_rel: &Matrix3<f64>,
    samples: usize,
    seed: u64,
) -> f64 {
    let mut rng = rng(seed);
    let k_dst_inv = k_dst.matrix().try_inverse().expect("invertible intrinsics");
    let h = k_src.matrix() * r_rel.transpose() * k_dst_inv;
    let (sw, sh) = (k_src.width as f64, k_src.height as f64);
    let mut inside = 0usize;
    for _ in 0..samples {
        let p = Vector3::new(
            rng.random_range(0.0..k_dst.width as f64),
            rng.random_range(0.0..k_dst.height as f64),
            1.0,
        );
        let q = h * p;
        if q.z <= 0.0 {
            continue;
        }
        let (x, y) = (q.x / q.z, q.y / q.z);
        if (0.5..=sw - 0.5).contains(&x) && (0.5..=sh - 0.5).contains(&y) {
            inside += 1;
        }
    }
    inside as f64 / samples as f64
}

/// Plücker coordinates of the line through two distinct points, using the
/// moment `p × q` scaled by the inverse segment length.
pub fn line_through(p: &Vector3<f64>, q: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let len = (q - p).norm();
    (p.cross(q) / len, (q - p) / len)
}

pub fn plucker_gap(ray: &PluckerRay, (m, d): &(Vector3<f64>, Vector3<f64>)) -> f64 {
    ((ray.moment - m).norm_squared() + (ray.direction - d).norm_squared()).sqrt()
}

pub fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn random_point(rng: &mut ChaCha8Rng, extent: f64) -> Vector3<f64> {
    Vector3::new(
        rng.random_range(-extent..extent),
        rng.random_range(-extent..extent),
        rng.random_range(-extent..extent),
    )
}
