//! Target-camera perturbations for the view-consistency benchmark, the
//! ground-truth resampling that goes with them, random world gauges and
//! dolly-zoom trajectories.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::{Camera, Intrinsics, RigidTransform};
use crate::conditioning::ContextView;
use crate::corruption::stream;
use crate::error::{Error, Result};
use crate::image::{ColorImage, Mask};
use crate::io::{save_image, save_mask, CameraRecord};

/// Source positions within this many pixels of a sample center snap onto it.
const TAP_SNAP: f64 = 1e-9;

/// Sampling ranges used when a benchmark parameter is not given explicitly.
pub mod defaults {
    pub const ANISOTROPIC_RATIO: (f64, f64) = (0.1, 10.0);
    pub const WORLD_SCALE: (f64, f64) = (0.25, 4.0);
    pub const FOV_ZOOM: (f64, f64) = (0.5, 2.0);
    pub const ROLL_DEGREES: (f64, f64) = (-45.0, 45.0);
    pub const GAUGE_MAX_ROTATION: f64 = std::f64::consts::PI;
    pub const GAUGE_MAX_TRANSLATION: f64 = 10.0;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformSpec {
    /// Multiplies `fx` by `ratio`.
    AnisotropicPixel {
        ratio: f64,
    },
    /// Scales every camera translation and context depth by `scale`.
    WorldScale {
        scale: f64,
    },
    /// Multiplies both focal lengths by `zoom`.
    Fov {
        zoom: f64,
    },
    /// In-plane rotation of the target camera, radians.
    Roll {
        angle: f64,
    },
    RandomGauge {
        seed: u64,
        max_rotation: f64,
        max_translation: f64,
    },
    DollyZoom(DollyZoomParams),
}

impl TransformSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        match self {
            TransformSpec::AnisotropicPixel { ratio } => {
                if !(0.1..=10.0).contains(ratio) {
                    return bad(format!("anisotropic ratio {ratio} outside [0.1, 10]"));
                }
            }
            TransformSpec::WorldScale { scale } => {
                if !(*scale > 0.0 && scale.is_finite()) {
                    return bad(format!("world scale must be positive, got {scale}"));
                }
            }
            TransformSpec::Fov { zoom } => {
                if !(*zoom > 0.0 && zoom.is_finite()) {
                    return bad(format!("fov zoom must be positive, got {zoom}"));
                }
            }
            TransformSpec::Roll { angle } => {
                if !angle.is_finite() {
                    return bad("roll angle must be finite".into());
                }
            }
            TransformSpec::RandomGauge {
                max_rotation,
                max_translation,
                ..
            } => {
                if !(0.0..=PI).contains(max_rotation) {
                    return bad(format!("max_rotation {max_rotation} outside [0, pi]"));
                }
                if !(*max_translation >= 0.0 && max_translation.is_finite()) {
                    return bad(format!(
                        "max_translation must be >= 0, got {max_translation}"
                    ));
                }
            }
            TransformSpec::DollyZoom(p) => p.validate()?,
        }
        Ok(())
    }

    /// Draws a spec of the given kind from the default ranges.
    pub fn sample(kind: TransformKind, seed: u64) -> TransformSpec {
        let mut rng = stream(seed, 0xBE7C);
        let log_uniform = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| -> f64 {
            let u: f64 = rng.random();
            (lo.ln() + (hi.ln() - lo.ln()) * u).exp()
        };
        match kind {
            TransformKind::AnisotropicPixel => TransformSpec::AnisotropicPixel {
                ratio: log_uniform(&mut rng, defaults::ANISOTROPIC_RATIO).clamp(0.1, 10.0),
            },
            TransformKind::WorldScale => TransformSpec::WorldScale {
                scale: log_uniform(&mut rng, defaults::WORLD_SCALE),
            },
            TransformKind::Fov => TransformSpec::Fov {
                zoom: log_uniform(&mut rng, defaults::FOV_ZOOM),
            },
            TransformKind::Roll => {
                let (lo, hi) = defaults::ROLL_DEGREES;
                let u: f64 = rng.random();
                TransformSpec::Roll {
                    angle: (lo + (hi - lo) * u).to_radians(),
                }
            }
            TransformKind::RandomGauge => TransformSpec::RandomGauge {
                seed,
                max_rotation: defaults::GAUGE_MAX_ROTATION,
                max_translation: defaults::GAUGE_MAX_TRANSLATION,
            },
        }
    }
}

/// The single-case transform kinds (dolly zoom produces a trajectory instead).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformKind {
    AnisotropicPixel,
    WorldScale,
    Fov,
    Roll,
    RandomGauge,
}

impl std::str::FromStr for TransformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "anisotropic" | "anisotropic-pixel" => TransformKind::AnisotropicPixel,
            "world-scale" | "scale" => TransformKind::WorldScale,
            "fov" => TransformKind::Fov,
            "roll" => TransformKind::Roll,
            "gauge" | "random-gauge" => TransformKind::RandomGauge,
            other => {
                return Err(Error::InvalidSpec(format!(
                    "unknown transform kind {other:?}"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DollySchedule {
    /// Translation along the initial optical axis per frame, world units.
    Deltas(Vec<f64>),
    /// Vertical field of view per frame, radians.
    Fovs(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DollyZoomParams {
    /// Depth of the anchor plane in the initial camera.
    pub anchor_depth: f64,
    pub schedule: DollySchedule,
}

impl DollyZoomParams {
    pub fn frames(&self) -> usize {
        match &self.schedule {
            DollySchedule::Deltas(d) => d.len(),
            DollySchedule::Fovs(f) => f.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let z0 = self.anchor_depth;
        if !(z0 > 0.0 && z0.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "anchor depth must be positive, got {z0}"
            )));
        }
        match &self.schedule {
            DollySchedule::Deltas(deltas) => {
                for &d in deltas {
                    if !d.is_finite() || d >= z0 {
                        return Err(Error::DegenerateDolly {
                            delta: d,
                            anchor_depth: z0,
                        });
                    }
                }
            }
            DollySchedule::Fovs(fovs) => {
                if let Some(f) = fovs.iter().find(|f| !(**f > 0.0 && **f < PI)) {
                    return Err(Error::InvalidSpec(format!(
                        "field of view {f} outside (0, pi)"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Evenly spaced deltas from `0` to `delta_end` over `frames` frames.
    pub fn linear_deltas(anchor_depth: f64, delta_end: f64, frames: usize) -> Self {
        Self {
            anchor_depth,
            schedule: DollySchedule::Deltas(linspace(0.0, delta_end, frames)),
        }
    }

    pub fn linear_fovs(anchor_depth: f64, fov_start: f64, fov_end: f64, frames: usize) -> Self {
        Self {
            anchor_depth,
            schedule: DollySchedule::Fovs(linspace(fov_start, fov_end, frames)),
        }
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// `f(t) = f0 · (Z0 − Δ) / Z0`, keeping an anchor at depth `Z0` the same size.
pub fn dolly_focal(f0: f64, anchor_depth: f64, delta: f64) -> f64 {
    f0 * (anchor_depth - delta) / anchor_depth
}

/// `tan(θ/2) = tan(θ0/2) · Z0 / (Z0 − Δ)`.
pub fn dolly_tan_half_fov(tan_half_fov0: f64, anchor_depth: f64, delta: f64) -> f64 {
    tan_half_fov0 * anchor_depth / (anchor_depth - delta)
}

/// Vertical FOV reached after dollying by `delta`.
pub fn fov_for_delta(fov0: f64, anchor_depth: f64, delta: f64) -> f64 {
    2.0 * dolly_tan_half_fov((fov0 / 2.0).tan(), anchor_depth, delta).atan()
}

/// Dolly distance giving vertical FOV `fov`: `Δ = Z0 (1 − tan(θ0/2) / tan(θ/2))`.
pub fn delta_for_fov(fov0: f64, anchor_depth: f64, fov: f64) -> f64 {
    anchor_depth * (1.0 - (fov0 / 2.0).tan() / (fov / 2.0).tan())
}

/// One camera per schedule entry. Orientation is constant, the center moves
/// along the initial optical axis, and both focals follow [`dolly_focal`].
pub fn dolly_zoom_trajectory(initial: &Camera, params: &DollyZoomParams) -> Result<Vec<Camera>> {
    params.validate()?;
    let z0 = params.anchor_depth;
    let deltas: Vec<f64> = match &params.schedule {
        DollySchedule::Deltas(d) => d.clone(),
        DollySchedule::Fovs(fovs) => {
            let fov0 = initial.intrinsics.vertical_fov();
            fovs.iter().map(|f| delta_for_fov(fov0, z0, *f)).collect()
        }
    };
    let c0 = initial.center();
    let n0 = initial.forward();
    deltas
        .into_iter()
        .map(|delta| {
            if !delta.is_finite() || delta >= z0 {
                return Err(Error::DegenerateDolly {
                    delta,
                    anchor_depth: z0,
                });
            }
            if delta == 0.0 {
                return Ok(*initial);
            }
            let k = initial.intrinsics;
            let intrinsics = Intrinsics::new(
                dolly_focal(k.fx, z0, delta),
                dolly_focal(k.fy, z0, delta),
                k.cx,
                k.cy,
                k.width,
                k.height,
            )?;
            Ok(initial
                .with_center(&(c0 + n0 * delta))
                .with_intrinsics(intrinsics))
        })
        .collect()
}

/// Depth at the center pixel of a depth map, for use as the dolly anchor.
pub fn center_anchor_depth(depth: &crate::image::DepthMap) -> Option<f64> {
    let z = depth.get(depth.width() / 2, depth.height() / 2);
    (z > 0.0).then_some(z)
}

/// Samples a rigid transform: rotation uniform on SO(3) restricted to angle
/// `<= max_rotation`, translation uniform in the ball of radius
/// `max_translation`. Deterministic per seed.
pub fn random_gauge(seed: u64, max_rotation: f64, max_translation: f64) -> Result<RigidTransform> {
    if !(0.0..=PI).contains(&max_rotation)
        || !(max_translation >= 0.0 && max_translation.is_finite())
    {
        return Err(Error::InvalidSpec(format!(
            "gauge bounds out of range: max_rotation {max_rotation}, max_translation {max_translation}"
        )));
    }
    let mut rng = stream(seed, 0x6A06E);
    let angle = if max_rotation == 0.0 {
        0.0
    } else {
        restricted_haar_angle(rng.random(), max_rotation)
    };
    let axis = unit_vector(&mut rng);
    let translation = if max_translation == 0.0 {
        Vector3::zeros()
    } else {
        loop {
            let p = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if p.norm_squared() <= 1.0 {
                break p * max_translation;
            }
        }
    };
    Ok(RigidTransform::from_axis_angle(axis, angle, translation))
}

fn unit_vector(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    let z: f64 = rng.random_range(-1.0..1.0);
    let phi: f64 = rng.random_range(0.0..2.0 * PI);
    let r = (1.0 - z * z).max(0.0).sqrt();
    Vector3::new(r * phi.cos(), r * phi.sin(), z)
}

/// Inverts the CDF `(θ − sin θ) / (max − sin max)` of the Haar-measure
/// rotation angle truncated to `[0, max]`.
fn restricted_haar_angle(u: f64, max: f64) -> f64 {
    let cdf = |t: f64| t - t.sin();
    let target = u * cdf(max);
    let (mut lo, mut hi) = (0.0, max);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Source sample position for each destination pixel under
/// `p_src ~ K_src · R_relᵀ · K_dst⁻¹ · p_dst`, in index coordinates
/// (pixel centers at integers), or `None` if it falls outside the
/// bilinear support of the source frame.
fn source_taps(
    k_src: &Intrinsics,
    k_dst: &Intrinsics,
    r_rel: &Matrix3<f64>,
) -> Vec<Option<(f64, f64)>> {
    let rt = r_rel.transpose();
    let (sw, sh) = (k_src.width as f64, k_src.height as f64);
    let snap = |x: f64| {
        let r = x.round();
        if (x - r).abs() < TAP_SNAP {
            r
        } else {
            x
        }
    };
    let mut out = Vec::with_capacity(k_dst.width * k_dst.height);
    for row in 0..k_dst.height {
        for col in 0..k_dst.width {
            let ray = rt * k_dst.backproject(col as f64 + 0.5, row as f64 + 0.5);
            if ray.z <= 0.0 {
                out.push(None);
                continue;
            }
            let x = snap(k_src.fx * ray.x / ray.z + k_src.cx - 0.5);
            let y = snap(k_src.fy * ray.y / ray.z + k_src.cy - 0.5);
            let inside = x >= 0.0 && x <= sw - 1.0 && y >= 0.0 && y <= sh - 1.0;
            out.push(inside.then_some((x, y)));
        }
    }
    out
}

/// Pixels of the destination whose bilinear taps all land in the source frame.
pub fn warp_validity(k_src: &Intrinsics, k_dst: &Intrinsics, r_rel: &Matrix3<f64>) -> Mask {
    let taps = source_taps(k_src, k_dst, r_rel);
    Mask::from_raw(
        k_dst.width,
        k_dst.height,
        taps.iter().map(Option::is_some).collect(),
    )
    .expect("one tap per destination pixel")
}

/// Resamples `image` (seen through `k_src`) into a camera with intrinsics
/// `k_dst`, rotated by `r_rel` about the shared center. Invalid pixels are black.
pub fn homography_warp(
    image: &ColorImage,
    k_src: &Intrinsics,
    k_dst: &Intrinsics,
    r_rel: &Matrix3<f64>,
) -> Result<(ColorImage, Mask)> {
    if (image.width(), image.height()) != (k_src.width, k_src.height) {
        return Err(Error::dims(
            format!("{}x{} image", k_src.width, k_src.height),
            format!("{}x{}", image.width(), image.height()),
        ));
    }
    crate::camera::check_rotation(r_rel, crate::camera::ROTATION_TOLERANCE)?;
    let taps = source_taps(k_src, k_dst, r_rel);
    let (w, h) = (image.width(), image.height());
    let mut out = ColorImage::new(k_dst.width, k_dst.height);
    let mut valid = Vec::with_capacity(taps.len());
    for (i, tap) in taps.iter().enumerate() {
        valid.push(tap.is_some());
        let Some((x, y)) = *tap else { continue };
        let (x0, y0) = (x.floor() as usize, y.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let (a, b, c, d) = (
            image.get(x0, y0),
            image.get(x1, y0),
            image.get(x0, y1),
            image.get(x1, y1),
        );
        let rgb = std::array::from_fn(|ch| {
            let top = (1.0 - fx) * a[ch] + fx * b[ch];
            let bottom = (1.0 - fx) * c[ch] + fx * d[ch];
            (1.0 - fy) * top + fy * bottom
        });
        out.set(i % k_dst.width, i / k_dst.width, rgb);
    }
    let mask = Mask::from_raw(k_dst.width, k_dst.height, valid)?;
    Ok((out, mask))
}

/// Intrinsics/rotation change a spec applies to the target, for the
/// image-space kinds.
fn image_space_change(
    spec: &TransformSpec,
    target: &Camera,
) -> Result<Option<(Intrinsics, Matrix3<f64>)>> {
    let k = target.intrinsics;
    Ok(match spec {
        TransformSpec::AnisotropicPixel { ratio } => Some((
            Intrinsics {
                fx: k.fx * ratio,
                ..k
            },
            Matrix3::identity(),
        )),
        TransformSpec::Fov { zoom } => Some((
            Intrinsics {
                fx: k.fx * zoom,
                fy: k.fy * zoom,
                ..k
            },
            Matrix3::identity(),
        )),
        TransformSpec::Roll { angle } => Some((k, *RigidTransform::rotation_z(*angle).rotation())),
        TransformSpec::WorldScale { .. } | TransformSpec::RandomGauge { .. } => None,
        TransformSpec::DollyZoom(_) => {
            return Err(Error::InvalidSpec(
                "dolly zoom moves the camera center; use dolly_zoom_trajectory".into(),
            ))
        }
    })
}

/// Valid pixels of the transformed target. All-true for kinds that leave the
/// ground truth untouched.
pub fn validity_mask(spec: &TransformSpec, target: &Camera) -> Result<Mask> {
    spec.validate()?;
    Ok(match image_space_change(spec, target)? {
        Some((k_dst, r_rel)) => warp_validity(&target.intrinsics, &k_dst, &r_rel),
        None => Mask::new(target.width(), target.height(), true),
    })
}

/// One benchmark case: transformed target (and contexts, for world-level
/// kinds), resampled ground truth and the pixels where it is defined.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchCase {
    pub spec: TransformSpec,
    pub transformed_target: Camera,
    pub contexts: Vec<ContextView>,
    pub warped_gt: ColorImage,
    pub valid_mask: Mask,
    pub world_scale_factor: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseRecord {
    pub spec: TransformSpec,
    pub camera: CameraRecord,
    pub world_scale_factor: f64,
    pub valid_fraction: f64,
}

impl BenchCase {
    pub fn record(&self) -> CaseRecord {
        CaseRecord {
            spec: self.spec.clone(),
            camera: CameraRecord::from(&self.transformed_target),
            world_scale_factor: self.world_scale_factor,
            valid_fraction: self.valid_mask.fraction(),
        }
    }

    /// Writes `case.json`, `gt.png` and `valid.png` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join("case.json");
        let json = serde_json::to_string_pretty(&self.record()).expect("case serializes");
        std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
        save_image(dir.join("gt.png"), &self.warped_gt)?;
        save_mask(dir.join("valid.png"), &self.valid_mask)
    }
}

pub fn apply_transform(
    spec: &TransformSpec,
    target: &Camera,
    gt: &ColorImage,
    contexts: &[ContextView],
) -> Result<BenchCase> {
    spec.validate()?;
    if (gt.width(), gt.height()) != (target.width(), target.height()) {
        return Err(Error::dims(
            format!("{}x{} ground truth", target.width(), target.height()),
            format!("{}x{}", gt.width(), gt.height()),
        ));
    }
    let untouched = |camera: Camera, contexts: Vec<ContextView>, scale: f64| BenchCase {
        spec: spec.clone(),
        transformed_target: camera,
        contexts,
        warped_gt: gt.clone(),
        valid_mask: Mask::new(gt.width(), gt.height(), true),
        world_scale_factor: scale,
    };
    match spec {
        TransformSpec::WorldScale { scale } => {
            let ctx = contexts
                .iter()
                .map(|c| c.apply_world_scale(*scale))
                .collect::<Result<Vec<_>>>()?;
            Ok(untouched(target.apply_world_scale(*scale)?, ctx, *scale))
        }
        TransformSpec::RandomGauge {
            seed,
            max_rotation,
            max_translation,
        } => {
            let g = random_gauge(*seed, *max_rotation, *max_translation)?;
            let ctx = contexts.iter().map(|c| c.apply_gauge(&g)).collect();
            Ok(untouched(target.apply_gauge(&g), ctx, 1.0))
        }
        _ => {
            let (k_dst, r_rel) = image_space_change(spec, target)?.expect("image-space kind");
            let camera = match spec {
                TransformSpec::Roll { angle } => target.apply_roll(*angle).with_intrinsics(k_dst),
                _ => target.with_intrinsics(k_dst),
            };
            let (warped_gt, valid_mask) = homography_warp(gt, &target.intrinsics, &k_dst, &r_rel)?;
            Ok(BenchCase {
                spec: spec.clone(),
                transformed_target: camera,
                contexts: contexts.to_vec(),
                warped_gt,
                valid_mask,
                world_scale_factor: 1.0,
            })
        }
    }
}
