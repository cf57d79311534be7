//! Pinhole cameras and rigid/similarity transforms.
//!
//! Extrinsics are stored world-to-camera: `X_cam = R * X_world + t`, with the
//! OpenCV axis convention (+x right, +y down, +z forward). Pixel `(i, j)` has
//! its continuous center at `(i + 0.5, j + 0.5)`.

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points with camera-frame z-depth at or below this are rejected by [`Camera::project`].
pub const EPSILON_DEPTH: f64 = 1e-8;

/// Tolerance used when validating rotation matrices.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    /// Square-pixel camera with the principal point at the image center.
    pub fn centered(focal: f64, width: usize, height: usize) -> Result<Self> {
        Self::new(
            focal,
            focal,
            width as f64 / 2.0,
            height as f64 / 2.0,
            width,
            height,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(Error::InvalidCamera(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return Err(Error::InvalidCamera(
                "principal point must be finite".into(),
            ));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidCamera(format!(
                "image size must be positive, got {}x{}",
                self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// `K^-1 [u, v, 1]`, i.e. the camera-frame ray with unit z.
    #[inline]
    pub fn backproject(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    /// Vertical field of view in radians.
    pub fn vertical_fov(&self) -> f64 {
        2.0 * (self.height as f64 / (2.0 * self.fy)).atan()
    }
}

/// An element of SE(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    /// Validates that `rotation` is orthonormal with determinant +1.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        check_rotation(&rotation, ROTATION_TOLERANCE)?;
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidCamera("translation must be finite".into()));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Skips validation; callers check the rotation with their own tolerance.
    pub(crate) fn from_parts_unchecked(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Rotation by `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64, translation: Vector3<f64>) -> Self {
        let rotation = if angle == 0.0 {
            Matrix3::identity()
        } else {
            Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle).into_inner()
        };
        Self {
            rotation,
            translation,
        }
    }

    pub fn rotation_z(angle: f64) -> Self {
        Self::from_axis_angle(Vector3::z(), angle, Vector3::zeros())
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    #[inline]
    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Rotation angle in radians, in `[0, π]`.
    pub fn angle(&self) -> f64 {
        let c = ((self.rotation.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        c.acos()
    }

    /// Largest absolute entry of `RᵀR - I` and `|det R - 1|`.
    pub fn orthonormality_error(&self) -> f64 {
        rotation_error(&self.rotation)
    }
}

/// An element of Sim(3): `X ↦ s·R·X + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    scale: f64,
    rigid: RigidTransform,
}

impl SimilarityTransform {
    pub fn new(scale: f64, rigid: RigidTransform) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::NonPositiveScale(scale));
        }
        Ok(Self { scale, rigid })
    }

    pub fn from_scale(scale: f64) -> Result<Self> {
        Self::new(scale, RigidTransform::identity())
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rigid.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.rigid.translation
    }

    #[inline]
    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.rigid.rotation * p) + self.rigid.translation
    }
}

impl From<RigidTransform> for SimilarityTransform {
    fn from(rigid: RigidTransform) -> Self {
        Self { scale: 1.0, rigid }
    }
}

/// Pinhole intrinsics plus world-to-camera pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub intrinsics: Intrinsics,
    pub extrinsics: RigidTransform,
}

impl Camera {
    pub fn new(intrinsics: Intrinsics, extrinsics: RigidTransform) -> Result<Self> {
        intrinsics.validate()?;
        let cam = Self {
            intrinsics,
            extrinsics,
        };
        if !cam.center().iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidCamera("camera center is not finite".into()));
        }
        Ok(cam)
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height
    }

    /// World-space camera center `-Rᵀ t`.
    pub fn center(&self) -> Vector3<f64> {
        -(self.extrinsics.rotation.transpose() * self.extrinsics.translation)
    }

    /// World-space optical axis (third row of `R`).
    pub fn forward(&self) -> Vector3<f64> {
        self.extrinsics.rotation.row(2).transpose()
    }

    /// Viewing ray through the continuous pixel position `(u, v)`.
    pub fn pixel_ray(&self, u: f64, v: f64) -> (Vector3<f64>, Vector3<f64>) {
        let dir_cam = self.intrinsics.backproject(u, v);
        let dir = (self.extrinsics.rotation.transpose() * dir_cam).normalize();
        (self.center(), dir)
    }

    #[inline]
    pub fn to_camera_frame(&self, world: &Vector3<f64>) -> Vector3<f64> {
        self.extrinsics.transform_point(world)
    }

    /// Projects a world point to `(u, v, z_depth)`.
    #[inline]
    pub fn project(&self, world: &Vector3<f64>) -> Result<(f64, f64, f64)> {
        let p = self.to_camera_frame(world);
        if p.z.is_nan() || p.z <= EPSILON_DEPTH {
            return Err(Error::PointBehindCamera { depth: p.z });
        }
        let k = &self.intrinsics;
        Ok((k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy, p.z))
    }

    /// Lifts `(u, v)` at z-depth `depth` to world space: `Rᵀ(Z·K⁻¹[u,v,1] − t)`.
    #[inline]
    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Vector3<f64> {
        let cam = self.intrinsics.backproject(u, v) * depth;
        self.extrinsics.rotation.transpose() * (cam - self.extrinsics.translation)
    }

    /// The same physical camera after the world is moved by `g`.
    pub fn apply_gauge(&self, g: &RigidTransform) -> Camera {
        let rotation = self.extrinsics.rotation * g.rotation.transpose();
        let translation = self.extrinsics.translation - rotation * g.translation;
        Camera {
            intrinsics: self.intrinsics,
            extrinsics: RigidTransform {
                rotation,
                translation,
            },
        }
    }

    /// Scales the world by `s` about the origin; the camera center moves to `s·C`.
    pub fn apply_world_scale(&self, s: f64) -> Result<Camera> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::NonPositiveScale(s));
        }
        Ok(Camera {
            intrinsics: self.intrinsics,
            extrinsics: RigidTransform {
                rotation: self.extrinsics.rotation,
                translation: self.extrinsics.translation * s,
            },
        })
    }

    /// Rolls the camera about its optical axis by `angle` radians; the center is fixed.
    pub fn apply_roll(&self, angle: f64) -> Camera {
        let rz = RigidTransform::rotation_z(angle).rotation;
        Camera {
            intrinsics: self.intrinsics,
            extrinsics: RigidTransform {
                rotation: rz * self.extrinsics.rotation,
                translation: rz * self.extrinsics.translation,
            },
        }
    }

    /// Camera with the given world-space center and unchanged orientation.
    pub fn with_center(&self, center: &Vector3<f64>) -> Camera {
        Camera {
            intrinsics: self.intrinsics,
            extrinsics: RigidTransform {
                rotation: self.extrinsics.rotation,
                translation: -(self.extrinsics.rotation * center),
            },
        }
    }

    pub fn with_intrinsics(&self, intrinsics: Intrinsics) -> Camera {
        Camera {
            intrinsics,
            extrinsics: self.extrinsics,
        }
    }

    /// Camera at `eye` looking at `target`, with `up` roughly opposite to image +y.
    pub fn look_at(
        intrinsics: Intrinsics,
        eye: Vector3<f64>,
        target: Vector3<f64>,
        up: Vector3<f64>,
    ) -> Result<Camera> {
        let z = (target - eye).normalize();
        let x = z.cross(&(-up));
        if x.norm() < 1e-12 {
            return Err(Error::InvalidCamera(
                "up vector parallel to viewing direction".into(),
            ));
        }
        let x = x.normalize();
        let y = z.cross(&x);
        let rotation = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        let translation = -(rotation * eye);
        Camera::new(intrinsics, RigidTransform::new(rotation, translation)?)
    }
}

pub(crate) fn rotation_error(r: &Matrix3<f64>) -> f64 {
    let ortho = (r.transpose() * r - Matrix3::identity()).amax();
    ortho.max((r.determinant() - 1.0).abs())
}

pub(crate) fn check_rotation(r: &Matrix3<f64>, tol: f64) -> Result<()> {
    if !r.iter().all(|v| v.is_finite()) {
        return Err(Error::ConventionMismatch(
            "rotation has non-finite entries".into(),
        ));
    }
    let err = rotation_error(r);
    if err > tol {
        return Err(Error::ConventionMismatch(format!(
            "rotation is not a proper orthonormal matrix (error {err:.3e}, det {:.6})",
            r.determinant()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_camera() -> Camera {
        Camera::new(
            Intrinsics::new(100.0, 100.0, 50.0, 50.0, 100, 100).unwrap(),
            RigidTransform::identity(),
        )
        .unwrap()
    }

    fn close(a: &Vector3<f64>, b: &Vector3<f64>, tol: f64) -> bool {
        (a - b).amax() <= tol
    }

    #[test]
    fn principal_ray() {
        let (o, d) = identity_camera().pixel_ray(50.0, 50.0);
        assert_eq!(o, Vector3::zeros());
        assert!(close(&d, &Vector3::z(), 1e-15));
    }

    #[test]
    fn one_focal_offset_is_45_degrees() {
        let (_, d) = identity_camera().pixel_ray(150.0, 50.0);
        let expected = Vector3::new(1.0, 0.0, 1.0) / 2f64.sqrt();
        assert!(close(&d, &expected, 1e-15));
        assert!((d.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn translated_center() {
        let mut cam = identity_camera();
        cam.extrinsics = RigidTransform::from_translation(Vector3::new(0.0, 0.0, -2.0));
        let (o, d) = cam.pixel_ray(50.0, 50.0);
        assert_eq!(o, Vector3::new(0.0, 0.0, 2.0));
        assert!(close(&d, &Vector3::z(), 1e-15));
    }

    #[test]
    fn project_examples() {
        let cam = identity_camera();
        assert_eq!(
            cam.project(&Vector3::new(0.0, 0.0, 2.0)).unwrap(),
            (50.0, 50.0, 2.0)
        );
        assert_eq!(
            cam.project(&Vector3::new(1.0, 0.0, 1.0)).unwrap(),
            (150.0, 50.0, 1.0)
        );
        assert!(matches!(
            cam.project(&Vector3::new(0.0, 0.0, -1.0)),
            Err(Error::PointBehindCamera { .. })
        ));
        assert!(cam.project(&Vector3::new(0.0, 0.0, 1e-9)).is_err());
    }

    #[test]
    fn gauge_identity_and_translation() {
        let cam = identity_camera();
        assert_eq!(cam.apply_gauge(&RigidTransform::identity()), cam);

        let g = RigidTransform::from_translation(Vector3::new(1.0, 0.0, 0.0));
        let moved = cam.apply_gauge(&g);
        assert!(close(&moved.center(), &Vector3::new(1.0, 0.0, 0.0), 1e-15));
        assert_eq!(moved.extrinsics.rotation(), cam.extrinsics.rotation());
    }

    #[test]
    fn gauge_rotation_about_z() {
        let mut cam = identity_camera();
        cam.extrinsics = RigidTransform::from_translation(Vector3::new(0.0, 0.0, -2.0));
        let g = RigidTransform::rotation_z(std::f64::consts::FRAC_PI_2);
        let moved = cam.apply_gauge(&g);
        assert!(close(&moved.center(), &Vector3::new(0.0, 0.0, 2.0), 1e-12));
        assert!(close(&moved.forward(), &Vector3::z(), 1e-12));
        // image x axis (world +x) now points along world +y
        let right = moved.extrinsics.rotation().row(0).transpose();
        assert!(close(&right, &Vector3::y(), 1e-12));

        for i in 0..100 {
            let t = i as f64 * 0.37;
            let x = Vector3::new(t.sin(), (1.3 * t).cos(), 3.0 + (0.7 * t).sin());
            let (u0, v0, z0) = cam.project(&x).unwrap();
            let (u1, v1, z1) = moved.project(&g.transform_point(&x)).unwrap();
            assert!((u0 - u1).abs() < 1e-9 && (v0 - v1).abs() < 1e-9 && (z0 - z1).abs() < 1e-12);
        }
    }

    #[test]
    fn world_scale() {
        let mut cam = identity_camera();
        assert_eq!(cam.apply_world_scale(1.0).unwrap(), cam);
        cam.extrinsics = RigidTransform::from_translation(Vector3::new(0.0, 0.0, -2.0));
        let scaled = cam.apply_world_scale(2.0).unwrap();
        assert_eq!(scaled.center(), Vector3::new(0.0, 0.0, 4.0));
        assert!(matches!(
            cam.apply_world_scale(0.0),
            Err(Error::NonPositiveScale(_))
        ));
        assert!(cam.apply_world_scale(-1.0).is_err());
    }

    #[test]
    fn compose_and_inverse() {
        let g = RigidTransform::from_axis_angle(
            Vector3::new(1.0, 2.0, 3.0),
            0.7,
            Vector3::new(0.5, -1.0, 2.0),
        );
        let id = g.compose(&g.inverse());
        assert!((id.rotation() - Matrix3::identity()).amax() < 1e-9);
        assert!(id.translation().amax() < 1e-9);
        assert_eq!(RigidTransform::identity().compose(&g), g);

        let q = RigidTransform::rotation_z(std::f64::consts::FRAC_PI_2);
        let half = q.compose(&q);
        let expected = RigidTransform::rotation_z(std::f64::consts::PI);
        assert!((half.rotation() - expected.rotation()).amax() < 1e-12);
        assert!(
            (half.rotation() - Matrix3::from_diagonal(&Vector3::new(-1.0, -1.0, 1.0))).amax()
                < 1e-12
        );
    }

    #[test]
    fn reflection_is_rejected() {
        let r = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(matches!(
            RigidTransform::new(r, Vector3::zeros()),
            Err(Error::ConventionMismatch(_))
        ));
    }

    #[test]
    fn intrinsics_validation() {
        assert!(Intrinsics::new(0.0, 1.0, 0.0, 0.0, 1, 1).is_err());
        assert!(Intrinsics::new(1.0, 1.0, 0.0, 0.0, 0, 1).is_err());
        assert!(Intrinsics::new(1.0, 1.0, 0.0, 0.0, 1, 1).is_ok());
    }

    #[test]
    fn roll_keeps_center() {
        let cam = Camera::look_at(
            Intrinsics::centered(80.0, 64, 48).unwrap(),
            Vector3::new(1.0, -0.5, -3.0),
            Vector3::zeros(),
            Vector3::new(0.0, -1.0, 0.0),
        )
        .unwrap();
        let rolled = cam.apply_roll(0.4);
        assert!(close(&rolled.center(), &cam.center(), 1e-12));
        assert!(close(&rolled.forward(), &cam.forward(), 1e-12));
    }
}
