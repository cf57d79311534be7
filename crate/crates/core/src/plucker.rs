//! Plücker line coordinates `(m, d)` with `m = o × d` and unit `d`.
//!
//! Used to measure how a global rigid change of world frame perturbs
//! per-pixel ray encodings.

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::camera::{Camera, RigidTransform};
use crate::error::{Error, Result};
use crate::io::Tensor;

const UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PluckerRay {
    pub moment: Vector3<f64>,
    pub direction: Vector3<f64>,
}

impl PluckerRay {
    /// Line through `origin` along the unit vector `direction`.
    pub fn from_ray(origin: &Vector3<f64>, direction: &Vector3<f64>) -> Result<Self> {
        let n = direction.norm();
        if n.is_nan() || (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::NonUnitDirection(n));
        }
        Ok(Self {
            moment: origin.cross(direction),
            direction: *direction,
        })
    }

    /// Line through two distinct points, direction `a → b`.
    pub fn through_points(a: &Vector3<f64>, b: &Vector3<f64>) -> Result<Self> {
        let d = b - a;
        let n = d.norm();
        if n == 0.0 {
            return Err(Error::NonUnitDirection(0.0));
        }
        Self::from_ray(a, &(d / n))
    }

    /// Raw coordinates, no invariant checks.
    pub fn from_parts(moment: Vector3<f64>, direction: Vector3<f64>) -> Self {
        Self { moment, direction }
    }

    /// `(m·d, |d| − 1)`; both zero for a valid normalized line.
    pub fn klein_residual(&self) -> (f64, f64) {
        (
            self.moment.dot(&self.direction),
            self.direction.norm() - 1.0,
        )
    }

    /// Rigid action on lines: `(R m + [t]× R d, R d)`.
    pub fn transformed(&self, g: &RigidTransform) -> PluckerRay {
        let rd = g.rotation() * self.direction;
        PluckerRay {
            moment: g.rotation() * self.moment + g.translation().cross(&rd),
            direction: rd,
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        let (m, d) = (&self.moment, &self.direction);
        [m.x, m.y, m.z, d.x, d.y, d.z]
    }

    /// Euclidean norm of the 6D difference.
    pub fn distance(&self, other: &PluckerRay) -> f64 {
        ((self.moment - other.moment).norm_squared()
            + (self.direction - other.direction).norm_squared())
        .sqrt()
    }
}

/// Applies `g` to a line; free-function form of [`PluckerRay::transformed`].
pub fn act_se3(g: &RigidTransform, ray: &PluckerRay) -> PluckerRay {
    ray.transformed(g)
}

/// Per-pixel Plücker coordinates of a camera, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PluckerMap {
    width: usize,
    height: usize,
    rays: Vec<PluckerRay>,
}

impl PluckerMap {
    /// Evaluates every pixel center. Rows are computed in parallel; the result
    /// does not depend on scheduling.
    pub fn from_camera(camera: &Camera) -> Self {
        let (w, h) = (camera.width(), camera.height());
        let rays = (0..h)
            .into_par_iter()
            .flat_map_iter(|row| (0..w).map(move |col| pixel_plucker(camera, col, row)))
            .collect();
        Self {
            width: w,
            height: h,
            rays,
        }
    }

    /// Serial evaluation, identical output to [`PluckerMap::from_camera`].
    pub fn from_camera_serial(camera: &Camera) -> Self {
        let (w, h) = (camera.width(), camera.height());
        let rays = (0..h)
            .flat_map(|row| (0..w).map(move |col| pixel_plucker(camera, col, row)))
            .collect();
        Self {
            width: w,
            height: h,
            rays,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn rays(&self) -> &[PluckerRay] {
        &self.rays
    }

    pub fn get(&self, col: usize, row: usize) -> &PluckerRay {
        &self.rays[row * self.width + col]
    }

    pub fn transformed(&self, g: &RigidTransform) -> PluckerMap {
        PluckerMap {
            width: self.width,
            height: self.height,
            rays: self.rays.iter().map(|r| r.transformed(g)).collect(),
        }
    }

    /// Largest `|m·d|` and `||d| − 1|` over the map.
    pub fn max_klein_residual(&self) -> (f64, f64) {
        self.rays.iter().fold((0.0f64, 0.0f64), |(o, n), r| {
            let (ro, rn) = r.klein_residual();
            (o.max(ro.abs()), n.max(rn.abs()))
        })
    }

    /// 6-channel `f32` tensor `[m, d]` per pixel.
    pub fn to_tensor(&self) -> Tensor {
        let data = self
            .rays
            .iter()
            .flat_map(|r| r.to_array().map(|v| v as f32))
            .collect();
        Tensor::new(self.height, self.width, 6, data).expect("shape matches by construction")
    }

    /// Reads a 6-channel tensor back. Single precision storage means the
    /// result only satisfies the line invariants to about `1e-7`.
    pub fn from_tensor(tensor: &Tensor) -> Result<Self> {
        if tensor.channels() != 6 {
            return Err(Error::dims(
                "6 channels",
                format!("{} channels", tensor.channels()),
            ));
        }
        let rays = tensor
            .data()
            .chunks_exact(6)
            .map(|c| {
                let v = |i: usize| c[i] as f64;
                PluckerRay::from_parts(
                    Vector3::new(v(0), v(1), v(2)),
                    Vector3::new(v(3), v(4), v(5)),
                )
            })
            .collect();
        Ok(Self {
            width: tensor.width(),
            height: tensor.height(),
            rays,
        })
    }
}

fn pixel_plucker(camera: &Camera, col: usize, row: usize) -> PluckerRay {
    let (o, d) = camera.pixel_ray(col as f64 + 0.5, row as f64 + 0.5);
    PluckerRay {
        moment: o.cross(&d),
        direction: d,
    }
}

/// Per-pixel scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn std_dev(&self) -> f64 {
        let mean = self.mean();
        let var =
            self.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / self.values.len() as f64;
        var.sqrt()
    }
}

/// `‖ρ(g)L − L‖₂` at every pixel of `map`.
pub fn perturbation_field(g: &RigidTransform, map: &PluckerMap) -> ScalarField {
    ScalarField {
        width: map.width,
        height: map.height,
        values: map
            .rays
            .iter()
            .map(|r| r.transformed(g).distance(r))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::Intrinsics;
    use std::f64::consts::FRAC_PI_2;

    fn v(x: f64, y: f64, z: f64) -> Vector3<f64> {
        Vector3::new(x, y, z)
    }

    fn cam_at(center: Vector3<f64>, size: usize) -> Camera {
        let k = Intrinsics::centered(size as f64, size, size).unwrap();
        Camera::new(k, RigidTransform::from_translation(-center)).unwrap()
    }

    #[test]
    fn construction_examples() {
        let r = PluckerRay::from_ray(&v(0.0, 0.0, 2.0), &v(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(r.moment, Vector3::zeros());
        let r = PluckerRay::from_ray(&v(1.0, 0.0, 0.0), &v(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(r.moment, v(0.0, -1.0, 0.0));
        let d = v(1.0, 2.0, -2.0) / 3.0;
        let r = PluckerRay::from_ray(&Vector3::zeros(), &d).unwrap();
        assert_eq!(r.moment, Vector3::zeros());
        assert!(matches!(
            PluckerRay::from_ray(&Vector3::zeros(), &v(0.0, 0.0, 2.0)),
            Err(Error::NonUnitDirection(_))
        ));
    }

    #[test]
    fn map_of_identity_camera() {
        let map = PluckerMap::from_camera(&cam_at(Vector3::zeros(), 9));
        assert_eq!(map.get(4, 4).moment, Vector3::zeros());
        let (ortho, norm) = map.max_klein_residual();
        assert!(ortho <= 1e-12 && norm <= 1e-12);
    }

    #[test]
    fn offset_camera_moment_magnitude() {
        let c = v(1.0, 0.0, 0.0);
        let map = PluckerMap::from_camera(&cam_at(c, 16));
        for ray in map.rays() {
            let sin = c.normalize().cross(&ray.direction).norm();
            assert!((ray.moment.norm() - sin * c.norm()).abs() < 1e-12);
            assert!((ray.moment - c.cross(&ray.direction)).amax() < 1e-15);
        }
    }

    #[test]
    fn action_examples() {
        let g = RigidTransform::from_translation(v(1.0, 0.0, 0.0));
        let r = PluckerRay::from_parts(Vector3::zeros(), v(0.0, 0.0, 1.0));
        let out = act_se3(&g, &r);
        assert_eq!(out.moment, v(0.0, -1.0, 0.0));
        assert_eq!(out.direction, v(0.0, 0.0, 1.0));

        let g = RigidTransform::rotation_z(FRAC_PI_2);
        let out = act_se3(
            &g,
            &PluckerRay::from_parts(Vector3::zeros(), v(1.0, 0.0, 0.0)),
        );
        assert!(out.moment.amax() < 1e-15);
        assert!((out.direction - v(0.0, 1.0, 0.0)).amax() < 1e-15);

        let g = RigidTransform::from_axis_angle(Vector3::z(), FRAC_PI_2, v(0.0, 0.0, 1.0));
        let line = PluckerRay::from_parts(Vector3::zeros(), v(1.0, 0.0, 0.0));
        let out = act_se3(&g, &line);
        // line through g(0) = (0,0,1) and g(e_x) = (0,1,1)
        let oracle = PluckerRay::through_points(&v(0.0, 0.0, 1.0), &v(0.0, 1.0, 1.0)).unwrap();
        assert!((out.moment - v(-1.0, 0.0, 0.0)).amax() < 1e-15);
        assert!(out.distance(&oracle) < 1e-15);
    }

    #[test]
    fn klein_residual_of_bad_ray() {
        let r = PluckerRay::from_parts(v(1.0, 0.0, 0.0), v(1.0, 0.0, 0.0));
        assert_eq!(r.klein_residual(), (1.0, 0.0));
    }

    #[test]
    fn perturbation_identity_is_zero() {
        let map = PluckerMap::from_camera(&cam_at(v(0.3, -0.2, -2.0), 8));
        let field = perturbation_field(&RigidTransform::identity(), &map);
        assert!(field.values.iter().all(|d| *d == 0.0));
    }

    #[test]
    fn perturbation_is_spatially_varying() {
        let map = PluckerMap::from_camera(&cam_at(Vector3::zeros(), 64));
        let rot = RigidTransform::from_axis_angle(v(0.2, 1.0, 0.3), 0.3, Vector3::zeros());
        assert!(perturbation_field(&rot, &map).std_dev() > 0.0);

        let generic = PluckerMap::from_camera(&cam_at(v(0.3, -0.2, -2.0), 64));
        let shift = RigidTransform::from_translation(v(0.0, 0.6, 0.8));
        let field = perturbation_field(&shift, &generic);
        assert!(field.max() / field.min() > 1.0);
    }

    #[test]
    fn parallel_map_matches_serial() {
        let cam = cam_at(v(0.3, -0.2, -2.0), 33);
        assert_eq!(
            PluckerMap::from_camera(&cam),
            PluckerMap::from_camera_serial(&cam)
        );
    }
}
