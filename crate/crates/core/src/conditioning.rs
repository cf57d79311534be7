//! The projective conditioning operator: unproject context RGB-D views into a
//! shared world-space point cloud, then z-buffer splat it into a target camera.
//!
//! Splats are hard discs of a fixed pixel radius. A pixel is covered when its
//! center lies within the radius of the projected point (radius `0` covers
//! just the containing pixel). Per pixel the candidate with the smallest
//! `(depth, point index)` wins, so tiled parallel rasterization produces the
//! same buffers as a serial pass.

use std::path::Path;

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::camera::{Camera, RigidTransform, SimilarityTransform};
use crate::error::{Error, Result};
use crate::image::{ColorImage, DepthMap, Mask};
use crate::io::{save_image, save_mask, save_raw_tensor, Tensor};

pub const DEFAULT_SPLAT_RADIUS: f64 = 1.0;
pub const DEFAULT_TILE_SIZE: usize = 32;

/// Sentinel in [`ProjectionImage::winners`] for uncovered pixels.
pub const NO_POINT: u32 = u32::MAX;

/// A posed RGB-D view whose buffers match its camera.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextView {
    pub color: ColorImage,
    pub depth: DepthMap,
    pub camera: Camera,
}

impl ContextView {
    pub fn new(color: ColorImage, depth: DepthMap, camera: Camera) -> Result<Self> {
        check_dims(&color, &depth, &camera)?;
        Ok(Self {
            color,
            depth,
            camera,
        })
    }

    pub fn apply_gauge(&self, g: &RigidTransform) -> ContextView {
        ContextView {
            color: self.color.clone(),
            depth: self.depth.clone(),
            camera: self.camera.apply_gauge(g),
        }
    }

    /// Scales the camera translation and every depth sample by `s`.
    pub fn apply_world_scale(&self, s: f64) -> Result<ContextView> {
        Ok(ContextView {
            color: self.color.clone(),
            depth: self.depth.scaled(s)?,
            camera: self.camera.apply_world_scale(s)?,
        })
    }
}

fn check_dims(color: &ColorImage, depth: &DepthMap, camera: &Camera) -> Result<()> {
    let (w, h) = (camera.width(), camera.height());
    if (color.width(), color.height()) != (w, h) || (depth.width(), depth.height()) != (w, h) {
        return Err(Error::dims(
            format!("{w}x{h} buffers"),
            format!(
                "color {}x{}, depth {}x{}",
                color.width(),
                color.height(),
                depth.width(),
                depth.height()
            ),
        ));
    }
    Ok(())
}

/// World-space colored points with provenance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub positions: Vec<Vector3<f64>>,
    pub colors: Vec<[f64; 3]>,
    pub source_view: Vec<u32>,
    /// `(row, col)` of the originating pixel.
    pub source_pixel: Vec<(u32, u32)>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn push(&mut self, position: Vector3<f64>, color: [f64; 3], view: u32, pixel: (u32, u32)) {
        self.positions.push(position);
        self.colors.push(color);
        self.source_view.push(view);
        self.source_pixel.push(pixel);
    }
}

/// Lifts every valid-depth pixel center to world space. Points are emitted in
/// row-major pixel order and tagged with view index `0`.
pub fn unproject_view(color: &ColorImage, depth: &DepthMap, camera: &Camera) -> Result<PointCloud> {
    unproject_tagged(color, depth, camera, 0)
}

fn unproject_tagged(
    color: &ColorImage,
    depth: &DepthMap,
    camera: &Camera,
    view: u32,
) -> Result<PointCloud> {
    check_dims(color, depth, camera)?;
    let mut cloud = PointCloud::default();
    for row in 0..camera.height() {
        for col in 0..camera.width() {
            let z = depth.get(col, row);
            if z <= 0.0 {
                continue;
            }
            let world = camera.unproject(col as f64 + 0.5, row as f64 + 0.5, z);
            cloud.push(world, color.get(col, row), view, (row as u32, col as u32));
        }
    }
    Ok(cloud)
}

/// Concatenates clouds in order.
pub fn merge(clouds: impl IntoIterator<Item = PointCloud>) -> PointCloud {
    let mut out = PointCloud::default();
    for c in clouds {
        out.positions.extend(c.positions);
        out.colors.extend(c.colors);
        out.source_view.extend(c.source_view);
        out.source_pixel.extend(c.source_pixel);
    }
    out
}

/// Maps positions by `s·R·X + t`; colors and provenance are untouched.
pub fn transform_cloud(g: impl Into<SimilarityTransform>, cloud: &PointCloud) -> PointCloud {
    let g = g.into();
    PointCloud {
        positions: cloud
            .positions
            .iter()
            .map(|p| g.transform_point(p))
            .collect(),
        ..cloud.clone()
    }
}

/// Rasterized conditioning image.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionImage {
    pub color: ColorImage,
    pub coverage: Mask,
    /// Winning z-depth per pixel, `+∞` where uncovered.
    pub zbuffer: Vec<f64>,
    /// Winning point index per pixel, [`NO_POINT`] where uncovered.
    pub winners: Vec<u32>,
}

impl ProjectionImage {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            color: ColorImage::new(width, height),
            coverage: Mask::new(width, height, false),
            zbuffer: vec![f64::INFINITY; width * height],
            winners: vec![NO_POINT; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.color.width()
    }

    pub fn height(&self) -> usize {
        self.color.height()
    }

    pub fn zbuffer_tensor(&self) -> Tensor {
        let data = self.zbuffer.iter().map(|z| *z as f32).collect();
        Tensor::new(self.height(), self.width(), 1, data).expect("shape matches")
    }

    /// Writes `<prefix>color.png`, `<prefix>coverage.png` and `<prefix>zbuffer.rtns`.
    pub fn save(&self, dir: &Path, prefix: &str) -> Result<()> {
        save_image(dir.join(format!("{prefix}color.png")), &self.color)?;
        save_mask(dir.join(format!("{prefix}coverage.png")), &self.coverage)?;
        save_raw_tensor(
            dir.join(format!("{prefix}zbuffer.rtns")),
            &self.zbuffer_tensor(),
        )
    }

    /// Number of pixels whose coverage or color differ.
    pub fn differing_pixels(&self, other: &ProjectionImage) -> usize {
        assert!(self.color.same_shape(&other.color));
        (0..self.width() * self.height())
            .filter(|&i| {
                self.coverage.data()[i] != other.coverage.data()[i]
                    || self.color.data()[i * 3..i * 3 + 3] != other.color.data()[i * 3..i * 3 + 3]
            })
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterConfig {
    pub splat_radius: f64,
    pub tile_size: usize,
    pub parallel: bool,
}

impl Default for RasterConfig {
    fn default() -> Self {
        Self {
            splat_radius: DEFAULT_SPLAT_RADIUS,
            tile_size: DEFAULT_TILE_SIZE,
            parallel: true,
        }
    }
}

impl RasterConfig {
    pub fn with_radius(splat_radius: f64) -> Self {
        Self {
            splat_radius,
            ..Self::default()
        }
    }

    pub fn serial(mut self) -> Self {
        self.parallel = false;
        self
    }
}

#[derive(Debug, Clone, Copy)]
struct Splat {
    u: f64,
    v: f64,
    depth: f64,
    index: u32,
    // inclusive pixel bounds
    col0: usize,
    col1: usize,
    row0: usize,
    row1: usize,
}

/// Whether the pixel `(col, row)` is inside a splat centered at `(u, v)`.
#[inline]
pub fn splat_covers(u: f64, v: f64, radius: f64, col: usize, row: usize) -> bool {
    if radius == 0.0 {
        u.floor() == col as f64 && v.floor() == row as f64
    } else {
        let dx = col as f64 + 0.5 - u;
        let dy = row as f64 + 0.5 - v;
        dx * dx + dy * dy <= radius * radius
    }
}

fn make_splat(camera: &Camera, index: usize, p: &Vector3<f64>, r: f64) -> Option<Splat> {
    let (u, v, depth) = camera.project(p).ok()?;
    let (w, h) = (camera.width() as f64, camera.height() as f64);
    if !(u >= -r && u <= w + r && v >= -r && v <= h + r) {
        return None;
    }
    let span = |c: f64, n: usize| -> Option<(usize, usize)> {
        // one pixel of slack either side; the exact test happens per pixel
        let lo = (c - r - 0.5).floor() - 1.0;
        let hi = (c + r - 0.5).ceil() + 1.0;
        let lo = lo.max(0.0) as usize;
        let hi = hi.min(n as f64 - 1.0);
        if hi < 0.0 || lo as f64 > hi {
            return None;
        }
        Some((lo, hi as usize))
    };
    let (col0, col1) = span(u, camera.width())?;
    let (row0, row1) = span(v, camera.height())?;
    Some(Splat {
        u,
        v,
        depth,
        index: index as u32,
        col0,
        col1,
        row0,
        row1,
    })
}

#[inline]
fn wins(depth: f64, index: u32, best_depth: f64, best_index: u32) -> bool {
    match depth.total_cmp(&best_depth) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Equal => index < best_index,
        std::cmp::Ordering::Greater => false,
    }
}

/// Rasterizes with the default tile size in parallel.
pub fn rasterize(
    cloud: &PointCloud,
    camera: &Camera,
    splat_radius: f64,
) -> Result<ProjectionImage> {
    rasterize_with(cloud, camera, &RasterConfig::with_radius(splat_radius))
}

pub fn rasterize_with(
    cloud: &PointCloud,
    camera: &Camera,
    config: &RasterConfig,
) -> Result<ProjectionImage> {
    let r = config.splat_radius;
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::InvalidSpec(format!(
            "splat radius must be finite and >= 0, got {r}"
        )));
    }
    if cloud.len() >= NO_POINT as usize {
        return Err(Error::InvalidSpec(format!(
            "too many points: {}",
            cloud.len()
        )));
    }
    let (w, h) = (camera.width(), camera.height());
    let tile = config.tile_size.max(1);
    let (tiles_x, tiles_y) = (w.div_ceil(tile), h.div_ceil(tile));

    let splats: Vec<Splat> = if config.parallel {
        cloud
            .positions
            .par_iter()
            .enumerate()
            .filter_map(|(i, p)| make_splat(camera, i, p, r))
            .collect()
    } else {
        cloud
            .positions
            .iter()
            .enumerate()
            .filter_map(|(i, p)| make_splat(camera, i, p, r))
            .collect()
    };

    // bin in point order, so every tile list is ascending in point index
    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); tiles_x * tiles_y];
    for (k, s) in splats.iter().enumerate() {
        for ty in s.row0 / tile..=s.row1 / tile {
            for tx in s.col0 / tile..=s.col1 / tile {
                bins[ty * tiles_x + tx].push(k as u32);
            }
        }
    }

    let shade_tile = |t: usize| -> (usize, Vec<(f64, u32)>) {
        let (tx, ty) = (t % tiles_x, t / tiles_x);
        let (c0, r0) = (tx * tile, ty * tile);
        let (c1, r1) = ((c0 + tile).min(w), (r0 + tile).min(h));
        let tw = c1 - c0;
        let mut best = vec![(f64::INFINITY, NO_POINT); tw * (r1 - r0)];
        for &k in &bins[t] {
            let s = &splats[k as usize];
            for row in s.row0.max(r0)..=s.row1.min(r1 - 1) {
                for col in s.col0.max(c0)..=s.col1.min(c1 - 1) {
                    if !splat_covers(s.u, s.v, r, col, row) {
                        continue;
                    }
                    let slot = &mut best[(row - r0) * tw + (col - c0)];
                    if wins(s.depth, s.index, slot.0, slot.1) {
                        *slot = (s.depth, s.index);
                    }
                }
            }
        }
        (t, best)
    };

    let shaded: Vec<(usize, Vec<(f64, u32)>)> = if config.parallel {
        (0..bins.len()).into_par_iter().map(shade_tile).collect()
    } else {
        (0..bins.len()).map(shade_tile).collect()
    };

    let mut out = ProjectionImage::empty(w, h);
    for (t, best) in shaded {
        let (c0, r0) = ((t % tiles_x) * tile, (t / tiles_x) * tile);
        let tw = (c0 + tile).min(w) - c0;
        for (k, &(depth, index)) in best.iter().enumerate() {
            if index == NO_POINT {
                continue;
            }
            let (col, row) = (c0 + k % tw, r0 + k / tw);
            let p = row * w + col;
            out.zbuffer[p] = depth;
            out.winners[p] = index;
            out.coverage.set(col, row, true);
            out.color
                .pixel_mut(p)
                .copy_from_slice(&cloud.colors[index as usize]);
        }
    }
    Ok(out)
}

/// `Rast(∪ UnProj(context), target)`.
pub fn projective_condition(
    contexts: &[ContextView],
    target: &Camera,
    splat_radius: f64,
) -> Result<ProjectionImage> {
    projective_condition_with(contexts, target, &RasterConfig::with_radius(splat_radius))
}

pub fn projective_condition_with(
    contexts: &[ContextView],
    target: &Camera,
    config: &RasterConfig,
) -> Result<ProjectionImage> {
    let cloud = unproject_all(contexts)?;
    rasterize_with(&cloud, target, config)
}

/// Merged cloud of all contexts, tagged with their position in `contexts`.
pub fn unproject_all(contexts: &[ContextView]) -> Result<PointCloud> {
    let clouds = contexts
        .iter()
        .enumerate()
        .map(|(i, c)| unproject_tagged(&c.color, &c.depth, &c.camera, i as u32))
        .collect::<Result<Vec<_>>>()?;
    Ok(merge(clouds))
}
