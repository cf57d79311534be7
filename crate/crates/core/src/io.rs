//! On-disk formats: raw `f32` tensors, PFM depth, 8-bit PNG and `scene.json`
//! bundles.
//!
//! Raw tensor layout (little-endian):
//!
//! | offset | size | field                     |
//! |--------|------|---------------------------|
//! | 0      | 4    | magic `b"RTNS"`           |
//! | 4      | 4    | height `u32`              |
//! | 8      | 4    | width `u32`               |
//! | 12     | 4    | channels `u32`            |
//! | 16     | 4·HWC| `f32` samples, row-major, channel-interleaved |

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::camera::{check_rotation, Camera, Intrinsics, RigidTransform};
use crate::error::{Error, Result};
use crate::image::{ColorImage, DepthMap, Mask};

pub const TENSOR_MAGIC: [u8; 4] = *b"RTNS";
const TENSOR_HEADER_LEN: usize = 16;

/// Rotation tolerance accepted when loading cameras from disk.
pub const LOAD_ROTATION_TOLERANCE: f64 = 1e-6;

/// Dense `H×W×C` buffer of `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::dims(
                format!("{height}x{width}x{channels}"),
                format!("{} samples", data.len()),
            ));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(TENSOR_HEADER_LEN + self.data.len() * 4);
        out.extend_from_slice(&TENSOR_MAGIC);
        for dim in [self.height, self.width, self.channels] {
            out.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let malformed = |message: String| Error::MalformedHeader {
            path: path.to_path_buf(),
            message,
        };
        if bytes.len() < TENSOR_HEADER_LEN {
            return Err(malformed(format!(
                "file is {} bytes, header needs 16",
                bytes.len()
            )));
        }
        if bytes[..4] != TENSOR_MAGIC {
            return Err(malformed(format!("bad magic {:?}", &bytes[..4])));
        }
        let dim =
            |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
        let (height, width, channels) = (dim(0), dim(1), dim(2));
        let expected = height
            .checked_mul(width)
            .and_then(|n| n.checked_mul(channels))
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| malformed("dimensions overflow".into()))?;
        let payload = &bytes[TENSOR_HEADER_LEN..];
        if payload.len() != expected {
            return Err(malformed(format!(
                "{height}x{width}x{channels} needs {expected} payload bytes, found {}",
                payload.len()
            )));
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }
}

pub fn save_raw_tensor(path: impl AsRef<Path>, tensor: &Tensor) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, tensor.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_raw_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    Tensor::from_bytes(&bytes, path)
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })
}

/// `v ↦ round(v·255)` with halves rounded up.
#[inline]
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

pub fn save_image(path: impl AsRef<Path>, image: &ColorImage) -> Result<()> {
    let path = path.as_ref();
    let bytes: Vec<u8> = image.data().iter().map(|v| quantize(*v)).collect();
    image::save_buffer_with_format(
        path,
        &bytes,
        image.width() as u32,
        image.height() as u32,
        image::ExtendedColorType::Rgb8,
        image::ImageFormat::Png,
    )
    .map_err(|e| codec_error(path, e))
}

pub fn load_image(path: impl AsRef<Path>) -> Result<ColorImage> {
    let path = path.as_ref();
    let decoded = decode_png(path)?.to_rgb8();
    let (w, h) = decoded.dimensions();
    let data = decoded
        .into_raw()
        .into_iter()
        .map(|b| b as f64 / 255.0)
        .collect();
    ColorImage::from_raw(w as usize, h as usize, data)
}

/// Masks are stored as 8-bit grayscale, `255` for true and `0` for false.
pub fn save_mask(path: impl AsRef<Path>, mask: &Mask) -> Result<()> {
    let path = path.as_ref();
    let bytes: Vec<u8> = mask
        .data()
        .iter()
        .map(|b| if *b { 255 } else { 0 })
        .collect();
    image::save_buffer_with_format(
        path,
        &bytes,
        mask.width() as u32,
        mask.height() as u32,
        image::ExtendedColorType::L8,
        image::ImageFormat::Png,
    )
    .map_err(|e| codec_error(path, e))
}

/// Any nonzero sample reads as true.
pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let path = path.as_ref();
    let decoded = decode_png(path)?.to_luma8();
    let (w, h) = decoded.dimensions();
    let data = decoded.into_raw().into_iter().map(|b| b != 0).collect();
    Mask::from_raw(w as usize, h as usize, data)
}

fn decode_png(path: &Path) -> Result<image::DynamicImage> {
    let bytes = read_file(path)?;
    image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
        .map_err(|e| codec_error(path, e))
}

fn codec_error(path: &Path, e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Codec {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    }
}

/// Single-channel little-endian PFM, rows stored bottom to top.
pub fn save_pfm(path: impl AsRef<Path>, depth: &DepthMap) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = (depth.width(), depth.height());
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w * h * 4);
    for row in (0..h).rev() {
        for col in 0..w {
            out.extend_from_slice(&(depth.get(col, row) as f32).to_le_bytes());
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_pfm(path: impl AsRef<Path>) -> Result<DepthMap> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    let malformed = |message: &str| Error::MalformedHeader {
        path: path.to_path_buf(),
        message: message.to_string(),
    };

    // three whitespace-terminated header tokens groups: "Pf", "W H", "scale"
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    let mut lines = 0;
    while lines < 3 {
        let end = bytes[pos..]
            .iter()
            .position(|b| *b == b'\n')
            .ok_or_else(|| malformed("truncated PFM header"))?;
        let line = std::str::from_utf8(&bytes[pos..pos + end])
            .map_err(|_| malformed("non-UTF8 PFM header"))?;
        fields.extend(line.split_whitespace().map(str::to_owned));
        pos += end + 1;
        lines += 1;
    }
    if fields.len() != 4 || fields[0] != "Pf" {
        return Err(malformed("expected single-channel 'Pf' header"));
    }
    let w: usize = fields[1].parse().map_err(|_| malformed("bad width"))?;
    let h: usize = fields[2].parse().map_err(|_| malformed("bad height"))?;
    let scale: f64 = fields[3].parse().map_err(|_| malformed("bad scale"))?;
    let little_endian = scale < 0.0;

    let payload = &bytes[pos..];
    if payload.len() != w * h * 4 {
        return Err(malformed("payload size does not match dimensions"));
    }
    let mut data = vec![0.0f64; w * h];
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let raw: [u8; 4] = chunk.try_into().unwrap();
        let v = if little_endian {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let (row_from_bottom, col) = (i / w, i % w);
        data[(h - 1 - row_from_bottom) * w + col] = v as f64;
    }
    DepthMap::from_raw(w, h, data)
}

/// Camera as it appears in `scene.json`: intrinsics plus world-to-camera `R` (row-major) and `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraRecord {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    #[serde(rename = "R")]
    pub rotation: [f64; 9],
    pub t: [f64; 3],
}

impl From<&Camera> for CameraRecord {
    fn from(cam: &Camera) -> Self {
        let k = cam.intrinsics;
        let r = cam.extrinsics.rotation();
        let t = cam.extrinsics.translation();
        let mut rotation = [0.0; 9];
        for row in 0..3 {
            for col in 0..3 {
                rotation[row * 3 + col] = r[(row, col)];
            }
        }
        Self {
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            width: k.width,
            height: k.height,
            rotation,
            t: [t.x, t.y, t.z],
        }
    }
}

impl CameraRecord {
    pub fn to_camera(&self) -> Result<Camera> {
        let intrinsics =
            Intrinsics::new(self.fx, self.fy, self.cx, self.cy, self.width, self.height)?;
        let r = Matrix3::from_row_slice(&self.rotation);
        check_rotation(&r, LOAD_ROTATION_TOLERANCE)?;
        let extrinsics = RigidTransform::from_parts_unchecked(r, Vector3::from(self.t));
        Camera::new(intrinsics, extrinsics)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SceneFile {
    #[serde(default)]
    world_unit: String,
    views: Vec<ViewRecord>,
    context_ids: Vec<String>,
    #[serde(default)]
    target_ids: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ViewRecord {
    id: String,
    camera: CameraRecord,
    color: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    depth: Option<String>,
}

/// One posed view with its loaded buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub id: String,
    pub camera: Camera,
    /// Color file name relative to the scene directory.
    pub color_file: String,
    pub depth_file: Option<String>,
    pub color: ColorImage,
    pub depth: Option<DepthMap>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneBundle {
    pub views: Vec<View>,
    pub context_ids: Vec<String>,
    pub target_ids: Vec<String>,
    pub world_unit: String,
}

impl SceneBundle {
    pub fn view(&self, id: &str) -> Result<&View> {
        self.views
            .iter()
            .find(|v| v.id == id)
            .ok_or_else(|| Error::UnknownView(id.to_string()))
    }

    /// `(color, depth, camera)` triples for the given ids; every view must carry depth.
    pub fn contexts(&self, ids: &[String]) -> Result<Vec<crate::conditioning::ContextView>> {
        ids.iter()
            .map(|id| {
                let v = self.view(id)?;
                let depth = v.depth.clone().ok_or_else(|| {
                    Error::InvalidSpec(format!("context view {id:?} has no depth map"))
                })?;
                crate::conditioning::ContextView::new(v.color.clone(), depth, v.camera)
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for v in &self.views {
            if !seen.insert(v.id.as_str()) {
                return Err(Error::InvalidSpec(format!("duplicate view id {:?}", v.id)));
            }
            let (w, h) = (v.camera.width(), v.camera.height());
            if (v.color.width(), v.color.height()) != (w, h) {
                return Err(Error::dims(
                    format!("{w}x{h} color for view {:?}", v.id),
                    format!("{}x{}", v.color.width(), v.color.height()),
                ));
            }
            if let Some(d) = &v.depth {
                if (d.width(), d.height()) != (w, h) {
                    return Err(Error::dims(
                        format!("{w}x{h} depth for view {:?}", v.id),
                        format!("{}x{}", d.width(), d.height()),
                    ));
                }
            }
        }
        for id in &self.context_ids {
            if self.view(id)?.depth.is_none() {
                return Err(Error::InvalidSpec(format!(
                    "context view {id:?} has no depth map"
                )));
            }
        }
        for id in &self.target_ids {
            self.view(id)?;
        }
        Ok(())
    }
}

pub const SCENE_FILE: &str = "scene.json";

pub fn load_scene(dir: impl AsRef<Path>) -> Result<SceneBundle> {
    let dir = dir.as_ref();
    let json_path = dir.join(SCENE_FILE);
    let text = String::from_utf8(read_file(&json_path)?).map_err(|e| Error::MalformedJson {
        path: json_path.clone(),
        message: e.to_string(),
    })?;
    let file: SceneFile = serde_json::from_str(&text).map_err(|e| Error::MalformedJson {
        path: json_path.clone(),
        message: e.to_string(),
    })?;

    let mut views = Vec::with_capacity(file.views.len());
    for rec in file.views {
        let camera = rec.camera.to_camera()?;
        let color = load_image(resolve(dir, &rec.color)?)?;
        let depth = match &rec.depth {
            Some(p) => Some(load_pfm(resolve(dir, p)?)?),
            None => None,
        };
        views.push(View {
            id: rec.id,
            camera,
            color_file: rec.color,
            depth_file: rec.depth,
            color,
            depth,
        });
    }
    let bundle = SceneBundle {
        views,
        context_ids: file.context_ids,
        target_ids: file.target_ids,
        world_unit: file.world_unit,
    };
    bundle.validate()?;
    Ok(bundle)
}

fn resolve(dir: &Path, rel: &str) -> Result<PathBuf> {
    let p = dir.join(rel);
    if !p.is_file() {
        return Err(Error::MissingFile(p));
    }
    Ok(p)
}

/// Writes `scene.json` and every view's buffers into `dir` (created if needed).
pub fn save_scene(dir: impl AsRef<Path>, bundle: &SceneBundle) -> Result<()> {
    let dir = dir.as_ref();
    bundle.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut records = Vec::with_capacity(bundle.views.len());
    for v in &bundle.views {
        save_image(dir.join(&v.color_file), &v.color)?;
        let depth_file = match (&v.depth, &v.depth_file) {
            (Some(d), Some(name)) => {
                save_pfm(dir.join(name), d)?;
                Some(name.clone())
            }
            (Some(_), None) => {
                return Err(Error::InvalidSpec(format!(
                    "view {:?} has depth but no depth file name",
                    v.id
                )))
            }
            (None, _) => None,
        };
        records.push(ViewRecord {
            id: v.id.clone(),
            camera: CameraRecord::from(&v.camera),
            color: v.color_file.clone(),
            depth: depth_file,
        });
    }
    let file = SceneFile {
        world_unit: bundle.world_unit.clone(),
        views: records,
        context_ids: bundle.context_ids.clone(),
        target_ids: bundle.target_ids.clone(),
    };
    let path = dir.join(SCENE_FILE);
    let text = serde_json::to_string_pretty(&file).expect("scene serializes");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantization_convention() {
        assert_eq!(quantize(1.0), 255);
        assert_eq!(quantize(0.0), 0);
        assert_eq!(quantize(0.5), 128);
        assert_eq!(quantize(127.0 / 255.0), 127);
    }

    #[test]
    fn tensor_rejects_truncation() {
        let t = Tensor::new(2, 2, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let bytes = t.to_bytes();
        let p = Path::new("mem");
        assert_eq!(Tensor::from_bytes(&bytes, p).unwrap(), t);
        assert!(matches!(
            Tensor::from_bytes(&bytes[..bytes.len() - 1], p),
            Err(Error::MalformedHeader { .. })
        ));
        assert!(matches!(
            Tensor::from_bytes(&bytes[..10], p),
            Err(Error::MalformedHeader { .. })
        ));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            Tensor::from_bytes(&bad, p),
            Err(Error::MalformedHeader { .. })
        ));
    }

    #[test]
    fn camera_record_round_trip_is_exact() {
        let cam = Camera::look_at(
            Intrinsics::new(91.3, 88.1, 31.7, 30.2, 64, 60).unwrap(),
            Vector3::new(0.1, -0.7, -2.9),
            Vector3::new(0.3, 0.2, 4.0),
            Vector3::new(0.0, -1.0, 0.0),
        )
        .unwrap();
        let json = serde_json::to_string(&CameraRecord::from(&cam)).unwrap();
        let back: CameraRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_camera().unwrap(), cam);
    }

    #[test]
    fn reflected_rotation_is_convention_mismatch() {
        let mut rec = CameraRecord::from(
            &Camera::new(
                Intrinsics::centered(10.0, 4, 4).unwrap(),
                RigidTransform::identity(),
            )
            .unwrap(),
        );
        rec.rotation[8] = -1.0;
        assert!(matches!(rec.to_camera(), Err(Error::ConventionMismatch(_))));
    }
}
