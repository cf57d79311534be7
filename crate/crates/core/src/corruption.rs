//! Masked-image corruption used as the self-supervised pretraining input.
//!
//! Three stages, each drawing from its own ChaCha stream of the spec seed:
//! patch removal, pixel sparsification of a subset of the surviving patches,
//! then a per-channel affine color jitter on whatever content remains.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ColorImage, Mask};

const STREAM_DEFAULTS: u64 = 0;
const STREAM_PATCHES: u64 = 1;
const STREAM_SPARSIFY_SELECT: u64 = 2;
const STREAM_PIXEL_DROP: u64 = 3;
const STREAM_COLOR: u64 = 4;

pub(crate) fn stream(seed: u64, tag: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag);
    rng
}

/// Non-overlapping `p×p` patch tiling, indexed row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchGrid {
    pub rows: usize,
    pub cols: usize,
    pub patch_size: usize,
}

impl PatchGrid {
    pub fn new(height: usize, width: usize, patch_size: usize) -> Result<Self> {
        if patch_size == 0
            || !height.is_multiple_of(patch_size)
            || !width.is_multiple_of(patch_size)
            || height == 0
            || width == 0
        {
            return Err(Error::IndivisibleImage {
                height,
                width,
                patch: patch_size,
            });
        }
        Ok(Self {
            rows: height / patch_size,
            cols: width / patch_size,
            patch_size,
        })
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(rows, cols)` pixel ranges covered by patch `index`.
    pub fn rect(&self, index: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let (r, c) = (index / self.cols, index % self.cols);
        let p = self.patch_size;
        (r * p..(r + 1) * p, c * p..(c + 1) * p)
    }

    pub fn patch_of(&self, col: usize, row: usize) -> usize {
        (row / self.patch_size) * self.cols + col / self.patch_size
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub patch_size: usize,
    pub patch_mask_ratio: f64,
    /// Fraction of surviving patches that get sparsified.
    pub sparsify_fraction: f64,
    pub pixel_drop_prob: f64,
    pub gain_range: [f64; 2],
    pub bias_range: [f64; 2],
    pub seed: u64,
}

impl CorruptionSpec {
    /// No-op corruption: nothing masked, identity color transform.
    pub fn identity(patch_size: usize, seed: u64) -> Self {
        Self {
            patch_size,
            patch_mask_ratio: 0.0,
            sparsify_fraction: 0.0,
            pixel_drop_prob: 0.0,
            gain_range: [1.0, 1.0],
            bias_range: [0.0, 0.0],
            seed,
        }
    }

    /// Default pretraining spec with the per-sample ratios drawn from `seed`:
    /// mask ratio in `[0.5, 0.9]`, drop probability in `[0.3, 0.9]`, half of
    /// the surviving patches sparsified, gain `[0.8, 1.25]`, bias `[-0.1, 0.1]`.
    pub fn sampled(seed: u64) -> Self {
        let mut rng = stream(seed, STREAM_DEFAULTS);
        Self {
            patch_size: 8,
            patch_mask_ratio: uniform(&mut rng, 0.5, 0.9),
            sparsify_fraction: 0.5,
            pixel_drop_prob: uniform(&mut rng, 0.3, 0.9),
            gain_range: [0.8, 1.25],
            bias_range: [-0.1, 0.1],
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidSpec(format!(
                    "{name} must be in [0, 1], got {v}"
                )))
            }
        };
        if self.patch_size == 0 {
            return Err(Error::InvalidSpec("patch_size must be >= 1".into()));
        }
        unit("patch_mask_ratio", self.patch_mask_ratio)?;
        unit("sparsify_fraction", self.sparsify_fraction)?;
        unit("pixel_drop_prob", self.pixel_drop_prob)?;
        let [glo, ghi] = self.gain_range;
        if !(glo > 0.0 && glo <= ghi && ghi.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "gain_range must satisfy 0 < lo <= hi, got {:?}",
                self.gain_range
            )));
        }
        let [blo, bhi] = self.bias_range;
        if !(blo <= bhi && blo.is_finite() && bhi.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "bias_range must satisfy lo <= hi, got {:?}",
                self.bias_range
            )));
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.random();
    lo + (hi - lo) * u
}

/// `k` distinct indices from `0..n`, returned in ascending order.
fn choose(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    let mut out = pool[..k].to_vec();
    out.sort_unstable();
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorruptedImage {
    pub image: ColorImage,
    /// One entry per patch, true where the patch was removed.
    pub patch_mask: Mask,
    /// True where the pixel was retained.
    pub pixel_mask: Mask,
    /// Indices of sparsified patches, ascending.
    pub sparsified: Vec<usize>,
    pub gains: [f64; 3],
    pub biases: [f64; 3],
}

impl CorruptedImage {
    pub fn removed_patches(&self) -> Vec<usize> {
        self.patch_mask
            .data()
            .iter()
            .enumerate()
            .filter_map(|(i, m)| m.then_some(i))
            .collect()
    }
}

pub fn corrupt(image: &ColorImage, spec: &CorruptionSpec) -> Result<CorruptedImage> {
    spec.validate()?;
    let (w, h) = (image.width(), image.height());
    let grid = PatchGrid::new(h, w, spec.patch_size)?;
    let n = grid.len();

    let n_removed = (spec.patch_mask_ratio * n as f64).round() as usize;
    let removed = choose(&mut stream(spec.seed, STREAM_PATCHES), n, n_removed.min(n));
    let mut patch_mask = Mask::new(grid.cols, grid.rows, false);
    for &i in &removed {
        patch_mask.set(i % grid.cols, i / grid.cols, true);
    }

    let surviving: Vec<usize> = (0..n).filter(|i| !patch_mask.data()[*i]).collect();
    let n_sparse = (spec.sparsify_fraction * surviving.len() as f64).round() as usize;
    let sparsified: Vec<usize> = choose(
        &mut stream(spec.seed, STREAM_SPARSIFY_SELECT),
        surviving.len(),
        n_sparse.min(surviving.len()),
    )
    .into_iter()
    .map(|k| surviving[k])
    .collect();

    let mut pixel_mask = Mask::new(w, h, true);
    for &i in &removed {
        let (rows, cols) = grid.rect(i);
        for row in rows {
            for col in cols.clone() {
                pixel_mask.set(col, row, false);
            }
        }
    }
    let mut drop_rng = stream(spec.seed, STREAM_PIXEL_DROP);
    for &i in &sparsified {
        let (rows, cols) = grid.rect(i);
        for row in rows {
            for col in cols.clone() {
                let u: f64 = drop_rng.random();
                if u < spec.pixel_drop_prob {
                    pixel_mask.set(col, row, false);
                }
            }
        }
    }

    let mut color_rng = stream(spec.seed, STREAM_COLOR);
    let mut gains = [0.0; 3];
    let mut biases = [0.0; 3];
    for c in 0..3 {
        gains[c] = uniform(&mut color_rng, spec.gain_range[0], spec.gain_range[1]);
        biases[c] = uniform(&mut color_rng, spec.bias_range[0], spec.bias_range[1]);
    }

    let mut out = ColorImage::new(w, h);
    for row in 0..h {
        for col in 0..w {
            if pixel_mask.get(col, row) {
                let v = image.get(col, row);
                out.set(
                    col,
                    row,
                    std::array::from_fn(|c| affine(v[c], gains[c], biases[c])),
                );
            }
        }
    }

    Ok(CorruptedImage {
        image: out,
        patch_mask,
        pixel_mask,
        sparsified,
        gains,
        biases,
    })
}

/// `clamp(gain·v + bias, 0, 1)`.
#[inline]
pub fn affine(v: f64, gain: f64, bias: f64) -> f64 {
    (gain * v + bias).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_image(w: usize, h: usize) -> ColorImage {
        ColorImage::from_fn(w, h, |c, r| {
            [
                0.05 + 0.9 * c as f64 / w as f64,
                0.05 + 0.9 * r as f64 / h as f64,
                0.5,
            ]
        })
    }

    #[test]
    fn grid_examples() {
        let g = PatchGrid::new(32, 32, 8).unwrap();
        assert_eq!((g.rows, g.cols, g.len()), (4, 4, 16));
        assert_eq!(g.rect(5), (8..16, 8..16));
        let g = PatchGrid::new(8, 8, 8).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.rect(0), (0..8, 0..8));
        assert!(matches!(
            PatchGrid::new(33, 32, 8),
            Err(Error::IndivisibleImage { .. })
        ));
        assert!(PatchGrid::new(8, 8, 0).is_err());
    }

    #[test]
    fn full_mask_zeros_everything() {
        let img = test_image(16, 16);
        let spec = CorruptionSpec {
            patch_mask_ratio: 1.0,
            ..CorruptionSpec::sampled(3)
        };
        let out = corrupt(&img, &spec).unwrap();
        assert!(out.patch_mask.all());
        assert!(out.pixel_mask.none());
        assert!(out.image.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn identity_spec_is_bit_exact() {
        let img = test_image(24, 16);
        let out = corrupt(&img, &CorruptionSpec::identity(8, 99)).unwrap();
        assert_eq!(out.image, img);
        assert!(out.pixel_mask.all());
        assert!(out.patch_mask.none());
    }

    #[test]
    fn indivisible_image() {
        let img = test_image(33, 32);
        assert!(matches!(
            corrupt(&img, &CorruptionSpec::identity(8, 0)),
            Err(Error::IndivisibleImage { .. })
        ));
    }

    #[test]
    fn invalid_specs() {
        let img = test_image(8, 8);
        let mut spec = CorruptionSpec::identity(8, 0);
        spec.patch_mask_ratio = 1.5;
        assert!(matches!(corrupt(&img, &spec), Err(Error::InvalidSpec(_))));
        let mut spec = CorruptionSpec::identity(8, 0);
        spec.gain_range = [0.0, 1.0];
        assert!(matches!(corrupt(&img, &spec), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn sampled_defaults_in_range() {
        for seed in 0..50 {
            let s = CorruptionSpec::sampled(seed);
            assert!((0.5..=0.9).contains(&s.patch_mask_ratio));
            assert!((0.3..=0.9).contains(&s.pixel_drop_prob));
            s.validate().unwrap();
        }
    }

    #[test]
    fn removed_patches_are_zero_and_unsparsified_are_full() {
        let img = test_image(32, 32);
        let spec = CorruptionSpec::sampled(11);
        let out = corrupt(&img, &spec).unwrap();
        let grid = PatchGrid::new(32, 32, 8).unwrap();
        for i in 0..grid.len() {
            let (rows, cols) = grid.rect(i);
            let removed = out.patch_mask.data()[i];
            let sparse = out.sparsified.contains(&i);
            assert!(!(removed && sparse));
            for row in rows {
                for col in cols.clone() {
                    if removed {
                        assert!(!out.pixel_mask.get(col, row));
                        assert_eq!(out.image.get(col, row), [0.0; 3]);
                    } else if !sparse {
                        assert!(out.pixel_mask.get(col, row));
                    }
                }
            }
        }
    }
}
