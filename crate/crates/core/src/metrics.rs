//! Image metrics: masked PSNR, SSIM, MSE and the seen/unseen split.
//!
//! Peak value is `1.0`. An exact match reports `+∞` dB, serialized as the
//! string `"inf"` rather than a capped number.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::image::{ColorImage, Mask};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn check_shapes(pred: &ColorImage, gt: &ColorImage) -> Result<()> {
    if !pred.same_shape(gt) {
        return Err(Error::dims(
            format!("{}x{}", gt.width(), gt.height()),
            format!("{}x{}", pred.width(), pred.height()),
        ));
    }
    Ok(())
}

/// Mean squared error over all channels of the masked pixels.
pub fn masked_mse(pred: &ColorImage, gt: &ColorImage, mask: &Mask) -> Result<f64> {
    check_shapes(pred, gt)?;
    if (mask.width(), mask.height()) != (gt.width(), gt.height()) {
        return Err(Error::dims(
            format!("{}x{} mask", gt.width(), gt.height()),
            format!("{}x{}", mask.width(), mask.height()),
        ));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    let (p, g) = (pred.data(), gt.data());
    for (i, _) in mask.data().iter().enumerate().filter(|(_, m)| **m) {
        for c in 0..3 {
            let d = p[i * 3 + c] - g[i * 3 + c];
            sum += d * d;
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(sum / (count * 3) as f64)
}

/// Full-image MSE (the pixel reconstruction term of the training loss).
pub fn mse(pred: &ColorImage, gt: &ColorImage) -> Result<f64> {
    masked_mse(pred, gt, &Mask::new(gt.width(), gt.height(), true))
}

/// `10·log10(1 / mse)`; `+∞` when `mse == 0`.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    }
}

pub fn masked_psnr(pred: &ColorImage, gt: &ColorImage, mask: &Mask) -> Result<f64> {
    masked_mse(pred, gt, mask).map(psnr_from_mse)
}

pub fn psnr(pred: &ColorImage, gt: &ColorImage) -> Result<f64> {
    mse(pred, gt).map(psnr_from_mse)
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, w) in k.iter_mut().enumerate() {
        let x = i as f64 - half;
        *w = (-(x * x) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= total);
    k
}

/// Separable "valid" Gaussian filter of a single-channel plane.
fn filter_valid(plane: &[f64], width: usize, height: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (ow, oh) = (width + 1 - SSIM_WINDOW, height + 1 - SSIM_WINDOW);
    let mut horiz = vec![0.0; ow * height];
    for row in 0..height {
        let line = &plane[row * width..(row + 1) * width];
        for col in 0..ow {
            horiz[row * ow + col] = k
                .iter()
                .zip(&line[col..col + SSIM_WINDOW])
                .map(|(w, v)| w * v)
                .sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for row in 0..oh {
        for col in 0..ow {
            out[row * ow + col] = k
                .iter()
                .enumerate()
                .map(|(i, w)| w * horiz[(row + i) * ow + col])
                .sum();
        }
    }
    out
}

/// Mean SSIM with an 11×11 Gaussian window (σ = 1.5), averaged over channels.
/// Only window positions fully inside the image contribute.
pub fn ssim(pred: &ColorImage, gt: &ColorImage) -> Result<f64> {
    check_shapes(pred, gt)?;
    let (w, h) = (gt.width(), gt.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::TooSmall {
            height: h,
            width: w,
            window: SSIM_WINDOW,
        });
    }
    let k = gaussian_kernel();
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let mut total = 0.0;
    for c in 0..3 {
        let x: Vec<f64> = pred.data().iter().skip(c).step_by(3).copied().collect();
        let y: Vec<f64> = gt.data().iter().skip(c).step_by(3).copied().collect();
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();
        let mx = filter_valid(&x, w, h, &k);
        let my = filter_valid(&y, w, h, &k);
        let sxx = filter_valid(&xx, w, h, &k);
        let syy = filter_valid(&yy, w, h, &k);
        let sxy = filter_valid(&xy, w, h, &k);
        let mut acc = 0.0;
        for i in 0..mx.len() {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cov = sxy[i] - ux * uy;
            acc += ((2.0 * ux * uy + c1) * (2.0 * cov + c2))
                / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
        }
        total += acc / mx.len() as f64;
    }
    Ok((total / 3.0).min(1.0))
}

/// Splits pixels into `(seen, unseen)`. Seen pixels are the coverage mask
/// dilated by `dilate_radius` pixels (Euclidean disc); `0` means no dilation.
pub fn seen_unseen_split(coverage: &Mask, dilate_radius: usize) -> (Mask, Mask) {
    let seen = if dilate_radius == 0 {
        coverage.clone()
    } else {
        let (w, h) = (coverage.width(), coverage.height());
        let r = dilate_radius as isize;
        let offsets: Vec<(isize, isize)> = (-r..=r)
            .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
            .filter(|(dx, dy)| dx * dx + dy * dy <= r * r)
            .collect();
        Mask::from_fn(w, h, |col, row| {
            offsets.iter().any(|(dx, dy)| {
                let (c, r) = (col as isize + dx, row as isize + dy);
                c >= 0
                    && r >= 0
                    && (c as usize) < w
                    && (r as usize) < h
                    && coverage.get(c as usize, r as usize)
            })
        })
    };
    let unseen = seen.not();
    (seen, unseen)
}

/// PSNR in dB; infinite values serialize as the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decibels(pub f64);

impl Serialize for Decibels {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Decibels {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(Decibels(v)),
            Repr::Str(s) if s == "inf" => Ok(Decibels(f64::INFINITY)),
            Repr::Str(s) => Err(serde::de::Error::custom(format!(
                "unexpected PSNR string {s:?}"
            ))),
        }
    }
}

/// One evaluated `(pred, gt)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub psnr_db: Decibels,
    pub ssim: Option<f64>,
    pub mse: f64,
    pub valid_pixel_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seen_psnr_db: Option<Decibels>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unseen_psnr_db: Option<Decibels>,
}

impl MetricReport {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// PSNR/MSE over `mask` (all pixels if `None`), full-image SSIM when the
/// image is large enough, and seen/unseen PSNR when `coverage` is given.
pub fn evaluate(
    pred: &ColorImage,
    gt: &ColorImage,
    mask: Option<&Mask>,
    coverage: Option<&Mask>,
    dilate_radius: usize,
) -> Result<MetricReport> {
    let full = Mask::new(gt.width(), gt.height(), true);
    let mask = mask.unwrap_or(&full);
    let mse = masked_mse(pred, gt, mask)?;
    let ssim = match ssim(pred, gt) {
        Ok(v) => Some(v),
        Err(Error::TooSmall { .. }) => None,
        Err(e) => return Err(e),
    };
    let (seen_psnr_db, unseen_psnr_db) = match coverage {
        Some(cov) => {
            let (seen, unseen) = seen_unseen_split(cov, dilate_radius);
            let part = |m: &Mask| match masked_psnr(pred, gt, &m.and(mask)) {
                Ok(v) => Ok(Some(Decibels(v))),
                Err(Error::EmptyMask) => Ok(None),
                Err(e) => Err(e),
            };
            (part(&seen)?, part(&unseen)?)
        }
        None => (None, None),
    };
    Ok(MetricReport {
        psnr_db: Decibels(psnr_from_mse(mse)),
        ssim,
        mse,
        valid_pixel_count: mask.count(),
        seen_psnr_db,
        unseen_psnr_db,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(w: usize, h: usize) -> ColorImage {
        ColorImage::from_fn(w, h, |c, r| {
            [
                0.1 + 0.8 * c as f64 / w as f64,
                0.1 + 0.8 * r as f64 / h as f64,
                0.3 + 0.02 * ((c + r) % 5) as f64,
            ]
        })
    }

    #[test]
    fn identical_is_infinite() {
        let g = gradient(8, 8);
        assert_eq!(psnr(&g, &g).unwrap(), f64::INFINITY);
    }

    #[test]
    fn uniform_offset_is_20_db() {
        let gt = ColorImage::filled(16, 16, [0.3, 0.5, 0.7]);
        let pred = ColorImage::filled(16, 16, [0.4, 0.6, 0.8]);
        let v = psnr(&pred, &gt).unwrap();
        assert!((v - 20.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn half_mask() {
        let gt = ColorImage::filled(10, 10, [0.5, 0.5, 0.5]);
        let pred = ColorImage::from_fn(10, 10, |c, _| {
            if c < 5 {
                [0.7, 0.3, 0.7]
            } else {
                [0.0, 1.0, 0.2]
            }
        });
        let mask = Mask::from_fn(10, 10, |c, _| c < 5);
        let v = masked_psnr(&pred, &gt, &mask).unwrap();
        // (0.7 - 0.5)^2 in binary is not exactly 0.04
        let d = 0.7f64 - 0.5;
        let d2 = 0.5f64 - 0.3;
        let direct = 10.0 * (1.0 / ((2.0 * d * d + d2 * d2) / 3.0)).log10();
        assert!((v - direct).abs() < 1e-10);
        assert!((v - 13.979400086720377).abs() < 1e-9);
    }

    #[test]
    fn empty_mask_errors() {
        let g = gradient(4, 4);
        assert!(matches!(
            masked_psnr(&g, &g, &Mask::new(4, 4, false)),
            Err(Error::EmptyMask)
        ));
    }

    #[test]
    fn ssim_examples() {
        let g = gradient(20, 16);
        assert!((ssim(&g, &g).unwrap() - 1.0).abs() < 1e-9);
        let a = ColorImage::filled(12, 12, [0.25, 0.5, 0.75]);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            ssim(&gradient(10, 20), &gradient(10, 20)),
            Err(Error::TooSmall { .. })
        ));
    }

    #[test]
    fn split_partitions() {
        let cov = Mask::from_fn(6, 5, |c, r| (c + r) % 3 == 0);
        let (seen, unseen) = seen_unseen_split(&cov, 0);
        assert_eq!(seen, cov);
        assert!(seen.or(&unseen).all());
        assert!(seen.and(&unseen).none());

        let (_, unseen) = seen_unseen_split(&Mask::new(4, 4, true), 0);
        assert!(unseen.none());
        let (seen, _) = seen_unseen_split(&Mask::new(4, 4, false), 2);
        assert!(seen.none());
    }

    #[test]
    fn dilation_grows_seen_region() {
        let mut cov = Mask::new(7, 7, false);
        cov.set(3, 3, true);
        let (seen, _) = seen_unseen_split(&cov, 1);
        assert_eq!(seen.count(), 5);
        let (seen, _) = seen_unseen_split(&cov, 2);
        assert_eq!(seen.count(), 13);
    }

    #[test]
    fn report_json_uses_inf_sentinel() {
        let g = gradient(12, 12);
        let report = evaluate(&g, &g, None, None, 0).unwrap();
        let line = report.to_json_line();
        assert!(line.contains("\"psnr_db\":\"inf\""), "{line}");
        let back: MetricReport = serde_json::from_str(&line).unwrap();
        assert_eq!(back, report);
    }
}
