//! Training/inference preprocessing: random crops, top-right zero padding
//! and per-channel color normalization.

use image::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layout::StereoSample;
use crate::error::{Error, Result};
use crate::maps::DisparityMap;

/// Crop size used for training batches (height, width).
pub const TRAIN_CROP: (usize, usize) = (256, 512);
/// Canvas every inference input is padded to (height, width).
pub const INFERENCE_PAD: (usize, usize) = (608, 1056);

/// A window in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

fn crop_rgb(img: &RgbImage, w: Window) -> RgbImage {
    image::imageops::crop_imm(img, w.x as u32, w.y as u32, w.width as u32, w.height as u32)
        .to_image()
}

/// Applies the same window to both views and the ground truth.
pub fn crop_window(s: &StereoSample, w: Window) -> Result<StereoSample> {
    if w.x + w.width > s.width() || w.y + w.height > s.height() {
        return Err(Error::Dimension(format!(
            "crop {}x{}+{}+{} exceeds sample {}x{}",
            w.width,
            w.height,
            w.x,
            w.y,
            s.width(),
            s.height()
        )));
    }
    let ground_truth = match &s.ground_truth {
        Some(gt) => Some(gt.crop(w.x, w.y, w.width, w.height)?),
        None => None,
    };
    Ok(StereoSample {
        left: crop_rgb(&s.left, w),
        right: crop_rgb(&s.right, w),
        ground_truth,
        id: s.id,
    })
}

/// The window [`crop_random`] picks for this sample size and seed.
pub fn random_window(
    sample_w: usize,
    sample_h: usize,
    crop_h: usize,
    crop_w: usize,
    seed: u64,
) -> Result<Window> {
    if crop_h == 0 || crop_w == 0 || crop_h > sample_h || crop_w > sample_w {
        return Err(Error::Dimension(format!(
            "crop {crop_w}x{crop_h} does not fit in {sample_w}x{sample_h}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = rng.random_range(0..=sample_w - crop_w);
    let y = rng.random_range(0..=sample_h - crop_h);
    Ok(Window {
        x,
        y,
        width: crop_w,
        height: crop_h,
    })
}

/// Seeded random crop of `crop_h x crop_w`, shared by left, right and ground truth.
pub fn crop_random(s: &StereoSample, crop_h: usize, crop_w: usize, seed: u64) -> Result<StereoSample> {
    let w = random_window(s.width(), s.height(), crop_h, crop_w, seed)?;
    crop_window(s, w)
}

/// Padding added by [`pad_to`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Padding {
    pub top: usize,
    pub right: usize,
}

fn pad_rgb(img: &RgbImage, pad: Padding) -> RgbImage {
    let mut out = RgbImage::new(img.width() + pad.right as u32, img.height() + pad.top as u32);
    image::imageops::replace(&mut out, img, 0, pad.top as i64);
    out
}

/// Pads with zeros on the top and right so the sample becomes
/// `target_h x target_w`; content keeps the bottom-left corner and padded
/// ground truth is invalid.
pub fn pad_to(s: &StereoSample, target_h: usize, target_w: usize) -> Result<(StereoSample, Padding)> {
    if s.height() > target_h || s.width() > target_w {
        return Err(Error::Dimension(format!(
            "sample {}x{} larger than pad target {target_w}x{target_h}",
            s.width(),
            s.height()
        )));
    }
    let pad = Padding {
        top: target_h - s.height(),
        right: target_w - s.width(),
    };
    let ground_truth = s.ground_truth.as_ref().map(|gt| pad_disparity(gt, pad));
    Ok((
        StereoSample {
            left: pad_rgb(&s.left, pad),
            right: pad_rgb(&s.right, pad),
            ground_truth,
            id: s.id,
        },
        pad,
    ))
}

pub fn pad_disparity(d: &DisparityMap, pad: Padding) -> DisparityMap {
    DisparityMap::from_fn(d.width() + pad.right, d.height() + pad.top, |x, y| {
        if y < pad.top || x >= d.width() {
            0.0
        } else {
            d.get(x, y - pad.top)
        }
    })
}

/// Removes padding added by [`pad_to`] from a map, e.g. a prediction made on
/// a padded pair.
pub fn unpad_disparity(d: &DisparityMap, pad: Padding) -> Result<DisparityMap> {
    if pad.top > d.height() || pad.right > d.width() {
        return Err(Error::Dimension("padding exceeds map".into()));
    }
    d.crop(0, pad.top, d.width() - pad.right, d.height() - pad.top)
}

pub fn unpad(s: &StereoSample, pad: Padding) -> Result<StereoSample> {
    if pad.top > s.height() || pad.right > s.width() {
        return Err(Error::Dimension("padding exceeds sample".into()));
    }
    crop_window(
        s,
        Window {
            x: 0,
            y: pad.top,
            width: s.width() - pad.right,
            height: s.height() - pad.top,
        },
    )
}

/// Channel-interleaved (HWC) real-valued image.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl NormalizedImage {
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * 3 + c]
    }
}

/// Per-channel mean and population standard deviation over a set of images.
pub fn channel_stats<'a>(images: impl IntoIterator<Item = &'a RgbImage>) -> Result<([f64; 3], [f64; 3])> {
    let mut n = 0u64;
    let mut sum = [0f64; 3];
    let mut sq = [0f64; 3];
    for img in images {
        for p in img.pixels() {
            for c in 0..3 {
                let v = p.0[c] as f64;
                sum[c] += v;
                sq[c] += v * v;
            }
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyInput("no pixels for channel statistics"));
    }
    let n = n as f64;
    let means = sum.map(|s| s / n);
    let mut stds = [0f64; 3];
    for c in 0..3 {
        stds[c] = (sq[c] / n - means[c] * means[c]).max(0.0).sqrt();
    }
    Ok((means, stds))
}

/// `(v - mean[c]) / std[c]` per channel.
pub fn normalize_colors(img: &RgbImage, means: [f64; 3], stds: [f64; 3]) -> Result<NormalizedImage> {
    if let Some(channel) = stds.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::DivideByZero { channel });
    }
    let data = img
        .pixels()
        .flat_map(|p| (0..3).map(move |c| (p.0[c] as f64 - means[c]) / stds[c]))
        .collect();
    Ok(NormalizedImage {
        width: img.width() as usize,
        height: img.height() as usize,
        data,
    })
}
