//! Dense per-pixel maps shared by every stage of the pipeline.
//!
//! Both maps store row-major `f32` values. A value of `0.0` (or anything
//! non-finite / non-positive) marks a pixel as invalid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-pixel disparity in pixels. `0.0` encodes "no value".
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl DisparityMap {
    /// An all-invalid map.
    pub fn new(width: usize, height: usize) -> Self {
        DisparityMap {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} values for a {width}x{height} map",
                data.len()
            )));
        }
        Ok(DisparityMap {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        DisparityMap {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, d: f32) {
        self.data[y * self.width + x] = d;
    }

    #[inline]
    pub fn is_valid_at(&self, x: usize, y: usize) -> bool {
        is_valid_disparity(self.get(x, y))
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|&&d| is_valid_disparity(d)).count()
    }

    /// Row-major copy of the sub-window `[x0, x0+w) x [y0, y0+h)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(Error::Dimension(format!(
                "window {w}x{h}+{x0}+{y0} exceeds {}x{}",
                self.width, self.height
            )));
        }
        Ok(DisparityMap::from_fn(w, h, |x, y| self.get(x0 + x, y0 + y)))
    }

    /// Replace every invalid encoding (NaN, negative, inf) by exactly `0.0`.
    pub fn canonicalize(&mut self) {
        for d in &mut self.data {
            if !is_valid_disparity(*d) {
                *d = 0.0;
            }
        }
    }
}

/// Valid disparities are finite and strictly positive.
#[inline]
pub fn is_valid_disparity(d: f32) -> bool {
    d.is_finite() && d > 0.0
}

/// Metric depth (millimeters) as seen by the depth camera.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize) -> Self {
        DepthMap {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} values for a {width}x{height} depth map",
                data.len()
            )));
        }
        Ok(DepthMap {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        DepthMap {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: f32) {
        self.data[y * self.width + x] = z;
    }

    /// Depth at `(x, y)` if the pixel carries a measurement.
    #[inline]
    pub fn depth_at(&self, x: usize, y: usize) -> Option<f32> {
        let z = self.get(x, y);
        (z.is_finite() && z > 0.0).then_some(z)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn valid_count(&self) -> usize {
        self.data
            .iter()
            .filter(|z| z.is_finite() && **z > 0.0)
            .count()
    }
}

/// Baseline and focal length of the rectified stereo pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StereoGeometry {
    /// Millimeters.
    pub baseline_mm: f64,
    /// Pixels.
    pub focal_px: f64,
}

impl StereoGeometry {
    pub fn new(baseline_mm: f64, focal_px: f64) -> Result<Self> {
        let g = StereoGeometry {
            baseline_mm,
            focal_px,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.baseline_mm.is_finite() && self.baseline_mm > 0.0) {
            return Err(Error::InvalidCalibration(format!(
                "baseline must be > 0, got {}",
                self.baseline_mm
            )));
        }
        if !(self.focal_px.is_finite() && self.focal_px > 0.0) {
            return Err(Error::InvalidCalibration(format!(
                "focal length must be > 0, got {}",
                self.focal_px
            )));
        }
        Ok(())
    }

    /// `b * f`, the constant relating depth and disparity.
    #[inline]
    pub fn bf(&self) -> f64 {
        self.baseline_mm * self.focal_px
    }
}
