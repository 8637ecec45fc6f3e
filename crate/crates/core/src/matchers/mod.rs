//! Classical stereo baselines: SAD block matching and census SGM.

mod bm;
mod cost;
mod sgm;

pub use bm::{match_bm, BmConfig};
pub use cost::{census_transform, compute_cost_volume, CostVolume, MatchingCost};
pub use sgm::{aggregate_costs, match_sgm, Penalties, SgmConfig};

use image::{GrayImage, RgbImage};
use serde::{Deserialize, Serialize};

use crate::dataset_io::StereoSample;
use crate::error::Result;
use crate::maps::{is_valid_disparity, DisparityMap};
use cost::argmin_smallest;

/// Luma conversion used before matching.
pub fn to_gray(img: &RgbImage) -> GrayImage {
    image::imageops::grayscale(img)
}

/// Winner-take-all index refined by fitting a parabola through its two
/// neighbors. Refinement is skipped at the ends of the candidate range and
/// when the cost curve is not convex there. Index 0 yields `0.0` (invalid).
pub(crate) fn refine_subpixel(costs: &[u16]) -> f32 {
    let best = argmin_smallest(costs);
    if best == 0 {
        return 0.0;
    }
    if best + 1 == costs.len() {
        return best as f32;
    }
    let (a, b, c) = (
        costs[best - 1] as i32,
        costs[best] as i32,
        costs[best + 1] as i32,
    );
    let denom = a - 2 * b + c;
    if denom <= 0 {
        return best as f32;
    }
    (best as f64 + (a - c) as f64 / (2.0 * denom as f64)) as f32
}

/// The pair whose left-view disparity is the original right view's
/// disparity, mirrored: `(flip(right), flip(left))`.
pub(crate) fn mirrored_pair(left: &GrayImage, right: &GrayImage) -> (GrayImage, GrayImage) {
    (
        image::imageops::flip_horizontal(right),
        image::imageops::flip_horizontal(left),
    )
}

pub(crate) fn unmirror(d: &DisparityMap) -> DisparityMap {
    let w = d.width();
    DisparityMap::from_fn(w, d.height(), |x, y| d.get(w - 1 - x, y))
}

/// Invalidates left-view disparities that disagree with the right view by
/// more than `max_diff` at the nearest matched pixel (`x - d`, halves
/// rounding up). An infinite threshold returns the input unchanged.
pub fn lr_consistency_check(d_left: &DisparityMap, d_right: &DisparityMap, max_diff: f32) -> DisparityMap {
    if max_diff.is_infinite() {
        return d_left.clone();
    }
    let w = d_left.width();
    DisparityMap::from_fn(w, d_left.height(), |x, y| {
        let d = d_left.get(x, y);
        if !is_valid_disparity(d) {
            return 0.0;
        }
        let xr = (x as f64 - d as f64 + 0.5).floor();
        if xr < 0.0 || xr >= w as f64 || y >= d_right.height() || xr as usize >= d_right.width() {
            return 0.0;
        }
        let dr = d_right.get(xr as usize, y);
        if is_valid_disparity(dr) && (d - dr).abs() <= max_diff {
            d
        } else {
            0.0
        }
    })
}

/// A configured baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Matcher {
    Bm(BmConfig),
    Sgm(SgmConfig),
}

impl Matcher {
    pub fn d_max(&self) -> usize {
        match self {
            Matcher::Bm(c) => c.d_max,
            Matcher::Sgm(c) => c.d_max,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Matcher::Bm(_) => "BM",
            Matcher::Sgm(_) => "SGM",
        }
    }

    pub fn compute(&self, left: &GrayImage, right: &GrayImage) -> Result<DisparityMap> {
        match self {
            Matcher::Bm(c) => match_bm(left, right, c),
            Matcher::Sgm(c) => match_sgm(left, right, c),
        }
    }

    pub fn compute_sample(&self, sample: &StereoSample) -> Result<DisparityMap> {
        sample.check_dimensions()?;
        self.compute(&to_gray(&sample.left), &to_gray(&sample.right))
    }
}
