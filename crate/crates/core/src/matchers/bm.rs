//! Local block matching with SAD costs.

use image::GrayImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cost::{compute_cost_volume, MatchingCost};
use super::refine_subpixel;
use crate::error::{Error, Result};
use crate::maps::DisparityMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BmConfig {
    pub block_size: usize,
    pub d_max: usize,
}

impl Default for BmConfig {
    /// Block 15, 256 candidates.
    fn default() -> Self {
        BmConfig {
            block_size: 15,
            d_max: 256,
        }
    }
}

impl BmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block_size < 3 || self.block_size.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "block size {} must be odd and >= 3",
                self.block_size
            )));
        }
        if self.d_max == 0 || self.d_max > 1024 {
            return Err(Error::Config(format!("d_max {} must be in 1..=1024", self.d_max)));
        }
        Ok(())
    }
}

/// Winner-take-all over SAD costs with parabola refinement.
///
/// Invalid (0.0) where the block leaves the image, where every in-range
/// candidate costs the same (no texture to match), and where the best
/// disparity is 0.
pub fn match_bm(left: &GrayImage, right: &GrayImage, cfg: &BmConfig) -> Result<DisparityMap> {
    cfg.validate()?;
    let cv = compute_cost_volume(
        left,
        right,
        MatchingCost::Sad {
            block: cfg.block_size,
        },
        cfg.d_max,
    )?;
    let (w, h) = (cv.width(), cv.height());
    let r = cfg.block_size / 2;
    let mut data = vec![0f32; w * h];
    data.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        if y < r || y + r >= h {
            return;
        }
        for (x, out) in row.iter_mut().enumerate().take(w.saturating_sub(r)).skip(r) {
            let costs = cv.costs(x, y);
            let in_range = &costs[..(x + 1).min(cfg.d_max)];
            let lo = in_range.iter().min().unwrap();
            let hi = in_range.iter().max().unwrap();
            if lo == hi {
                continue;
            }
            *out = refine_subpixel(costs);
        }
    });
    DisparityMap::from_vec(w, h, data)
}
