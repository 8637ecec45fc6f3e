//! Semi-global matching.
//!
//! Census/Hamming costs are aggregated along 4 or 8 scanline directions with
//! the usual recurrence
//!
//! ```text
//! L(p, d) = C(p, d) + min(L(p-r, d), L(p-r, d±1) + P1, min_k L(p-r, k) + P2) - min_k L(p-r, k)
//! ```
//!
//! and summed. Disparities come from winner-take-all on the sum, parabola
//! refinement, and a left-right check against a match of the mirrored pair.

use image::GrayImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cost::{compute_cost_volume, CostVolume, MatchingCost};
use super::{lr_consistency_check, mirrored_pair, refine_subpixel, unmirror};
use crate::error::{Error, Result};
use crate::maps::DisparityMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgmConfig {
    /// Side of the square over which census Hamming costs are summed.
    pub block_size: usize,
    /// Side of the census window.
    pub census_window: usize,
    pub p1: u16,
    pub p2: u16,
    /// Left-right check threshold in pixels; `None` skips the check.
    pub lr_max_diff: Option<f32>,
    /// Candidates `0..d_max`; valid outputs lie in `(0, d_max)`.
    pub d_max: usize,
    /// 4 or 8.
    pub num_paths: usize,
}

impl Default for SgmConfig {
    /// Block 3, P1 216, P2 864, LR threshold 1, 256 candidates, 8 paths.
    fn default() -> Self {
        SgmConfig {
            block_size: 3,
            census_window: 5,
            p1: 216,
            p2: 864,
            lr_max_diff: Some(1.0),
            d_max: 256,
            num_paths: 8,
        }
    }
}

impl SgmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block_size.is_multiple_of(2) {
            return Err(Error::Config(format!("block size {} must be odd", self.block_size)));
        }
        if !(self.p1 > 0 && self.p1 < self.p2) {
            return Err(Error::Config(format!(
                "penalties must satisfy 0 < P1 < P2 (got {} and {})",
                self.p1, self.p2
            )));
        }
        if let Some(m) = self.lr_max_diff {
            if m.is_nan() || m < 0.0 {
                return Err(Error::Config(format!("LR threshold {m} must be >= 0")));
            }
        }
        if self.d_max == 0 || self.d_max > 1024 {
            return Err(Error::Config(format!("d_max {} must be in 1..=1024", self.d_max)));
        }
        if !matches!(self.num_paths, 4 | 8) {
            return Err(Error::Config(format!("num_paths {} must be 4 or 8", self.num_paths)));
        }
        Ok(())
    }

    fn cost(&self) -> MatchingCost {
        MatchingCost::Census {
            window: self.census_window,
            block: self.block_size,
        }
    }
}

/// Path penalties for [`aggregate_costs`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Penalties {
    pub p1: u16,
    pub p2: u16,
    pub num_paths: usize,
}

impl From<&SgmConfig> for Penalties {
    fn from(c: &SgmConfig) -> Self {
        Penalties {
            p1: c.p1,
            p2: c.p2,
            num_paths: c.num_paths,
        }
    }
}

/// Scan directions `(dx, dy)`: a pixel's predecessor is `(x - dx, y - dy)`.
const PATHS_8: [(isize, isize); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (-1, 1),
    (1, -1),
    (-1, -1),
];

/// One step of the recurrence for a single pixel: writes the path costs to
/// `out`, adds them to `sum` and returns `min_d out[d]`.
///
/// Plain wrapping arithmetic keeps the loop vectorizable; `aggregate_costs`
/// guarantees nothing exceeds 16 bits.
#[inline]
fn step(cost: &[u16], prev: &[u16], prev_min: u16, p1: u16, p2: u16, out: &mut [u16], sum: &mut [u16]) -> u16 {
    let n = cost.len();
    let (prev, out, sum) = (&prev[..n], &mut out[..n], &mut sum[..n]);
    let jump = prev_min.wrapping_add(p2);
    let relax = |best: u16, c: u16| c.wrapping_add(best.min(jump)).wrapping_sub(prev_min);
    if n == 1 {
        out[0] = relax(prev[0], cost[0]);
        sum[0] = sum[0].wrapping_add(out[0]);
        return out[0];
    }
    out[0] = relax(prev[0].min(prev[1].wrapping_add(p1)), cost[0]);
    out[n - 1] = relax(prev[n - 1].min(prev[n - 2].wrapping_add(p1)), cost[n - 1]);
    sum[0] = sum[0].wrapping_add(out[0]);
    sum[n - 1] = sum[n - 1].wrapping_add(out[n - 1]);
    let mut min = out[0].min(out[n - 1]);

    // Equal-length slices let the compiler drop bounds checks and vectorize.
    let m = n - 2;
    let (lo, mid, hi) = (&prev[..m], &prev[1..m + 1], &prev[2..]);
    let (c, o, s) = (&cost[1..m + 1], &mut out[1..m + 1], &mut sum[1..m + 1]);
    for i in 0..m {
        let best = mid[i]
            .min(lo[i].wrapping_add(p1))
            .min(hi[i].wrapping_add(p1))
            .min(jump);
        let v = c[i].wrapping_add(best).wrapping_sub(prev_min);
        o[i] = v;
        s[i] = s[i].wrapping_add(v);
        min = min.min(v);
    }
    min
}

/// Path start: the path cost is the matching cost itself.
#[inline]
fn start(cost: &[u16], out: &mut [u16], sum: &mut [u16]) -> u16 {
    out.copy_from_slice(cost);
    let mut min = u16::MAX;
    for (s, &c) in sum.iter_mut().zip(cost) {
        *s = s.wrapping_add(c);
        min = min.min(c);
    }
    min
}

/// Adds one path's costs into `sum`.
fn accumulate_path(cv: &CostVolume, (dx, dy): (isize, isize), p1: u16, p2: u16, sum: &mut [u16]) {
    let (w, h, nd) = (cv.width(), cv.height(), cv.d_max());
    let row_len = w * nd;
    let costs = cv.as_slice();

    if dy == 0 {
        // Horizontal paths: rows are independent.
        sum.par_chunks_mut(row_len)
            .zip(costs.par_chunks(row_len))
            .for_each(|(srow, crow)| {
                let mut prev = vec![0u16; nd];
                let mut cur = vec![0u16; nd];
                let mut prev_min = None;
                for i in 0..w {
                    let x = if dx > 0 { i } else { w - 1 - i };
                    let c = &crow[x * nd..(x + 1) * nd];
                    let s = &mut srow[x * nd..(x + 1) * nd];
                    let m = match prev_min {
                        None => start(c, &mut cur, s),
                        Some(pm) => step(c, &prev, pm, p1, p2, &mut cur, s),
                    };
                    std::mem::swap(&mut prev, &mut cur);
                    prev_min = Some(m);
                }
            });
        return;
    }

    // Vertical and diagonal paths: each row depends only on the previous
    // one, and pixels within a row are independent.
    let mut prev = vec![0u16; row_len];
    let mut prev_min = vec![0u16; w];
    let mut cur = vec![0u16; row_len];
    let mut cur_min = vec![0u16; w];
    for i in 0..h {
        let y = if dy > 0 { i } else { h - 1 - i };
        let crow = &costs[y * row_len..(y + 1) * row_len];
        let first = i == 0;
        cur.par_chunks_mut(nd)
            .zip(cur_min.par_iter_mut())
            .zip(sum[y * row_len..(y + 1) * row_len].par_chunks_mut(nd))
            .enumerate()
            .for_each(|(x, ((out, m), s))| {
                let c = &crow[x * nd..(x + 1) * nd];
                let px = x as isize - dx;
                *m = if first || px < 0 || px >= w as isize {
                    start(c, out, s)
                } else {
                    let px = px as usize;
                    step(c, &prev[px * nd..(px + 1) * nd], prev_min[px], p1, p2, out, s)
                };
            });
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut prev_min, &mut cur_min);
    }
}

/// Sums the path costs of all `num_paths` directions.
///
/// The sum must fit in 16 bits: `(max_cost + P2) * num_paths <= 65535`.
pub fn aggregate_costs(cv: &CostVolume, penalties: Penalties) -> Result<CostVolume> {
    let Penalties { p1, p2, num_paths } = penalties;
    if !matches!(num_paths, 1 | 2 | 4 | 8) {
        return Err(Error::Config(format!("num_paths {num_paths} must be 1, 2, 4 or 8")));
    }
    if p1 > p2 {
        return Err(Error::Config(format!("P1 {p1} exceeds P2 {p2}")));
    }
    let bound = (cv.max_cost() as u32 + p2 as u32) * num_paths as u32;
    if bound > u16::MAX as u32 {
        return Err(Error::Config(format!(
            "aggregated costs up to {bound} overflow 16 bits; lower P2 or the cost range"
        )));
    }
    let mut out = CostVolume::new(cv.width(), cv.height(), cv.d_max(), bound as u16);
    for &dir in &PATHS_8[..num_paths] {
        accumulate_path(cv, dir, p1, p2, out.as_mut_slice());
    }
    Ok(out)
}

/// Winner-take-all with parabola refinement; no consistency check.
pub(crate) fn disparity_from_volume(vol: &CostVolume) -> DisparityMap {
    let (w, h) = (vol.width(), vol.height());
    let mut data = vec![0f32; w * h];
    data.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, out) in row.iter_mut().enumerate() {
            *out = refine_subpixel(vol.costs(x, y));
        }
    });
    DisparityMap::from_vec(w, h, data).expect("sized from volume")
}

fn sgm_one_way(left: &GrayImage, right: &GrayImage, cfg: &SgmConfig) -> Result<DisparityMap> {
    let cv = compute_cost_volume(left, right, cfg.cost(), cfg.d_max)?;
    let agg = aggregate_costs(&cv, Penalties::from(cfg))?;
    drop(cv);
    Ok(disparity_from_volume(&agg))
}

/// Full SGM on a rectified grayscale pair.
pub fn match_sgm(left: &GrayImage, right: &GrayImage, cfg: &SgmConfig) -> Result<DisparityMap> {
    cfg.validate()?;
    if left.dimensions() != right.dimensions() {
        return Err(Error::Dimension(format!(
            "left {:?} and right {:?} differ",
            left.dimensions(),
            right.dimensions()
        )));
    }
    let d_left = sgm_one_way(left, right, cfg)?;
    let Some(max_diff) = cfg.lr_max_diff else {
        return Ok(d_left);
    };
    // The right view's own disparities, from re-matching the mirrored pair
    // rather than reading the left volume's diagonals: near the left border
    // those diagonals run through out-of-range candidates and are biased.
    let (ml, mr) = mirrored_pair(left, right);
    let d_right = unmirror(&sgm_one_way(&ml, &mr, cfg)?);
    Ok(lr_consistency_check(&d_left, &d_right, max_diff))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matchers::cost::argmin_smallest;

    #[test]
    fn published_defaults() {
        let c = SgmConfig::default();
        assert_eq!((c.block_size, c.p1, c.p2, c.lr_max_diff, c.d_max), (3, 216, 864, Some(1.0), 256));
        c.validate().unwrap();
        let bad = SgmConfig { p1: 900, ..c };
        assert!(bad.validate().is_err());
        assert!(SgmConfig { block_size: 4, ..c }.validate().is_err());
        assert!(SgmConfig { num_paths: 6, ..c }.validate().is_err());
    }

    #[test]
    fn hand_traced_single_scanline() {
        // 1x5 image, 3 candidates, left-to-right path only, P1 = 2, P2 = 5.
        #[rustfmt::skip]
        let costs: Vec<u16> = vec![
            4, 1, 6,
            5, 5, 0,
            2, 7, 7,
            9, 0, 3,
            1, 1, 1,
        ];
        let cv = CostVolume::from_vec(5, 1, 3, costs).unwrap();
        let agg = aggregate_costs(&cv, Penalties { p1: 2, p2: 5, num_paths: 1 }).unwrap();
        // x0: L = C = [4,1,6], min 1
        // x1: d0 min(4, 1+2, 6) = 3 -> 5+3-1 = 7
        //     d1 min(1, 4+2, 6+2, 6) = 1 -> 5+1-1 = 5
        //     d2 min(6, 1+2, 6) = 3 -> 0+3-1 = 2        L=[7,5,2] min 2
        // x2: d0 min(7, 5+2, 7) = 7 -> 2+7-2 = 7
        //     d1 min(5, 7+2, 2+2, 7) = 4 -> 7+4-2 = 9
        //     d2 min(2, 5+2, 7) = 2 -> 7+2-2 = 7        L=[7,9,7] min 7
        // x3: d0 min(7, 9+2, 12) = 7 -> 9+7-7 = 9
        //     d1 min(9, 7+2, 7+2, 12) = 9 -> 0+9-7 = 2
        //     d2 min(7, 9+2, 12) = 7 -> 3+7-7 = 3       L=[9,2,3] min 2
        // x4: d0 min(9, 2+2, 7) = 4 -> 1+4-2 = 3
        //     d1 min(2, 9+2, 3+2, 7) = 2 -> 1+2-2 = 1
        //     d2 min(3, 2+2, 7) = 3 -> 1+3-2 = 2        L=[3,1,2]
        #[rustfmt::skip]
        let expected: Vec<u16> = vec![
            4, 1, 6,
            7, 5, 2,
            7, 9, 7,
            9, 2, 3,
            3, 1, 2,
        ];
        assert_eq!(agg.as_slice(), &expected[..]);
    }

    #[test]
    fn zero_penalties_keep_argmin() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let costs: Vec<u16> = (0..17 * 11 * 12).map(|_| rng.random_range(0..200)).collect();
        let cv = CostVolume::from_vec(17, 11, 12, costs).unwrap();
        for paths in [1, 4, 8] {
            let agg = aggregate_costs(&cv, Penalties { p1: 0, p2: 0, num_paths: paths }).unwrap();
            assert_eq!(agg.argmin(), cv.argmin());
            for (a, c) in agg.as_slice().iter().zip(cv.as_slice()) {
                assert_eq!(*a as usize, *c as usize * paths);
            }
        }
    }

    #[test]
    fn overflow_is_rejected() {
        let cv = CostVolume::from_vec(1, 1, 2, vec![60000, 0]).unwrap();
        assert!(aggregate_costs(&cv, Penalties { p1: 1, p2: 10, num_paths: 8 }).is_err());
    }

    #[test]
    fn step_handles_edge_candidates() {
        let (mut out, mut sum) = ([0u16; 2], [1u16; 2]);
        let m = step(&[3, 4], &[0, 10], 0, 1, 5, &mut out, &mut sum);
        assert_eq!(out, [3, 5]);
        assert_eq!(sum, [4, 6]);
        assert_eq!(m, 3);
        let (mut one, mut sum) = ([0u16; 1], [0u16; 1]);
        step(&[2], &[7], 7, 1, 5, &mut one, &mut sum);
        assert_eq!(one, [2]);
        assert_eq!(argmin_smallest(&[3, 1, 1]), 1);
    }
}
