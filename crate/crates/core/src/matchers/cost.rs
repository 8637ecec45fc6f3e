//! Matching cost volumes.
//!
//! Costs are computed per pixel (absolute difference for block matching,
//! Hamming distance between census descriptors for SGM) and summed over a
//! square block with running sums. Candidate `d` at column `x` compares the
//! left pixel with the right pixel at `x - d`; candidates with `x - d < 0`
//! receive [`CostVolume::max_cost`]. Image borders are replicated.

use image::GrayImage;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Costs laid out as `[(y * width + x) * d_max + d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostVolume {
    width: usize,
    height: usize,
    d_max: usize,
    max_cost: u16,
    data: Vec<u16>,
}

impl CostVolume {
    pub fn new(width: usize, height: usize, d_max: usize, max_cost: u16) -> Self {
        CostVolume {
            width,
            height,
            d_max,
            max_cost,
            data: vec![0; width * height * d_max],
        }
    }

    pub fn from_vec(width: usize, height: usize, d_max: usize, data: Vec<u16>) -> Result<Self> {
        if data.len() != width * height * d_max {
            return Err(Error::Dimension(format!(
                "{} costs for a {width}x{height}x{d_max} volume",
                data.len()
            )));
        }
        let max_cost = data.iter().copied().max().unwrap_or(0);
        Ok(CostVolume {
            width,
            height,
            d_max,
            max_cost,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of disparity candidates, `0..d_max`.
    pub fn d_max(&self) -> usize {
        self.d_max
    }

    /// Upper bound on any entry; also the out-of-range sentinel.
    pub fn max_cost(&self) -> u16 {
        self.max_cost
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, d: usize) -> u16 {
        self.data[(y * self.width + x) * self.d_max + d]
    }

    /// All candidates of one pixel.
    #[inline]
    pub fn costs(&self, x: usize, y: usize) -> &[u16] {
        let i = (y * self.width + x) * self.d_max;
        &self.data[i..i + self.d_max]
    }

    pub fn as_slice(&self) -> &[u16] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [u16] {
        &mut self.data
    }

    /// Winner-take-all over every pixel; ties go to the smaller disparity.
    pub fn argmin(&self) -> Vec<usize> {
        self.data
            .chunks_exact(self.d_max.max(1))
            .map(argmin_smallest)
            .collect()
    }
}

/// Index of the minimum, preferring the smallest index on ties.
#[inline]
pub(crate) fn argmin_smallest(costs: &[u16]) -> usize {
    let mut best = 0;
    for (d, &c) in costs.iter().enumerate().skip(1) {
        if c < costs[best] {
            best = d;
        }
    }
    best
}

/// Per-pixel cost function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchingCost {
    /// Sum of absolute intensity differences over `block x block`.
    Sad { block: usize },
    /// Hamming distance of `window x window` census descriptors, summed over
    /// `block x block`.
    Census { window: usize, block: usize },
}

impl MatchingCost {
    fn block(&self) -> usize {
        match *self {
            MatchingCost::Sad { block } | MatchingCost::Census { block, .. } => block,
        }
    }

    fn pixel_max(&self) -> u32 {
        match *self {
            MatchingCost::Sad { .. } => 255,
            MatchingCost::Census { window, .. } => (window * window - 1) as u32,
        }
    }

    pub fn max_cost(&self) -> u32 {
        self.pixel_max() * (self.block() * self.block()) as u32
    }

    fn validate(&self) -> Result<()> {
        let block = self.block();
        if block == 0 || block.is_multiple_of(2) {
            return Err(Error::Config(format!("block size {block} must be odd")));
        }
        if let MatchingCost::Census { window, .. } = *self {
            if window % 2 == 0 || !(3..=7).contains(&window) {
                return Err(Error::Config(format!(
                    "census window {window} must be odd and in 3..=7"
                )));
            }
        }
        if self.max_cost() > u16::MAX as u32 {
            return Err(Error::Config(format!(
                "block {block} overflows 16-bit costs"
            )));
        }
        Ok(())
    }
}

/// Census descriptor: one bit per window neighbor, set when the neighbor is
/// darker than the center. Borders are replicated.
pub fn census_transform(img: &GrayImage, window: usize) -> Vec<u64> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let raw = img.as_raw();
    let r = (window / 2) as isize;
    let at = |x: isize, y: isize| -> u8 {
        let x = x.clamp(0, w as isize - 1) as usize;
        let y = y.clamp(0, h as isize - 1) as usize;
        raw[y * w + x]
    };
    let mut out = vec![0u64; w * h];
    out.par_chunks_mut(w.max(1)).enumerate().for_each(|(y, row)| {
        let y = y as isize;
        for (x, desc) in row.iter_mut().enumerate() {
            let x = x as isize;
            let center = at(x, y);
            let mut bits = 0u64;
            for dy in -r..=r {
                for dx in -r..=r {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    bits = (bits << 1) | u64::from(at(x + dx, y + dy) < center);
                }
            }
            *desc = bits;
        }
    });
    out
}

/// Source of per-pixel (unaggregated) costs for one image row.
trait PixelCost: Sync {
    /// Fills `out[x * d_max + d]` for every column of row `y`.
    fn row(&self, y: usize, out: &mut [u16]);
}

struct AbsDiff<'a> {
    left: &'a [u8],
    right: &'a [u8],
    width: usize,
    d_max: usize,
}

impl PixelCost for AbsDiff<'_> {
    fn row(&self, y: usize, out: &mut [u16]) {
        let l = &self.left[y * self.width..(y + 1) * self.width];
        let r = &self.right[y * self.width..(y + 1) * self.width];
        for (x, cell) in out.chunks_exact_mut(self.d_max).enumerate() {
            let lv = l[x] as i16;
            let in_range = (x + 1).min(self.d_max);
            // candidates d <= x read r[x - d]; the rest replicate r[0]
            for (d, c) in cell[..in_range].iter_mut().enumerate() {
                *c = (lv - r[x - d] as i16).unsigned_abs();
            }
            let edge = (lv - r[0] as i16).unsigned_abs();
            cell[in_range..].fill(edge);
        }
    }
}

struct Hamming<'a> {
    left: &'a [u64],
    right: &'a [u64],
    width: usize,
    d_max: usize,
}

impl PixelCost for Hamming<'_> {
    fn row(&self, y: usize, out: &mut [u16]) {
        let l = &self.left[y * self.width..(y + 1) * self.width];
        let r = &self.right[y * self.width..(y + 1) * self.width];
        for (x, cell) in out.chunks_exact_mut(self.d_max).enumerate() {
            let lv = l[x];
            let in_range = (x + 1).min(self.d_max);
            for (d, c) in cell[..in_range].iter_mut().enumerate() {
                *c = (lv ^ r[x - d]).count_ones() as u16;
            }
            let edge = (lv ^ r[0]).count_ones() as u16;
            cell[in_range..].fill(edge);
        }
    }
}

/// Rows per parallel work item.
const BAND: usize = 16;

/// Box-sums per-pixel costs over `block x block` and applies the
/// out-of-range sentinel.
fn box_aggregate(
    src: &dyn PixelCost,
    width: usize,
    height: usize,
    d_max: usize,
    block: usize,
    sentinel: u16,
) -> CostVolume {
    let r = block / 2;
    let row_len = width * d_max;
    let mut vol = CostVolume::new(width, height, d_max, sentinel);
    let clamp_row = |y: isize| y.clamp(0, height as isize - 1) as usize;

    vol.as_mut_slice()
        .par_chunks_mut(row_len * BAND)
        .enumerate()
        .for_each(|(band, out)| {
            let y0 = band * BAND;
            let mut raw = vec![0u16; row_len];
            // vertical sums over rows y - r ..= y + r of each (x, d)
            let mut vsum = vec![0u16; row_len];
            for k in -(r as isize)..=(r as isize) {
                src.row(clamp_row(y0 as isize + k), &mut raw);
                vsum.iter_mut().zip(&raw).for_each(|(s, v)| *s += v);
            }
            let mut hsum = vec![0u16; d_max];
            for (i, out_row) in out.chunks_exact_mut(row_len).enumerate() {
                let y = y0 + i;
                if i > 0 {
                    src.row(clamp_row(y as isize + r as isize), &mut raw);
                    vsum.iter_mut().zip(&raw).for_each(|(s, v)| *s += v);
                    src.row(clamp_row(y as isize - r as isize - 1), &mut raw);
                    vsum.iter_mut().zip(&raw).for_each(|(s, v)| *s -= v);
                }
                let col = |x: isize| {
                    let x = x.clamp(0, width as isize - 1) as usize;
                    &vsum[x * d_max..(x + 1) * d_max]
                };
                hsum.fill(0);
                for k in -(r as isize)..=(r as isize) {
                    hsum.iter_mut().zip(col(k)).for_each(|(s, v)| *s += v);
                }
                for (x, cell) in out_row.chunks_exact_mut(d_max).enumerate() {
                    if x > 0 {
                        let add = col(x as isize + r as isize);
                        let sub = col(x as isize - r as isize - 1);
                        for ((s, a), b) in hsum.iter_mut().zip(add).zip(sub) {
                            *s = *s + a - b;
                        }
                    }
                    let in_range = (x + 1).min(d_max);
                    cell[..in_range].copy_from_slice(&hsum[..in_range]);
                    cell[in_range..].fill(sentinel);
                }
            }
        });
    vol
}

/// Builds the cost volume of a rectified grayscale pair for candidates
/// `0..d_max`.
pub fn compute_cost_volume(
    left: &GrayImage,
    right: &GrayImage,
    cost: MatchingCost,
    d_max: usize,
) -> Result<CostVolume> {
    if left.dimensions() != right.dimensions() {
        return Err(Error::Dimension(format!(
            "left {:?} and right {:?} differ",
            left.dimensions(),
            right.dimensions()
        )));
    }
    if d_max == 0 {
        return Err(Error::Config("d_max must be positive".into()));
    }
    cost.validate()?;
    let (w, h) = (left.width() as usize, left.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::Dimension("empty image".into()));
    }
    let sentinel = cost.max_cost() as u16;
    let vol = match cost {
        MatchingCost::Sad { block } => {
            let src = AbsDiff {
                left: left.as_raw(),
                right: right.as_raw(),
                width: w,
                d_max,
            };
            box_aggregate(&src, w, h, d_max, block, sentinel)
        }
        MatchingCost::Census { window, block } => {
            let cl = census_transform(left, window);
            let cr = census_transform(right, window);
            let src = Hamming {
                left: &cl,
                right: &cr,
                width: w,
                d_max,
            };
            box_aggregate(&src, w, h, d_max, block, sentinel)
        }
    };
    Ok(vol)
}
