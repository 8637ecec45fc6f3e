//! Disparity error metrics: bad-δ, end-point error and RMSE over the pixels
//! whose ground truth lies strictly inside `(0, d_max)`.
//!
//! A prediction hole (invalid prediction at a valid ground-truth pixel)
//! fails every δ and is charged a capped error (by default `d_max`) in EPE
//! and RMSE, so a matcher cannot improve its score by abstaining.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset_io::{extension, read_disparity};
use crate::error::{Error, Result};
use crate::maps::{is_valid_disparity, DisparityMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub d_max: f32,
    /// Strictly positive, ascending.
    pub deltas: Vec<f32>,
    /// Error charged for a prediction hole; `None` means `d_max`.
    pub hole_penalty: Option<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            d_max: 256.0,
            deltas: vec![1.0, 3.0, 5.0],
            hole_penalty: None,
        }
    }
}

impl EvalConfig {
    pub fn new(d_max: f32, deltas: Vec<f32>) -> Result<Self> {
        let cfg = EvalConfig {
            d_max,
            deltas,
            hole_penalty: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_max.is_finite() && self.d_max > 0.0) {
            return Err(Error::Config(format!("d_max {} must be > 0", self.d_max)));
        }
        if self.deltas.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::Config("deltas must be positive".into()));
        }
        if self.deltas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("deltas must be strictly ascending".into()));
        }
        if let Some(p) = self.hole_penalty {
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::Config(format!("hole penalty {p} must be >= 0")));
            }
        }
        Ok(())
    }

    pub fn penalty(&self) -> f64 {
        self.hole_penalty.unwrap_or(self.d_max as f64)
    }
}

/// `true` where `0 < gt < d_max`.
pub fn valid_mask(gt: &DisparityMap, d_max: f32) -> Vec<bool> {
    gt.as_slice().iter().map(|&d| is_gt_valid(d, d_max)).collect()
}

#[inline]
fn is_gt_valid(d: f32, d_max: f32) -> bool {
    d > 0.0 && d < d_max
}

/// Raw sums behind a report; adding two of these pools their pixels.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ErrorSums {
    pub pixels: u64,
    pub valid: u64,
    pub holes: u64,
    pub abs: f64,
    pub squared: f64,
    pub bad: Vec<u64>,
}

impl ErrorSums {
    pub fn accumulate(pred: &DisparityMap, gt: &DisparityMap, cfg: &EvalConfig) -> Result<Self> {
        if pred.dimensions() != gt.dimensions() {
            return Err(Error::Dimension(format!(
                "prediction {:?} vs ground truth {:?}",
                pred.dimensions(),
                gt.dimensions()
            )));
        }
        let penalty = cfg.penalty();
        let mut s = ErrorSums {
            pixels: (gt.width() * gt.height()) as u64,
            bad: vec![0; cfg.deltas.len()],
            ..Default::default()
        };
        for (&p, &g) in pred.as_slice().iter().zip(gt.as_slice()) {
            if !is_gt_valid(g, cfg.d_max) {
                continue;
            }
            s.valid += 1;
            let err = if is_valid_disparity(p) {
                (p as f64 - g as f64).abs()
            } else {
                s.holes += 1;
                penalty
            };
            s.abs += err;
            s.squared += err * err;
            let hole = !is_valid_disparity(p);
            for (count, &delta) in s.bad.iter_mut().zip(&cfg.deltas) {
                if hole || err > delta as f64 {
                    *count += 1;
                }
            }
        }
        Ok(s)
    }

    pub fn merge(&mut self, other: &ErrorSums) {
        self.pixels += other.pixels;
        self.valid += other.valid;
        self.holes += other.holes;
        self.abs += other.abs;
        self.squared += other.squared;
        if self.bad.is_empty() {
            self.bad = vec![0; other.bad.len()];
        }
        for (a, b) in self.bad.iter_mut().zip(&other.bad) {
            *a += b;
        }
    }

    pub fn report(&self, cfg: &EvalConfig) -> Result<MetricsReport> {
        if self.valid == 0 {
            return Err(Error::EmptyEvaluation);
        }
        let n = self.valid as f64;
        Ok(MetricsReport {
            bad: cfg
                .deltas
                .iter()
                .zip(&self.bad)
                .map(|(&delta, &count)| BadDelta {
                    delta,
                    percent: 100.0 * count as f64 / n,
                })
                .collect(),
            epe: self.abs / n,
            rmse: (self.squared / n).sqrt(),
            valid_pixels: self.valid,
            holes: self.holes,
            density: self.valid as f64 / self.pixels as f64,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BadDelta {
    pub delta: f32,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub bad: Vec<BadDelta>,
    pub epe: f64,
    pub rmse: f64,
    /// Ground-truth pixels inside `(0, d_max)`.
    pub valid_pixels: u64,
    /// Valid ground-truth pixels without a prediction.
    pub holes: u64,
    /// `valid_pixels / all pixels`.
    pub density: f64,
}

impl MetricsReport {
    pub fn bad_at(&self, delta: f32) -> Option<f64> {
        self.bad.iter().find(|b| b.delta == delta).map(|b| b.percent)
    }
}

/// Scores one prediction.
pub fn evaluate(pred: &DisparityMap, gt: &DisparityMap, cfg: &EvalConfig) -> Result<MetricsReport> {
    cfg.validate()?;
    ErrorSums::accumulate(pred, gt, cfg)?.report(cfg)
}

/// Percentage of valid pixels whose error exceeds `delta`.
pub fn bad_delta(pred: &DisparityMap, gt: &DisparityMap, delta: f32, d_max: f32) -> Result<f64> {
    let cfg = EvalConfig::new(d_max, vec![delta])?;
    Ok(evaluate(pred, gt, &cfg)?.bad[0].percent)
}

pub fn epe(pred: &DisparityMap, gt: &DisparityMap, d_max: f32) -> Result<f64> {
    let cfg = EvalConfig::new(d_max, vec![])?;
    Ok(evaluate(pred, gt, &cfg)?.epe)
}

pub fn rmse(pred: &DisparityMap, gt: &DisparityMap, d_max: f32) -> Result<f64> {
    let cfg = EvalConfig::new(d_max, vec![])?;
    Ok(evaluate(pred, gt, &cfg)?.rmse)
}

/// Normalized histogram of valid disparities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisparityHistogram {
    /// Left edge of the first bin.
    pub start: f64,
    pub bin_width: f64,
    pub frequencies: Vec<f64>,
    pub min: f32,
    pub max: f32,
    pub count: u64,
}

impl DisparityHistogram {
    pub fn bin_range(&self, i: usize) -> (f64, f64) {
        let lo = self.start + i as f64 * self.bin_width;
        (lo, lo + self.bin_width)
    }

    /// Bins that are strictly higher than both neighbors (plateaus count once,
    /// at their left end), sorted by decreasing frequency.
    pub fn modes(&self) -> Vec<usize> {
        let f = &self.frequencies;
        let mut peaks: Vec<usize> = (0..f.len())
            .filter(|&i| {
                let left_ok = i == 0 || f[i] > f[i - 1];
                let mut j = i;
                while j + 1 < f.len() && f[j + 1] == f[i] {
                    j += 1;
                }
                let right_ok = j + 1 == f.len() || f[i] > f[j + 1];
                f[i] > 0.0 && left_ok && right_ok
            })
            .collect();
        peaks.sort_by(|&a, &b| f[b].total_cmp(&f[a]).then(a.cmp(&b)));
        peaks
    }

    /// `bin_start,bin_end,frequency` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_start,bin_end,frequency\n");
        for (i, f) in self.frequencies.iter().enumerate() {
            let (lo, hi) = self.bin_range(i);
            let _ = writeln!(out, "{lo},{hi},{f}");
        }
        out
    }
}

/// Histogram over every valid (`> 0`) disparity with bins aligned to
/// multiples of `bin_width`.
pub fn histogram(gt: &DisparityMap, bin_width: f64) -> Result<DisparityHistogram> {
    histogram_many([gt], bin_width)
}

/// Pooled histogram over several maps.
pub fn histogram_many<'a>(
    maps: impl IntoIterator<Item = &'a DisparityMap>,
    bin_width: f64,
) -> Result<DisparityHistogram> {
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(Error::Config(format!("bin width {bin_width} must be > 0")));
    }
    let values: Vec<f32> = maps
        .into_iter()
        .flat_map(|m| m.as_slice().iter().copied().filter(|&d| is_valid_disparity(d)))
        .collect();
    if values.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let min = values.iter().copied().fold(f32::INFINITY, f32::min);
    let max = values.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let start = (min as f64 / bin_width).floor() * bin_width;
    let bins = ((max as f64 - start) / bin_width).floor() as usize + 1;
    let mut counts = vec![0u64; bins];
    for &v in &values {
        let i = (((v as f64 - start) / bin_width).floor() as usize).min(bins - 1);
        counts[i] += 1;
    }
    let n = values.len() as f64;
    Ok(DisparityHistogram {
        start,
        bin_width,
        frequencies: counts.iter().map(|&c| c as f64 / n).collect(),
        min,
        max,
        count: values.len() as u64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageReport {
    pub name: String,
    pub report: MetricsReport,
}

/// Per-image reports (sorted by name) and the pixel-pooled aggregate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetReport {
    pub config: EvalConfig,
    pub images: Vec<ImageReport>,
    pub aggregate: MetricsReport,
}

impl SetReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    /// Fixed-width table: one row per image plus the aggregate.
    pub fn to_table(&self, method: &str) -> String {
        let mut out = table_header(&self.config.deltas);
        if self.images.len() > 1 {
            for img in &self.images {
                out += &img.report.table_row(&format!("  {}", img.name));
            }
        }
        out += &self.aggregate.table_row(method);
        out
    }
}

/// Header matching [`MetricsReport::table_row`].
pub fn table_header(deltas: &[f32]) -> String {
    let mut out = format!("{:<24}", "Method");
    for d in deltas {
        let _ = write!(out, " {:>10}", format!("bad-{d}(%)"));
    }
    let _ = writeln!(out, " {:>10} {:>10}", "EPE", "RMSE");
    out
}

impl MetricsReport {
    pub fn table_row(&self, label: &str) -> String {
        let mut out = format!("{label:<24}");
        for b in &self.bad {
            let _ = write!(out, " {:>10.2}", b.percent);
        }
        let _ = writeln!(out, " {:>10.2} {:>10.2}", self.epe, self.rmse);
        out
    }
}

/// Evaluates explicit (name, prediction, ground truth) triples.
pub fn evaluate_pairs(pairs: &[(String, DisparityMap, DisparityMap)], cfg: &EvalConfig) -> Result<SetReport> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::Pairing("no images to evaluate".into()));
    }
    let sums: Vec<ErrorSums> = pairs
        .par_iter()
        .map(|(_, p, g)| ErrorSums::accumulate(p, g, cfg))
        .collect::<Result<_>>()?;
    finish(pairs.iter().map(|(n, _, _)| n.clone()).collect(), sums, cfg)
}

fn finish(names: Vec<String>, sums: Vec<ErrorSums>, cfg: &EvalConfig) -> Result<SetReport> {
    let mut pooled = ErrorSums::default();
    let mut images = Vec::with_capacity(sums.len());
    for (name, s) in names.into_iter().zip(&sums) {
        pooled.merge(s);
        images.push(ImageReport {
            name,
            report: s.report(cfg)?,
        });
    }
    Ok(SetReport {
        config: cfg.clone(),
        images,
        aggregate: pooled.report(cfg)?,
    })
}

fn disparity_files(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if !matches!(extension(&path).as_deref(), Some("png" | "tif" | "tiff")) {
            continue;
        }
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        if let Some(prev) = files.insert(stem.clone(), path.clone()) {
            // the same sample in both encodings: prefer the float file
            if extension(&prev).as_deref() != Some("png") {
                files.insert(stem, prev);
            }
        }
    }
    Ok(files)
}

/// Pairs files by stem (`000012.tiff` with `000012.png` etc.) and evaluates
/// every pair. Every prediction needs a ground truth and vice versa.
pub fn evaluate_set(pred_dir: impl AsRef<Path>, gt_dir: impl AsRef<Path>, cfg: &EvalConfig) -> Result<SetReport> {
    cfg.validate()?;
    let preds = disparity_files(pred_dir.as_ref())?;
    let gts = disparity_files(gt_dir.as_ref())?;
    if gts.is_empty() {
        return Err(Error::Pairing(format!(
            "no ground truth files in {}",
            gt_dir.as_ref().display()
        )));
    }
    let missing_pred: Vec<_> = gts.keys().filter(|k| !preds.contains_key(*k)).collect();
    let missing_gt: Vec<_> = preds.keys().filter(|k| !gts.contains_key(*k)).collect();
    if !missing_pred.is_empty() || !missing_gt.is_empty() {
        return Err(Error::Pairing(format!(
            "without prediction: {missing_pred:?}; without ground truth: {missing_gt:?}"
        )));
    }
    let names: Vec<String> = gts.keys().cloned().collect();
    let sums: Vec<ErrorSums> = names
        .par_iter()
        .map(|name| {
            let pred = read_disparity(&preds[name])?;
            let gt = read_disparity(&gts[name])?;
            ErrorSums::accumulate(&pred, &gt, cfg)
        })
        .collect::<Result<_>>()?;
    finish(names, sums, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(w: usize, h: usize, v: &[f32]) -> DisparityMap {
        DisparityMap::from_vec(w, h, v.to_vec()).unwrap()
    }

    #[test]
    fn mask_is_strict() {
        let gt = map(3, 1, &[0.0, 256.0, 128.0]);
        assert_eq!(valid_mask(&gt, 256.0), vec![false, false, true]);
    }

    #[test]
    fn hand_enumerated_bad3() {
        let gt = map(2, 2, &[10.0, 10.0, 10.0, 0.0]);
        let pred = map(2, 2, &[10.0, 12.0, 14.0, 9.0]);
        let b = bad_delta(&pred, &gt, 3.0, 256.0).unwrap();
        assert!((b - 100.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn identity_and_offsets() {
        let gt = DisparityMap::from_fn(8, 8, |x, y| 10.0 + x as f32 + 0.25 * y as f32);
        assert_eq!(bad_delta(&gt, &gt, 1.0, 256.0).unwrap(), 0.0);
        assert_eq!(epe(&gt, &gt, 256.0).unwrap(), 0.0);
        let shifted = DisparityMap::from_fn(8, 8, |x, y| gt.get(x, y) + 0.5);
        assert!((epe(&shifted, &gt, 256.0).unwrap() - 0.5).abs() < 1e-12);
        assert!((rmse(&shifted, &gt, 256.0).unwrap() - 0.5).abs() < 1e-12);
        // error exactly delta is not bad
        let plus3 = DisparityMap::from_fn(8, 8, |_, _| 13.0);
        let ten = DisparityMap::from_fn(8, 8, |_, _| 10.0);
        assert_eq!(bad_delta(&plus3, &ten, 3.0, 256.0).unwrap(), 0.0);
    }

    #[test]
    fn two_pixel_rmse_epe() {
        let gt = map(2, 1, &[5.0, 5.0]);
        let pred = map(2, 1, &[5.0, 7.0]);
        assert_eq!(epe(&pred, &gt, 256.0).unwrap(), 1.0);
        assert_eq!(rmse(&pred, &gt, 256.0).unwrap(), 2f64.sqrt());
    }

    #[test]
    fn holes_are_penalized() {
        let gt = map(2, 1, &[5.0, 5.0]);
        let pred = map(2, 1, &[5.0, 0.0]);
        let r = evaluate(&pred, &gt, &EvalConfig::default()).unwrap();
        assert_eq!(r.holes, 1);
        assert_eq!(r.bad_at(5.0), Some(50.0));
        assert_eq!(r.epe, 128.0);
        let cfg = EvalConfig {
            hole_penalty: Some(4.0),
            ..EvalConfig::default()
        };
        let r = evaluate(&pred, &gt, &cfg).unwrap();
        assert_eq!(r.epe, 2.0);
        // a hole fails every delta even when its penalty is small
        assert_eq!(r.bad_at(5.0), Some(50.0));
    }

    #[test]
    fn empty_evaluation() {
        let gt = DisparityMap::new(4, 4);
        assert!(matches!(epe(&gt, &gt, 256.0), Err(Error::EmptyEvaluation)));
        assert!(matches!(histogram(&gt, 1.0), Err(Error::EmptyEvaluation)));
        let big = DisparityMap::from_fn(2, 2, |_, _| 300.0);
        assert!(matches!(epe(&big, &big, 256.0), Err(Error::EmptyEvaluation)));
    }

    #[test]
    fn config_validation() {
        assert!(EvalConfig::new(256.0, vec![3.0, 1.0]).is_err());
        assert!(EvalConfig::new(0.0, vec![1.0]).is_err());
        assert!(EvalConfig::new(256.0, vec![-1.0]).is_err());
    }

    #[test]
    fn histogram_basics() {
        let c = DisparityMap::from_fn(5, 5, |_, _| 230.5);
        let h = histogram(&c, 1.0).unwrap();
        assert_eq!(h.frequencies, vec![1.0]);
        assert_eq!((h.min, h.max, h.start), (230.5, 230.5, 230.0));

        let two = map(4, 1, &[200.2, 200.7, 210.0, 0.0]);
        let h = histogram(&two, 5.0).unwrap();
        assert_eq!(h.start, 200.0);
        assert_eq!(h.frequencies, vec![2.0 / 3.0, 0.0, 1.0 / 3.0]);
        assert_eq!(h.modes(), vec![0, 2]);
        assert!(h.to_csv().starts_with("bin_start,bin_end,frequency\n200,205,"));
    }

    #[test]
    fn pooled_aggregate_is_not_mean_of_means() {
        // image a: 1 valid pixel error 4; image b: 3 valid pixels error 0
        let ga = map(2, 2, &[10.0, 0.0, 0.0, 0.0]);
        let pa = map(2, 2, &[14.0, 1.0, 1.0, 1.0]);
        let gb = map(2, 2, &[0.0, 10.0, 10.0, 10.0]);
        let pb = gb.clone();
        let cfg = EvalConfig::default();
        let set = evaluate_pairs(
            &[("a".into(), pa.clone(), ga.clone()), ("b".into(), pb, gb)],
            &cfg,
        )
        .unwrap();
        assert_eq!(set.aggregate.epe, 1.0); // 4 / 4 pooled, not (4 + 0) / 2
        assert_eq!(set.aggregate.valid_pixels, 4);
        assert_eq!(set.aggregate.bad_at(3.0), Some(25.0));

        let single = evaluate_pairs(&[("a".into(), pa, ga)], &cfg).unwrap();
        assert_eq!(single.aggregate, single.images[0].report);
        assert!(single.to_table("BM").contains("bad-3(%)"));
    }
}
