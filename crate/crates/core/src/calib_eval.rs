//! Registration accuracy from chessboard corners seen by both cameras.
//!
//! Each depth-camera corner is lifted with its measured depth, moved into the
//! stereo-left frame and projected; the error is its pixel distance to the
//! corner detected in the left image. Corner detection itself happens
//! elsewhere; this module reads the detector's output.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{backproject, project, Intrinsics, Pixel, Point3, RigTransform, RigidTransform};

/// Inner-corner grid of the board used for the published experiment.
pub const BOARD_GRID: (usize, usize) = (8, 11);
pub const TRIALS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthCorner {
    pub pixel: Pixel,
    /// Millimeters.
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CornerSet {
    pub rows: usize,
    pub cols: usize,
    pub depth: Vec<DepthCorner>,
    pub left: Vec<Pixel>,
}

impl CornerSet {
    pub fn new(rows: usize, cols: usize, depth: Vec<DepthCorner>, left: Vec<Pixel>) -> Result<Self> {
        let set = CornerSet {
            rows,
            cols,
            depth,
            left,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.rows * self.cols;
        if n == 0 {
            return Err(Error::EmptyInput("corner grid"));
        }
        if self.depth.len() != n || self.left.len() != n {
            return Err(Error::Dimension(format!(
                "grid {}x{} needs {n} corners, got {} depth and {} left",
                self.rows,
                self.cols,
                self.depth.len(),
                self.left.len()
            )));
        }
        if let Some(c) = self.depth.iter().find(|c| !(c.depth.is_finite() && c.depth > 0.0)) {
            return Err(Error::InvalidDepth(c.depth));
        }
        Ok(())
    }

    /// Reads the text format:
    ///
    /// ```text
    /// # comments and blank lines are ignored
    /// grid 8 11
    /// u_depth v_depth z_depth u_left v_left
    /// ```
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut grid = None;
        let (mut depth, mut left) = (Vec::new(), Vec::new());
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = |msg: String| Error::parse(origin, format!("line {}: {msg}", lineno + 1));
            if fields[0] == "grid" {
                if fields.len() != 3 || grid.is_some() {
                    return Err(bad("expected a single `grid <rows> <cols>` header".into()));
                }
                let dim = |s: &str| s.parse::<usize>().map_err(|e| bad(format!("{s}: {e}")));
                grid = Some((dim(fields[1])?, dim(fields[2])?));
                continue;
            }
            if grid.is_none() {
                return Err(bad("corner record before the grid header".into()));
            }
            if fields.len() != 5 {
                return Err(bad(format!("expected 5 numbers, found {}", fields.len())));
            }
            let mut v = [0.0; 5];
            for (slot, f) in v.iter_mut().zip(&fields) {
                *slot = f.parse::<f64>().map_err(|e| bad(format!("{f}: {e}")))?;
            }
            depth.push(DepthCorner {
                pixel: Pixel::new(v[0], v[1]),
                depth: v[2],
            });
            left.push(Pixel::new(v[3], v[4]));
        }
        let (rows, cols) = grid.ok_or_else(|| Error::parse(origin, "missing grid header"))?;
        CornerSet::new(rows, cols, depth, left)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("grid {} {}\n", self.rows, self.cols);
        for (d, l) in self.depth.iter().zip(&self.left) {
            let _ = writeln!(out, "{} {} {} {} {}", d.pixel.u, d.pixel.v, d.depth, l.u, l.v);
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegistrationErrorStats {
    /// Pixels, one per corner (all trials concatenated).
    pub errors: Vec<f64>,
    pub mean: f64,
    pub max: f64,
    /// Mean error of each trial, in trial order.
    pub trial_means: Vec<f64>,
}

impl RegistrationErrorStats {
    fn from_errors(errors: Vec<f64>) -> Self {
        let mean = errors.iter().sum::<f64>() / errors.len() as f64;
        let max = errors.iter().copied().fold(0.0, f64::max);
        RegistrationErrorStats {
            trial_means: vec![mean],
            errors,
            mean,
            max,
        }
    }

    /// Pools several trials; the overall mean weights every corner equally.
    pub fn combine(trials: &[RegistrationErrorStats]) -> Result<Self> {
        if trials.is_empty() {
            return Err(Error::EmptyInput("trials"));
        }
        let errors: Vec<f64> = trials.iter().flat_map(|t| t.errors.iter().copied()).collect();
        let mut out = Self::from_errors(errors);
        out.trial_means = trials.iter().map(|t| t.mean).collect();
        Ok(out)
    }
}

/// Reprojects every depth corner into the left image and measures its
/// distance to the detected left corner.
pub fn registration_error(
    corners: &CornerSet,
    rig: &RigTransform,
    k_depth: &Intrinsics,
    k_left: &Intrinsics,
) -> Result<RegistrationErrorStats> {
    corners.validate()?;
    k_depth.validate()?;
    k_left.validate()?;
    let errors = corners
        .depth
        .iter()
        .zip(&corners.left)
        .enumerate()
        .map(|(i, (d, detected))| {
            let p = backproject(k_depth, d.pixel, d.depth)?;
            let q = rig.apply(&p);
            let projected = project(k_left, &q).map_err(|_| Error::BehindCamera {
                z: q.z,
                corner: Some(i),
            })?;
            Ok(projected.distance(detected))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RegistrationErrorStats::from_errors(errors))
}

/// Parameters of a simulated corner-capture experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub rows: usize,
    pub cols: usize,
    /// Board square size, millimeters.
    pub square_mm: f64,
    /// Board distance from the depth camera, millimeters.
    pub distance_mm: (f64, f64),
    /// Standard deviation of the detected left corners, pixels.
    pub noise_px: f64,
    pub trials: usize,
    pub seed: u64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            rows: BOARD_GRID.0,
            cols: BOARD_GRID.1,
            square_mm: 25.0,
            distance_mm: (550.0, 750.0),
            noise_px: 0.0,
            trials: TRIALS,
            seed: 0,
        }
    }
}

impl TrialConfig {
    /// Isotropic 2-D Gaussian noise of deviation σ has mean magnitude
    /// σ·√(π/2); this inverts that relation.
    pub fn noise_for_mean_error(mean_px: f64) -> f64 {
        mean_px / (std::f64::consts::PI / 2.0).sqrt()
    }
}

/// Corners of a board posed by `board` (board frame → depth frame) as seen
/// by both cameras, with Gaussian noise added to the left detections.
pub fn synthetic_corners(
    cfg: &TrialConfig,
    board: &RigidTransform,
    rig: &RigTransform,
    k_depth: &Intrinsics,
    k_left: &Intrinsics,
    rng: &mut impl Rng,
) -> Result<CornerSet> {
    let noise = Normal::new(0.0, cfg.noise_px)
        .map_err(|e| Error::Config(format!("noise {}: {e}", cfg.noise_px)))?;
    let (cx, cy) = (
        (cfg.cols - 1) as f64 * cfg.square_mm / 2.0,
        (cfg.rows - 1) as f64 * cfg.square_mm / 2.0,
    );
    let (mut depth, mut left) = (Vec::new(), Vec::new());
    for r in 0..cfg.rows {
        for c in 0..cfg.cols {
            let on_board = Point3::new(c as f64 * cfg.square_mm - cx, r as f64 * cfg.square_mm - cy, 0.0);
            let p = board.apply(&on_board);
            depth.push(DepthCorner {
                pixel: project(k_depth, &p)?,
                depth: p.z,
            });
            let seen = project(k_left, &rig.apply(&p))?;
            left.push(Pixel::new(seen.u + noise.sample(rng), seen.v + noise.sample(rng)));
        }
    }
    CornerSet::new(cfg.rows, cfg.cols, depth, left)
}

/// Runs `cfg.trials` captures with random board poses and pools their errors.
pub fn simulate_trials(
    cfg: &TrialConfig,
    rig: &RigTransform,
    k_depth: &Intrinsics,
    k_left: &Intrinsics,
) -> Result<RegistrationErrorStats> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let trials = (0..cfg.trials)
        .map(|_| {
            let tilt = UnitQuaternion::from_euler_angles(
                rng.random_range(-0.3..0.3),
                rng.random_range(-0.3..0.3),
                rng.random_range(-0.2..0.2),
            );
            let z = rng.random_range(cfg.distance_mm.0..=cfg.distance_mm.1);
            let offset = Vector3::new(rng.random_range(-40.0..40.0), rng.random_range(-30.0..30.0), z);
            let board = RigidTransform::from_quaternion(tilt, offset);
            let corners = synthetic_corners(cfg, &board, rig, k_depth, k_left, &mut rng)?;
            registration_error(&corners, rig, k_depth, k_left)
        })
        .collect::<Result<Vec<_>>>()?;
    RegistrationErrorStats::combine(&trials)
}
