//! Synthetic scenes with analytically known disparity and depth.
//!
//! A scene is a stack of planar layers, each an affine disparity field
//! `d(x, y) = a + b·x + c·y` over the stereo-left image with a support region.
//! The visible surface at a pixel is the supporting layer with the largest
//! disparity (the nearest one). Textures are painted onto surfaces in left
//! image coordinates, so the right view is obtained by reverse warping with
//! linear interpolation along the row.

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset_io::StereoSample;
use crate::error::{Error, Result};
use crate::geometry::{Intrinsics, RigTransform};
use crate::maps::{DepthMap, DisparityMap, StereoGeometry};

/// Axis-aligned rectangle `[x0, x1) x [y0, y1)` in left-image pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Support {
    All,
    Rect(Rect),
    Ellipse { cx: f64, cy: f64, rx: f64, ry: f64 },
}

impl Support {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Support::All => true,
            Support::Rect(r) => r.contains(x, y),
            Support::Ellipse { cx, cy, rx, ry } => {
                let (dx, dy) = ((x - cx) / rx, (y - cy) / ry);
                dx * dx + dy * dy <= 1.0
            }
        }
    }
}

/// `d(x, y) = a + b·x + c·y` on `support`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub support: Support,
}

impl Plane {
    pub fn constant(d: f64) -> Self {
        Plane {
            a: d,
            b: 0.0,
            c: 0.0,
            support: Support::All,
        }
    }

    pub fn disparity(&self, x: f64, y: f64) -> f64 {
        self.a + self.b * x + self.c * y
    }

    /// Left-image x whose surface point lands on right-image column `xr`.
    fn left_x(&self, xr: f64, y: f64) -> f64 {
        (xr + self.a + self.c * y) / (1.0 - self.b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisparityField {
    Constant { d: f64 },
    Ramp { base: f64, slope_x: f64, slope_y: f64 },
    /// A fronto-parallel near rectangle in front of a far background.
    TwoPlane { far: f64, near: f64, rect: Rect },
    /// A slightly tilted ground plane with elliptical leaves floating above it.
    Bimodal { ground: f64, leaf: f64, leaves: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextureSpec {
    /// Fraction of lattice cells carrying a random intensity; the rest are
    /// mid gray.
    pub density: f64,
    pub seed: u64,
    /// Region of the left image whose surfaces are painted a flat gray.
    #[serde(default)]
    pub flat: Option<Rect>,
}

impl Default for TextureSpec {
    fn default() -> Self {
        TextureSpec {
            density: 1.0,
            seed: 0,
            flat: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub field: DisparityField,
    #[serde(default)]
    pub texture: TextureSpec,
    pub geometry: StereoGeometry,
    #[serde(default = "default_d_max")]
    pub d_max: f64,
}

fn default_d_max() -> f64 {
    256.0
}

const FLAT_GRAY: f64 = 128.0;
const OFF_DOT_GRAY: f64 = 96.0;

impl SceneSpec {
    /// A scene with the given field, default texture and a 120 mm / 1050 px
    /// rig.
    pub fn new(width: usize, height: usize, field: DisparityField) -> Self {
        SceneSpec {
            width,
            height,
            field,
            texture: TextureSpec::default(),
            geometry: StereoGeometry {
                baseline_mm: 120.0,
                focal_px: 1050.0,
            },
            d_max: default_d_max(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.texture.seed = seed;
        self
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: SceneSpec = toml::from_str(text).map_err(|e| Error::Scene(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene specs always serialize")
    }

    /// Layers in back-to-front order; the first one always covers the image.
    pub fn layers(&self) -> Vec<Plane> {
        match self.field {
            DisparityField::Constant { d } => vec![Plane::constant(d)],
            DisparityField::Ramp {
                base,
                slope_x,
                slope_y,
            } => vec![Plane {
                a: base,
                b: slope_x,
                c: slope_y,
                support: Support::All,
            }],
            DisparityField::TwoPlane { far, near, rect } => vec![
                Plane::constant(far),
                Plane {
                    support: Support::Rect(rect),
                    ..Plane::constant(near)
                },
            ],
            DisparityField::Bimodal {
                ground,
                leaf,
                leaves,
                seed,
            } => {
                let (w, h) = (self.width as f64, self.height as f64);
                // the ground recedes towards the top of the image
                let mut layers = vec![Plane {
                    a: ground - 2.0,
                    b: 0.0,
                    c: 4.0 / h,
                    support: Support::All,
                }];
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let r = w.min(h);
                for _ in 0..leaves {
                    let (cx, cy) = (rng.random_range(0.0..w), rng.random_range(0.0..h));
                    let rx = rng.random_range(0.06..0.16) * r;
                    let ry = rng.random_range(0.06..0.16) * r;
                    let (b, c) = (rng.random_range(-0.005..0.005), rng.random_range(-0.005..0.005));
                    let d = leaf + rng.random_range(-2.0..2.0);
                    layers.push(Plane {
                        a: d - b * cx - c * cy,
                        b,
                        c,
                        support: Support::Ellipse { cx, cy, rx, ry },
                    });
                }
                layers
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Scene(format!("size {}x{} must be positive", self.width, self.height)));
        }
        self.geometry.validate()?;
        if !(self.d_max.is_finite() && self.d_max > 0.0) {
            return Err(Error::Scene(format!("d_max {} must be > 0", self.d_max)));
        }
        if !(0.0..=1.0).contains(&self.texture.density) {
            return Err(Error::Scene(format!("texture density {} outside [0, 1]", self.texture.density)));
        }
        let layers = self.layers();
        for p in &layers {
            if p.b.is_nan() || p.b.abs() >= 1.0 {
                return Err(Error::Scene(format!("horizontal slope {} must be inside (-1, 1)", p.b)));
            }
        }
        self.check_range(self.d_max)
    }

    /// Every visible disparity must lie in `[0, limit)`. Zero is allowed for
    /// the left view but has no depth.
    fn check_range(&self, limit: f64) -> Result<()> {
        let field = visible_field(&self.layers(), self.width, self.height);
        for &(_, d) in &field {
            if !(d.is_finite() && d >= 0.0 && d < limit) {
                return Err(Error::Scene(format!(
                    "disparity {d} outside [0, {limit}) (d_max {}, width {})",
                    self.d_max, self.width
                )));
            }
        }
        Ok(())
    }

    /// Intrinsics shared by the simulated stereo-left and depth cameras.
    pub fn intrinsics(&self) -> Intrinsics {
        let f = self.geometry.focal_px;
        Intrinsics {
            fx: f,
            fy: f,
            cx: self.width as f64 / 2.0,
            cy: self.height as f64 / 2.0,
        }
    }
}

/// Nearest supporting layer at a (possibly fractional) left-image point.
fn visible_at(layers: &[Plane], x: f64, y: f64) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in layers.iter().enumerate() {
        if p.support.contains(x, y) {
            let d = p.disparity(x, y);
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
    }
    best
}

fn visible_field(layers: &[Plane], w: usize, h: usize) -> Vec<(usize, f64)> {
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            out.push(visible_at(layers, x as f64, y as f64).expect("base layer covers the image"));
        }
    }
    out
}

/// Surface seen by the right camera at column `xr`, as (layer, left x, disparity).
fn right_visible(layers: &[Plane], xr: f64, y: f64) -> Option<(usize, f64, f64)> {
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, p) in layers.iter().enumerate() {
        let xl = p.left_x(xr, y);
        if p.support.contains(xl, y) {
            let d = p.disparity(xl, y);
            if best.is_none_or(|(_, _, bd)| d > bd) {
                best = Some((i, xl, d));
            }
        }
    }
    best
}

struct Lattice {
    w: usize,
    values: Vec<f64>,
}

impl Lattice {
    fn random(w: usize, h: usize, density: f64, rng: &mut ChaCha8Rng) -> Self {
        let values = (0..w * h)
            .map(|_| {
                if rng.random::<f64>() < density {
                    rng.random_range(0..=255u8) as f64
                } else {
                    OFF_DOT_GRAY
                }
            })
            .collect();
        Lattice { w, values }
    }

    fn at(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.w + x]
    }

    /// Linear interpolation along the row; `x` must lie in `[0, w - 1]`.
    fn sample(&self, x: f64, y: usize) -> f64 {
        let x0 = x.floor() as usize;
        let f = x - x0 as f64;
        if f == 0.0 || x0 + 1 >= self.w {
            return self.at(x0.min(self.w - 1), y);
        }
        (1.0 - f) * self.at(x0, y) + f * self.at(x0 + 1, y)
    }
}

fn gray(v: f64) -> Rgb<u8> {
    let g = v.round().clamp(0.0, 255.0) as u8;
    Rgb([g, g, g])
}

/// Renders the stereo pair and its occlusion-aware ground truth.
///
/// Ground truth is `0.0` wherever the left pixel is not seen by the right
/// camera, either because a nearer surface hides it or because it falls
/// outside the right frame.
pub fn synth_stereo(spec: &SceneSpec) -> Result<StereoSample> {
    spec.validate()?;
    spec.check_range(spec.d_max.min(spec.width as f64))?;
    let (w, h) = (spec.width, spec.height);
    let layers = spec.layers();
    let field = visible_field(&layers, w, h);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.texture.seed);
    let texture = Lattice::random(w, h, spec.texture.density, &mut rng);
    let fresh = Lattice::random(w, h, spec.texture.density, &mut rng);
    let flat = spec.texture.flat;
    let paint = |x: f64, y: usize| -> f64 {
        match flat {
            Some(r) if r.contains(x, y as f64) => FLAT_GRAY,
            _ => texture.sample(x, y),
        }
    };

    let mut left = RgbImage::new(w as u32, h as u32);
    let mut right = RgbImage::new(w as u32, h as u32);
    let mut gt = DisparityMap::new(w, h);
    for y in 0..h {
        let yf = y as f64;
        for x in 0..w {
            left.put_pixel(x as u32, y as u32, gray(paint(x as f64, y)));

            let (layer, d) = field[y * w + x];
            let xr = x as f64 - d;
            let seen = xr >= 0.0
                && matches!(right_visible(&layers, xr, yf), Some((j, _, _)) if j == layer);
            if seen && d > 0.0 {
                gt.set(x, y, d as f32);
            }

            let xr = x as f64;
            let value = match right_visible(&layers, xr, yf) {
                Some((j, xl, _)) if (0.0..=(w - 1) as f64).contains(&xl) => {
                    match visible_at(&layers, xl, yf) {
                        Some((i, _)) if i == j => paint(xl, y),
                        _ => fresh.at(x, y),
                    }
                }
                _ => fresh.at(x, y),
            };
            right.put_pixel(x as u32, y as u32, gray(value));
        }
    }
    StereoSample::new(left, right, Some(gt))
}

/// The nearest-layer disparity at every left pixel, ignoring occlusion.
pub fn disparity_field(spec: &SceneSpec) -> Result<DisparityMap> {
    spec.validate()?;
    let field = visible_field(&spec.layers(), spec.width, spec.height);
    DisparityMap::from_vec(
        spec.width,
        spec.height,
        field.into_iter().map(|(_, d)| d as f32).collect(),
    )
}

/// Inputs for a registration run plus the map it should produce.
#[derive(Debug, Clone)]
pub struct DepthRigScene {
    /// Depth in millimeters as seen by the simulated depth camera.
    pub depth: DepthMap,
    pub k_depth: Intrinsics,
    pub k_left: Intrinsics,
    pub geometry: StereoGeometry,
    pub rig: RigTransform,
    /// Disparity in the stereo-left frame, computed by [`reference_registration`].
    pub expected: DisparityMap,
}

/// Ray-casts the scene's planes from a depth camera placed by `rig`
/// (depth frame → stereo-left frame) and records the expected registration.
///
/// Both cameras share [`SceneSpec::intrinsics`] and the image size.
pub fn synth_depth_rig(spec: &SceneSpec, rig: &RigTransform) -> Result<DepthRigScene> {
    spec.validate()?;
    let k = spec.intrinsics();
    let (w, h) = (spec.width, spec.height);
    let f = spec.geometry.focal_px;
    let bf = spec.geometry.bf();
    let (r, t) = (rig.rotation(), rig.translation());

    // In the left frame a layer is the plane n·P = b·f.
    let normals: Vec<nalgebra::Vector3<f64>> = spec
        .layers()
        .iter()
        .map(|p| nalgebra::Vector3::new(p.b * f, p.c * f, p.a + p.b * k.cx + p.c * k.cy))
        .collect();
    let layers = spec.layers();

    let depth = DepthMap::from_fn(w, h, |u, v| {
        let ray = nalgebra::Vector3::new((u as f64 - k.cx) / f, (v as f64 - k.cy) / f, 1.0);
        let dir = r * ray;
        let mut nearest = f64::INFINITY;
        for (n, plane) in normals.iter().zip(&layers) {
            let denom = n.dot(&dir);
            if denom.abs() < 1e-12 {
                continue;
            }
            let s = (bf - n.dot(t)) / denom;
            if !(s > 0.0 && s < nearest) {
                continue;
            }
            let q = dir * s + t;
            if q.z <= 0.0 {
                continue;
            }
            let (xl, yl) = (f * q.x / q.z + k.cx, f * q.y / q.z + k.cy);
            if plane.support.contains(xl, yl) {
                nearest = s;
            }
        }
        if nearest.is_finite() {
            nearest as f32
        } else {
            0.0
        }
    });
    let expected = reference_registration(&depth, rig, &k, &k, &spec.geometry, w, h);
    Ok(DepthRigScene {
        depth,
        k_depth: k,
        k_left: k,
        geometry: spec.geometry,
        rig: *rig,
        expected,
    })
}

/// Straightforward matrix-form registration used as a cross-check: every
/// depth pixel is lifted with `K⁻¹`, moved by the rig, projected with `K`,
/// rounded half-up and kept if it is the closest so far.
pub fn reference_registration(
    depth: &DepthMap,
    rig: &RigTransform,
    k_depth: &Intrinsics,
    k_left: &Intrinsics,
    geom: &StereoGeometry,
    out_w: usize,
    out_h: usize,
) -> DisparityMap {
    let k_inv = k_depth
        .matrix()
        .try_inverse()
        .expect("intrinsics are invertible");
    let k = k_left.matrix();
    let mut best = vec![f64::INFINITY; out_w * out_h];
    for v in 0..depth.height() {
        for u in 0..depth.width() {
            let z = depth.get(u, v) as f64;
            if !(z.is_finite() && z > 0.0) {
                continue;
            }
            let p = k_inv * nalgebra::Vector3::new(u as f64, v as f64, 1.0) * z;
            let q = rig.rotation() * p + rig.translation();
            if q.z <= 0.0 {
                continue;
            }
            let img = k * q;
            let (x, y) = ((img.x / img.z + 0.5).floor(), (img.y / img.z + 0.5).floor());
            if x < 0.0 || y < 0.0 || x >= out_w as f64 || y >= out_h as f64 {
                continue;
            }
            let i = y as usize * out_w + x as usize;
            best[i] = best[i].min(q.z);
        }
    }
    let bf = geom.bf();
    DisparityMap::from_vec(
        out_w,
        out_h,
        best.iter()
            .map(|&z| if z.is_finite() { (bf / z) as f32 } else { 0.0 })
            .collect(),
    )
    .expect("sizes agree")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RigidTransform;
    use crate::registration::register_depth;
    use nalgebra::{UnitQuaternion, Vector3};

    fn luma(img: &RgbImage, x: usize, y: usize) -> u8 {
        img.get_pixel(x as u32, y as u32).0[0]
    }

    #[test]
    fn zero_disparity_copies_left() {
        let spec = SceneSpec::new(40, 20, DisparityField::Constant { d: 0.0 }).with_seed(3);
        let s = synth_stereo(&spec).unwrap();
        assert_eq!(s.left, s.right);
        assert_eq!(s.ground_truth.unwrap().valid_count(), 0);
    }

    #[test]
    fn integer_shift() {
        let k = 7;
        let spec = SceneSpec::new(64, 16, DisparityField::Constant { d: k as f64 }).with_seed(5);
        let s = synth_stereo(&spec).unwrap();
        for y in 0..16 {
            for u in 0..64 - k {
                assert_eq!(luma(&s.right, u, y), luma(&s.left, u + k, y));
            }
        }
        let gt = s.ground_truth.unwrap();
        assert_eq!(gt.get(k - 1, 0), 0.0);
        assert_eq!(gt.get(k, 0), k as f32);
    }

    #[test]
    fn occlusion_band_matches_disparity_jump() {
        let (far, near) = (10.0, 22.0);
        let rect = Rect::new(40.0, 10.0, 70.0, 30.0);
        let spec = SceneSpec::new(100, 40, DisparityField::TwoPlane { far, near, rect });
        let gt = synth_stereo(&spec).unwrap().ground_truth.unwrap();
        let y = 20;
        let band = (far as usize..40).filter(|&x| gt.get(x, y) == 0.0).count();
        assert!((band as f64 - (near - far)).abs() <= 1.0, "band {band}");
        // and it sits directly left of the near rectangle
        assert_eq!(gt.get(39, y), 0.0);
        assert_eq!(gt.get(40, y), near as f32);
        // rows that miss the rectangle have no band
        assert!((far as usize..100).all(|x| gt.get(x, 5) == far as f32));
    }

    #[test]
    fn ramp_right_view_samples_surface() {
        let spec = SceneSpec::new(80, 4, DisparityField::Ramp {
            base: 10.0,
            slope_x: 0.1,
            slope_y: 0.0,
        });
        let s = synth_stereo(&spec).unwrap();
        let gt = s.ground_truth.unwrap();
        assert_eq!(gt.get(50, 0), 15.0);
        // x = 50 lands exactly on right column 35
        assert_eq!(luma(&s.right, 35, 0), luma(&s.left, 50, 0));
    }

    #[test]
    fn flat_region_is_uniform() {
        let mut spec = SceneSpec::new(60, 30, DisparityField::Constant { d: 5.0 });
        spec.texture.flat = Some(Rect::new(20.0, 0.0, 40.0, 30.0));
        let s = synth_stereo(&spec).unwrap();
        assert!((20..40).all(|x| luma(&s.left, x, 3) == FLAT_GRAY as u8));
        assert!((15..35).all(|x| luma(&s.right, x, 3) == FLAT_GRAY as u8));
    }

    #[test]
    fn spec_errors() {
        let too_wide = SceneSpec::new(30, 10, DisparityField::Constant { d: 40.0 });
        assert!(matches!(synth_stereo(&too_wide), Err(Error::Scene(_))));
        let mut over = SceneSpec::new(600, 10, DisparityField::Constant { d: 300.0 });
        assert!(over.validate().is_err());
        over.d_max = 400.0;
        assert!(over.validate().is_ok());
        assert!(SceneSpec::new(0, 10, DisparityField::Constant { d: 1.0 }).validate().is_err());
    }

    #[test]
    fn spec_toml_roundtrip() {
        let spec = SceneSpec::new(64, 32, DisparityField::TwoPlane {
            far: 10.0,
            near: 20.0,
            rect: Rect::new(1.0, 2.0, 30.0, 20.0),
        });
        assert_eq!(SceneSpec::from_toml(&spec.to_toml()).unwrap(), spec);
    }

    #[test]
    fn bimodal_defaults_are_valid() {
        let spec = SceneSpec::new(320, 200, DisparityField::Bimodal {
            ground: 210.0,
            leaf: 245.0,
            leaves: 12,
            seed: 1,
        });
        let gt = synth_stereo(&spec).unwrap().ground_truth.unwrap();
        assert!(gt.as_slice().iter().all(|&d| d == 0.0 || (d > 0.0 && d < 256.0)));
        assert!(gt.valid_count() > 0);
    }

    #[test]
    fn identity_rig_gives_bf_over_z() {
        let spec = SceneSpec::new(24, 16, DisparityField::Ramp {
            base: 200.0,
            slope_x: 0.5,
            slope_y: -0.25,
        });
        let scene = synth_depth_rig(&spec, &RigidTransform::identity()).unwrap();
        let field = disparity_field(&spec).unwrap();
        let bf = spec.geometry.bf();
        for y in 0..16 {
            for x in 0..24 {
                let z = scene.depth.get(x, y) as f64;
                assert!((bf / z - field.get(x, y) as f64).abs() < 1e-4);
                assert_eq!(scene.expected.get(x, y), (bf / z) as f32);
            }
        }
    }

    #[test]
    fn x_translation_shifts_by_whole_pixels() {
        // constant plane at d = 210: Z = bf / 210 = 600 mm; a 4/7 mm shift
        // moves every point by f·t/Z = 1 px
        let spec = SceneSpec::new(12, 6, DisparityField::Constant { d: 210.0 });
        let z = spec.geometry.bf() / 210.0;
        let tx = 3.0 * z / spec.geometry.focal_px;
        let rig = RigidTransform::from_translation(Vector3::new(tx, 0.0, 0.0));
        let scene = synth_depth_rig(&spec, &rig).unwrap();
        for y in 0..6 {
            // the depth camera sees the plane 3 px to the right of the left
            // camera; the three left-most left columns get nothing
            for x in 0..3 {
                assert_eq!(scene.expected.get(x, y), 0.0);
            }
            for x in 3..12 {
                assert!((scene.expected.get(x, y) - 210.0).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn reference_agrees_with_registration_on_rotated_rig() {
        let spec = SceneSpec::new(8, 8, DisparityField::Ramp {
            base: 220.0,
            slope_x: 0.3,
            slope_y: 0.2,
        });
        let q = UnitQuaternion::from_euler_angles(0.002, -0.003, 0.001);
        let rig = RigidTransform::from_quaternion(q, Vector3::new(1.5, -0.8, 2.0));
        let scene = synth_depth_rig(&spec, &rig).unwrap();
        let reg = register_depth(
            &scene.depth,
            &scene.rig,
            &scene.k_depth,
            &scene.k_left,
            &scene.geometry,
            8,
            8,
        )
        .unwrap();
        for (a, b) in reg.disparity.as_slice().iter().zip(scene.expected.as_slice()) {
            assert_eq!(*a == 0.0, *b == 0.0);
            assert!((a - b).abs() < 1e-4);
        }
    }
}
