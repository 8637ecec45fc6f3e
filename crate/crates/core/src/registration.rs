//! Depth-camera to stereo-left registration and depth/disparity conversion.
//!
//! Every valid depth pixel is backprojected with the depth camera's
//! intrinsics, moved into the stereo-left frame by the rig transform, and
//! projected with the left camera's intrinsics. The target pixel is the
//! nearest integer position (halves round up) and receives the disparity
//! `b * f / z` of the *transformed* point. When several depth pixels land on
//! the same target, the one nearest to the stereo camera wins.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{backproject, project, Intrinsics, Pixel, RigTransform};
use crate::maps::{is_valid_disparity, DepthMap, DisparityMap, StereoGeometry};

/// `b * f / z`.
#[inline]
pub fn depth_to_disparity(depth_mm: f64, geom: &StereoGeometry) -> Result<f64> {
    if !(depth_mm.is_finite() && depth_mm > 0.0) {
        return Err(Error::InvalidDepth(depth_mm));
    }
    Ok(geom.bf() / depth_mm)
}

/// `b * f / d`.
#[inline]
pub fn disparity_to_depth(disparity: f64, geom: &StereoGeometry) -> Result<f64> {
    if !(disparity.is_finite() && disparity > 0.0) {
        return Err(Error::InvalidDisparity(disparity));
    }
    Ok(geom.bf() / disparity)
}

/// Fraction of pixels holding a valid disparity.
pub fn density(map: &DisparityMap) -> f64 {
    let total = map.width() * map.height();
    if total == 0 {
        return 0.0;
    }
    map.valid_count() as f64 / total as f64
}

/// Nearest integer pixel index along one axis, halves rounding up.
#[inline]
pub(crate) fn target_index(coord: f64, len: usize) -> Option<usize> {
    let i = (coord + 0.5).floor();
    (i >= 0.0 && i < len as f64).then_some(i as usize)
}

/// Per depth row: (output index, z) hits, valid inputs, points behind the camera.
type RowLandings = (Vec<(usize, f64)>, usize, usize);

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct RegistrationStats {
    /// Depth pixels carrying a measurement.
    pub valid_inputs: usize,
    /// Valid inputs that landed inside the output image.
    pub hits: usize,
    /// Valid inputs whose transformed point had `z <= 0`.
    pub behind_camera: usize,
    /// Output pixels that ended up with a disparity.
    pub filled: usize,
}

impl RegistrationStats {
    pub fn hit_ratio(&self) -> f64 {
        if self.valid_inputs == 0 {
            0.0
        } else {
            self.hits as f64 / self.valid_inputs as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RegistrationWarning {
    /// No depth pixel projected into the output image; the calibration most
    /// likely does not belong to this camera pair.
    Empty { hit_ratio: f64 },
}

impl std::fmt::Display for RegistrationWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RegistrationWarning::Empty { hit_ratio } => write!(
                f,
                "empty registration: hit ratio {hit_ratio:.3}; check that the calibration matches the cameras"
            ),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Registration {
    pub disparity: DisparityMap,
    pub stats: RegistrationStats,
}

impl Registration {
    pub fn warning(&self) -> Option<RegistrationWarning> {
        (self.stats.hits == 0).then(|| RegistrationWarning::Empty {
            hit_ratio: self.stats.hit_ratio(),
        })
    }
}

/// Everything that maps one depth pixel to the stereo-left image.
#[derive(Debug, Clone, Copy)]
pub struct Registrar {
    pub rig: RigTransform,
    pub depth_intrinsics: Intrinsics,
    pub left_intrinsics: Intrinsics,
    pub geometry: StereoGeometry,
}

enum Landing {
    Hit { index: usize, z: f64 },
    Outside,
    Behind,
}

impl Registrar {
    fn land(&self, x: usize, y: usize, depth: f64, out_w: usize, out_h: usize) -> Landing {
        let p = match backproject(&self.depth_intrinsics, Pixel::new(x as f64, y as f64), depth) {
            Ok(p) => p,
            Err(_) => return Landing::Outside,
        };
        let q = self.rig.apply(&p);
        let Ok(pix) = project(&self.left_intrinsics, &q) else {
            return Landing::Behind;
        };
        match (target_index(pix.u, out_w), target_index(pix.v, out_h)) {
            (Some(u), Some(v)) => Landing::Hit {
                index: v * out_w + u,
                z: q.z,
            },
            _ => Landing::Outside,
        }
    }

    pub fn register(&self, depth: &DepthMap, out_w: usize, out_h: usize) -> Result<Registration> {
        self.depth_intrinsics.validate()?;
        self.left_intrinsics.validate()?;
        self.geometry.validate()?;
        if out_w == 0 || out_h == 0 {
            return Err(Error::Dimension(format!(
                "output size {out_w}x{out_h} must be positive"
            )));
        }

        // Rows are independent; the z-buffer merge below is sequential and
        // order-insensitive (min over z), so the result never depends on
        // scheduling.
        let per_row: Vec<RowLandings> = (0..depth.height())
            .into_par_iter()
            .map(|y| {
                let mut hits = Vec::new();
                let (mut valid, mut behind) = (0, 0);
                for x in 0..depth.width() {
                    let Some(z) = depth.depth_at(x, y) else {
                        continue;
                    };
                    valid += 1;
                    match self.land(x, y, z as f64, out_w, out_h) {
                        Landing::Hit { index, z } => hits.push((index, z)),
                        Landing::Behind => behind += 1,
                        Landing::Outside => {}
                    }
                }
                (hits, valid, behind)
            })
            .collect();

        let mut zbuf = vec![f64::INFINITY; out_w * out_h];
        let mut stats = RegistrationStats::default();
        for (hits, valid, behind) in &per_row {
            stats.valid_inputs += valid;
            stats.behind_camera += behind;
            stats.hits += hits.len();
            for &(index, z) in hits {
                if z < zbuf[index] {
                    zbuf[index] = z;
                }
            }
        }

        let bf = self.geometry.bf();
        let data: Vec<f32> = zbuf
            .iter()
            .map(|&z| if z.is_finite() { (bf / z) as f32 } else { 0.0 })
            .collect();
        let disparity = DisparityMap::from_vec(out_w, out_h, data)?;
        stats.filled = disparity.valid_count();
        let reg = Registration { disparity, stats };
        if let Some(w) = reg.warning() {
            log::warn!("{w}");
        }
        Ok(reg)
    }
}

/// Registers `depth` into a `out_w x out_h` stereo-left disparity map.
pub fn register_depth(
    depth: &DepthMap,
    rig: &RigTransform,
    k_depth: &Intrinsics,
    k_left: &Intrinsics,
    geom: &StereoGeometry,
    out_w: usize,
    out_h: usize,
) -> Result<Registration> {
    Registrar {
        rig: *rig,
        depth_intrinsics: *k_depth,
        left_intrinsics: *k_left,
        geometry: *geom,
    }
    .register(depth, out_w, out_h)
}

/// Converts a disparity map back to depth (millimeters), keeping invalid
/// pixels at `0.0`.
pub fn disparity_map_to_depth(map: &DisparityMap, geom: &StereoGeometry) -> DepthMap {
    let bf = geom.bf();
    DepthMap::from_fn(map.width(), map.height(), |x, y| {
        let d = map.get(x, y);
        if is_valid_disparity(d) {
            (bf / d as f64) as f32
        } else {
            0.0
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RigidTransform;
    use nalgebra::Vector3;
    use proptest::prelude::*;

    fn geom() -> StereoGeometry {
        StereoGeometry::new(120.0, 1050.0).unwrap()
    }

    #[test]
    fn depth_disparity_examples() {
        let unit = StereoGeometry::new(1.0, 1.0).unwrap();
        assert_eq!(depth_to_disparity(1.0, &unit).unwrap(), 1.0);
        let g = geom();
        let d1 = depth_to_disparity(700.0, &g).unwrap();
        let d2 = depth_to_disparity(1400.0, &g).unwrap();
        assert!((d1 - 2.0 * d2).abs() < 1e-12);
        assert!(matches!(depth_to_disparity(0.0, &g), Err(Error::InvalidDepth(_))));

        let g = StereoGeometry::new(10.0, 100.0).unwrap();
        assert_eq!(disparity_to_depth(10.0, &g).unwrap(), 100.0);
        assert!(matches!(
            disparity_to_depth(0.0, &g),
            Err(Error::InvalidDisparity(_))
        ));
    }

    #[test]
    fn plant_scale_depths_fall_in_the_expected_band() {
        // 120 mm baseline, 1050 px focal: 500..630 mm maps to 200..252 px.
        let g = geom();
        let mut prev = f64::INFINITY;
        for i in 0..=130 {
            let z = 500.0 + i as f64;
            let d = depth_to_disparity(z, &g).unwrap();
            assert!((200.0..=252.0).contains(&d), "z={z} d={d}");
            assert!(d < prev);
            prev = d;
        }
    }

    #[test]
    fn density_examples() {
        assert_eq!(density(&DisparityMap::new(4, 4)), 0.0);
        let full = DisparityMap::from_fn(4, 4, |_, _| 3.0);
        assert_eq!(density(&full), 1.0);
        let half = DisparityMap::from_fn(4, 4, |x, _| if x < 2 { 3.0 } else { 0.0 });
        assert_eq!(density(&half), 0.5);
    }

    #[test]
    fn identity_registration_is_pixelwise_conversion() {
        let k = Intrinsics::new(1050.0, 1050.0, 16.0, 12.0).unwrap();
        let depth = DepthMap::from_fn(32, 24, |x, y| {
            if (x + y) % 7 == 0 {
                0.0
            } else {
                550.0 + x as f32
            }
        });
        let reg = register_depth(&depth, &RigidTransform::identity(), &k, &k, &geom(), 32, 24)
            .unwrap();
        for y in 0..24 {
            for x in 0..32 {
                let expected = match depth.depth_at(x, y) {
                    Some(z) => depth_to_disparity(z as f64, &geom()).unwrap() as f32,
                    None => 0.0,
                };
                assert_eq!(reg.disparity.get(x, y), expected);
            }
        }
        assert_eq!(reg.stats.hits, reg.stats.valid_inputs);
        assert!(reg.warning().is_none());
    }

    #[test]
    fn near_plane_wins_collisions() {
        // 8x8 scene: far plane at 1000 mm, a near patch at 500 mm in columns
        // 2..4. A lateral rig shift of s mm moves a point at depth z by
        // f * s / z pixels, so the near patch moves twice as far and lands
        // on top of far-plane pixels.
        let f = 100.0;
        let k = Intrinsics::new(f, f, 4.0, 4.0).unwrap();
        let g = StereoGeometry::new(10.0, f).unwrap();
        let depth = DepthMap::from_fn(8, 8, |x, _| if (2..4).contains(&x) { 500.0 } else { 1000.0 });
        // shift of 10 mm: near moves 2 px, far moves 1 px.
        let rig = RigidTransform::from_translation(Vector3::new(10.0, 0.0, 0.0));
        let reg = register_depth(&depth, &rig, &k, &k, &g, 8, 8).unwrap();
        let near = (g.bf() / 500.0) as f32;
        let far = (g.bf() / 1000.0) as f32;
        // near x=2,3 -> 4,5; far x=0,1 -> 1,2 and x=4..6 -> 5..7.
        let expected = [0.0, far, far, 0.0, near, near, far, far];
        for y in 0..8 {
            for (x, &e) in expected.iter().enumerate() {
                assert_eq!(reg.disparity.get(x, y), e, "x={x}");
            }
        }
    }

    #[test]
    fn miscalibration_warns() {
        let k = Intrinsics::new(100.0, 100.0, 4.0, 4.0).unwrap();
        let depth = DepthMap::from_fn(8, 8, |_, _| 1000.0);
        let rig = RigidTransform::from_translation(Vector3::new(1e6, 0.0, 0.0));
        let reg = register_depth(&depth, &rig, &k, &k, &geom(), 8, 8).unwrap();
        assert_eq!(
            reg.warning(),
            Some(RegistrationWarning::Empty { hit_ratio: 0.0 })
        );
        assert_eq!(reg.disparity.valid_count(), 0);
        assert!(register_depth(&depth, &rig, &k, &k, &geom(), 0, 8).is_err());
    }

    #[test]
    fn points_behind_camera_are_dropped() {
        let k = Intrinsics::new(100.0, 100.0, 4.0, 4.0).unwrap();
        let depth = DepthMap::from_fn(8, 8, |x, _| if x < 4 { 100.0 } else { 1000.0 });
        let rig = RigidTransform::from_translation(Vector3::new(0.0, 0.0, -500.0));
        let reg = register_depth(&depth, &rig, &k, &k, &geom(), 8, 8).unwrap();
        assert_eq!(reg.stats.behind_camera, 32);
    }

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(target_index(1.5, 10), Some(2));
        assert_eq!(target_index(1.49, 10), Some(1));
        assert_eq!(target_index(-0.5, 10), Some(0));
        assert_eq!(target_index(-0.51, 10), None);
        assert_eq!(target_index(9.5, 10), None);
    }

    proptest! {
        #[test]
        fn disparity_depth_roundtrip(d in 0.01f64..1000.0, b in 1.0f64..500.0, f in 10.0f64..3000.0) {
            let g = StereoGeometry::new(b, f).unwrap();
            let back = depth_to_disparity(disparity_to_depth(d, &g).unwrap(), &g).unwrap();
            prop_assert!((back - d).abs() < 1e-9);
        }

        #[test]
        fn strictly_decreasing_in_depth(z in 1.0f64..1e5, dz in 1e-3f64..100.0) {
            let g = geom();
            prop_assert!(depth_to_disparity(z + dz, &g).unwrap() < depth_to_disparity(z, &g).unwrap());
        }
    }
}
