//! Pinhole cameras, rigid transforms and the extrinsic chaining that links
//! the depth camera to the stereo left camera.
//!
//! Conventions: an extrinsic maps world coordinates into a camera frame,
//! `p_cam = R * p_world + t`. Translations are millimeters, pixel
//! coordinates are real-valued with `(0, 0)` at the top-left pixel center.

mod calib_file;

pub use calib_file::{CalibrationFile, TransformRecord};

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point3 = nalgebra::Point3<f64>;

/// Tolerance for `R^T R = I` and `det R = 1` on every rotation the crate
/// produces or accepts.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Real-valued image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

impl Pixel {
    pub fn new(u: f64, v: f64) -> Self {
        Pixel { u, v }
    }

    pub fn distance(&self, other: &Pixel) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }
}

/// Pinhole intrinsics without skew or distortion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        let k = Intrinsics { fx, fy, cx, cy };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::InvalidCalibration(format!(
                "focal lengths must be finite and > 0: {self:?}"
            )));
        }
        Ok(())
    }

    /// Checks that the principal point lies within `[0, 4 * dim]` of an image
    /// of the given size.
    pub fn check_principal_point(&self, width: usize, height: usize) -> Result<()> {
        let ok_x = (0.0..=4.0 * width as f64).contains(&self.cx);
        let ok_y = (0.0..=4.0 * height as f64).contains(&self.cy);
        if ok_x && ok_y {
            Ok(())
        } else {
            Err(Error::InvalidCalibration(format!(
                "principal point ({}, {}) implausible for {width}x{height}",
                self.cx, self.cy
            )))
        }
    }

    /// The 3x3 camera matrix `K`.
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.fx, 0.0, self.cx, //
            0.0, self.fy, self.cy, //
            0.0, 0.0, 1.0,
        )
    }
}

/// A proper rigid motion `p -> R p + t` (translation in millimeters).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

/// World-to-camera pose of a single camera.
pub type Extrinsics = RigidTransform;

/// Depth-camera frame to stereo-left frame.
pub type RigTransform = RigidTransform;

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a transform, rejecting rotations that are not orthonormal with
    /// determinant +1 within [`ROTATION_TOLERANCE`].
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        check_rotation(&rotation, ROTATION_TOLERANCE)?;
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidCalibration(format!(
                "non-finite translation {translation:?}"
            )));
        }
        Ok(RigidTransform {
            rotation,
            translation,
        })
    }

    /// Like [`RigidTransform::new`] but accepts a rotation that is only
    /// orthonormal to within `tolerance` and snaps it to the nearest proper
    /// rotation. Meant for matrices read from text files with few decimals.
    pub fn from_approximate(
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        tolerance: f64,
    ) -> Result<Self> {
        check_rotation(&rotation, tolerance)?;
        RigidTransform::new(nearest_rotation(&rotation), translation)
    }

    pub fn from_row_major(r: [f64; 9], t: [f64; 3]) -> Result<Self> {
        RigidTransform::new(Matrix3::from_row_slice(&r), Vector3::from(t))
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    pub fn from_quaternion(q: UnitQuaternion<f64>, t: Vector3<f64>) -> Self {
        RigidTransform {
            rotation: nearest_rotation(q.to_rotation_matrix().matrix()),
            translation: t,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn rotation_row_major(&self) -> [f64; 9] {
        let r = &self.rotation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
        ]
    }

    #[inline]
    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    /// `q -> R^T (q - t)`.
    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Angle (radians) of the relative rotation between two transforms.
    pub fn rotation_angle_to(&self, other: &RigidTransform) -> f64 {
        let rel = self.rotation.transpose() * other.rotation;
        ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
    }
}

fn check_rotation(r: &Matrix3<f64>, tol: f64) -> Result<()> {
    if !r.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidCalibration("non-finite rotation".into()));
    }
    let ortho_err = (r.transpose() * r - Matrix3::identity()).abs().max();
    let det_err = (r.determinant() - 1.0).abs();
    if ortho_err > tol || det_err > tol {
        return Err(Error::InvalidCalibration(format!(
            "rotation not orthonormal (|R^T R - I| = {ortho_err:.3e}, |det - 1| = {det_err:.3e})"
        )));
    }
    Ok(())
}

/// Projection onto SO(3) via SVD.
fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut d = Matrix3::identity();
    if (u * vt).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    u * d * vt
}

/// Relative transform taking points from the depth camera frame to the
/// stereo-left camera frame, given both world-to-camera extrinsics:
/// `R = R_left R_depth^-1`, `t = t_left - R t_depth`.
///
/// The translation is evaluated through the camera centers,
/// `R_left (C_depth - C_left)` with `C = -R^T t`, which equals the form
/// above for orthonormal rotations and cancels exactly when the two
/// extrinsics coincide.
pub fn chain_extrinsics(depth_cam: &Extrinsics, left_cam: &Extrinsics) -> Result<RigTransform> {
    check_rotation(&depth_cam.rotation, ROTATION_TOLERANCE)?;
    check_rotation(&left_cam.rotation, ROTATION_TOLERANCE)?;
    let rotation = left_cam.rotation * depth_cam.rotation.transpose();
    let center = |e: &Extrinsics| -(e.rotation.transpose() * e.translation);
    let translation = left_cam.rotation * (center(depth_cam) - center(left_cam));
    Ok(RigidTransform {
        rotation,
        translation,
    })
}

/// Averages repeated calibrations: arithmetic mean of translations and the
/// sign-aligned, renormalized quaternion mean of rotations.
pub fn average_rig(transforms: &[RigTransform]) -> Result<RigTransform> {
    let first = transforms
        .first()
        .ok_or(Error::EmptyInput("no rig transforms to average"))?;
    for t in transforms {
        check_rotation(&t.rotation, ROTATION_TOLERANCE)?;
    }
    if transforms.len() == 1 {
        return Ok(*first);
    }

    let half_turn = std::f64::consts::FRAC_PI_2;
    for (i, a) in transforms.iter().enumerate() {
        for b in &transforms[i + 1..] {
            let angle = a.rotation_angle_to(b);
            if angle > half_turn {
                return Err(Error::DivergentCalibration {
                    angle_deg: angle.to_degrees(),
                });
            }
        }
    }

    let quats: Vec<_> = transforms
        .iter()
        .map(|t| UnitQuaternion::from_matrix(&t.rotation))
        .collect();
    let reference = quats[0].coords;
    let mut sum = nalgebra::Vector4::zeros();
    let mut t_sum = Vector3::zeros();
    for (q, t) in quats.iter().zip(transforms) {
        let c = q.coords;
        sum += if c.dot(&reference) < 0.0 { -c } else { c };
        t_sum += t.translation;
    }
    let n = transforms.len() as f64;
    let mean = UnitQuaternion::from_quaternion(nalgebra::Quaternion::from(sum));
    Ok(RigidTransform::from_quaternion(mean, t_sum / n))
}

/// Pixel + depth to a 3-D point in the same camera's frame.
#[inline]
pub fn backproject(k: &Intrinsics, pix: Pixel, depth: f64) -> Result<Point3> {
    if !(depth.is_finite() && depth > 0.0) {
        return Err(Error::InvalidDepth(depth));
    }
    Ok(Point3::new(
        depth * (pix.u - k.cx) / k.fx,
        depth * (pix.v - k.cy) / k.fy,
        depth,
    ))
}

#[inline]
pub fn transform_point(rig: &RigTransform, p: &Point3) -> Point3 {
    rig.apply(p)
}

/// Perspective projection; the divisor is the point's own z.
#[inline]
pub fn project(k: &Intrinsics, p: &Point3) -> Result<Pixel> {
    if !(p.z.is_finite() && p.z > 0.0) {
        return Err(Error::BehindCamera {
            z: p.z,
            corner: None,
        });
    }
    Ok(Pixel::new(k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Unit;
    use proptest::prelude::*;

    fn rot(axis: [f64; 3], angle: f64) -> Matrix3<f64> {
        UnitQuaternion::from_axis_angle(&Unit::new_normalize(Vector3::from(axis)), angle)
            .to_rotation_matrix()
            .into_inner()
    }

    fn assert_rotation_ok(r: &Matrix3<f64>) {
        check_rotation(r, ROTATION_TOLERANCE).unwrap();
    }

    #[test]
    fn chain_identical_is_identity() {
        let e = RigidTransform::new(rot([1.0, 2.0, 0.5], 0.7), Vector3::new(10.0, -4.0, 300.0))
            .unwrap();
        let rig = chain_extrinsics(&e, &e).unwrap();
        assert!((rig.rotation - Matrix3::identity()).abs().max() < 1e-12);
        assert!(rig.translation.abs().max() < 1e-12);
    }

    #[test]
    fn chain_with_identity_depth_camera() {
        let left_cam = RigidTransform::new(rot([0.0, 1.0, 0.0], 0.2), Vector3::new(1.0, 2.0, 3.0))
            .unwrap();
        let rig = chain_extrinsics(&RigidTransform::identity(), &left_cam).unwrap();
        assert_eq!(rig.rotation, left_cam.rotation);
        assert!((rig.translation() - left_cam.translation()).amax() < 1e-12);
    }

    #[test]
    fn chain_rejects_skewed_rotation() {
        let mut bad = RigidTransform::identity();
        bad.rotation[(0, 1)] = 0.01;
        assert!(matches!(
            chain_extrinsics(&bad, &RigidTransform::identity()),
            Err(Error::InvalidCalibration(_))
        ));
    }

    #[test]
    fn compose_and_compare_world_point() {
        let depth_cam = RigidTransform::new(rot([0.3, -1.0, 0.2], 0.4), Vector3::new(-50.0, 20.0, 700.0))
            .unwrap();
        let left_cam = RigidTransform::new(rot([1.0, 0.1, 0.0], -0.3), Vector3::new(80.0, 5.0, 650.0))
            .unwrap();
        let rig = chain_extrinsics(&depth_cam, &left_cam).unwrap();
        let world = Point3::new(12.0, -33.0, 41.0);
        let in_left = rig.apply(&depth_cam.apply(&world));
        assert!((in_left - left_cam.apply(&world)).norm() < 1e-9);
        assert_rotation_ok(&rig.rotation);
    }

    #[test]
    fn average_of_repeats_is_the_element() {
        let t = RigidTransform::new(rot([0.0, 0.0, 1.0], 0.3), Vector3::new(1.0, 2.0, 3.0)).unwrap();
        let avg = average_rig(&[t; 5]).unwrap();
        assert!((avg.rotation - t.rotation).abs().max() < 1e-12);
        assert!((avg.translation - t.translation).abs().max() < 1e-12);
        assert_eq!(average_rig(&[t]).unwrap(), t);
    }

    #[test]
    fn average_of_symmetric_pair_is_identity() {
        let tr = Vector3::new(5.0, 6.0, 7.0);
        let a = RigidTransform::new(rot([1.0, 1.0, 0.0], 0.25), tr).unwrap();
        let b = RigidTransform::new(rot([1.0, 1.0, 0.0], -0.25), tr).unwrap();
        let avg = average_rig(&[a, b]).unwrap();
        assert!((avg.rotation - Matrix3::identity()).abs().max() < 1e-12);
        assert!((avg.translation - tr).abs().max() < 1e-12);
    }

    #[test]
    fn average_errors() {
        assert!(matches!(average_rig(&[]), Err(Error::EmptyInput(_))));
        let a = RigidTransform::new(rot([0.0, 0.0, 1.0], 1.0), Vector3::zeros()).unwrap();
        let b = RigidTransform::new(rot([0.0, 0.0, 1.0], -1.0), Vector3::zeros()).unwrap();
        assert!(matches!(
            average_rig(&[a, b]),
            Err(Error::DivergentCalibration { .. })
        ));
    }

    #[test]
    fn average_of_small_perturbations() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let base = RigidTransform::new(rot([0.2, 0.9, -0.1], 0.8), Vector3::new(60.0, -5.0, 2.0))
            .unwrap();
        let samples: Vec<_> = (0..5)
            .map(|_| {
                let axis = [
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                ];
                let noise = rot(axis, rng.random_range(-2e-3..2e-3));
                RigidTransform::new(noise * base.rotation, base.translation).unwrap()
            })
            .collect();
        let avg = average_rig(&samples).unwrap();
        assert!(avg.rotation_angle_to(&base) < 1e-3);
        assert_rotation_ok(&avg.rotation);
    }

    #[test]
    fn backproject_and_project_examples() {
        let k = Intrinsics::new(600.0, 610.0, 320.0, 240.0).unwrap();
        let p = backproject(&k, Pixel::new(320.0, 240.0), 500.0).unwrap();
        assert_eq!(p, Point3::new(0.0, 0.0, 500.0));

        let unit = Intrinsics::new(1.0, 1.0, 0.0, 0.0).unwrap();
        let p = backproject(&unit, Pixel::new(2.0, 3.0), 4.0).unwrap();
        assert_eq!(p, Point3::new(8.0, 12.0, 4.0));
        assert!(matches!(
            backproject(&unit, Pixel::new(2.0, 3.0), 0.0),
            Err(Error::InvalidDepth(_))
        ));

        assert_eq!(
            project(&k, &Point3::new(0.0, 0.0, 17.0)).unwrap(),
            Pixel::new(320.0, 240.0)
        );
        let k100 = Intrinsics::new(100.0, 100.0, 0.0, 0.0).unwrap();
        assert_eq!(
            project(&k100, &Point3::new(1.0, 2.0, 10.0)).unwrap(),
            Pixel::new(10.0, 20.0)
        );
        assert!(matches!(
            project(&k100, &Point3::new(1.0, 2.0, -1.0)),
            Err(Error::BehindCamera { .. })
        ));
    }

    #[test]
    fn transform_examples() {
        let p = Point3::new(3.0, -1.0, 2.0);
        assert_eq!(transform_point(&RigidTransform::identity(), &p), p);
        let shift = RigidTransform::from_translation(Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(
            transform_point(&shift, &Point3::origin()),
            Point3::new(1.0, 2.0, 3.0)
        );
    }

    #[test]
    fn invalid_intrinsics() {
        assert!(Intrinsics::new(0.0, 1.0, 0.0, 0.0).is_err());
        assert!(Intrinsics::new(1.0, f64::NAN, 0.0, 0.0).is_err());
        let k = Intrinsics::new(500.0, 500.0, 5000.0, 10.0).unwrap();
        assert!(k.check_principal_point(640, 480).is_err());
    }

    #[test]
    fn approximate_rotation_is_snapped() {
        let r = rot([0.0, 1.0, 0.0], 0.5);
        let noisy = r.map(|v| (v * 1e6).round() / 1e6);
        assert!(RigidTransform::new(noisy, Vector3::zeros()).is_err());
        let t = RigidTransform::from_approximate(noisy, Vector3::zeros(), 1e-5).unwrap();
        assert_rotation_ok(t.rotation());
        assert!((t.rotation() - r).abs().max() < 1e-5);
    }

    fn arb_rotation() -> impl Strategy<Value = Matrix3<f64>> {
        (
            -1.0f64..1.0,
            -1.0f64..1.0,
            -1.0f64..1.0,
            -std::f64::consts::PI..std::f64::consts::PI,
        )
            .prop_filter("axis", |(x, y, z, _)| x * x + y * y + z * z > 1e-3)
            .prop_map(|(x, y, z, a)| rot([x, y, z], a))
    }

    proptest! {
        #[test]
        fn average_is_permutation_invariant(
            angles in proptest::collection::vec(-0.3f64..0.3, 2..6),
            shift in 0usize..6,
        ) {
            let ts: Vec<_> = angles
                .iter()
                .enumerate()
                .map(|(i, &a)| {
                    RigidTransform::new(
                        rot([1.0, i as f64, 0.5], a),
                        Vector3::new(i as f64, a, 1.0),
                    )
                    .unwrap()
                })
                .collect();
            let mut rotated = ts.clone();
            rotated.rotate_left(shift % ts.len());
            rotated.reverse();
            let a = average_rig(&ts).unwrap();
            let b = average_rig(&rotated).unwrap();
            prop_assert!((a.rotation - b.rotation).abs().max() < 1e-12);
            prop_assert!((a.translation - b.translation).abs().max() < 1e-12);
        }

        #[test]
        fn chained_rotation_is_proper(r1 in arb_rotation(), r2 in arb_rotation()) {
            let a = RigidTransform::new(r1, Vector3::new(1.0, 2.0, 3.0)).unwrap();
            let b = RigidTransform::new(r2, Vector3::new(-4.0, 0.0, 9.0)).unwrap();
            let rig = chain_extrinsics(&a, &b).unwrap();
            prop_assert!(check_rotation(rig.rotation(), ROTATION_TOLERANCE).is_ok());
            let back = rig.inverse().apply(&rig.apply(&Point3::new(4.0, 5.0, 6.0)));
            prop_assert!((back - Point3::new(4.0, 5.0, 6.0)).norm() < 1e-9);
        }

        #[test]
        fn project_backproject_roundtrip(
            fx in 100.0f64..2000.0, fy in 100.0f64..2000.0,
            cx in 0.0f64..1200.0, cy in 0.0f64..800.0,
            u in 0.0f64..1200.0, v in 0.0f64..800.0, z in 100.0f64..5000.0,
        ) {
            let k = Intrinsics::new(fx, fy, cx, cy).unwrap();
            let p = backproject(&k, Pixel::new(u, v), z).unwrap();
            let q = project(&k, &p).unwrap();
            prop_assert!((q.u - u).abs() < 1e-9 && (q.v - v).abs() < 1e-9);
            let p2 = backproject(&k, q, p.z).unwrap();
            prop_assert!((p2 - p).norm() < 1e-9);
        }
    }
}
