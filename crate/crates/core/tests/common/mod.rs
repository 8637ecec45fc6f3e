//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;
use stereo_gt::geometry::RigidTransform;
use stereo_gt::maps::DisparityMap;
use stereo_gt::oracle::{DisparityField, Rect, SceneSpec};

/// Metrics computed the obvious way, one pixel at a time in row-major
/// order: (bad% per delta, epe, rmse).
pub fn naive_metrics(pred: &DisparityMap, gt: &DisparityMap, deltas: &[f32], d_max: f32) -> (Vec<f64>, f64, f64) {
    let mut n = 0u64;
    let mut bad = vec![0u64; deltas.len()];
    let (mut abs, mut sq) = (0.0f64, 0.0f64);
    for y in 0..gt.height() {
        for x in 0..gt.width() {
            let g = gt.get(x, y);
            if !(g > 0.0 && g < d_max) {
                continue;
            }
            n += 1;
            let p = pred.get(x, y);
            let hole = !(p.is_finite() && p > 0.0);
            let e = if hole { d_max as f64 } else { (p as f64 - g as f64).abs() };
            abs += e;
            sq += e * e;
            for (k, &delta) in deltas.iter().enumerate() {
                if hole || e > delta as f64 {
                    bad[k] += 1;
                }
            }
        }
    }
    let n = n as f64;
    (
        bad.iter().map(|&b| 100.0 * b as f64 / n).collect(),
        abs / n,
        (sq / n).sqrt(),
    )
}

/// A map with about `holes` of its pixels invalid and the rest in `(0, 300)`.
pub fn random_map(rng: &mut impl Rng, w: usize, h: usize, holes: f64) -> DisparityMap {
    DisparityMap::from_fn(w, h, |_, _| {
        if rng.random::<f64>() < holes {
            0.0
        } else {
            rng.random_range(0.01f32..300.0)
        }
    })
}

/// A prediction close to `gt` with some outliers and holes.
pub fn noisy_prediction(rng: &mut impl Rng, gt: &DisparityMap) -> DisparityMap {
    DisparityMap::from_fn(gt.width(), gt.height(), |x, y| {
        let r: f64 = rng.random();
        if r < 0.05 {
            0.0
        } else if r < 0.15 {
            rng.random_range(0.5f32..255.0)
        } else {
            (gt.get(x, y) + rng.random_range(-4.0f32..4.0)).max(0.01)
        }
    })
}

/// Two-plane or ramp scene of at most 32x32 with plant-like disparities.
pub fn random_scene(rng: &mut impl Rng) -> SceneSpec {
    let (w, h) = (rng.random_range(8..=32), rng.random_range(8..=32));
    let field = if rng.random_bool(0.7) {
        let far = rng.random_range(190.0..215.0);
        let (x0, y0) = (rng.random_range(0.0..w as f64 / 2.0), rng.random_range(0.0..h as f64 / 2.0));
        DisparityField::TwoPlane {
            far,
            near: far + rng.random_range(8.0..35.0),
            rect: Rect::new(x0, y0, x0 + w as f64 / 2.0, y0 + h as f64 / 2.0),
        }
    } else {
        DisparityField::Ramp {
            base: rng.random_range(200.0..220.0),
            slope_x: rng.random_range(-0.5..0.5),
            slope_y: rng.random_range(-0.5..0.5),
        }
    };
    SceneSpec::new(w, h, field)
}

/// Small rotation, translation of a few millimeters: enough to make near
/// and far surfaces collide after reprojection.
pub fn random_rig(rng: &mut impl Rng) -> RigidTransform {
    let q = UnitQuaternion::from_euler_angles(
        rng.random_range(-0.01..0.01),
        rng.random_range(-0.01..0.01),
        rng.random_range(-0.01..0.01),
    );
    let t = Vector3::new(
        rng.random_range(-10.0..10.0),
        rng.random_range(-4.0..4.0),
        rng.random_range(-5.0..5.0),
    );
    RigidTransform::from_quaternion(q, t)
}
