//! Turns a depth map from a separate depth camera into disparity ground
//! truth for the stereo-left view and reports coverage.

use nalgebra::{UnitQuaternion, Vector3};
use stereo_gt::geometry::RigidTransform;
use stereo_gt::oracle::{synth_depth_rig, DisparityField, Rect, SceneSpec};
use stereo_gt::registration::{density, register_depth};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // A box 20 px of disparity in front of a background plane at ~600 mm.
    let spec = SceneSpec::new(
        320,
        240,
        DisparityField::TwoPlane {
            far: 210.0,
            near: 230.0,
            rect: Rect::new(100.0, 60.0, 220.0, 180.0),
        },
    );
    let rig = RigidTransform::from_quaternion(
        UnitQuaternion::from_euler_angles(0.002, -0.004, 0.001),
        Vector3::new(-25.0, 4.0, 3.0),
    );
    let scene = synth_depth_rig(&spec, &rig)?;

    let reg = register_depth(
        &scene.depth,
        &scene.rig,
        &scene.k_depth,
        &scene.k_left,
        &scene.geometry,
        spec.width,
        spec.height,
    )?;
    let s = reg.stats;
    println!(
        "{} depth pixels, {} landed in the left image, {} output pixels filled",
        s.valid_inputs, s.hits, s.filled
    );
    println!("density {:.1}%", 100.0 * density(&reg.disparity));
    if let Some(w) = reg.warning() {
        println!("warning: {w}");
    }

    let worst = reg
        .disparity
        .as_slice()
        .iter()
        .zip(scene.expected.as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f32, f32::max);
    println!("max difference to the reference registration: {worst:.2e} px");
    Ok(())
}
