//! Chains per-run extrinsics of the depth camera and the stereo-left camera
//! into a single depth→left rig, averages the runs and saves it as TOML.

use nalgebra::{UnitQuaternion, Vector3};
use stereo_gt::geometry::{average_rig, chain_extrinsics, CalibrationFile, RigidTransform, TransformRecord};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // The true rig: the depth camera sits 60 mm to the right and slightly
    // rotated relative to the left stereo camera.
    let truth = RigidTransform::from_quaternion(
        UnitQuaternion::from_euler_angles(0.004, -0.012, 0.002),
        Vector3::new(-60.0, 12.0, 5.0),
    );

    // Each calibration run sees the board at a different pose. A run gives
    // both cameras' world→camera extrinsics; small errors differ per run.
    let mut runs = Vec::new();
    for i in 0..6 {
        let k = i as f64;
        let board_to_depth = RigidTransform::from_quaternion(
            UnitQuaternion::from_euler_angles(0.1 * k, -0.05 * k, 0.02),
            Vector3::new(20.0 * k, -10.0, 600.0 + 25.0 * k),
        );
        let jitter = RigidTransform::from_quaternion(
            UnitQuaternion::from_euler_angles(1e-4 * (k - 2.5), 0.0, -1e-4 * (k - 2.5)),
            Vector3::new(0.2 * (k - 2.5), 0.0, 0.0),
        );
        let board_to_left = jitter.compose(&truth).compose(&board_to_depth);
        runs.push(chain_extrinsics(&board_to_depth, &board_to_left)?);
    }

    let rig = average_rig(&runs)?;
    println!(
        "rotation error {:.2e} deg, translation error {:.3} mm",
        rig.rotation_angle_to(&truth).to_degrees(),
        (rig.translation() - truth.translation()).norm()
    );

    let file = CalibrationFile {
        rig: Some(TransformRecord::from(&rig)),
        ..CalibrationFile::default()
    };
    print!("{}", file.to_toml());
    Ok(())
}
