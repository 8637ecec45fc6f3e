//! Calibration text files (TOML).
//!
//! One schema covers every calibration artifact; each file fills in the
//! tables it needs:
//!
//! ```toml
//! [depth_camera]          # pixels
//! fx = 1050.0
//! fy = 1050.0
//! cx = 512.0
//! cy = 286.0
//!
//! [left_camera]
//! fx = 1050.0
//! fy = 1050.0
//! cx = 512.0
//! cy = 286.0
//!
//! [stereo]
//! baseline_mm = 120.0
//! focal_px = 1050.0
//!
//! [[extrinsic]]           # world -> camera, one record per calibration run
//! R = [1, 0, 0, 0, 1, 0, 0, 0, 1]   # row-major
//! t = [0, 0, 0]                     # millimeters
//!
//! [rig]                   # depth camera -> stereo left
//! R = [1, 0, 0, 0, 1, 0, 0, 0, 1]
//! t = [0, 0, 0]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Intrinsics, RigidTransform};
use crate::error::{Error, Result};
use crate::maps::StereoGeometry;

/// Rotations read from text are snapped onto SO(3) if they are within this
/// distance of it; anything worse is rejected.
pub const FILE_ROTATION_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformRecord {
    #[serde(rename = "R")]
    pub rotation: [f64; 9],
    pub t: [f64; 3],
}

impl TransformRecord {
    pub fn to_transform(&self) -> Result<RigidTransform> {
        RigidTransform::from_approximate(
            nalgebra::Matrix3::from_row_slice(&self.rotation),
            nalgebra::Vector3::from(self.t),
            FILE_ROTATION_TOLERANCE,
        )
    }
}

impl From<&RigidTransform> for TransformRecord {
    fn from(t: &RigidTransform) -> Self {
        let tr = t.translation();
        TransformRecord {
            rotation: t.rotation_row_major(),
            t: [tr.x, tr.y, tr.z],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_camera: Option<Intrinsics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left_camera: Option<Intrinsics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stereo: Option<StereoGeometry>,
    #[serde(default, rename = "extrinsic", skip_serializing_if = "Vec::is_empty")]
    pub extrinsics: Vec<TransformRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rig: Option<TransformRecord>,
}

impl CalibrationFile {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let file: CalibrationFile = toml::from_str(text).map_err(|e| Error::parse(origin, e))?;
        for k in file.depth_camera.iter().chain(&file.left_camera) {
            k.validate()?;
        }
        if let Some(g) = &file.stereo {
            g.validate()?;
        }
        Ok(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("calibration records always serialize")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }

    pub fn extrinsic_transforms(&self) -> Result<Vec<RigidTransform>> {
        self.extrinsics.iter().map(|r| r.to_transform()).collect()
    }

    pub fn rig_transform(&self) -> Result<RigidTransform> {
        self.rig
            .as_ref()
            .ok_or_else(|| Error::InvalidCalibration("missing [rig] table".into()))?
            .to_transform()
    }

    pub fn depth_intrinsics(&self) -> Result<Intrinsics> {
        self.depth_camera
            .ok_or_else(|| Error::InvalidCalibration("missing [depth_camera] table".into()))
    }

    pub fn left_intrinsics(&self) -> Result<Intrinsics> {
        self.left_camera
            .ok_or_else(|| Error::InvalidCalibration("missing [left_camera] table".into()))
    }

    pub fn stereo_geometry(&self) -> Result<StereoGeometry> {
        self.stereo
            .ok_or_else(|| Error::InvalidCalibration("missing [stereo] table".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[depth_camera]
fx = 910.5
fy = 911.0
cx = 640.2
cy = 360.8

[left_camera]
fx = 1050.0
fy = 1050.0
cx = 523.0
cy = 303.0

[stereo]
baseline_mm = 120.0
focal_px = 1050.0

[[extrinsic]]
R = [1, 0, 0, 0, 1, 0, 0, 0, 1]
t = [0, 0, 500]

[[extrinsic]]
R = [0.999998, -0.002, 0.0, 0.002, 0.999998, 0.0, 0.0, 0.0, 1.0]
t = [1.5, 0, 500]
"#;

    #[test]
    fn parses_all_tables() {
        let f = CalibrationFile::parse(SAMPLE, Path::new("sample.toml")).unwrap();
        assert_eq!(f.depth_camera.unwrap().fx, 910.5);
        assert_eq!(f.stereo_geometry().unwrap().baseline_mm, 120.0);
        let ts = f.extrinsic_transforms().unwrap();
        assert_eq!(ts.len(), 2);
        assert_eq!(ts[1].translation().x, 1.5);
        assert!(f.rig_transform().is_err());
    }

    #[test]
    fn roundtrips_through_text() {
        let mut f = CalibrationFile::parse(SAMPLE, Path::new("sample.toml")).unwrap();
        f.rig = Some(TransformRecord::from(&RigidTransform::identity()));
        let again = CalibrationFile::parse(&f.to_toml(), Path::new("again.toml")).unwrap();
        assert_eq!(f, again);
    }

    #[test]
    fn rejects_bad_values() {
        let bad = "[depth_camera]\nfx = -1.0\nfy = 1.0\ncx = 0.0\ncy = 0.0\n";
        assert!(CalibrationFile::parse(bad, Path::new("x")).is_err());
        let skew = "[rig]\nR = [1, 0.1, 0, 0, 1, 0, 0, 0, 1]\nt = [0, 0, 0]\n";
        let f = CalibrationFile::parse(skew, Path::new("x")).unwrap();
        assert!(matches!(f.rig_transform(), Err(Error::InvalidCalibration(_))));
        assert!(matches!(
            CalibrationFile::parse("not toml [", Path::new("x")),
            Err(Error::Parse { .. })
        ));
    }
}
