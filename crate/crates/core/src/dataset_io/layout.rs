//! Dataset directory layout and manifest.
//!
//! ```text
//! <root>/manifest.toml                       (optional; built-in defaults otherwise)
//! <root>/<subset>/<split>/left/<index>.png
//! <root>/<subset>/<split>/right/<index>.png
//! <root>/<subset>/<split>/disp/<index>.tiff  (sub-pixel ground truth)
//! <root>/<subset>/<split>/disp/<index>.png   (pixel-level ground truth)
//! ```
//!
//! `<index>` is zero-padded to six digits.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::formats::{read_disparity, read_rgb, write_disparity_pixel, write_disparity_subpixel, write_rgb};
use crate::error::{Error, Result};
use crate::maps::DisparityMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Spinach,
    Tomato,
    Pepper,
    Pumpkin,
}

impl Subset {
    pub const ALL: [Subset; 4] = [Subset::Spinach, Subset::Tomato, Subset::Pepper, Subset::Pumpkin];

    pub fn name(&self) -> &'static str {
        match self {
            Subset::Spinach => "spinach",
            Subset::Tomato => "tomato",
            Subset::Pepper => "pepper",
            Subset::Pumpkin => "pumpkin",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn name(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

macro_rules! name_impls {
    ($ty:ty, $what:literal) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                Self::ALL
                    .into_iter()
                    .find(|v| v.name().eq_ignore_ascii_case(s))
                    .ok_or_else(|| Error::Config(format!("unknown {} '{s}'", $what)))
            }
        }
    };
}

name_impls!(Subset, "subset");
name_impls!(Split, "split");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SampleId {
    pub subset: Subset,
    pub split: Split,
    pub index: usize,
}

impl fmt::Display for SampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{:06}", self.subset, self.split, self.index)
    }
}

/// A rectified pair with optional ground truth. Synthetic samples carry no
/// dataset identity.
#[derive(Debug, Clone, PartialEq)]
pub struct StereoSample {
    pub left: RgbImage,
    pub right: RgbImage,
    pub ground_truth: Option<DisparityMap>,
    pub id: Option<SampleId>,
}

impl StereoSample {
    pub fn new(left: RgbImage, right: RgbImage, ground_truth: Option<DisparityMap>) -> Result<Self> {
        let s = StereoSample {
            left,
            right,
            ground_truth,
            id: None,
        };
        s.check_dimensions()?;
        Ok(s)
    }

    pub fn width(&self) -> usize {
        self.left.width() as usize
    }

    pub fn height(&self) -> usize {
        self.left.height() as usize
    }

    pub fn check_dimensions(&self) -> Result<()> {
        if self.left.dimensions() != self.right.dimensions() {
            return Err(Error::Dimension(format!(
                "left {:?} and right {:?} differ",
                self.left.dimensions(),
                self.right.dimensions()
            )));
        }
        if let Some(gt) = &self.ground_truth {
            if (gt.width(), gt.height()) != (self.width(), self.height()) {
                return Err(Error::Dimension(format!(
                    "ground truth {}x{} does not match views {}x{}",
                    gt.width(),
                    gt.height(),
                    self.width(),
                    self.height()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetInfo {
    pub width: usize,
    pub height: usize,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

impl SubsetInfo {
    pub fn count(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Validation => self.validation,
            Split::Test => self.test,
        }
    }

    pub fn total(&self) -> usize {
        self.train + self.validation + self.test
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub subsets: BTreeMap<Subset, SubsetInfo>,
}

impl Default for DatasetManifest {
    /// Counts and resolutions of the published plant dataset.
    fn default() -> Self {
        let info = |width, height, train, validation, test| SubsetInfo {
            width,
            height,
            train,
            validation,
            test,
        };
        DatasetManifest {
            subsets: BTreeMap::from([
                (Subset::Spinach, info(1046, 606, 160, 40, 100)),
                (Subset::Tomato, info(1040, 603, 80, 20, 50)),
                (Subset::Pepper, info(1024, 571, 150, 30, 32)),
                (Subset::Pumpkin, info(1024, 571, 80, 20, 50)),
            ]),
        }
    }
}

impl DatasetManifest {
    pub const FILE_NAME: &'static str = "manifest.toml";

    /// `<root>/manifest.toml` if present, the built-in manifest otherwise.
    pub fn load_or_default(root: impl AsRef<Path>) -> Result<Self> {
        let path = root.as_ref().join(Self::FILE_NAME);
        if !path.exists() {
            return Ok(Self::default());
        }
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: DatasetManifest = toml::from_str(&text).map_err(|e| Error::parse(&path, e))?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, root: impl AsRef<Path>) -> Result<()> {
        let path = root.as_ref().join(Self::FILE_NAME);
        let text = toml::to_string(self).expect("manifest always serializes");
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn validate(&self) -> Result<()> {
        for (s, info) in &self.subsets {
            if info.width == 0 || info.height == 0 {
                return Err(Error::CorruptDataset(format!("{s}: zero resolution")));
            }
        }
        Ok(())
    }

    pub fn info(&self, subset: Subset) -> Result<&SubsetInfo> {
        self.subsets
            .get(&subset)
            .ok_or_else(|| Error::NotFound(format!("subset {subset} not in manifest")))
    }

    pub fn split_total(&self, split: Split) -> usize {
        self.subsets.values().map(|i| i.count(split)).sum()
    }

    pub fn total(&self) -> usize {
        self.subsets.values().map(SubsetInfo::total).sum()
    }
}

/// Which ground-truth encoding to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    /// Float TIFF.
    #[default]
    SubPixel,
    /// 8-bit PNG.
    Pixel,
}

impl Precision {
    pub fn extension(&self) -> &'static str {
        match self {
            Precision::SubPixel => "tiff",
            Precision::Pixel => "png",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum View {
    Left,
    Right,
    Disparity(Precision),
}

/// Path of one file of a sample inside the dataset layout.
pub fn sample_path(root: impl AsRef<Path>, id: &SampleId, view: View) -> PathBuf {
    let dir = root
        .as_ref()
        .join(id.subset.name())
        .join(id.split.name());
    let file = |ext: &str| format!("{:06}.{ext}", id.index);
    match view {
        View::Left => dir.join("left").join(file("png")),
        View::Right => dir.join("right").join(file("png")),
        View::Disparity(p) => dir.join("disp").join(file(p.extension())),
    }
}

/// Loads a sample, preferring sub-pixel ground truth and falling back to the
/// 8-bit variant. Resolution is checked against the manifest.
pub fn load_sample(root: impl AsRef<Path>, subset: Subset, split: Split, index: usize) -> Result<StereoSample> {
    load_sample_with(root, SampleId { subset, split, index }, None)
}

/// Like [`load_sample`] but with an explicit ground-truth precision; the
/// requested encoding must then exist if any ground truth exists.
pub fn load_sample_with(
    root: impl AsRef<Path>,
    id: SampleId,
    precision: Option<Precision>,
) -> Result<StereoSample> {
    let root = root.as_ref();
    let manifest = DatasetManifest::load_or_default(root)?;
    let info = manifest.info(id.subset)?;
    if id.index >= info.count(id.split) {
        return Err(Error::NotFound(format!(
            "{id}: index beyond the {} {} samples of this split",
            info.count(id.split),
            id.split
        )));
    }

    let left = read_rgb(sample_path(root, &id, View::Left))?;
    let right = read_rgb(sample_path(root, &id, View::Right))?;
    let sub = sample_path(root, &id, View::Disparity(Precision::SubPixel));
    let pix = sample_path(root, &id, View::Disparity(Precision::Pixel));
    let gt_path = match precision {
        Some(Precision::SubPixel) => sub.exists().then_some(sub),
        Some(Precision::Pixel) => pix.exists().then_some(pix),
        None => [sub, pix].into_iter().find(|p| p.exists()),
    };
    let ground_truth = gt_path.map(read_disparity).transpose()?;

    let expected = (info.width as u32, info.height as u32);
    for (what, dims) in [("left", left.dimensions()), ("right", right.dimensions())] {
        if dims != expected {
            return Err(Error::CorruptDataset(format!(
                "{id}: {what} view is {}x{}, manifest says {}x{}",
                dims.0, dims.1, expected.0, expected.1
            )));
        }
    }
    if let Some(gt) = &ground_truth {
        if (gt.width() as u32, gt.height() as u32) != expected {
            return Err(Error::CorruptDataset(format!(
                "{id}: ground truth is {}x{}, manifest says {}x{}",
                gt.width(),
                gt.height(),
                expected.0,
                expected.1
            )));
        }
    }

    Ok(StereoSample {
        left,
        right,
        ground_truth,
        id: Some(id),
    })
}

/// Writes a sample into the layout, creating directories as needed. Ground
/// truth is written in both precisions.
pub fn write_sample(root: impl AsRef<Path>, id: SampleId, sample: &StereoSample) -> Result<()> {
    let root = root.as_ref();
    sample.check_dimensions()?;
    let left = sample_path(root, &id, View::Left);
    let dir = left.parent().and_then(Path::parent).expect("layout paths are nested");
    for sub in ["left", "right", "disp"] {
        let d = dir.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    write_rgb(&left, &sample.left)?;
    write_rgb(sample_path(root, &id, View::Right), &sample.right)?;
    if let Some(gt) = &sample.ground_truth {
        write_disparity_subpixel(sample_path(root, &id, View::Disparity(Precision::SubPixel)), gt)?;
        write_disparity_pixel(sample_path(root, &id, View::Disparity(Precision::Pixel)), gt)?;
    }
    Ok(())
}
