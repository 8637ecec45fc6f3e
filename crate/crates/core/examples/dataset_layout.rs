//! Writes a tiny dataset in the on-disk layout, loads it back and applies
//! the training crop, inference padding and color normalization.

use stereo_gt::dataset_io::{
    channel_stats, crop_random, load_sample, normalize_colors, pad_to, sample_path, unpad_disparity,
    write_sample, DatasetManifest, Precision, SampleId, Split, Subset, SubsetInfo, View,
    INFERENCE_PAD, TRAIN_CROP,
};
use stereo_gt::oracle::{synth_stereo, DisparityField, SceneSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = tempfile::tempdir()?;

    // The published split sizes are the default manifest.
    let published = DatasetManifest::default();
    println!(
        "published splits: {} train, {} validation, {} test ({} total)",
        published.split_total(Split::Train),
        published.split_total(Split::Validation),
        published.split_total(Split::Test),
        published.total()
    );

    // A one-sample spinach subset at the real spinach resolution.
    let mut manifest = DatasetManifest::default();
    manifest.subsets.clear();
    let info = SubsetInfo {
        width: 1046,
        height: 606,
        train: 1,
        validation: 0,
        test: 0,
    };
    manifest.subsets.insert(Subset::Spinach, info);
    manifest.save(root.path())?;

    let spec = SceneSpec::new(info.width, info.height, DisparityField::Ramp {
        base: 200.0,
        slope_x: 0.02,
        slope_y: 0.03,
    });
    let id = SampleId {
        subset: Subset::Spinach,
        split: Split::Train,
        index: 0,
    };
    write_sample(root.path(), id, &synth_stereo(&spec)?)?;
    for view in [View::Left, View::Right, View::Disparity(Precision::SubPixel), View::Disparity(Precision::Pixel)] {
        println!("{}", sample_path(root.path(), &id, view).strip_prefix(root.path())?.display());
    }

    let sample = load_sample(root.path(), Subset::Spinach, Split::Train, 0)?;
    let crop = crop_random(&sample, TRAIN_CROP.0, TRAIN_CROP.1, 42)?;
    println!("training crop {}x{} (HxW)", crop.height(), crop.width());

    let (padded, pad) = pad_to(&sample, INFERENCE_PAD.0, INFERENCE_PAD.1)?;
    println!(
        "inference input {}x{} (HxW; {} rows on top, {} columns on the right)",
        padded.height(),
        padded.width(),
        pad.top,
        pad.right
    );
    let gt = padded.ground_truth.as_ref().expect("ground truth");
    assert_eq!(Some(unpad_disparity(gt, pad)?), sample.ground_truth);

    let (means, stds) = channel_stats([&sample.left, &sample.right])?;
    let norm = normalize_colors(&sample.left, means, stds)?;
    println!("channel means {means:.1?}, stds {stds:.1?}; first value {:.3}", norm.get(0, 0, 0));
    Ok(())
}
