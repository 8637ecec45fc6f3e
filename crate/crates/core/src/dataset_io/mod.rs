//! Dataset layout, ground-truth encodings and preprocessing.

mod formats;
mod layout;
mod preprocess;

pub use formats::{
    quantize_disparity, quantize_map, read_depth, read_disparity, read_rgb, write_depth_png16,
    write_depth_tiff, write_disparity, write_disparity_pixel, write_disparity_subpixel, write_rgb,
    QuantizationReport,
};
pub(crate) use formats::extension;
pub use layout::{
    load_sample, load_sample_with, sample_path, write_sample, DatasetManifest, Precision,
    SampleId, Split, StereoSample, Subset, SubsetInfo, View,
};
pub use preprocess::{
    channel_stats, crop_random, crop_window, normalize_colors, pad_disparity, pad_to,
    random_window, unpad, unpad_disparity, NormalizedImage, Padding, Window, INFERENCE_PAD,
    TRAIN_CROP,
};
