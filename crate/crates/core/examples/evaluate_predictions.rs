//! Scores a directory of predictions against ground truth, pooling pixels
//! over all images, and prints the table and the JSON report.

use stereo_gt::dataset_io::write_disparity;
use stereo_gt::maps::DisparityMap;
use stereo_gt::metrics::{evaluate_set, EvalConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let (pred_dir, gt_dir) = (dir.path().join("pred"), dir.path().join("gt"));
    std::fs::create_dir_all(&pred_dir)?;
    std::fs::create_dir_all(&gt_dir)?;

    for i in 0..3 {
        let gt = DisparityMap::from_fn(64, 48, |x, y| 200.0 + 0.5 * x as f32 + 0.1 * y as f32);
        // a prediction that is 0.8 px off on one stripe and missing on another
        let pred = DisparityMap::from_fn(64, 48, |x, y| match x {
            10..=19 => gt.get(x, y) + 0.8 + i as f32,
            40..=43 => 0.0,
            _ => gt.get(x, y),
        });
        write_disparity(gt_dir.join(format!("{i:06}.tiff")), &gt)?;
        write_disparity(pred_dir.join(format!("{i:06}.tiff")), &pred)?;
    }

    let report = evaluate_set(&pred_dir, &gt_dir, &EvalConfig::default())?;
    print!("{}", report.to_table("example"));
    println!("{}", report.to_json());
    Ok(())
}
