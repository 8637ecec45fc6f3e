//! Density and disparity histogram of a ground+leaf scene, the kind of
//! summary used to describe a dataset's disparity range.

use stereo_gt::metrics::histogram;
use stereo_gt::oracle::{synth_stereo, DisparityField, SceneSpec};
use stereo_gt::registration::density;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SceneSpec::new(
        1024,
        571,
        DisparityField::Bimodal {
            ground: 210.0,
            leaf: 245.0,
            leaves: 14,
            seed: 5,
        },
    );
    let gt = synth_stereo(&spec)?.ground_truth.expect("ground truth");
    let hist = histogram(&gt, 2.0)?;
    println!("density {:.1}%", 100.0 * density(&gt));
    println!("disparity range {:.1} .. {:.1}", hist.min, hist.max);
    for &i in hist.modes().iter().take(2) {
        let (lo, hi) = hist.bin_range(i);
        println!("mode [{lo}, {hi}): {:.1}% of valid pixels", 100.0 * hist.frequencies[i]);
    }
    for (i, f) in hist.frequencies.iter().enumerate() {
        let (lo, _) = hist.bin_range(i);
        println!("{lo:>6} {}", "#".repeat((f * 200.0).round() as usize));
    }
    Ok(())
}
