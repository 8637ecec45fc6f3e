//! Runs both baselines on a synthetic random-dot pair and scores them.
//!
//! cargo run --release --example match_stereo -- [width] [height] [disparity]

use std::time::Instant;

use stereo_gt::matchers::{BmConfig, Matcher, SgmConfig};
use stereo_gt::metrics::{evaluate, table_header, EvalConfig};
use stereo_gt::oracle::{synth_stereo, DisparityField, SceneSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<f64> = std::env::args()
        .skip(1)
        .map(|a| a.parse())
        .collect::<Result<_, _>>()?;
    let width = args.first().copied().unwrap_or(512.0) as usize;
    let height = args.get(1).copied().unwrap_or(512.0) as usize;
    let d = args.get(2).copied().unwrap_or(40.0);

    let spec = SceneSpec::new(width, height, DisparityField::Constant { d }).with_seed(7);
    let sample = synth_stereo(&spec)?;
    let gt = sample.ground_truth.clone().expect("synthetic ground truth");

    let cfg = EvalConfig::default();
    let mut table = table_header(&cfg.deltas);
    for m in [Matcher::Bm(BmConfig::default()), Matcher::Sgm(SgmConfig::default())] {
        let start = Instant::now();
        let pred = m.compute_sample(&sample)?;
        println!("{} {}x{}: {:.3} s", m.name(), width, height, start.elapsed().as_secs_f64());
        table += &evaluate(&pred, &gt, &cfg)?.table_row(m.name());
    }
    print!("{table}");
    Ok(())
}
