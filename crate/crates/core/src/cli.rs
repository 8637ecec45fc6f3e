//! The `stereo-gt` command line.
//!
//! Exit codes: 0 success, 1 pipeline failure, 2 usage error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::calib_eval::{registration_error, CornerSet};
use crate::dataset_io::{
    crop_random, load_sample, pad_to, read_depth, read_disparity, read_rgb, unpad_disparity,
    write_depth_tiff, write_disparity, write_rgb, DatasetManifest, Split, StereoSample, Subset,
    INFERENCE_PAD, TRAIN_CROP,
};
use crate::error::{Error, Result};
use crate::geometry::{average_rig, chain_extrinsics, CalibrationFile, RigidTransform, TransformRecord};
use crate::maps::DisparityMap;
use crate::matchers::{BmConfig, Matcher, SgmConfig};
use crate::metrics::{evaluate_set, histogram_many, EvalConfig};
use crate::oracle::{synth_depth_rig, synth_stereo, DisparityField, Rect, SceneSpec};
use crate::registration::{density, Registrar};

pub const ROOT_ENV: &str = "STEREO_GT_ROOT";

#[derive(Debug, Parser)]
#[command(name = "stereo-gt", version, about = "Stereo ground truth from a depth camera, baselines and evaluation")]
pub struct Cli {
    /// Worker threads for batch commands (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Suppress the defaults banner and progress messages; reports still print.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Chain per-camera extrinsics into a depth→left rig and average the runs.
    CalibChain(CalibChainArgs),
    /// Corner reprojection error of a calibration.
    CalibError(CalibErrorArgs),
    /// Convert depth maps into stereo-left disparity ground truth.
    Register(RegisterArgs),
    /// Transcode disparity between float TIFF and 8-bit PNG.
    Convert(ConvertArgs),
    /// Run the BM or SGM baseline.
    Match(MatchArgs),
    /// Score predictions against ground truth.
    Evaluate(EvaluateArgs),
    /// Density and disparity histogram of ground truth.
    Analyze(AnalyzeArgs),
    /// Write synthetic scenes with exact ground truth.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct CalibChainArgs {
    /// `[[extrinsic]]` records of the depth camera, world → camera.
    #[arg(long)]
    pub depth: PathBuf,
    /// `[[extrinsic]]` records of the stereo-left camera, same order.
    #[arg(long)]
    pub left: PathBuf,
    /// Calibration file whose intrinsics and stereo tables are carried over.
    #[arg(long)]
    pub base: Option<PathBuf>,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct CalibErrorArgs {
    /// Corner file (`grid` header, then `u_d v_d z u_l v_l` records).
    #[arg(long)]
    pub corners: Vec<PathBuf>,
    /// Calibration with `[depth_camera]`, `[left_camera]` and `[rig]`.
    #[arg(long)]
    pub calib: PathBuf,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DisparityFormat {
    Tiff,
    Png,
}

impl DisparityFormat {
    fn extension(self) -> &'static str {
        match self {
            DisparityFormat::Tiff => "tiff",
            DisparityFormat::Png => "png",
        }
    }
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    /// Calibration with intrinsics, `[stereo]` and `[rig]`.
    #[arg(long)]
    pub calib: PathBuf,
    /// Depth map file or directory of them.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory.
    #[arg(long, short)]
    pub output: PathBuf,
    /// Output size WxH (default: the depth map's size).
    #[arg(long, value_parser = parse_wxh)]
    pub size: Option<(usize, usize)>,
    #[arg(long, value_enum, default_value_t = DisparityFormat::Tiff)]
    pub format: DisparityFormat,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// Disparity file or directory.
    #[arg(long)]
    pub input: PathBuf,
    /// Output file (format from its extension) or directory.
    #[arg(long, short)]
    pub output: PathBuf,
    /// Target format when converting a directory.
    #[arg(long, value_enum, default_value_t = DisparityFormat::Png)]
    pub to: DisparityFormat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Bm,
    Sgm,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[arg(long, value_enum, default_value_t = Method::Sgm)]
    pub method: Method,
    /// Left image, or a directory of them paired with `--right` by file stem.
    #[arg(long, requires = "right")]
    pub left: Option<PathBuf>,
    #[arg(long, requires = "left")]
    pub right: Option<PathBuf>,
    /// Dataset root (dataset mode).
    #[arg(long, env = ROOT_ENV, conflicts_with = "left")]
    pub root: Option<PathBuf>,
    #[arg(long)]
    pub subset: Option<Subset>,
    #[arg(long, default_value = "test")]
    pub split: Split,
    /// Output file (single pair) or directory (directories or dataset mode).
    #[arg(long, short)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 256)]
    pub d_max: usize,
    /// Default: 15 for BM, 3 for SGM.
    #[arg(long)]
    pub block_size: Option<usize>,
    #[arg(long, default_value_t = 216)]
    pub p1: u16,
    #[arg(long, default_value_t = 864)]
    pub p2: u16,
    #[arg(long, default_value_t = 1.0)]
    pub lr_max_diff: f32,
    /// Skip the left-right consistency check.
    #[arg(long)]
    pub no_lr_check: bool,
    /// Match a seeded random HxW window instead of the whole pair.
    #[arg(long, value_parser = parse_hxw)]
    pub crop: Option<(usize, usize)>,
    /// Pad to HxW (top and right) before matching and strip it afterwards.
    #[arg(long, value_parser = parse_hxw)]
    pub pad: Option<(usize, usize)>,
    #[arg(long, value_enum, default_value_t = DisparityFormat::Tiff)]
    pub format: DisparityFormat,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, default_value_t = 256.0)]
    pub d_max: f32,
    #[arg(long, value_delimiter = ',', default_value = "1,3,5")]
    pub deltas: Vec<f32>,
    /// Error charged for a missing prediction (default: d_max).
    #[arg(long)]
    pub hole_penalty: Option<f64>,
    /// Row label in the table.
    #[arg(long, default_value = "prediction")]
    pub label: String,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Disparity file or directory.
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub bin_width: f64,
    /// Histogram as `bin_start,bin_end,frequency` rows.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SceneKind {
    Constant,
    Ramp,
    TwoPlane,
    Bimodal,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, short)]
    pub output: PathBuf,
    /// Scene description file; overrides the kind/size flags.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SceneKind::Ramp)]
    pub kind: SceneKind,
    #[arg(long, default_value_t = 512)]
    pub width: usize,
    #[arg(long, default_value_t = 512)]
    pub height: usize,
    /// Base (constant, ramp) or far (two-plane) disparity.
    #[arg(long, default_value_t = 40.0)]
    pub disparity: f64,
    /// Horizontal disparity slope of the ramp.
    #[arg(long, default_value_t = 0.05)]
    pub slope: f64,
    /// Number of scenes; scene i uses seed + i.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Calibration whose `[rig]` places the simulated depth camera
    /// (default: identity).
    #[arg(long)]
    pub rig: Option<PathBuf>,
}

fn parse_pair(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected AxB, got {s:?}"))?;
    let num = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    let (a, b) = (num(a)?, num(b)?);
    if a == 0 || b == 0 {
        return Err(format!("{s:?}: sizes must be positive"));
    }
    Ok((a, b))
}

fn parse_wxh(s: &str) -> std::result::Result<(usize, usize), String> {
    parse_pair(s)
}

fn parse_hxw(s: &str) -> std::result::Result<(usize, usize), String> {
    parse_pair(s)
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if !cli.quiet {
        eprintln!("{}", defaults_banner());
    }
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// One line recording the built-in experiment defaults.
pub fn defaults_banner() -> String {
    let sgm = SgmConfig::default();
    let bm = BmConfig::default();
    format!(
        "stereo-gt defaults: d_max={} bm.block={} sgm.block={} p1={} p2={} lr_max_diff={} deltas=1,3,5 crop={}x{} pad={}x{}",
        sgm.d_max,
        bm.block_size,
        sgm.block_size,
        sgm.p1,
        sgm.p2,
        sgm.lr_max_diff.unwrap_or(f32::INFINITY),
        TRAIN_CROP.0,
        TRAIN_CROP.1,
        INFERENCE_PAD.0,
        INFERENCE_PAD.1
    )
}

pub fn execute(cli: &Cli) -> Result<()> {
    let go = || match &cli.command {
        Command::CalibChain(a) => calib_chain(a, cli),
        Command::CalibError(a) => calib_error(a),
        Command::Register(a) => register(a, cli),
        Command::Convert(a) => convert(a, cli),
        Command::Match(a) => run_match(a, cli),
        Command::Evaluate(a) => evaluate(a),
        Command::Analyze(a) => analyze(a),
        Command::Synth(a) => synth(a, cli),
    };
    match cli.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("--jobs {n}: {e}")))?
            .install(go),
        None => go(),
    }
}

fn say(cli: &Cli, msg: impl AsRef<str>) {
    if !cli.quiet {
        println!("{}", msg.as_ref());
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Files under `path` with one of `exts`, keyed by stem; a file path maps to
/// itself.
fn collect_files(path: &Path, exts: &[&str]) -> Result<BTreeMap<String, PathBuf>> {
    let stem = |p: &Path| {
        p.file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string()
    };
    let mut out = BTreeMap::new();
    if path.is_file() {
        out.insert(stem(path), path.to_path_buf());
        return Ok(out);
    }
    for entry in std::fs::read_dir(path).map_err(|e| Error::io(path, e))? {
        let p = entry.map_err(|e| Error::io(path, e))?.path();
        let ext = p
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        if ext.as_deref().is_some_and(|e| exts.contains(&e)) {
            out.entry(stem(&p)).or_insert(p);
        }
    }
    if out.is_empty() {
        return Err(Error::NotFound(format!(
            "no {} files in {}",
            exts.join("/"),
            path.display()
        )));
    }
    Ok(out)
}

fn calib_chain(a: &CalibChainArgs, cli: &Cli) -> Result<()> {
    let depth = CalibrationFile::load(&a.depth)?.extrinsic_transforms()?;
    let left = CalibrationFile::load(&a.left)?.extrinsic_transforms()?;
    if depth.len() != left.len() {
        return Err(Error::InvalidCalibration(format!(
            "{} depth-camera records but {} left-camera records",
            depth.len(),
            left.len()
        )));
    }
    let runs = depth
        .iter()
        .zip(&left)
        .map(|(d, l)| chain_extrinsics(d, l))
        .collect::<Result<Vec<_>>>()?;
    let rig = average_rig(&runs)?;
    let spread = runs
        .iter()
        .map(|r| r.rotation_angle_to(&rig).to_degrees())
        .fold(0.0, f64::max);
    let mut out = match &a.base {
        Some(p) => CalibrationFile::load(p)?,
        None => CalibrationFile::default(),
    };
    out.extrinsics.clear();
    out.rig = Some(TransformRecord::from(&rig));
    out.save(&a.output)?;
    let t = rig.translation();
    say(
        cli,
        format!(
            "averaged {} runs (max rotation deviation {spread:.4} deg); t = [{:.3}, {:.3}, {:.3}] mm -> {}",
            runs.len(),
            t.x,
            t.y,
            t.z,
            a.output.display()
        ),
    );
    Ok(())
}

fn calib_error(a: &CalibErrorArgs) -> Result<()> {
    if a.corners.is_empty() {
        return Err(Error::EmptyInput("corner files (--corners)"));
    }
    let calib = CalibrationFile::load(&a.calib)?;
    let (rig, kd, kl) = (calib.rig_transform()?, calib.depth_intrinsics()?, calib.left_intrinsics()?);
    let trials = a
        .corners
        .iter()
        .map(|p| registration_error(&CornerSet::load(p)?, &rig, &kd, &kl))
        .collect::<Result<Vec<_>>>()?;
    let stats = crate::calib_eval::RegistrationErrorStats::combine(&trials)?;
    for (p, m) in a.corners.iter().zip(&stats.trial_means) {
        println!("{:<40} mean {m:.3} px", p.display());
    }
    println!(
        "{} corners: mean {:.3} px, max {:.3} px",
        stats.errors.len(),
        stats.mean,
        stats.max
    );
    if let Some(j) = &a.json {
        write_text(j, &serde_json::to_string_pretty(&stats).expect("serializable"))?;
    }
    Ok(())
}

fn register(a: &RegisterArgs, cli: &Cli) -> Result<()> {
    let calib = CalibrationFile::load(&a.calib)?;
    let registrar = Registrar {
        rig: calib.rig_transform()?,
        depth_intrinsics: calib.depth_intrinsics()?,
        left_intrinsics: calib.left_intrinsics()?,
        geometry: calib.stereo_geometry()?,
    };
    let inputs = collect_files(&a.input, &["png", "tif", "tiff"])?;
    create_dir(&a.output)?;
    let results = inputs
        .par_iter()
        .map(|(name, path)| {
            let depth = read_depth(path)?;
            let (w, h) = a.size.unwrap_or((depth.width(), depth.height()));
            let reg = registrar.register(&depth, w, h)?;
            let out = a.output.join(format!("{name}.{}", a.format.extension()));
            write_disparity(&out, &reg.disparity)?;
            Ok((name.clone(), reg))
        })
        .collect::<Result<Vec<_>>>()?;
    for (name, reg) in &results {
        let warn = reg.warning().map(|w| format!("  WARNING: {w}")).unwrap_or_default();
        say(
            cli,
            format!(
                "{name}: density {:.2}%, hit ratio {:.3}{warn}",
                100.0 * density(&reg.disparity),
                reg.stats.hit_ratio()
            ),
        );
    }
    say(cli, format!("registered {} depth maps -> {}", results.len(), a.output.display()));
    Ok(())
}

fn convert(a: &ConvertArgs, cli: &Cli) -> Result<()> {
    let single = a.input.is_file();
    let inputs = collect_files(&a.input, &["png", "tif", "tiff"])?;
    if !single {
        create_dir(&a.output)?;
    }
    let reports = inputs
        .par_iter()
        .map(|(name, path)| {
            let map = read_disparity(path)?;
            let out = if single {
                a.output.clone()
            } else {
                a.output.join(format!("{name}.{}", a.to.extension()))
            };
            Ok((name.clone(), write_disparity(&out, &map)?))
        })
        .collect::<Result<Vec<_>>>()?;
    for (name, r) in &reports {
        if let Some(r) = r.filter(|r| r.vanished > 0) {
            say(cli, format!("{name}: {} valid pixels rounded to 0 and lost", r.vanished));
        }
    }
    say(cli, format!("converted {} maps -> {}", reports.len(), a.output.display()));
    Ok(())
}

fn matcher_from(a: &MatchArgs) -> Result<Matcher> {
    let m = match a.method {
        Method::Bm => Matcher::Bm(BmConfig {
            block_size: a.block_size.unwrap_or(BmConfig::default().block_size),
            d_max: a.d_max,
        }),
        Method::Sgm => Matcher::Sgm(SgmConfig {
            block_size: a.block_size.unwrap_or(SgmConfig::default().block_size),
            p1: a.p1,
            p2: a.p2,
            lr_max_diff: (!a.no_lr_check).then_some(a.lr_max_diff),
            d_max: a.d_max,
            ..SgmConfig::default()
        }),
    };
    match &m {
        Matcher::Bm(c) => c.validate()?,
        Matcher::Sgm(c) => c.validate()?,
    }
    Ok(m)
}

fn match_one(m: &Matcher, sample: &StereoSample, a: &MatchArgs, seed: u64) -> Result<DisparityMap> {
    let sample = match a.crop {
        Some((h, w)) => crop_random(sample, h, w, seed)?,
        None => sample.clone(),
    };
    match a.pad {
        Some((h, w)) => {
            let (padded, pad) = pad_to(&sample, h, w)?;
            unpad_disparity(&m.compute_sample(&padded)?, pad)
        }
        None => m.compute_sample(&sample),
    }
}

fn run_match(a: &MatchArgs, cli: &Cli) -> Result<()> {
    let m = matcher_from(a)?;
    say(cli, format!("matcher: {}", serde_json::to_string(&m).expect("serializable")));
    if let (Some(l), Some(r)) = (&a.left, &a.right) {
        if l.is_dir() {
            return match_dirs(&m, l, r, a, cli);
        }
        let sample = StereoSample::new(read_rgb(l)?, read_rgb(r)?, None)?;
        let start = std::time::Instant::now();
        let d = match_one(&m, &sample, a, cli.seed)?;
        write_disparity(&a.output, &d)?;
        say(
            cli,
            format!(
                "{}x{} in {:.3} s, density {:.2}% -> {}",
                d.width(),
                d.height(),
                start.elapsed().as_secs_f64(),
                100.0 * density(&d),
                a.output.display()
            ),
        );
        return Ok(());
    }
    let root = a.root.as_ref().ok_or_else(|| {
        Error::Config(format!("give --left/--right, or a dataset via --root or {ROOT_ENV}"))
    })?;
    let manifest = DatasetManifest::load_or_default(root)?;
    let subsets: Vec<Subset> = match a.subset {
        Some(s) => vec![s],
        None => Subset::ALL.to_vec(),
    };
    let mut jobs = Vec::new();
    for s in subsets {
        for i in 0..manifest.info(s)?.count(a.split) {
            jobs.push((s, i));
        }
    }
    create_dir(&a.output)?;
    let done = jobs
        .par_iter()
        .map(|&(s, i)| {
            let sample = load_sample(root, s, a.split, i)?;
            let d = match_one(&m, &sample, a, cli.seed.wrapping_add(i as u64))?;
            let name = if a.subset.is_some() {
                format!("{i:06}")
            } else {
                format!("{s}_{i:06}")
            };
            write_disparity(a.output.join(format!("{name}.{}", a.format.extension())), &d)?;
            Ok(())
        })
        .collect::<Result<Vec<()>>>()?;
    say(cli, format!("matched {} pairs -> {}", done.len(), a.output.display()));
    Ok(())
}

/// Matches every left image against the right image with the same stem.
fn match_dirs(m: &Matcher, left: &Path, right: &Path, a: &MatchArgs, cli: &Cli) -> Result<()> {
    let exts = ["png", "jpg", "jpeg"];
    let (ls, rs) = (collect_files(left, &exts)?, collect_files(right, &exts)?);
    if let Some(stem) = ls.keys().find(|k| !rs.contains_key(*k)).or(rs.keys().find(|k| !ls.contains_key(*k))) {
        return Err(Error::Pairing(format!(
            "{stem} is not present in both {} and {}",
            left.display(),
            right.display()
        )));
    }
    create_dir(&a.output)?;
    let pairs: Vec<_> = ls.iter().zip(rs.values()).collect();
    pairs
        .par_iter()
        .enumerate()
        .map(|(i, ((stem, l), r))| {
            let sample = StereoSample::new(read_rgb(l)?, read_rgb(r)?, None)?;
            let d = match_one(m, &sample, a, cli.seed.wrapping_add(i as u64))?;
            write_disparity(a.output.join(format!("{stem}.{}", a.format.extension())), &d)?;
            Ok(())
        })
        .collect::<Result<Vec<()>>>()?;
    say(cli, format!("matched {} pairs -> {}", pairs.len(), a.output.display()));
    Ok(())
}

fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let cfg = EvalConfig {
        d_max: a.d_max,
        deltas: a.deltas.clone(),
        hole_penalty: a.hole_penalty,
    };
    let report = evaluate_set(&a.pred, &a.gt, &cfg)?;
    println!("{}", report.to_table(&a.label));
    if let Some(j) = &a.json {
        write_text(j, &report.to_json())?;
    }
    Ok(())
}

fn analyze(a: &AnalyzeArgs) -> Result<()> {
    let files = collect_files(&a.gt, &["png", "tif", "tiff"])?;
    let maps = files
        .values()
        .collect::<Vec<_>>()
        .par_iter()
        .map(read_disparity)
        .collect::<Result<Vec<_>>>()?;
    let pixels: usize = maps.iter().map(|m| m.width() * m.height()).sum();
    let valid: usize = maps.iter().map(|m| m.valid_count()).sum();
    let hist = histogram_many(&maps, a.bin_width)?;
    let dens = valid as f64 / pixels as f64;
    println!(
        "{} maps: density {:.2}%, disparity {:.2} .. {:.2}",
        maps.len(),
        100.0 * dens,
        hist.min,
        hist.max
    );
    for &i in hist.modes().iter().take(3) {
        let (lo, hi) = hist.bin_range(i);
        println!("  mode [{lo}, {hi}): {:.2}%", 100.0 * hist.frequencies[i]);
    }
    if let Some(p) = &a.csv {
        write_text(p, &hist.to_csv())?;
    }
    if let Some(p) = &a.json {
        let json = serde_json::json!({
            "maps": maps.len(),
            "density": dens,
            "histogram": hist,
        });
        write_text(p, &serde_json::to_string_pretty(&json).expect("serializable"))?;
    }
    Ok(())
}

fn scene_spec(a: &SynthArgs) -> Result<SceneSpec> {
    if let Some(p) = &a.spec {
        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        return SceneSpec::from_toml(&text);
    }
    let (w, h) = (a.width as f64, a.height as f64);
    let field = match a.kind {
        SceneKind::Constant => DisparityField::Constant { d: a.disparity },
        SceneKind::Ramp => DisparityField::Ramp {
            base: a.disparity,
            slope_x: a.slope,
            slope_y: 0.0,
        },
        SceneKind::TwoPlane => DisparityField::TwoPlane {
            far: a.disparity,
            near: a.disparity + 20.0,
            rect: Rect::new(w / 4.0, h / 4.0, 3.0 * w / 4.0, 3.0 * h / 4.0),
        },
        SceneKind::Bimodal => DisparityField::Bimodal {
            ground: 210.0,
            leaf: 245.0,
            leaves: 12,
            seed: 0,
        },
    };
    Ok(SceneSpec::new(a.width, a.height, field))
}

fn synth(a: &SynthArgs, cli: &Cli) -> Result<()> {
    let base = scene_spec(a)?;
    base.validate()?;
    let rig = match &a.rig {
        Some(p) => CalibrationFile::load(p)?.rig_transform()?,
        None => RigidTransform::identity(),
    };
    for dir in ["left", "right", "disp", "depth", "expected"] {
        create_dir(&a.output.join(dir))?;
    }
    (0..a.count)
        .into_par_iter()
        .map(|i| {
            let mut spec = base.clone();
            spec.texture.seed = base.texture.seed.wrapping_add(cli.seed).wrapping_add(i as u64);
            if let DisparityField::Bimodal { seed, .. } = &mut spec.field {
                *seed = seed.wrapping_add(cli.seed).wrapping_add(i as u64);
            }
            let sample = synth_stereo(&spec)?;
            let scene = synth_depth_rig(&spec, &rig)?;
            let name = format!("{i:06}");
            let file = |dir: &str, ext: &str| a.output.join(dir).join(format!("{name}.{ext}"));
            write_rgb(file("left", "png"), &sample.left)?;
            write_rgb(file("right", "png"), &sample.right)?;
            let gt = sample.ground_truth.as_ref().expect("synthetic samples carry ground truth");
            write_disparity(file("disp", "tiff"), gt)?;
            write_depth_tiff(file("depth", "tiff"), &scene.depth)?;
            write_disparity(file("expected", "tiff"), &scene.expected)?;
            Ok(())
        })
        .collect::<Result<Vec<()>>>()?;

    let calib = CalibrationFile {
        depth_camera: Some(base.intrinsics()),
        left_camera: Some(base.intrinsics()),
        stereo: Some(base.geometry),
        extrinsics: Vec::new(),
        rig: Some(TransformRecord::from(&rig)),
    };
    calib.save(a.output.join("calib.toml"))?;
    write_text(&a.output.join("scene.toml"), &base.to_toml())?;
    say(cli, format!("wrote {} scenes -> {}", a.count, a.output.display()));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_parsing() {
        assert_eq!(parse_hxw("256x512"), Ok((256, 512)));
        assert!(parse_hxw("256").is_err());
        assert!(parse_hxw("0x5").is_err());
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["stereo-gt", "frobnicate"]), 2);
        assert_eq!(run(["stereo-gt", "match", "--bogus"]), 2);
        assert_eq!(run(["stereo-gt", "match", "--crop", "12", "-o", "x.tiff"]), 2);
    }

    #[test]
    fn sgm_defaults_from_flags() {
        let cli = Cli::try_parse_from(["stereo-gt", "match", "--method", "sgm", "-o", "d.tiff"]).unwrap();
        let Command::Match(a) = &cli.command else { unreachable!() };
        assert_eq!(matcher_from(a).unwrap(), Matcher::Sgm(SgmConfig::default()));
        let cli = Cli::try_parse_from(["stereo-gt", "match", "--method", "bm", "-o", "d.tiff"]).unwrap();
        let Command::Match(a) = &cli.command else { unreachable!() };
        assert_eq!(matcher_from(a).unwrap(), Matcher::Bm(BmConfig::default()));
    }

    #[test]
    fn banner_lists_defaults() {
        let b = defaults_banner();
        for s in ["d_max=256", "bm.block=15", "sgm.block=3", "p1=216", "p2=864", "crop=256x512", "pad=608x1056"] {
            assert!(b.contains(s), "{b}");
        }
    }
}
