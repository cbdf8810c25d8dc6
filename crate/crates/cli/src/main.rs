//! `changedet` command-line front end.
//!
//! Exit codes: 0 on success, 1 on runtime or IO failure, 2 on usage errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use changedet::inconsistency::{InconsistencyParams, UncertaintyModel, DEFAULT_TAU2};
use changedet::io::{
    load_dataset, read_manifest, write_change_report, write_manifest, write_ply_ellipsoids, KeptManifest,
    GROUND_TRUTH_FILE,
};
use changedet::motion::{filter_low_movement, MotionFilterParams};
use changedet::pipeline::{run_detection, DetectionParams};
use changedet::synthetic::{make_survey, presets, read_ground_truth, PathSpec, SceneSpec};

const CHANGES_JSON: &str = "changes.json";
const CHANGES_PLY: &str = "changes.ply";
const KEPT_JSON: &str = "kept.json";

/// Flag values that parse but violate a parameter invariant.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

fn usage(e: impl std::fmt::Display) -> anyhow::Error {
    UsageError(e.to_string()).into()
}

#[derive(Parser, Debug)]
#[command(name = "changedet", version, about = "Detect changes in images against a 3D triangle-mesh model")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a synthetic survey dataset.
    Generate(GenerateArgs),
    /// Drop low-movement frames and write a kept-frame manifest.
    Filter(FilterArgs),
    /// Detect changes and write changes.json / changes.ply.
    Detect(DetectArgs),
    /// Summarize a dataset.
    Info(InfoArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Preset {
    WallScan,
    RotateInPlace,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Change {
    Cube,
    None,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "wall-scan")]
    preset: Preset,
    #[arg(long, value_enum, default_value = "cube")]
    change: Change,
    /// Image width, px. Height is 3/4 of it.
    #[arg(long, default_value_t = 320)]
    width: u32,
    /// Number of poses along the path.
    #[arg(long, default_value_t = 7)]
    waypoints: usize,
    /// Additive image noise, intensity levels.
    #[arg(long, default_value_t = 0.0)]
    noise_sigma: f64,
    /// Rotation error added to the written poses, degrees.
    #[arg(long, default_value_t = 0.0)]
    rotation_sigma_deg: f64,
    /// Translation error added to the written poses, m.
    #[arg(long, default_value_t = 0.0)]
    translation_sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct FilterArgs {
    dataset: PathBuf,
    /// Manifest path (default: <dataset>/kept.json).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    max_features: usize,
    #[arg(long, default_value_t = 7)]
    patch_radius: usize,
    #[arg(long, default_value_t = 3)]
    pyramid_levels: usize,
    #[arg(long, default_value_t = 8.0)]
    search_radius: f64,
    /// Median feature displacement that counts as movement, px.
    #[arg(long, default_value_t = 2.0)]
    displacement_threshold: f64,
    #[arg(long, default_value_t = 0.5)]
    min_tracked_fraction: f64,
}

#[derive(Args, Debug)]
struct DetectArgs {
    dataset: PathBuf,
    /// Kept-frame manifest written by `filter`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Output directory (default: the dataset directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Inconsistency threshold, intensity levels.
    #[arg(long, default_value_t = 30.0)]
    threshold: f64,
    #[arg(long, default_value_t = 2)]
    kernel_radius: usize,
    #[arg(long, default_value_t = 150)]
    min_region_area: usize,
    /// Neighbors compared against each image.
    #[arg(long, default_value_t = 4)]
    max_comparisons: usize,
    #[arg(long, default_value_t = 2)]
    min_confirming_pairs: usize,
    /// Re-projection standard deviation, px.
    #[arg(long, default_value_t = 2.0)]
    sigma_px: f64,
    /// Chi-square gate on the squared Mahalanobis distance.
    #[arg(long, default_value_t = DEFAULT_TAU2)]
    tau2: f64,
    /// Detections closer than this to a supporting camera are dropped, m.
    #[arg(long, default_value_t = 0.5)]
    min_camera_distance: f64,
    /// Ellipsoid scale in changes.ply, standard deviations.
    #[arg(long, default_value_t = 1.0)]
    ply_sigma: f64,
    /// Write distance, mask and consensus images to <out>/debug.
    #[arg(long)]
    debug_images: bool,
}

#[derive(Args, Debug)]
struct InfoArgs {
    dataset: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("thread pool")?;
    }
    match cli.command {
        Command::Generate(a) => generate(&a),
        Command::Filter(a) => filter(&a),
        Command::Detect(a) => detect(&a),
        Command::Info(a) => info(&a),
    }
}

fn generate(a: &GenerateArgs) -> Result<()> {
    if a.width < 16 {
        return Err(usage("--width must be at least 16"));
    }
    let base = match a.change {
        Change::Cube => presets::cube_room(),
        Change::None => presets::empty_room(),
    };
    let spec = SceneSpec {
        noise_sigma: a.noise_sigma,
        rotation_sigma: a.rotation_sigma_deg.to_radians(),
        translation_sigma: a.translation_sigma,
        ..base
    };
    let path = match a.preset {
        Preset::WallScan => presets::wall_scan_with(a.waypoints),
        Preset::RotateInPlace => {
            let mut p = presets::rotate_in_place();
            if let PathSpec::RotateInPlace { waypoints, .. } = &mut p {
                *waypoints = a.waypoints;
            }
            p
        }
    };
    spec.validate().map_err(usage)?;
    path.poses().map_err(usage)?;
    let k = presets::intrinsics(a.width);
    let ds =
        make_survey(&spec, &path, &k, &a.out, a.seed).with_context(|| format!("generating {}", a.out.display()))?;
    println!("wrote {} frames ({}x{}) to {}", ds.len(), k.width, k.height, a.out.display());
    Ok(())
}

fn filter(a: &FilterArgs) -> Result<()> {
    let params = MotionFilterParams {
        max_features: a.max_features,
        patch_radius: a.patch_radius,
        pyramid_levels: a.pyramid_levels,
        search_radius: a.search_radius,
        displacement_threshold: a.displacement_threshold,
        min_tracked_fraction: a.min_tracked_fraction,
    };
    params.validate().map_err(usage)?;
    let ds = load_dataset(&a.dataset).with_context(|| format!("loading {}", a.dataset.display()))?;
    let images = ds.load_images()?;
    let kept = filter_low_movement(&images, &params);
    let manifest = KeptManifest { total: ds.len(), kept };
    let out = a.out.clone().unwrap_or_else(|| a.dataset.join(KEPT_JSON));
    write_manifest(&manifest, &out)?;
    println!("kept {} of {} frames -> {}", manifest.kept.len(), manifest.total, out.display());
    Ok(())
}

fn secs(d: Duration) -> String {
    format!("{:.3}", d.as_secs_f64())
}

fn detect(a: &DetectArgs) -> Result<()> {
    let params = DetectionParams {
        inconsistency: InconsistencyParams {
            threshold: a.threshold,
            kernel_radius: a.kernel_radius,
            min_region_area: a.min_region_area,
            max_comparisons: a.max_comparisons,
            min_confirming_pairs: a.min_confirming_pairs,
        },
        uncertainty: UncertaintyModel::isotropic(a.sigma_px, a.tau2).map_err(usage)?,
        min_camera_distance: a.min_camera_distance,
    };
    params.validate().map_err(usage)?;
    if !(a.ply_sigma > 0.0 && a.ply_sigma.is_finite()) {
        return Err(usage("--ply-sigma must be positive"));
    }
    let ds = load_dataset(&a.dataset).with_context(|| format!("loading {}", a.dataset.display()))?;
    let kept = match &a.manifest {
        Some(path) => {
            let m = read_manifest(path).with_context(|| format!("reading {}", path.display()))?;
            if m.total != ds.len() {
                bail!("manifest covers {} frames but the dataset has {}", m.total, ds.len());
            }
            Some(m.kept)
        }
        None => None,
    };
    let out_dir = a.out.clone().unwrap_or_else(|| a.dataset.clone());
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let debug_dir = a.debug_images.then(|| out_dir.join("debug"));

    let out = run_detection(&ds, kept.as_deref(), &params, debug_dir.as_deref())?;
    if out.max_comparisons < a.max_comparisons {
        eprintln!(
            "warning: --max-comparisons {} reduced to {} (only {} images)",
            a.max_comparisons,
            out.max_comparisons,
            out.frames.len()
        );
    }
    write_change_report(&out.regions_3d, out_dir.join(CHANGES_JSON))?;
    write_ply_ellipsoids(&out.regions_3d, out_dir.join(CHANGES_PLY), a.ply_sigma)?;

    let n2: usize = out.regions_2d.iter().map(Vec::len).sum();
    println!(
        "{} images, {} comparisons, {} 2D regions, {} 3D change regions",
        out.frames.len(),
        out.comparisons,
        n2,
        out.regions_3d.len()
    );
    println!("Data Loading | Inconsistencies | 3D Change");
    let t = &out.timings;
    println!("{} s | {} s | {} s", secs(t.data_loading), secs(t.inconsistencies), secs(t.change_3d));
    println!("wrote {}", out_dir.join(CHANGES_JSON).display());
    Ok(())
}

fn info(a: &InfoArgs) -> Result<()> {
    let ds = load_dataset(&a.dataset).with_context(|| format!("loading {}", a.dataset.display()))?;
    let mesh = ds.load_mesh()?;
    let k = &ds.intrinsics;
    println!("dataset: {}", ds.root.display());
    println!("frames: {}", ds.len());
    println!("image size: {}x{}", k.width, k.height);
    println!("intrinsics: fx {} fy {} cx {} cy {}", k.fx, k.fy, k.cx, k.cy);
    println!("model: {} triangles", mesh.len());
    if let Some((lo, hi)) = mesh.bounds() {
        println!("model bounds: [{:.3}, {:.3}, {:.3}] .. [{:.3}, {:.3}, {:.3}]", lo.x, lo.y, lo.z, hi.x, hi.y, hi.z);
    }
    let centers: Vec<_> = ds.frames.iter().map(|f| f.pose.center()).collect();
    let path_length: f64 = centers.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    println!("camera path length: {path_length:.3} m");
    print_ground_truth(&ds.root)?;
    Ok(())
}

fn print_ground_truth(root: &Path) -> Result<()> {
    let path = root.join(GROUND_TRUTH_FILE);
    if !path.is_file() {
        return Ok(());
    }
    let truth = read_ground_truth(&path)?;
    println!("ground truth changes: {}", truth.changes.len());
    for c in &truth.changes {
        let (m, h) = (c.centroid, c.half_extents);
        println!(
            "  center [{:.3}, {:.3}, {:.3}] half extents [{:.3}, {:.3}, {:.3}]",
            m[0], m[1], m[2], h[0], h[1], h[2]
        );
    }
    Ok(())
}
