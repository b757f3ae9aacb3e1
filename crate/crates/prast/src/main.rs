//! Command-line front end: render/oracle/warp/compare/reference/sweep.
//!
//! Exit codes: 0 success, 2 configuration error, 3 I/O error,
//! 4 verification/metric failure. `PRAST_THREADS` caps worker threads.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use prast::bounds::{BoundMethod, ScanAxis};
use prast::foveation::FoveationMap;
use prast::image::{read_pgm_mask, read_ppm, write_pgm_mask, write_ppm, ImageError};
use prast::math::vec2;
use prast::metrics::{foveal_ssim, masked_ssim, warp_rolling, MetricsError};
use prast::oracle;
use prast::raster::{
    self, rasterize, shade, Mode, RenderConfig, RenderError, Unfoveate,
};
use prast::scene::{load_scene, prepare, PreparedScene, SceneError};
use prast::sweep::{load_manifest, run_sweep, SweepError};

#[derive(Parser)]
#[command(name = "prast", version, about = "Perceptual software rasterizer")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Rasterize a scene with conservative primitive-pixel bounds.
    Render(RenderArgs),
    /// Brute-force ray trace the same image formation (ground truth).
    Oracle(RenderArgs),
    /// Grid-warp a t=0 render to the rolling image (baseline).
    Warp(WarpArgs),
    /// Print SSIM between two images.
    Compare(CompareArgs),
    /// Supersampled box-filtered reference render.
    Reference(ReferenceArgs),
    /// Run the cross product of sweep axes from a manifest, emit CSV.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long, value_enum)]
    mode: Mode,
    /// Bounding method; defaults to the tightest valid for the mode.
    #[arg(long, value_enum)]
    bound: Option<BoundMethod>,
    #[arg(long, default_value_t = 256)]
    width: usize,
    #[arg(long, default_value_t = 256)]
    height: usize,
    #[arg(short, long)]
    output: PathBuf,
    /// Display resampling filter for foveated output.
    #[arg(long, value_enum, default_value_t = Unfoveate::Gather)]
    unfoveate: Unfoveate,
    /// Write per-primitive sample-test-efficiency counters as CSV.
    #[arg(long)]
    ste: Option<PathBuf>,
    /// Guard band in buffer pixels added to every bound.
    #[arg(long, default_value_t = 1.0)]
    guard_px: f64,
}

#[derive(Args)]
struct WarpArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long, default_value_t = 256)]
    width: usize,
    #[arg(long, default_value_t = 256)]
    height: usize,
    #[arg(short, long)]
    output: PathBuf,
    /// Disocclusion mask output (PGM, 255 = hole).
    #[arg(long)]
    mask: PathBuf,
    /// Cull warp-grid triangles stretched beyond this many source pixels.
    #[arg(long, default_value_t = 3.0)]
    threshold: f64,
}

#[derive(Args)]
struct CompareArgs {
    /// The two images to compare.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    ssim: Vec<PathBuf>,
    /// Ignore pixels marked 255 in this PGM mask.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Restrict to the 64x64 crop at this display position (NDC "X,Y").
    #[arg(long, value_parser = parse_fovea)]
    fovea: Option<(f64, f64)>,
}

#[derive(Args)]
struct ReferenceArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Supersampling factor per axis.
    #[arg(long, default_value_t = 4)]
    factor: usize,
    #[arg(long, default_value_t = 256)]
    width: usize,
    #[arg(long, default_value_t = 256)]
    height: usize,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

fn parse_fovea(s: &str) -> Result<(f64, f64), String> {
    let mut it = s.split(',');
    let x = it
        .next()
        .and_then(|v| v.trim().parse().ok())
        .ok_or("expected X,Y")?;
    let y = it
        .next()
        .and_then(|v| v.trim().parse().ok())
        .ok_or("expected X,Y")?;
    if it.next().is_some() {
        return Err("expected exactly two components".into());
    }
    Ok((x, y))
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error("{0}")]
    Config(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Scene(SceneError::MissingFile(_)) | CliError::Scene(SceneError::Io { .. }) => 3,
            CliError::Scene(_) => 2,
            CliError::Render(_) => 2,
            CliError::Image(ImageError::Io { .. }) => 3,
            CliError::Image(ImageError::Malformed { .. }) => 2,
            CliError::Metrics(_) => 4,
            CliError::Sweep(SweepError::Scene(SceneError::MissingFile(_))) => 3,
            CliError::Sweep(_) => 2,
            CliError::Config(_) => 2,
        }
    }
}

/// Atomic text write: temp file in the same directory, then rename.
fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let io_err = |source: std::io::Error| {
        ImageError::Io {
            path: path.display().to_string(),
            source,
        }
    };
    let dir = path.parent().unwrap_or(Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map_or("out".into(), |n| n.to_string_lossy())
    ));
    std::fs::write(&tmp, text).map_err(io_err)?;
    std::fs::rename(&tmp, path).map_err(io_err)?;
    Ok(())
}

fn build_config(
    mode: Mode,
    bound: Option<BoundMethod>,
    width: usize,
    height: usize,
    guard_px: f64,
    prep: &PreparedScene,
) -> Result<RenderConfig, CliError> {
    let needs_fov = matches!(mode, Mode::Foveated | Mode::Joint);
    let needs_scan = matches!(mode, Mode::Rolling | Mode::Joint);
    let cfg = RenderConfig {
        mode,
        bound: bound.unwrap_or_else(|| mode.default_bound()),
        width,
        height,
        guard_px,
        foveation: if needs_fov {
            Some(
                prep.foveation
                    .clone()
                    .unwrap_or_else(|| FoveationMap::power(vec2(0.0, 0.0), 2.0)),
            )
        } else {
            None
        },
        scan: if needs_scan {
            Some(prep.scan.unwrap_or(ScanAxis { d: vec2(1.0, 0.0) }))
        } else {
            None
        },
    };
    cfg.validate()?;
    Ok(cfg)
}

fn load_prepared(scene: &Path, width: usize, height: usize) -> Result<PreparedScene, CliError> {
    let s = load_scene(scene)?;
    Ok(prepare(&s, width as f64 / height as f64)?)
}

fn cmd_render(a: &RenderArgs, use_oracle: bool) -> Result<(), CliError> {
    let prep = load_prepared(&a.scene, a.width, a.height)?;
    let cfg = build_config(a.mode, a.bound, a.width, a.height, a.guard_px, &prep)?;
    let (display, stats) = if use_oracle {
        let gbuf = oracle::trace(&cfg, &prep.camera, &prep.tris)?;
        let buffer = shade(&gbuf, &prep.materials, &prep.light, prep.clear);
        let display = match cfg.foveation.as_ref() {
            Some(map) if !map.is_identity() => match a.unfoveate {
                Unfoveate::Mip => {
                    prast::foveation::unfoveate_mip(&buffer, map, cfg.width, cfg.height)
                }
                Unfoveate::Gather => {
                    prast::foveation::unfoveate_gather(&buffer, map, cfg.width, cfg.height, 1.0)
                }
            },
            _ => buffer,
        };
        // STE is not meaningful for the exhaustive tracer: every pixel
        // tests every primitive; passes are the surviving front surface.
        let mut stats = prast::metrics::SteStats::new(prep.tris.len());
        for t in &mut stats.tested {
            *t = (cfg.width * cfg.height) as u64;
        }
        for &p in &gbuf.prim {
            if p != u32::MAX {
                stats.passed[p as usize] += 1;
            }
        }
        (display, stats)
    } else {
        let out = raster::render(
            &cfg,
            &prep.camera,
            &prep.tris,
            &prep.materials,
            &prep.light,
            prep.clear,
            a.unfoveate,
        )?;
        (out.display, out.stats)
    };
    write_ppm(&display, &a.output)?;
    if let Some(ste_path) = &a.ste {
        write_text(ste_path, &stats.csv())?;
    }
    Ok(())
}

fn cmd_warp(a: &WarpArgs) -> Result<(), CliError> {
    let prep = load_prepared(&a.scene, a.width, a.height)?;
    let cfg = build_config(
        Mode::Common,
        Some(BoundMethod::Hull),
        a.width,
        a.height,
        1.0,
        &prep,
    )?;
    let (gbuf, _) = rasterize(&cfg, &prep.camera, &prep.tris)?;
    let color = shade(&gbuf, &prep.materials, &prep.light, prep.clear);
    let scan = prep.scan.unwrap_or(ScanAxis { d: vec2(1.0, 0.0) });
    let motion = prep.relative_view();
    let (warped, mask) = warp_rolling(&color, &gbuf, &prep.camera, &motion, &scan, a.threshold);
    write_ppm(&warped, &a.output)?;
    write_pgm_mask(&mask, a.width, a.height, &a.mask)?;
    Ok(())
}

fn cmd_compare(a: &CompareArgs) -> Result<(), CliError> {
    let img_a = read_ppm(&a.ssim[0])?;
    let img_b = read_ppm(&a.ssim[1])?;
    let value = match (&a.mask, &a.fovea) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config(
                "--mask and --fovea are mutually exclusive".into(),
            ))
        }
        (Some(mask_path), None) => {
            let (mask, mw, mh) = read_pgm_mask(mask_path)?;
            if (mw, mh) != (img_a.width, img_a.height) {
                return Err(CliError::Config(format!(
                    "mask is {mw}x{mh}, images are {}x{}",
                    img_a.width, img_a.height
                )));
            }
            masked_ssim(&img_a, &img_b, Some(&mask))?
        }
        (None, Some((fx, fy))) => {
            let (fx, fy) = (*fx, *fy);
            let px = prast::image::ndc_to_pixel(vec2(fx, fy), img_a.width, img_a.height);
            foveal_ssim(&img_a, &img_b, (px.x, px.y))?
        }
        (None, None) => masked_ssim(&img_a, &img_b, None)?,
    };
    println!("{value:.6}");
    Ok(())
}

fn cmd_reference(a: &ReferenceArgs) -> Result<(), CliError> {
    if a.factor == 0 {
        return Err(CliError::Config("--factor must be >= 1".into()));
    }
    let prep = load_prepared(&a.scene, a.width, a.height)?;
    let cfg = build_config(
        Mode::Common,
        Some(BoundMethod::Hull),
        a.width,
        a.height,
        1.0,
        &prep,
    )?;
    let img = raster::supersample_reference(
        &cfg,
        &prep.camera,
        &prep.tris,
        &prep.materials,
        &prep.light,
        prep.clear,
        a.factor,
    )?;
    write_ppm(&img, &a.output)?;
    Ok(())
}

fn cmd_sweep(a: &SweepArgs) -> Result<(), CliError> {
    let (manifest, scene) = load_manifest(&a.manifest)?;
    let csv = run_sweep(&manifest, &scene);
    write_text(&a.output, &csv)?;
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.cmd {
        Cmd::Render(a) => cmd_render(a, false),
        Cmd::Oracle(a) => cmd_render(a, true),
        Cmd::Warp(a) => cmd_warp(a),
        Cmd::Compare(a) => cmd_compare(a),
        Cmd::Reference(a) => cmd_reference(a),
        Cmd::Sweep(a) => cmd_sweep(a),
    }
}

fn main() -> ExitCode {
    if let Ok(n) = std::env::var("PRAST_THREADS") {
        match n.parse::<usize>() {
            Ok(n) if n >= 1 => {
                // ignore failure: the pool may already be initialized
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
            _ => {
                eprintln!("error: PRAST_THREADS must be a positive integer");
                return ExitCode::from(2);
            }
        }
    }
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
