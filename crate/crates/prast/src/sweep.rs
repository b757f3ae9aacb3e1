//! Batch experiment driver: a JSON manifest names a scene and up to three
//! sweep axes (bound methods, foveation strengths α, camera rotation
//! angles). Every combination is rendered, verified against the
//! brute-force oracle, and reported as one CSV row.

use std::path::Path;
use std::time::Instant;

use serde::Deserialize;
use thiserror::Error;

use crate::bounds::{BoundMethod, ScanAxis};
use crate::foveation::FoveationMap;
use crate::math::vec2;
use crate::metrics::masked_ssim;
use crate::raster::{rasterize, shade, Mode, RenderConfig};
use crate::scene::{load_scene, prepare, set_camera_angle, SceneError, SceneFile};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("manifest parse error in {path}: {reason}")]
    Parse { path: String, reason: String },
}

fn d_guard() -> f64 {
    1.0
}
fn d_size() -> usize {
    128
}

/// One sweep description. Empty axes collapse to a single unset point, so
/// the row count is always the product of the (effective) axis lengths.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub scene: String,
    pub mode: Mode,
    #[serde(default = "d_size")]
    pub width: usize,
    #[serde(default = "d_size")]
    pub height: usize,
    #[serde(default = "d_guard")]
    pub guard_px: f64,
    /// Bound methods to sweep; empty = the mode's default bound.
    #[serde(default)]
    pub bounds: Vec<BoundMethod>,
    /// Foveation strengths to sweep (power-falloff exponent).
    #[serde(default)]
    pub alphas: Vec<f64>,
    /// End-of-frame camera rotation angles (degrees, vertical axis).
    #[serde(default)]
    pub angles: Vec<f64>,
}

/// Parse the manifest and check the referenced scene exists.
pub fn load_manifest(path: &Path) -> Result<(RunManifest, SceneFile), SweepError> {
    let text = std::fs::read_to_string(path).map_err(|e| SweepError::Parse {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| SweepError::Parse {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let scene_path = path
        .parent()
        .unwrap_or(Path::new("."))
        .join(&manifest.scene);
    let scene = load_scene(&scene_path)?;
    Ok((manifest, scene))
}

fn run_one(
    manifest: &RunManifest,
    scene: &SceneFile,
    bound: BoundMethod,
    alpha: Option<f64>,
    angle: Option<f64>,
) -> Result<(crate::metrics::SteStats, f64), SceneError> {
    let mut scene = scene.clone();
    if let Some(a) = angle {
        set_camera_angle(&mut scene, a);
    }
    let aspect = manifest.width as f64 / manifest.height as f64;
    let mut prep = prepare(&scene, aspect)?;
    if let Some(a) = alpha {
        let fovea = prep
            .foveation
            .as_ref()
            .map_or(vec2(0.0, 0.0), |m| m.fovea);
        prep.foveation = Some(FoveationMap::power(fovea, a));
    }
    let needs_fov = matches!(manifest.mode, Mode::Foveated | Mode::Joint);
    let needs_scan = matches!(manifest.mode, Mode::Rolling | Mode::Joint);
    let cfg = RenderConfig {
        mode: manifest.mode,
        bound,
        width: manifest.width,
        height: manifest.height,
        guard_px: manifest.guard_px,
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
    let (gbuf, stats) = rasterize(&cfg, &prep.camera, &prep.tris).map_err(|e| {
        SceneError::Parse {
            path: manifest.scene.clone(),
            reason: e.to_string(),
        }
    })?;
    let ours = shade(&gbuf, &prep.materials, &prep.light, prep.clear);
    let oracle_gbuf = crate::oracle::trace(&cfg, &prep.camera, &prep.tris).map_err(|e| {
        SceneError::Parse {
            path: manifest.scene.clone(),
            reason: e.to_string(),
        }
    })?;
    let oracle = shade(&oracle_gbuf, &prep.materials, &prep.light, prep.clear);
    let ssim = masked_ssim(&ours, &oracle, None).map_err(|e| SceneError::Parse {
        path: manifest.scene.clone(),
        reason: e.to_string(),
    })?;
    Ok((stats, ssim))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| format!("{v}"))
}

/// Execute the axis cross product; one CSV row per run, failures recorded
/// in the error column without aborting the sweep.
pub fn run_sweep(manifest: &RunManifest, scene: &SceneFile) -> String {
    let bounds = if manifest.bounds.is_empty() {
        vec![manifest.mode.default_bound()]
    } else {
        manifest.bounds.clone()
    };
    let alphas: Vec<Option<f64>> = if manifest.alphas.is_empty() {
        vec![None]
    } else {
        manifest.alphas.iter().copied().map(Some).collect()
    };
    let angles: Vec<Option<f64>> = if manifest.angles.is_empty() {
        vec![None]
    } else {
        manifest.angles.iter().copied().map(Some).collect()
    };
    let mut csv = String::from("mode,bound,alpha,angle,tested,passed,ste,ssim_vs_oracle,wall_ms,error\n");
    for &bound in &bounds {
        for &alpha in &alphas {
            for &angle in &angles {
                let start = Instant::now();
                let row = run_one(manifest, scene, bound, alpha, angle);
                let ms = start.elapsed().as_secs_f64() * 1e3;
                match row {
                    Ok((stats, ssim)) => {
                        csv.push_str(&format!(
                            "{},{bound},{},{},{},{},{:.6},{:.6},{ms:.1},\n",
                            manifest.mode,
                            fmt_opt(alpha),
                            fmt_opt(angle),
                            stats.total_tested(),
                            stats.total_passed(),
                            stats.efficiency(),
                            ssim,
                        ));
                    }
                    Err(e) => {
                        csv.push_str(&format!(
                            "{},{bound},{},{},,,,,{ms:.1},\"{}\"\n",
                            manifest.mode,
                            fmt_opt(alpha),
                            fmt_opt(angle),
                            e.to_string().replace('"', "'"),
                        ));
                    }
                }
            }
        }
    }
    csv
}
