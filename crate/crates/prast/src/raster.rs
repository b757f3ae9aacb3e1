//! The streaming perceptual rasterizer: per-primitive bounding, per-pixel
//! ray-triangle intersection at pixel-specific time/fovea, z-buffer
//! resolve, G-buffer fill and rolling deferred shading.
//!
//! The per-pixel ray/time construction and the hit-accept rule live here in
//! shared helpers (`pixel_sample`, `consider_hit`, `write_hit`) that the
//! brute-force oracle calls verbatim, which is what makes the two outputs
//! bit-identical.

use rayon::prelude::*;
use thiserror::Error;

use crate::bounds::{
    compute_bound, near_plane_split, BoundMethod, BoundPoly, ScanAxis, SplitResult,
};
use crate::foveation::{unfoveate_gather, unfoveate_mip, FoveationMap};
use crate::geometry::{intersect, Camera, Hit, Ray, SpaceTimeTriangle, TimeVaryingTransform};
use crate::image::{pixel_center_ndc, Image};
use crate::math::Vec3;
use crate::metrics::SteStats;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),
}

/// Image-formation mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Ordinary pinhole rasterization: every pixel at t = 0.
    Common,
    Foveated,
    Rolling,
    Joint,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Common => "common",
            Mode::Foveated => "foveated",
            Mode::Rolling => "rolling",
            Mode::Joint => "joint",
        })
    }
}

impl Mode {
    pub fn default_bound(self) -> BoundMethod {
        match self {
            Mode::Common => BoundMethod::Hull,
            Mode::Foveated => BoundMethod::FovRecursive,
            Mode::Rolling => BoundMethod::Zenon,
            Mode::Joint => BoundMethod::Joint,
        }
    }
}

/// Display resampling filter for foveated output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Unfoveate {
    Mip,
    Gather,
}

#[derive(Debug, Clone)]
pub struct RenderConfig {
    pub mode: Mode,
    pub bound: BoundMethod,
    pub width: usize,
    pub height: usize,
    pub guard_px: f64,
    pub foveation: Option<FoveationMap>,
    pub scan: Option<ScanAxis>,
}

impl RenderConfig {
    pub fn validate(&self) -> Result<(), RenderError> {
        let err = |m: &str| Err(RenderError::ConfigMismatch(m.to_string()));
        if self.width == 0 || self.height == 0 {
            return err("resolution must be positive");
        }
        match self.mode {
            Mode::Foveated | Mode::Joint if self.foveation.is_none() => {
                return err("foveated/joint mode needs a foveation map");
            }
            Mode::Rolling | Mode::Joint if self.scan.is_none() => {
                return err("rolling/joint mode needs a scan axis");
            }
            _ => {}
        }
        let ok = match self.mode {
            Mode::Common => matches!(
                self.bound,
                BoundMethod::Trivial | BoundMethod::Quad | BoundMethod::Hull
            ),
            Mode::Foveated => matches!(
                self.bound,
                BoundMethod::Trivial
                    | BoundMethod::Quad
                    | BoundMethod::FovSimple
                    | BoundMethod::FovRecursive
            ),
            Mode::Rolling => matches!(
                self.bound,
                BoundMethod::Trivial
                    | BoundMethod::Quad
                    | BoundMethod::Hull
                    | BoundMethod::Adaptive
                    | BoundMethod::Zenon
            ),
            Mode::Joint => matches!(self.bound, BoundMethod::Trivial | BoundMethod::Joint),
        };
        if !ok {
            return err(&format!(
                "bound method {} is not valid in {:?} mode",
                self.bound, self.mode
            ));
        }
        Ok(())
    }
}

/// Per-pixel geometry record resolved by the z-test.
#[derive(Debug, Clone, PartialEq)]
pub struct GBuffer {
    pub width: usize,
    pub height: usize,
    /// Positive camera-space depth; infinity where empty.
    pub depth: Vec<f64>,
    /// u32::MAX where empty.
    pub prim: Vec<u32>,
    pub bary: Vec<[f64; 3]>,
    pub normal: Vec<Vec3>,
    /// Camera-space hit position (for deferred shading).
    pub pos: Vec<Vec3>,
    pub material: Vec<u32>,
    /// The pixel's sample time (set for every pixel, hit or not).
    pub time: Vec<f64>,
}

impl GBuffer {
    pub fn new(width: usize, height: usize) -> Self {
        let n = width * height;
        GBuffer {
            width,
            height,
            depth: vec![f64::INFINITY; n],
            prim: vec![u32::MAX; n],
            bary: vec![[0.0; 3]; n],
            normal: vec![Vec3::default(); n],
            pos: vec![Vec3::default(); n],
            material: vec![0; n],
            time: vec![0.0; n],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub albedo: [f64; 3],
    pub specular: f64,
    pub shininess: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Light {
    /// Camera-space position at frame start/end; shading lerps to the
    /// pixel's time.
    pub position: [Vec3; 2],
    pub color: [f64; 3],
    pub ambient: [f64; 3],
}

/// Construct the ray (and sample time) for pixel (i, j). This single
/// routine defines the image formation model for BOTH the rasterizer and
/// the oracle; any change here changes ground truth.
pub fn pixel_sample(cfg: &RenderConfig, cam: &Camera, i: usize, j: usize) -> Ray {
    let ndc = pixel_center_ndc(i, j, cfg.width, cfg.height);
    let (display, time) = match cfg.mode {
        Mode::Common => (ndc, 0.0),
        Mode::Rolling => (ndc, cfg.scan.as_ref().unwrap().time_at_ndc(ndc)),
        Mode::Foveated => (
            cfg.foveation.as_ref().unwrap().foveate_to_display(ndc),
            0.0,
        ),
        Mode::Joint => {
            // the rolling time depends on where the pixel is displayed
            let d = cfg.foveation.as_ref().unwrap().foveate_to_display(ndc);
            (d, cfg.scan.as_ref().unwrap().time_at_ndc(d))
        }
    };
    let mut ray = cam.pixel_ray(display);
    ray.time = time.clamp(0.0, 1.0);
    ray
}

/// The pixel's sample time alone (GBuffer invariant helper).
pub fn pixel_time(cfg: &RenderConfig, i: usize, j: usize) -> f64 {
    let ndc = pixel_center_ndc(i, j, cfg.width, cfg.height);
    match cfg.mode {
        Mode::Common | Mode::Foveated => 0.0,
        Mode::Rolling => cfg.scan.as_ref().unwrap().time_at_ndc(ndc).clamp(0.0, 1.0),
        Mode::Joint => {
            let d = cfg.foveation.as_ref().unwrap().foveate_to_display(ndc);
            cfg.scan.as_ref().unwrap().time_at_ndc(d).clamp(0.0, 1.0)
        }
    }
}

/// Test one primitive against the pixel's ray and fold it into the running
/// nearest hit. Accept rule: positive ray parameter (inside `intersect`)
/// and depth at or beyond the near plane; ties on depth go to the lower
/// primitive id so stream order is irrelevant.
#[inline]
pub(crate) fn consider_hit(
    ray: &Ray,
    tri: &SpaceTimeTriangle,
    near: f64,
    best: &mut Option<Hit>,
    passed: &mut u64,
) {
    if let Some(hit) = intersect(ray, &tri.at(ray.time), tri.prim) {
        if hit.depth >= near {
            *passed += 1;
            let better = match best {
                None => true,
                Some(b) => {
                    hit.depth < b.depth || (hit.depth == b.depth && hit.prim < b.prim)
                }
            };
            if better {
                *best = Some(hit);
            }
        }
    }
}

/// Write a resolved hit into the G-buffer; shared verbatim with the oracle.
pub(crate) fn write_hit(
    gbuf: &mut GBuffer,
    idx: usize,
    ray: &Ray,
    hit: &Hit,
    tris: &[SpaceTimeTriangle],
) {
    let tri = &tris[hit.prim as usize];
    gbuf.depth[idx] = hit.depth;
    gbuf.prim[idx] = hit.prim;
    gbuf.bary[idx] = hit.bary;
    // normals blend start->end at the pixel time first, then barycentrically
    let mut n = Vec3::default();
    for (j, &b) in hit.bary.iter().enumerate() {
        n = n + tri.normal_at(ray.time, j) * b;
    }
    gbuf.normal[idx] = n.normalized();
    gbuf.pos[idx] = ray.sample(hit.t_ray);
    gbuf.material[idx] = tri.material;
}

/// Rasterize: bound every primitive, then walk each pixel inside the bound
/// and intersect. Primitive ids must equal stream indices.
pub fn rasterize(
    cfg: &RenderConfig,
    cam: &Camera,
    tris: &[SpaceTimeTriangle],
) -> Result<(GBuffer, SteStats), RenderError> {
    cfg.validate()?;
    debug_assert!(tris.iter().enumerate().all(|(k, t)| t.prim as usize == k));
    let (w, h) = (cfg.width, cfg.height);
    let proj = TimeVaryingTransform::constant(cam.projection());
    let map = cfg.foveation.as_ref();
    let scan = cfg.scan.as_ref();

    type Bounded = Vec<(BoundPoly, (usize, usize, usize, usize))>;
    let with_bbox = |b: BoundPoly| -> Option<(BoundPoly, (usize, usize, usize, usize))> {
        b.pixel_bbox(w, h).map(|bb| (b, bb))
    };
    let per_prim: Vec<Bounded> = tris
        .par_iter()
        .map(|tri| {
            let parts = match near_plane_split(tri, cam.near) {
                SplitResult::Culled => return Vec::new(),
                SplitResult::Kept => vec![*tri],
                SplitResult::Split(parts) => {
                    if tri.pos[0] == tri.pos[1] {
                        parts
                    } else {
                        // a moving near-plane straddler: the endpoint clip is
                        // not conservative mid-interval, fall back to testing
                        // everywhere (intersection still uses the original)
                        return with_bbox(BoundPoly::full_screen(cfg.guard_px))
                            .into_iter()
                            .collect();
                    }
                }
            };
            parts
                .iter()
                .filter_map(|p| {
                    with_bbox(compute_bound(
                        cfg.bound,
                        p,
                        &proj,
                        map,
                        scan,
                        w,
                        cfg.guard_px,
                    ))
                })
                .collect()
        })
        .collect();

    // bin primitives by pixel row so a pixel only scans candidates whose
    // bound can reach its row (order stays ascending: results unchanged)
    let mut row_prims: Vec<Vec<u32>> = vec![Vec::new(); h];
    for (pi, blist) in per_prim.iter().enumerate() {
        let (mut j0, mut j1) = (usize::MAX, 0usize);
        for &(_, bb) in blist {
            j0 = j0.min(bb.2);
            j1 = j1.max(bb.3);
        }
        if j0 != usize::MAX {
            for bin in &mut row_prims[j0..=j1] {
                bin.push(pi as u32);
            }
        }
    }

    let rows: Vec<(Vec<(Ray, Option<Hit>)>, Vec<u64>, Vec<u64>)> = (0..h)
        .into_par_iter()
        .map(|j| {
            let mut tested = vec![0u64; tris.len()];
            let mut passed = vec![0u64; tris.len()];
            let mut row = Vec::with_capacity(w);
            for i in 0..w {
                let ray = pixel_sample(cfg, cam, i, j);
                let mut best: Option<Hit> = None;
                for &pi in &row_prims[j] {
                    let pi = pi as usize;
                    let blist = &per_prim[pi];
                    let inside = blist.iter().any(|(b, bb)| {
                        i >= bb.0
                            && i <= bb.1
                            && j >= bb.2
                            && j <= bb.3
                            && b.contains_pixel(i, j, w, h)
                    });
                    if !inside {
                        continue;
                    }
                    tested[pi] += 1;
                    consider_hit(&ray, &tris[pi], cam.near, &mut best, &mut passed[pi]);
                }
                row.push((ray, best));
            }
            (row, tested, passed)
        })
        .collect();

    let mut gbuf = GBuffer::new(w, h);
    let mut stats = SteStats::new(tris.len());
    for (j, (row, tested, passed)) in rows.into_iter().enumerate() {
        for (pi, (&t, &p)) in tested.iter().zip(passed.iter()).enumerate() {
            stats.tested[pi] += t;
            stats.passed[pi] += p;
        }
        for (i, (ray, best)) in row.into_iter().enumerate() {
            let idx = j * w + i;
            gbuf.time[idx] = ray.time;
            if let Some(hit) = best {
                write_hit(&mut gbuf, idx, &ray, &hit, tris);
            }
        }
    }
    Ok((gbuf, stats))
}

/// Blinn-Phong deferred shading with the light position interpolated to
/// each pixel's time; the eye sits at the camera-space origin at all times
/// (camera motion is folded into the vertex stream).
pub fn shade(gbuf: &GBuffer, materials: &[Material], light: &Light, clear: [f32; 3]) -> Image {
    let mut img = Image::new(gbuf.width, gbuf.height);
    for idx in 0..gbuf.depth.len() {
        if gbuf.prim[idx] == u32::MAX {
            img.data[idx] = clear;
            continue;
        }
        let m = &materials[gbuf.material[idx] as usize];
        let p = gbuf.pos[idx];
        let mut n = gbuf.normal[idx];
        let v = (-p).normalized();
        if n.dot(v) < 0.0 {
            n = -n; // double-sided
        }
        let lp = light.position[0].lerp(light.position[1], gbuf.time[idx]);
        let l = (lp - p).normalized();
        let diff = n.dot(l).max(0.0);
        let half = (l + v).normalized();
        let spec = n.dot(half).max(0.0).powf(m.shininess) * m.specular;
        let mut px = [0.0f32; 3];
        for c in 0..3 {
            px[c] = (light.ambient[c] * m.albedo[c]
                + light.color[c] * (m.albedo[c] * diff + spec)) as f32;
        }
        img.data[idx] = px;
    }
    img
}

#[derive(Debug)]
pub struct RenderOutput {
    /// Shaded image in the rasterization domain (foveated buffer for
    /// foveated/joint modes).
    pub buffer: Image,
    /// Display-domain image (unfoveated when applicable, else = buffer).
    pub display: Image,
    pub gbuf: GBuffer,
    pub stats: SteStats,
}

/// Full pipeline: rasterize, shade, optional display resampling.
pub fn render(
    cfg: &RenderConfig,
    cam: &Camera,
    tris: &[SpaceTimeTriangle],
    materials: &[Material],
    light: &Light,
    clear: [f32; 3],
    unfoveate: Unfoveate,
) -> Result<RenderOutput, RenderError> {
    let (gbuf, stats) = rasterize(cfg, cam, tris)?;
    let buffer = shade(&gbuf, materials, light, clear);
    let display = match (cfg.mode, cfg.foveation.as_ref()) {
        (Mode::Foveated | Mode::Joint, Some(map)) if !map.is_identity() => match unfoveate {
            Unfoveate::Mip => unfoveate_mip(&buffer, map, cfg.width, cfg.height),
            Unfoveate::Gather => unfoveate_gather(&buffer, map, cfg.width, cfg.height, 1.0),
        },
        _ => buffer.clone(),
    };
    Ok(RenderOutput {
        buffer,
        display,
        gbuf,
        stats,
    })
}

/// Box-average downsample by an integer factor (dimensions must divide).
pub fn box_downsample(img: &Image, factor: usize) -> Image {
    assert!(factor >= 1 && img.width % factor == 0 && img.height % factor == 0);
    if factor == 1 {
        return img.clone();
    }
    let (w, h) = (img.width / factor, img.height / factor);
    let mut out = Image::new(w, h);
    let norm = 1.0 / (factor * factor) as f64;
    for j in 0..h {
        for i in 0..w {
            let mut acc = [0.0f64; 3];
            for sj in 0..factor {
                for si in 0..factor {
                    let px = img.get(i * factor + si, j * factor + sj);
                    for c in 0..3 {
                        acc[c] += px[c] as f64;
                    }
                }
            }
            out.set(
                i,
                j,
                [
                    (acc[0] * norm) as f32,
                    (acc[1] * norm) as f32,
                    (acc[2] * norm) as f32,
                ],
            );
        }
    }
    out
}

/// Render a supersampled common-mode (or mode-matched) reference and
/// box-downsample it to the target resolution.
#[allow(clippy::too_many_arguments)]
pub fn supersample_reference(
    cfg: &RenderConfig,
    cam: &Camera,
    tris: &[SpaceTimeTriangle],
    materials: &[Material],
    light: &Light,
    clear: [f32; 3],
    factor: usize,
) -> Result<Image, RenderError> {
    let hi_cfg = RenderConfig {
        width: cfg.width * factor,
        height: cfg.height * factor,
        ..cfg.clone()
    };
    let out = render(&hi_cfg, cam, tris, materials, light, clear, Unfoveate::Mip)?;
    Ok(box_downsample(&out.display, factor))
}
