//! Brute-force ray tracer: every pixel against every primitive, no bounds,
//! no acceleration structure. Ground truth for pixel-exact equivalence
//! tests and for bound-soundness fuzzing.
//!
//! It reuses the rasterizer's `pixel_sample`, hit-accept and G-buffer
//! write helpers verbatim, so on sound bounds the two outputs are
//! bit-identical by construction.

use rayon::prelude::*;

use crate::geometry::{Camera, Hit, Ray, SpaceTimeTriangle};
use crate::raster::{consider_hit, write_hit, GBuffer, RenderConfig, RenderError};

/// Trace the whole frame: for every pixel, the same ray/time the
/// rasterizer uses, intersected against all primitives, nearest hit with
/// the same tie-break.
pub fn trace(
    cfg: &RenderConfig,
    cam: &Camera,
    tris: &[SpaceTimeTriangle],
) -> Result<GBuffer, RenderError> {
    cfg.validate()?;
    let (w, h) = (cfg.width, cfg.height);
    let rows: Vec<Vec<(Ray, Option<Hit>)>> = (0..h)
        .into_par_iter()
        .map(|j| {
            let mut row = Vec::with_capacity(w);
            let mut sink = 0u64;
            for i in 0..w {
                let ray = crate::raster::pixel_sample(cfg, cam, i, j);
                let mut best: Option<Hit> = None;
                for tri in tris {
                    consider_hit(&ray, tri, cam.near, &mut best, &mut sink);
                }
                row.push((ray, best));
            }
            row
        })
        .collect();
    let mut gbuf = GBuffer::new(w, h);
    for (j, row) in rows.into_iter().enumerate() {
        for (i, (ray, best)) in row.into_iter().enumerate() {
            let idx = j * w + i;
            gbuf.time[idx] = ray.time;
            if let Some(hit) = best {
                write_hit(&mut gbuf, idx, &ray, &hit, tris);
            }
        }
    }
    Ok(gbuf)
}

/// All pixels whose oracle ray hits this one triangle, ignoring occlusion.
/// Used to verify BoundPoly ⊇ coverage for every bounding method.
pub fn coverage_set(
    tri: &SpaceTimeTriangle,
    cfg: &RenderConfig,
    cam: &Camera,
) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut sink = 0u64;
    for j in 0..cfg.height {
        for i in 0..cfg.width {
            let ray = crate::raster::pixel_sample(cfg, cam, i, j);
            let mut best: Option<Hit> = None;
            consider_hit(&ray, tri, cam.near, &mut best, &mut sink);
            if best.is_some() {
                out.push((i, j));
            }
        }
    }
    out
}
