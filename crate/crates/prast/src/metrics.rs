//! Quality and efficiency instrumentation: disocclusion-masked SSIM,
//! foveal-window SSIM, sample-test-efficiency accounting, and the
//! grid-warping baseline with stretch-threshold culling.

use thiserror::Error;

use crate::bounds::ScanAxis;
use crate::geometry::{Camera, TimeVaryingTransform};
use crate::image::{luma601, pixel_to_ndc, Image};
use crate::math::{vec2, Mat4, Vec2};
use crate::raster::GBuffer;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("no valid SSIM windows (image too small or fully masked)")]
    EmptyMask,
}

/// Per-primitive fragment test/pass counters plus the aggregate ratio.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SteStats {
    pub tested: Vec<u64>,
    pub passed: Vec<u64>,
}

impl SteStats {
    pub fn new(prims: usize) -> Self {
        SteStats {
            tested: vec![0; prims],
            passed: vec![0; prims],
        }
    }

    pub fn total_tested(&self) -> u64 {
        self.tested.iter().sum()
    }

    pub fn total_passed(&self) -> u64 {
        self.passed.iter().sum()
    }

    /// Aggregate sample test efficiency in (0, 1]; defined as 1 when no
    /// fragments were tested at all.
    pub fn efficiency(&self) -> f64 {
        let t = self.total_tested();
        if t == 0 {
            1.0
        } else {
            self.total_passed() as f64 / t as f64
        }
    }

    /// CSV report: one row per primitive plus an aggregate row.
    pub fn csv(&self) -> String {
        let mut out = String::from("prim,tested,passed,ste\n");
        for (i, (&t, &p)) in self.tested.iter().zip(self.passed.iter()).enumerate() {
            let e = if t == 0 { 1.0 } else { p as f64 / t as f64 };
            out.push_str(&format!("{i},{t},{p},{e:.6}\n"));
        }
        out.push_str(&format!(
            "aggregate,{},{},{:.6}\n",
            self.total_tested(),
            self.total_passed(),
            self.efficiency()
        ));
        out
    }
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn gaussian_window() -> [f64; SSIM_WINDOW * SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW * SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for j in 0..SSIM_WINDOW {
        for i in 0..SSIM_WINDOW {
            let dx = i as f64 - c;
            let dy = j as f64 - c;
            let v = (-(dx * dx + dy * dy) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
            w[j * SSIM_WINDOW + i] = v;
            sum += v;
        }
    }
    for v in w.iter_mut() {
        *v /= sum;
    }
    w
}

fn luma_plane(img: &Image) -> Vec<f64> {
    img.to_srgb_bytes()
        .chunks_exact(3)
        .map(|c| luma601([c[0], c[1], c[2]]))
        .collect()
}

/// SSIM on 8-bit luma with an 11×11 Gaussian window; windows containing
/// masked pixels are excluded from the mean entirely (mask true = pixel
/// has no valid source). Identical inputs give exactly 1.0.
pub fn masked_ssim(a: &Image, b: &Image, mask: Option<&[bool]>) -> Result<f64, MetricsError> {
    if a.width != b.width || a.height != b.height {
        return Err(MetricsError::DimensionMismatch(
            a.width, a.height, b.width, b.height,
        ));
    }
    let (w, h) = (a.width, a.height);
    let la = luma_plane(a);
    let lb = luma_plane(b);
    let win = gaussian_window();
    let half = SSIM_WINDOW / 2;
    let c1 = (SSIM_K1 * 255.0) * (SSIM_K1 * 255.0);
    let c2 = (SSIM_K2 * 255.0) * (SSIM_K2 * 255.0);
    let mut sum = 0.0;
    let mut count = 0u64;
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(MetricsError::EmptyMask);
    }
    for cy in half..h - half {
        'windows: for cx in half..w - half {
            if let Some(m) = mask {
                for j in 0..SSIM_WINDOW {
                    for i in 0..SSIM_WINDOW {
                        if m[(cy - half + j) * w + (cx - half + i)] {
                            continue 'windows;
                        }
                    }
                }
            }
            let mut mu_x = 0.0;
            let mut mu_y = 0.0;
            for j in 0..SSIM_WINDOW {
                for i in 0..SSIM_WINDOW {
                    let k = (cy - half + j) * w + (cx - half + i);
                    let wv = win[j * SSIM_WINDOW + i];
                    mu_x += wv * la[k];
                    mu_y += wv * lb[k];
                }
            }
            let mut sxx = 0.0;
            let mut syy = 0.0;
            let mut sxy = 0.0;
            for j in 0..SSIM_WINDOW {
                for i in 0..SSIM_WINDOW {
                    let k = (cy - half + j) * w + (cx - half + i);
                    let wv = win[j * SSIM_WINDOW + i];
                    let dx = la[k] - mu_x;
                    let dy = lb[k] - mu_y;
                    sxx += wv * dx * dx;
                    syy += wv * dy * dy;
                    sxy += wv * dx * dy;
                }
            }
            let num = (2.0 * mu_x * mu_y + c1) * (2.0 * sxy + c2);
            let den = (mu_x * mu_x + mu_y * mu_y + c1) * (sxx + syy + c2);
            sum += num / den;
            count += 1;
        }
    }
    if count == 0 {
        return Err(MetricsError::EmptyMask);
    }
    Ok(sum / count as f64)
}

/// Crop of `size`×`size` centered on the fovea pixel, clipped at borders.
pub fn crop_centered(img: &Image, center: (f64, f64), size: usize) -> Image {
    let x0 = ((center.0 - size as f64 / 2.0).round() as i64)
        .clamp(0, (img.width.saturating_sub(size)) as i64) as usize;
    let y0 = ((center.1 - size as f64 / 2.0).round() as i64)
        .clamp(0, (img.height.saturating_sub(size)) as i64) as usize;
    let cw = size.min(img.width);
    let ch = size.min(img.height);
    let mut out = Image::new(cw, ch);
    for j in 0..ch {
        for i in 0..cw {
            out.set(i, j, img.get(x0 + i, y0 + j));
        }
    }
    out
}

/// masked_ssim on the 64×64 crop centered at the fovea pixel.
pub fn foveal_ssim(a: &Image, b: &Image, fovea_px: (f64, f64)) -> Result<f64, MetricsError> {
    if a.width != b.width || a.height != b.height {
        return Err(MetricsError::DimensionMismatch(
            a.width, a.height, b.width, b.height,
        ));
    }
    let ca = crop_centered(a, fovea_px, 64);
    let cb = crop_centered(b, fovea_px, 64);
    masked_ssim(&ca, &cb, None)
}

/// Brightest pixel (by 8-bit luma) within an inclusive column range; ties
/// resolve to the first in row-major order.
pub fn peak_pixel(img: &Image, col_range: (usize, usize)) -> (usize, usize) {
    let bytes = img.to_srgb_bytes();
    let mut best = (0usize, 0usize);
    let mut best_l = f64::NEG_INFINITY;
    for j in 0..img.height {
        for i in col_range.0..=col_range.1.min(img.width - 1) {
            let k = (j * img.width + i) * 3;
            let l = luma601([bytes[k], bytes[k + 1], bytes[k + 2]]);
            if l > best_l {
                best_l = l;
                best = (i, j);
            }
        }
    }
    best
}

struct WarpNode {
    valid: bool,
    /// Target position in continuous pixel coordinates.
    target: Vec2,
    depth: f64,
    color: [f32; 3],
}

/// Grid-warping baseline: re-projects a common-mode (t = 0) render to the
/// rolling image using the relative camera motion `motion` (camera-space
/// transform from t = 0 to t; identity at start). Triangles of the
/// pixel-sized grid whose longest projected edge exceeds
/// `stretch_threshold` source pixels are culled entirely; unfilled pixels
/// are set in the returned disocclusion mask.
pub fn warp_rolling(
    color: &Image,
    gbuf: &GBuffer,
    cam: &Camera,
    motion: &TimeVaryingTransform,
    scan: &ScanAxis,
    stretch_threshold: f64,
) -> (Image, Vec<bool>) {
    let (w, h) = (color.width, color.height);
    assert_eq!((gbuf.width, gbuf.height), (w, h));
    if motion.start == Mat4::IDENTITY && motion.end == Mat4::IDENTITY {
        // no camera motion: the warp is the identity by definition
        return (color.clone(), vec![false; w * h]);
    }
    let proj = cam.projection();
    let (gw, gh) = (w + 2, h + 2);
    let mut nodes = Vec::with_capacity(gw * gh);
    for gj in 0..gh {
        for gi in 0..gw {
            let pi = gi as i64 - 1;
            let pj = gj as i64 - 1;
            let si = pi.clamp(0, w as i64 - 1) as usize;
            let sj = pj.clamp(0, h as i64 - 1) as usize;
            let src_px = vec2(pi as f64 + 0.5, pj as f64 + 0.5);
            let depth = gbuf.depth[sj * w + si];
            let col = color.get(si, sj);
            if !depth.is_finite() {
                // background: carried along unmoved at a huge depth so
                // foreground always wins and holes only open where
                // geometry actually disoccludes
                nodes.push(WarpNode {
                    valid: true,
                    target: src_px,
                    depth: 1e30,
                    color: col,
                });
                continue;
            }
            let ndc = pixel_to_ndc(src_px, w, h);
            let ray = cam.pixel_ray(ndc);
            let p0 = ray.direction * (depth / -ray.direction.z);
            // one fixed-point refinement of the rolling target time
            let mut t = scan.time_at_ndc(ndc).clamp(0.0, 1.0);
            let mut node = WarpNode {
                valid: false,
                target: src_px,
                depth,
                color: col,
            };
            for step in 0..2 {
                let p = motion.at(t).mul_point(p0).xyz();
                let clip = proj.mul_point(p);
                if clip.w <= 0.0 {
                    node.valid = false;
                    break;
                }
                let out_ndc = vec2(clip.x / clip.w, clip.y / clip.w);
                if step == 0 {
                    t = scan.time_at_ndc(out_ndc).clamp(0.0, 1.0);
                } else {
                    node.valid = true;
                    node.target = crate::image::ndc_to_pixel(out_ndc, w, h);
                    node.depth = -p.z;
                }
            }
            nodes.push(node);
        }
    }

    let mut out = Image::fill(w, h, [0.5, 0.5, 0.5]);
    let mut zbuf = vec![f64::INFINITY; w * h];
    let mut filled = vec![false; w * h];
    let mut splat = |a: &WarpNode, b: &WarpNode, c: &WarpNode| {
        if !(a.valid && b.valid && c.valid) {
            return;
        }
        let longest = (a.target - b.target)
            .length()
            .max((b.target - c.target).length())
            .max((c.target - a.target).length());
        if longest > stretch_threshold {
            return;
        }
        let (x0, x1) = (
            a.target.x.min(b.target.x).min(c.target.x),
            a.target.x.max(b.target.x).max(c.target.x),
        );
        let (y0, y1) = (
            a.target.y.min(b.target.y).min(c.target.y),
            a.target.y.max(b.target.y).max(c.target.y),
        );
        if x1 < 0.0 || y1 < 0.0 || x0 >= w as f64 || y0 >= h as f64 {
            return;
        }
        let area = (b.target - a.target).cross(c.target - a.target);
        if area.abs() < 1e-12 {
            return;
        }
        let i0 = x0.floor().max(0.0) as usize;
        let i1 = (x1.ceil() as usize).min(w - 1);
        let j0 = y0.floor().max(0.0) as usize;
        let j1 = (y1.ceil() as usize).min(h - 1);
        for j in j0..=j1 {
            for i in i0..=i1 {
                let p = vec2(i as f64 + 0.5, j as f64 + 0.5);
                let wa = (b.target - p).cross(c.target - p) / area;
                let wb = (c.target - p).cross(a.target - p) / area;
                let wc = (a.target - p).cross(b.target - p) / area;
                if wa < 0.0 || wb < 0.0 || wc < 0.0 {
                    continue;
                }
                let depth = wa * a.depth + wb * b.depth + wc * c.depth;
                let idx = j * w + i;
                if depth < zbuf[idx] {
                    zbuf[idx] = depth;
                    filled[idx] = true;
                    let mut px = [0.0f32; 3];
                    for cch in 0..3 {
                        px[cch] = (wa * a.color[cch] as f64
                            + wb * b.color[cch] as f64
                            + wc * c.color[cch] as f64) as f32;
                    }
                    out.data[idx] = px;
                }
            }
        }
    };
    for gj in 0..gh - 1 {
        for gi in 0..gw - 1 {
            let n00 = &nodes[gj * gw + gi];
            let n10 = &nodes[gj * gw + gi + 1];
            let n01 = &nodes[(gj + 1) * gw + gi];
            let n11 = &nodes[(gj + 1) * gw + gi + 1];
            splat(n00, n10, n11);
            splat(n00, n11, n01);
        }
    }
    let mask: Vec<bool> = filled.iter().map(|&f| !f).collect();
    (out, mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::BoundMethod;
    use crate::math::vec3;
    use crate::raster::{rasterize, shade, Light, Material, Mode, RenderConfig};

    fn natural(w: usize, h: usize) -> Image {
        let mut img = Image::new(w, h);
        for j in 0..h {
            for i in 0..w {
                let x = i as f32 / w as f32;
                let y = j as f32 / h as f32;
                let v = 0.5 + 0.35 * (x * 11.0).sin() * (y * 7.0).cos();
                img.set(i, j, [v, 0.8 * v + 0.1, 1.0 - v]);
            }
        }
        img
    }

    #[test]
    fn ssim_identity_is_exactly_one() {
        let img = natural(48, 48);
        assert_eq!(masked_ssim(&img, &img, None).unwrap(), 1.0);
        let mask = vec![false; 48 * 48];
        assert_eq!(masked_ssim(&img, &img, Some(&mask)).unwrap(), 1.0);
    }

    #[test]
    fn ssim_symmetric_and_bounded() {
        let a = natural(48, 48);
        let mut b = natural(48, 48);
        for px in b.data.iter_mut() {
            px[0] = (px[0] + 0.15).min(1.0);
        }
        let ab = masked_ssim(&a, &b, None).unwrap();
        let ba = masked_ssim(&b, &a, None).unwrap();
        assert!((ab - ba).abs() < 1e-9);
        assert!(ab < 1.0 && ab > -1.0);
    }

    #[test]
    fn ssim_inverted_image_low() {
        let a = natural(64, 64);
        let mut b = a.clone();
        for px in b.data.iter_mut() {
            for c in px.iter_mut() {
                *c = 1.0 - *c;
            }
        }
        let s = masked_ssim(&a, &b, None).unwrap();
        assert!(s < 0.2, "inverted ssim {s}");
    }

    #[test]
    fn ssim_errors() {
        let a = natural(32, 32);
        let b = natural(16, 32);
        assert!(matches!(
            masked_ssim(&a, &b, None),
            Err(MetricsError::DimensionMismatch(..))
        ));
        let mask = vec![true; 32 * 32];
        assert_eq!(
            masked_ssim(&a, &a, Some(&mask)),
            Err(MetricsError::EmptyMask)
        );
    }

    #[test]
    fn ssim_mask_excludes_damage() {
        // corrupt a corner region; masking it should restore ssim to 1
        let a = natural(64, 64);
        let mut b = a.clone();
        let mut mask = vec![false; 64 * 64];
        for j in 0..12 {
            for i in 0..12 {
                b.set(i, j, [1.0, 0.0, 1.0]);
                mask[j * 64 + i] = true;
            }
        }
        let damaged = masked_ssim(&a, &b, None).unwrap();
        let masked = masked_ssim(&a, &b, Some(&mask)).unwrap();
        assert!(damaged < 1.0);
        assert_eq!(masked, 1.0);
    }

    #[test]
    fn foveal_crop_clipped_at_border() {
        let a = natural(96, 96);
        // fovea near the corner: crop must clip, not panic
        let s = foveal_ssim(&a, &a, (5.0, 5.0)).unwrap();
        assert_eq!(s, 1.0);
        let c = crop_centered(&a, (48.0, 48.0), 64);
        assert_eq!((c.width, c.height), (64, 64));
    }

    #[test]
    fn ste_csv_shape() {
        let mut s = SteStats::new(2);
        s.tested = vec![100, 50];
        s.passed = vec![50, 50];
        let csv = s.csv();
        let lines: Vec<&str> = csv.trim().lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[3].starts_with("aggregate,150,100,"));
        assert!((s.efficiency() - 100.0 / 150.0).abs() < 1e-12);
    }

    fn simple_scene() -> (Vec<crate::geometry::SpaceTimeTriangle>, Camera) {
        use crate::geometry::SpaceTimeTriangle;
        let mut tris = Vec::new();
        // foreground card
        let mut t0 = SpaceTimeTriangle::static_tri([
            vec3(-0.5, -0.5, -2.0),
            vec3(0.5, -0.5, -2.0),
            vec3(0.5, 0.5, -2.0),
        ]);
        let mut t1 = SpaceTimeTriangle::static_tri([
            vec3(-0.5, -0.5, -2.0),
            vec3(0.5, 0.5, -2.0),
            vec3(-0.5, 0.5, -2.0),
        ]);
        // backdrop
        let mut t2 = SpaceTimeTriangle::static_tri([
            vec3(-6.0, -6.0, -6.0),
            vec3(6.0, -6.0, -6.0),
            vec3(6.0, 6.0, -6.0),
        ]);
        let mut t3 = SpaceTimeTriangle::static_tri([
            vec3(-6.0, -6.0, -6.0),
            vec3(6.0, 6.0, -6.0),
            vec3(-6.0, 6.0, -6.0),
        ]);
        t0.prim = 0;
        t1.prim = 1;
        t2.prim = 2;
        t3.prim = 3;
        t2.material = 1;
        t3.material = 1;
        tris.extend([t0, t1, t2, t3]);
        (tris, Camera::from_vfov(70.0, 1.0, 0.1))
    }

    fn shade_scene(
        tris: &[crate::geometry::SpaceTimeTriangle],
        cam: &Camera,
        w: usize,
    ) -> (Image, GBuffer) {
        let cfg = RenderConfig {
            mode: Mode::Common,
            bound: BoundMethod::Hull,
            width: w,
            height: w,
            guard_px: 1.0,
            foveation: None,
            scan: None,
        };
        let (gbuf, _) = rasterize(&cfg, cam, tris).unwrap();
        let materials = [
            Material {
                albedo: [0.8, 0.3, 0.2],
                specular: 0.3,
                shininess: 16.0,
            },
            Material {
                albedo: [0.2, 0.4, 0.8],
                specular: 0.0,
                shininess: 1.0,
            },
        ];
        let light = Light {
            position: [vec3(2.0, 3.0, 0.0); 2],
            color: [1.0; 3],
            ambient: [0.15; 3],
        };
        let img = shade(&gbuf, &materials, &light, [0.05, 0.05, 0.05]);
        (img, gbuf)
    }

    #[test]
    fn warp_identity_is_identity() {
        let (tris, cam) = simple_scene();
        let (img, gbuf) = shade_scene(&tris, &cam, 64);
        let motion = TimeVaryingTransform::constant(Mat4::IDENTITY);
        let scan = ScanAxis { d: vec2(1.0, 0.0) };
        let (warped, mask) = warp_rolling(&img, &gbuf, &cam, &motion, &scan, 3.0);
        assert!(mask.iter().all(|&m| !m));
        assert_eq!(warped.to_srgb_bytes(), img.to_srgb_bytes());
    }

    #[test]
    fn warp_rotation_opens_disocclusions() {
        let (tris, cam) = simple_scene();
        let (img, gbuf) = shade_scene(&tris, &cam, 96);
        // camera yaw during scan-out: foreground parallax reveals backdrop
        let motion = TimeVaryingTransform {
            start: Mat4::IDENTITY,
            end: Mat4::rotation_y(0.12),
        };
        let scan = ScanAxis { d: vec2(1.0, 0.0) };
        let (warped, mask) = warp_rolling(&img, &gbuf, &cam, &motion, &scan, 3.0);
        assert!(mask.iter().any(|&m| m), "expected disocclusion holes");
        // most pixels still land
        let holes = mask.iter().filter(|&&m| m).count();
        assert!(holes < 96 * 96 / 4, "too many holes: {holes}");
        assert_eq!(warped.width, 96);
    }

    #[test]
    fn peak_pixel_finds_brightest() {
        let mut img = Image::new(32, 32);
        img.set(20, 7, [1.0, 1.0, 1.0]);
        img.set(5, 9, [0.5, 0.5, 0.5]);
        assert_eq!(peak_pixel(&img, (0, 31)), (20, 7));
        assert_eq!(peak_pixel(&img, (0, 10)), (5, 9));
    }
}
