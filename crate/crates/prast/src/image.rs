//! Float RGB images, binary PPM/PGM/PFM io and the pixel-grid coordinate
//! conventions shared by every stage.
//!
//! Pixel (i, j) has its center at NDC ((i+0.5)/W*2-1, 1-(j+0.5)/H*2), i.e.
//! row 0 is the top of the image and +y is up in NDC. "Unit" coordinates
//! (used by the rolling function) run in [0,1]^2 with the origin at the
//! top-left pixel corner.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::math::{vec2, Vec2};

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("malformed {format} file {path}: {reason}")]
    Malformed {
        format: &'static str,
        path: String,
        reason: String,
    },
}

/// Linear-light RGB image, f32 per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f32; 3]>,
}

impl Image {
    pub fn new(width: usize, height: usize) -> Self {
        Image {
            width,
            height,
            data: vec![[0.0; 3]; width * height],
        }
    }

    pub fn fill(width: usize, height: usize, c: [f32; 3]) -> Self {
        Image {
            width,
            height,
            data: vec![c; width * height],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> [f32; 3] {
        self.data[j * self.width + i]
    }

    pub fn set(&mut self, i: usize, j: usize, c: [f32; 3]) {
        self.data[j * self.width + i] = c;
    }

    /// Quantize to 8-bit sRGB bytes (row-major, top-to-bottom).
    pub fn to_srgb_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.data.len() * 3);
        for px in &self.data {
            for &c in px {
                out.push(srgb_encode_u8(c));
            }
        }
        out
    }

    pub fn from_srgb_bytes(width: usize, height: usize, bytes: &[u8]) -> Self {
        let data = bytes
            .chunks_exact(3)
            .map(|c| {
                [
                    srgb_decode(c[0]),
                    srgb_decode(c[1]),
                    srgb_decode(c[2]),
                ]
            })
            .collect();
        Image {
            width,
            height,
            data,
        }
    }
}

/// sRGB transfer function applied to a linear value in [0,1], quantized
/// with round-half-away-from-zero.
pub fn srgb_encode_u8(linear: f32) -> u8 {
    let v = linear.clamp(0.0, 1.0) as f64;
    let s = if v <= 0.0031308 {
        12.92 * v
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    };
    (s * 255.0).round() as u8
}

pub fn srgb_decode(byte: u8) -> f32 {
    let s = byte as f64 / 255.0;
    let v = if s <= 0.04045 {
        s / 12.92
    } else {
        ((s + 0.055) / 1.055).powf(2.4)
    };
    v as f32
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ImageError> {
    let io_err = |source| ImageError::Io {
        path: path.display().to_string(),
        source,
    };
    let tmp = path.with_extension("tmp-write");
    let mut f = fs::File::create(&tmp).map_err(io_err)?;
    f.write_all(bytes).map_err(io_err)?;
    f.sync_all().map_err(io_err)?;
    drop(f);
    fs::rename(&tmp, path).map_err(io_err)
}

/// Write a binary PPM (P6, maxval 255), sRGB-encoded.
pub fn write_ppm(img: &Image, path: &Path) -> Result<(), ImageError> {
    let mut bytes = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    bytes.extend_from_slice(&img.to_srgb_bytes());
    write_atomic(path, &bytes)
}

pub fn read_ppm(path: &Path) -> Result<Image, ImageError> {
    let bytes = fs::read(path).map_err(|source| ImageError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let (w, h, payload) = parse_pnm_header(&bytes, b"P6", 3, "PPM", path)?;
    Ok(Image::from_srgb_bytes(w, h, payload))
}

/// Write a binary PGM (P5) mask; 255 marks set pixels.
pub fn write_pgm_mask(mask: &[bool], width: usize, height: usize, path: &Path) -> Result<(), ImageError> {
    let mut bytes = format!("P5\n{width} {height}\n255\n").into_bytes();
    bytes.extend(mask.iter().map(|&m| if m { 255u8 } else { 0 }));
    write_atomic(path, &bytes)
}

pub fn read_pgm_mask(path: &Path) -> Result<(Vec<bool>, usize, usize), ImageError> {
    let bytes = fs::read(path).map_err(|source| ImageError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let (w, h, payload) = parse_pnm_header(&bytes, b"P5", 1, "PGM", path)?;
    Ok((payload.iter().map(|&b| b >= 128).collect(), w, h))
}

/// Write a grayscale PFM (Pf) float depth dump, little-endian.
pub fn write_pfm_depth(depth: &[f64], width: usize, height: usize, path: &Path) -> Result<(), ImageError> {
    let mut bytes = format!("Pf\n{width} {height}\n-1.0\n").into_bytes();
    // PFM stores rows bottom-to-top
    for j in (0..height).rev() {
        for i in 0..width {
            bytes.extend_from_slice(&(depth[j * width + i] as f32).to_le_bytes());
        }
    }
    write_atomic(path, &bytes)
}

fn parse_pnm_header<'a>(
    bytes: &'a [u8],
    magic: &[u8],
    channels: usize,
    format: &'static str,
    path: &Path,
) -> Result<(usize, usize, &'a [u8]), ImageError> {
    let mal = |reason: &str| ImageError::Malformed {
        format,
        path: path.display().to_string(),
        reason: reason.to_string(),
    };
    if !bytes.starts_with(magic) {
        return Err(mal("bad magic"));
    }
    let mut pos = magic.len();
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // skip whitespace and comments
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| mal("bad header field"))?;
    }
    let [w, h, maxval] = fields;
    if maxval != 255 {
        return Err(mal("maxval must be 255"));
    }
    pos += 1; // single whitespace byte after maxval
    let need = w * h * channels;
    if bytes.len() < pos + need {
        return Err(mal("truncated payload"));
    }
    Ok((w, h, &bytes[pos..pos + need]))
}

/// NDC position of the center of pixel (i, j).
pub fn pixel_center_ndc(i: usize, j: usize, width: usize, height: usize) -> Vec2 {
    vec2(
        (i as f64 + 0.5) / width as f64 * 2.0 - 1.0,
        1.0 - (j as f64 + 0.5) / height as f64 * 2.0,
    )
}

/// NDC -> unit [0,1]^2 coordinates (origin top-left), used by the rolling
/// function.
pub fn ndc_to_unit(ndc: Vec2) -> Vec2 {
    vec2((ndc.x + 1.0) * 0.5, (1.0 - ndc.y) * 0.5)
}

/// NDC -> continuous pixel coordinates (pixel centers at i+0.5).
pub fn ndc_to_pixel(ndc: Vec2, width: usize, height: usize) -> Vec2 {
    vec2(
        (ndc.x + 1.0) * 0.5 * width as f64,
        (1.0 - ndc.y) * 0.5 * height as f64,
    )
}

pub fn pixel_to_ndc(px: Vec2, width: usize, height: usize) -> Vec2 {
    vec2(
        px.x / width as f64 * 2.0 - 1.0,
        1.0 - px.y / height as f64 * 2.0,
    )
}

/// Rec.601 luma of an 8-bit sRGB pixel, in [0, 255].
pub fn luma601(rgb: [u8; 3]) -> f64 {
    0.299 * rgb[0] as f64 + 0.587 * rgb[1] as f64 + 0.114 * rgb[2] as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn ppm_one_white_pixel_exact_bytes() {
        let img = Image::fill(1, 1, [1.0, 1.0, 1.0]);
        let dir = tempdir().unwrap();
        let p = dir.path().join("w.ppm");
        write_ppm(&img, &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(bytes, b"P6\n1 1\n255\n\xff\xff\xff");
    }

    #[test]
    fn ppm_roundtrip() {
        let mut img = Image::new(3, 2);
        for (k, px) in img.data.iter_mut().enumerate() {
            *px = [k as f32 / 6.0, 0.5, 1.0 - k as f32 / 6.0];
        }
        let dir = tempdir().unwrap();
        let p = dir.path().join("rt.ppm");
        write_ppm(&img, &p).unwrap();
        let back = read_ppm(&p).unwrap();
        // 8-bit roundtrip: re-encoding must be byte-identical
        assert_eq!(back.to_srgb_bytes(), img.to_srgb_bytes());
    }

    #[test]
    fn srgb_hand_computed_table() {
        // expected bytes computed by hand from the sRGB transfer function
        // s = 12.92 v (v <= 0.0031308), else 1.055 v^(1/2.4) - 0.055
        let table: [(f32, u8); 10] = [
            (0.0, 0),
            (0.001, 3),
            (0.0031308, 10),
            (0.01, 25),
            (0.05, 63),
            (0.1, 89),
            (0.2141, 128),
            (0.5, 188),
            (0.735357, 223),
            (1.0, 255),
        ];
        for (v, expect) in table {
            assert_eq!(srgb_encode_u8(v), expect, "linear value {v}");
        }
    }

    #[test]
    fn pgm_mask_roundtrip() {
        let mask = vec![true, false, false, true, true, false];
        let dir = tempdir().unwrap();
        let p = dir.path().join("m.pgm");
        write_pgm_mask(&mask, 3, 2, &p).unwrap();
        let (back, w, h) = read_pgm_mask(&p).unwrap();
        assert_eq!((w, h), (3, 2));
        assert_eq!(back, mask);
    }

    #[test]
    fn pixel_grid_conventions() {
        // 2x2 image: pixel (0,0) center at (-0.5, 0.5) in NDC (top-left)
        assert_eq!(pixel_center_ndc(0, 0, 2, 2), vec2(-0.5, 0.5));
        assert_eq!(pixel_center_ndc(1, 1, 2, 2), vec2(0.5, -0.5));
        let ndc = pixel_center_ndc(3, 5, 8, 8);
        let unit = ndc_to_unit(ndc);
        assert!((unit.x - 3.5 / 8.0).abs() < 1e-12);
        assert!((unit.y - 5.5 / 8.0).abs() < 1e-12);
        let px = ndc_to_pixel(ndc, 8, 8);
        assert!((px.x - 3.5).abs() < 1e-12 && (px.y - 5.5).abs() < 1e-12);
        let back = pixel_to_ndc(px, 8, 8);
        assert!((back - ndc).length() < 1e-12);
    }
}
