//! Scene ingestion: a JSON manifest referencing Wavefront OBJ meshes, with
//! endpoint-transform animation (start/end rigid transform per object,
//! start/end camera pose, start/end light position).
//!
//! Preparation folds all motion into camera space: every vertex is
//! transformed by view·model at the frame start and again at the frame
//! end, producing the camera-space endpoint triangles the rasterizer
//! consumes under a fixed projection.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::bounds::ScanAxis;
use crate::foveation::{compose_lens, FoveationError, FoveationMap, LensModel, RadialCurve};
use crate::geometry::{Camera, SpaceTimeTriangle, TimeVaryingTransform};
use crate::math::{vec2, vec3, Mat4, Vec3};
use crate::raster::{Light, Material};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("missing file: {0}")]
    MissingFile(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}: {reason}")]
    Parse { path: String, reason: String },
    #[error("{path}:{line}: non-finite vertex")]
    NonFiniteVertex { path: String, line: usize },
    #[error("{path}:{line}: {reason}")]
    ObjParse {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("unknown material '{0}'")]
    MissingMaterial(String),
    #[error(transparent)]
    Foveation(#[from] FoveationError),
}

fn d_zero() -> [f64; 3] {
    [0.0; 3]
}
fn d_one() -> [f64; 3] {
    [1.0; 3]
}
fn d_up() -> [f64; 3] {
    [0.0, 1.0, 0.0]
}
fn d_quat() -> [f64; 4] {
    [0.0, 0.0, 0.0, 1.0]
}
fn d_near() -> f64 {
    0.1
}
fn d_clear() -> [f32; 3] {
    [0.0; 3]
}
fn d_white() -> [f64; 3] {
    [1.0; 3]
}
fn d_ambient() -> [f64; 3] {
    [0.1; 3]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraDesc {
    pub eye_start: [f64; 3],
    #[serde(default)]
    pub eye_end: Option<[f64; 3]>,
    pub target_start: [f64; 3],
    #[serde(default)]
    pub target_end: Option<[f64; 3]>,
    #[serde(default = "d_up")]
    pub up: [f64; 3],
    pub vfov_deg: f64,
    #[serde(default = "d_near")]
    pub near: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformDesc {
    #[serde(default = "d_zero")]
    pub translation: [f64; 3],
    #[serde(default = "d_quat")]
    pub rotation_quat: [f64; 4],
    #[serde(default = "d_one")]
    pub scale: [f64; 3],
}

impl Default for TransformDesc {
    fn default() -> Self {
        TransformDesc {
            translation: d_zero(),
            rotation_quat: d_quat(),
            scale: d_one(),
        }
    }
}

impl TransformDesc {
    pub fn matrix(&self) -> Mat4 {
        let t = Mat4::translation(vec3(
            self.translation[0],
            self.translation[1],
            self.translation[2],
        ));
        let r = Mat4::from_quat(self.rotation_quat);
        let s = Mat4::scale(vec3(self.scale[0], self.scale[1], self.scale[2]));
        t.mul_mat(&r).mul_mat(&s)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectDesc {
    pub mesh: String,
    pub material: String,
    #[serde(default)]
    pub transform_start: TransformDesc,
    #[serde(default)]
    pub transform_end: Option<TransformDesc>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialDesc {
    pub albedo: [f64; 3],
    #[serde(default)]
    pub specular: f64,
    #[serde(default = "d_one_f")]
    pub shininess: f64,
}

fn d_one_f() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightDesc {
    pub position_start: [f64; 3],
    #[serde(default)]
    pub position_end: Option<[f64; 3]>,
    #[serde(default = "d_white")]
    pub color: [f64; 3],
    #[serde(default = "d_ambient")]
    pub ambient: [f64; 3],
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoveationDesc {
    pub fovea: [f64; 2],
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub p_table: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LensDesc {
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanDesc {
    pub d: [f64; 2],
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub camera: CameraDesc,
    pub objects: Vec<ObjectDesc>,
    pub materials: BTreeMap<String, MaterialDesc>,
    pub light: LightDesc,
    #[serde(default = "d_clear")]
    pub clear_color: [f32; 3],
    #[serde(default)]
    pub foveation: Option<FoveationDesc>,
    #[serde(default)]
    pub lens: Option<LensDesc>,
    #[serde(default)]
    pub scan: Option<ScanDesc>,
    /// Directory the scene was loaded from; mesh paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Parse the scene JSON; mesh files are resolved lazily by `prepare`.
pub fn load_scene(path: &Path) -> Result<SceneFile, SceneError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            SceneError::MissingFile(path.display().to_string())
        } else {
            SceneError::Io {
                path: path.display().to_string(),
                source: e,
            }
        }
    })?;
    let mut scene: SceneFile = serde_json::from_str(&text).map_err(|e| SceneError::Parse {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    scene.base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    Ok(scene)
}

struct ObjMesh {
    /// (positions, normals, material override) per triangle.
    tris: Vec<([Vec3; 3], [Vec3; 3], Option<String>)>,
}

fn parse_obj(path: &Path) -> Result<ObjMesh, SceneError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            SceneError::MissingFile(path.display().to_string())
        } else {
            SceneError::Io {
                path: path.display().to_string(),
                source: e,
            }
        }
    })?;
    let pstr = path.display().to_string();
    let mut positions: Vec<Vec3> = Vec::new();
    let mut normals: Vec<Vec3> = Vec::new();
    let mut tris = Vec::new();
    let mut current_mtl: Option<String> = None;
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lno = ln + 1;
        let err = |reason: &str| SceneError::ObjParse {
            path: pstr.clone(),
            line: lno,
            reason: reason.to_string(),
        };
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        match it.next().unwrap() {
            "v" | "vn" => {
                let kind = &line[..2.min(line.len())];
                let mut c = [0.0f64; 3];
                for v in c.iter_mut() {
                    *v = it
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| err("expected three numeric components"))?;
                }
                let p = vec3(c[0], c[1], c[2]);
                if !p.is_finite() {
                    return Err(SceneError::NonFiniteVertex {
                        path: pstr.clone(),
                        line: lno,
                    });
                }
                if kind.starts_with("vn") {
                    normals.push(p);
                } else {
                    positions.push(p);
                }
            }
            "usemtl" => {
                current_mtl = Some(
                    it.next()
                        .ok_or_else(|| err("usemtl needs a name"))?
                        .to_string(),
                );
            }
            "f" => {
                let mut vi: Vec<(usize, Option<usize>)> = Vec::new();
                for tok in it {
                    let mut parts = tok.split('/');
                    let p: usize = parts
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| err("bad face index"))?;
                    let _vt = parts.next(); // texture index ignored
                    let n: Option<usize> = parts.next().and_then(|s| s.parse().ok());
                    if p == 0 || p > positions.len() {
                        return Err(err("position index out of range"));
                    }
                    if let Some(n) = n {
                        if n == 0 || n > normals.len() {
                            return Err(err("normal index out of range"));
                        }
                    }
                    vi.push((p - 1, n.map(|n| n - 1)));
                }
                if vi.len() < 3 {
                    return Err(err("face needs at least 3 vertices"));
                }
                for k in 1..vi.len() - 1 {
                    let ids = [vi[0], vi[k], vi[k + 1]];
                    let pos = [
                        positions[ids[0].0],
                        positions[ids[1].0],
                        positions[ids[2].0],
                    ];
                    let face_n = (pos[1] - pos[0]).cross(pos[2] - pos[0]).normalized();
                    let nrm = [
                        ids[0].1.map_or(face_n, |n| normals[n]),
                        ids[1].1.map_or(face_n, |n| normals[n]),
                        ids[2].1.map_or(face_n, |n| normals[n]),
                    ];
                    tris.push((pos, nrm, current_mtl.clone()));
                }
            }
            // groups, objects, smoothing, mtllib: ignored
            "g" | "o" | "s" | "mtllib" | "vt" => {}
            other => {
                return Err(err(&format!("unknown directive '{other}'")));
            }
        }
    }
    Ok(ObjMesh { tris })
}

/// Fully prepared render inputs, everything in camera space.
#[derive(Debug, Clone)]
pub struct PreparedScene {
    pub tris: Vec<SpaceTimeTriangle>,
    pub camera: Camera,
    /// World-to-camera view matrices at the frame endpoints.
    pub view: TimeVaryingTransform,
    pub materials: Vec<Material>,
    pub light: Light,
    pub clear: [f32; 3],
    pub foveation: Option<FoveationMap>,
    pub scan: Option<ScanAxis>,
}

impl PreparedScene {
    /// Relative camera motion from the frame start: identity at t=0.
    /// Exactly the identity transform when the camera is static, so the
    /// warp baseline's identity fast path applies.
    pub fn relative_view(&self) -> TimeVaryingTransform {
        if self.view.start == self.view.end {
            return TimeVaryingTransform::constant(Mat4::IDENTITY);
        }
        let inv = self.view.start.inverse().unwrap_or(Mat4::IDENTITY);
        TimeVaryingTransform {
            start: Mat4::IDENTITY,
            end: self.view.end.mul_mat(&inv),
        }
    }
}

fn v3(a: [f64; 3]) -> Vec3 {
    vec3(a[0], a[1], a[2])
}

/// Inverse-transpose direction transform for normals.
fn normal_dir(m_inv: &Mat4, n: Vec3) -> Vec3 {
    // (M^-T n)_i = sum_j inv[i][j]^T... with column-major m[col][row],
    // transpose swaps the roles: out[r] = sum_c inv.m[r][c]... careful:
    // inv.m[c][r] is entry (row r, col c) of inv; transpose entry (r, c)
    // of inv^T is inv (c, r) = inv.m[r][c].
    let mut out = [0.0f64; 3];
    let nv = [n.x, n.y, n.z];
    for (r, o) in out.iter_mut().enumerate() {
        for (c, &x) in nv.iter().enumerate() {
            *o += m_inv.m[r][c] * x;
        }
    }
    vec3(out[0], out[1], out[2]).normalized()
}

/// Resolve meshes and fold camera+model motion into camera-space endpoint
/// triangles under a fixed projection with the given aspect ratio.
pub fn prepare(scene: &SceneFile, aspect: f64) -> Result<PreparedScene, SceneError> {
    let camera = Camera::from_vfov(scene.camera.vfov_deg, aspect, scene.camera.near);
    let eye_s = v3(scene.camera.eye_start);
    let eye_e = scene.camera.eye_end.map_or(eye_s, v3);
    let tgt_s = v3(scene.camera.target_start);
    let tgt_e = scene.camera.target_end.map_or(tgt_s, v3);
    let up = v3(scene.camera.up);
    let view = if eye_s == eye_e && tgt_s == tgt_e {
        TimeVaryingTransform::constant(Mat4::look_at(eye_s, tgt_s, up))
    } else {
        TimeVaryingTransform {
            start: Mat4::look_at(eye_s, tgt_s, up),
            end: Mat4::look_at(eye_e, tgt_e, up),
        }
    };

    let mat_ids: BTreeMap<&String, u32> = scene
        .materials
        .keys()
        .enumerate()
        .map(|(i, k)| (k, i as u32))
        .collect();
    let materials: Vec<Material> = scene
        .materials
        .values()
        .map(|m| Material {
            albedo: m.albedo,
            specular: m.specular,
            shininess: m.shininess,
        })
        .collect();

    let mut tris = Vec::new();
    for obj in &scene.objects {
        let mesh = parse_obj(&scene.base_dir.join(&obj.mesh))?;
        let m_s = obj.transform_start.matrix();
        let m_e = obj
            .transform_end
            .as_ref()
            .map_or(m_s, |t| t.matrix());
        let vm_s = view.start.mul_mat(&m_s);
        let vm_e = view.end.mul_mat(&m_e);
        let inv_s = vm_s.inverse().unwrap_or(Mat4::IDENTITY);
        let inv_e = vm_e.inverse().unwrap_or(Mat4::IDENTITY);
        let default_mtl = &obj.material;
        for (pos, nrm, mtl) in &mesh.tris {
            let name = mtl.as_ref().unwrap_or(default_mtl);
            let material = *mat_ids
                .get(name)
                .ok_or_else(|| SceneError::MissingMaterial(name.clone()))?;
            let prim = tris.len() as u32;
            let map_pos = |m: &Mat4, p: Vec3| m.mul_point(p).xyz();
            tris.push(SpaceTimeTriangle {
                pos: [
                    [
                        map_pos(&vm_s, pos[0]),
                        map_pos(&vm_s, pos[1]),
                        map_pos(&vm_s, pos[2]),
                    ],
                    [
                        map_pos(&vm_e, pos[0]),
                        map_pos(&vm_e, pos[1]),
                        map_pos(&vm_e, pos[2]),
                    ],
                ],
                normal: [
                    [
                        normal_dir(&inv_s, nrm[0]),
                        normal_dir(&inv_s, nrm[1]),
                        normal_dir(&inv_s, nrm[2]),
                    ],
                    [
                        normal_dir(&inv_e, nrm[0]),
                        normal_dir(&inv_e, nrm[1]),
                        normal_dir(&inv_e, nrm[2]),
                    ],
                ],
                material,
                prim,
            });
        }
    }

    let lp_s = view.start.mul_point(v3(scene.light.position_start)).xyz();
    let lp_e = view
        .end
        .mul_point(v3(scene.light.position_end.unwrap_or(scene.light.position_start)))
        .xyz();
    let light = Light {
        position: [lp_s, lp_e],
        color: scene.light.color,
        ambient: scene.light.ambient,
    };

    let mut foveation = match &scene.foveation {
        None => None,
        Some(f) => {
            let fovea = vec2(f.fovea[0], f.fovea[1]);
            let curve = match (&f.alpha, &f.p_table) {
                (Some(a), None) => RadialCurve::PowerNormalized { alpha: *a },
                (None, Some(t)) => RadialCurve::Table { values: t.clone() },
                _ => {
                    return Err(SceneError::Parse {
                        path: "<scene>".into(),
                        reason: "foveation needs exactly one of alpha or p_table".into(),
                    })
                }
            };
            Some(FoveationMap::new(
                fovea,
                curve,
                crate::foveation::DEFAULT_TABLE_SIZE,
            )?)
        }
    };
    if let (Some(map), Some(lens)) = (&foveation, &scene.lens) {
        foveation = Some(compose_lens(
            map,
            &LensModel {
                coeffs: lens.coeffs.clone(),
            },
        )?);
    }
    let scan = scene.scan.as_ref().map(|s| ScanAxis {
        d: vec2(s.d[0], s.d[1]),
    });

    Ok(PreparedScene {
        tris,
        camera,
        view,
        materials,
        light,
        clear: scene.clear_color,
        foveation,
        scan,
    })
}

/// Override the camera's end pose with a rotation of the start eye about
/// the vertical axis through the start target (sweep parameterization).
pub fn set_camera_angle(scene: &mut SceneFile, angle_deg: f64) {
    let eye = v3(scene.camera.eye_start);
    let tgt = v3(scene.camera.target_start);
    let rel = eye - tgt;
    let rot = Mat4::rotation_y(angle_deg.to_radians());
    let out = tgt + rot.mul_dir(rel);
    scene.camera.eye_end = Some([out.x, out.y, out.z]);
    scene.camera.target_end = Some(scene.camera.target_start);
}
