//! Scene manifests and the files they point to.
//!
//! A manifest is a JSON object:
//!
//! ```json
//! {
//!   "image": { "width": 640, "height": 480 },
//!   "mesh": "mesh.obj",
//!   "keypoints": "keypoints.json",
//!   "mask": "mask.png",
//!   "intrinsics": { "fx": 768.0, "fy": 768.0, "cx": 320.0, "cy": 240.0 }
//! }
//! ```
//!
//! `mask` may be replaced by an inline `"mask_bbox": [x_min, y_min, x_max, y_max]`.
//! `intrinsics` may be omitted (estimated from the image size) or given as a
//! path to a JSON file with the same four fields. Paths inside a manifest are
//! resolved against the manifest's directory.

use std::fs;
use std::path::{Path, PathBuf};

use cuboid_core::pose::{Intrinsics, MaskBBox};
use cuboid_core::scene::SceneError;
use cuboid_core::{Keypoint, MeshVertices, Scene, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MANIFEST_NAME: &str = "scene.json";

#[derive(Debug, Error)]
pub enum InputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {field}: {message}")]
    Validation {
        path: PathBuf,
        field: String,
        message: String,
    },
}

impl InputError {
    fn invalid(path: &Path, field: impl Into<String>, message: impl Into<String>) -> Self {
        InputError::Validation {
            path: path.to_path_buf(),
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageSize {
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinholeRecord {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IntrinsicsSource {
    Inline(PinholeRecord),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneManifest {
    pub image: ImageSize,
    pub mesh: PathBuf,
    pub keypoints: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_bbox: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intrinsics: Option<IntrinsicsSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeypointRecord {
    pub name: String,
    pub xyz: [f64; 3],
    pub uv: [f64; 2],
    #[serde(default = "default_visible")]
    pub visible: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

fn default_visible() -> bool {
    true
}

impl KeypointRecord {
    pub fn from_keypoint(kp: &Keypoint) -> Self {
        Self {
            name: kp.name.clone(),
            xyz: [kp.position.x, kp.position.y, kp.position.z],
            uv: [kp.pixel.x, kp.pixel.y],
            visible: kp.visible,
            confidence: (kp.confidence != 1.0).then_some(kp.confidence),
        }
    }

    pub fn to_keypoint(&self) -> Keypoint {
        Keypoint {
            name: self.name.clone(),
            position: Vector3::from(self.xyz),
            pixel: Vector2::from(self.uv),
            visible: self.visible,
            confidence: self.confidence.unwrap_or(1.0),
        }
    }
}

/// A scene read from disk together with its manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedScene {
    pub path: PathBuf,
    pub manifest: SceneManifest,
    pub scene: Scene,
}

fn read_text(path: &Path) -> Result<String, InputError> {
    fs::read_to_string(path).map_err(|source| InputError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn json_error(path: &Path, e: serde_json::Error) -> InputError {
    InputError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Vertices of an OBJ file. Only `v x y z [w]` records are read; every other
/// record is ignored.
pub fn parse_obj(text: &str, path: &Path) -> Result<Vec<Vector3<f64>>, InputError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        if it.next() != Some("v") {
            continue;
        }
        let mut xyz = [0.0f64; 3];
        let err = |column: usize, message: String| InputError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            column,
            message,
        };
        for (k, c) in xyz.iter_mut().enumerate() {
            let tok = it
                .next()
                .ok_or_else(|| err(line.len() + 1, "vertex needs three coordinates".into()))?;
            let column = tok.as_ptr() as usize - line.as_ptr() as usize + 1;
            *c = tok
                .parse()
                .map_err(|_| err(column, format!("coordinate {k} `{tok}` is not a number")))?;
            if !c.is_finite() {
                return Err(err(column, format!("coordinate {k} is not finite")));
            }
        }
        out.push(Vector3::from(xyz));
    }
    Ok(out)
}

pub fn write_obj(vertices: &[Vector3<f64>]) -> String {
    let mut s = String::with_capacity(vertices.len() * 64);
    for v in vertices {
        s.push_str(&format!("v {:?} {:?} {:?}\n", v.x, v.y, v.z));
    }
    s
}

pub fn parse_keypoints(text: &str, path: &Path) -> Result<Vec<Keypoint>, InputError> {
    let records: Vec<KeypointRecord> =
        serde_json::from_str(text).map_err(|e| json_error(path, e))?;
    Ok(records.iter().map(KeypointRecord::to_keypoint).collect())
}

/// Bounding box and foreground pixel count of a mask image; any nonzero
/// pixel is foreground. The box spans pixel edges, so a single foreground
/// pixel at `(u, v)` gives `[u, v, u + 1, v + 1]`.
pub fn read_mask(path: &Path, size: ImageSize) -> Result<(MaskBBox, f64), InputError> {
    let img = image::open(path)
        .map_err(|e| InputError::invalid(path, "mask", e.to_string()))?
        .to_luma8();
    if img.dimensions() != (size.width, size.height) {
        return Err(InputError::invalid(
            path,
            "mask",
            format!(
                "mask is {}x{} but the image is {}x{}",
                img.width(),
                img.height(),
                size.width,
                size.height
            ),
        ));
    }
    let mut b = [u32::MAX, u32::MAX, 0, 0];
    let mut count = 0u64;
    for (x, y, p) in img.enumerate_pixels() {
        if p.0[0] != 0 {
            count += 1;
            b = [b[0].min(x), b[1].min(y), b[2].max(x + 1), b[3].max(y + 1)];
        }
    }
    if count == 0 {
        return Err(InputError::invalid(
            path,
            "mask",
            "mask has no foreground pixels",
        ));
    }
    let bbox = MaskBBox::new(
        f64::from(b[0]),
        f64::from(b[1]),
        f64::from(b[2]),
        f64::from(b[3]),
    )
    .expect("non-empty integer box");
    Ok((bbox, count as f64))
}

fn scene_error(path: &Path, e: SceneError) -> InputError {
    let field = match &e {
        SceneError::DuplicateKeypoint(_) | SceneError::NoKeypoints => "keypoints".to_string(),
        SceneError::UvOutOfBounds { name, .. } => format!("keypoints[{name}].uv"),
        SceneError::NonFinite { name, field } => format!("keypoints[{name}].{field}"),
        SceneError::Confidence { name, .. } => format!("keypoints[{name}].confidence"),
        SceneError::Intrinsics(_) => "intrinsics".to_string(),
        SceneError::MaskArea => "mask".to_string(),
    };
    InputError::invalid(path, field, e.to_string())
}

/// Read and validate the scene described by a manifest file.
pub fn load_scene(manifest_path: &Path) -> Result<LoadedScene, InputError> {
    let text = read_text(manifest_path)?;
    let manifest: SceneManifest =
        serde_json::from_str(&text).map_err(|e| json_error(manifest_path, e))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let size = manifest.image;
    if size.width == 0 || size.height == 0 {
        return Err(InputError::invalid(
            manifest_path,
            "image",
            "dimensions must be positive",
        ));
    }

    let mesh_path = resolve(base, &manifest.mesh);
    let vertices = parse_obj(&read_text(&mesh_path)?, &mesh_path)?;
    let mesh = MeshVertices::new(vertices)
        .map_err(|e| InputError::invalid(&mesh_path, "mesh", e.to_string()))?;

    let kp_path = resolve(base, &manifest.keypoints);
    let keypoints = parse_keypoints(&read_text(&kp_path)?, &kp_path)?;

    let (mask, mask_area) = match (&manifest.mask, &manifest.mask_bbox) {
        (Some(_), Some(_)) => {
            return Err(InputError::invalid(
                manifest_path,
                "mask",
                "give either `mask` or `mask_bbox`, not both",
            ))
        }
        (Some(p), None) => {
            let (b, a) = read_mask(&resolve(base, p), size)?;
            (b, Some(a))
        }
        (None, Some([x0, y0, x1, y1])) => (
            MaskBBox::new(*x0, *y0, *x1, *y1).map_err(|_| {
                InputError::invalid(
                    manifest_path,
                    "mask_bbox",
                    "needs x_min < x_max and y_min < y_max",
                )
            })?,
            None,
        ),
        (None, None) => {
            return Err(InputError::invalid(
                manifest_path,
                "mask",
                "one of `mask` or `mask_bbox` is required",
            ))
        }
    };

    let (pinhole, estimated) = match &manifest.intrinsics {
        None => (None, true),
        Some(IntrinsicsSource::Inline(r)) => (Some(*r), false),
        Some(IntrinsicsSource::File(p)) => {
            let p = resolve(base, p);
            let r: PinholeRecord =
                serde_json::from_str(&read_text(&p)?).map_err(|e| json_error(&p, e))?;
            (Some(r), false)
        }
    };
    let intrinsics = match pinhole {
        None => Intrinsics::estimated(size.width, size.height),
        Some(r) => Intrinsics::new(r.fx, r.fy, r.cx, r.cy, size.width, size.height)
            .map_err(|e| InputError::invalid(manifest_path, "intrinsics", e.to_string()))?,
    };

    let scene = Scene {
        mesh,
        keypoints,
        intrinsics,
        intrinsics_estimated: estimated,
        mask,
        mask_area,
    };
    scene.validate().map_err(|e| scene_error(&kp_path, e))?;
    Ok(LoadedScene {
        path: manifest_path.to_path_buf(),
        manifest,
        scene,
    })
}

/// Accepts either a manifest file or a directory holding `scene.json`.
pub fn manifest_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(MANIFEST_NAME)
    } else {
        p.to_path_buf()
    }
}

/// Manifests directly in `dir` or one level below it, sorted by path.
pub fn find_manifests(dir: &Path) -> Result<Vec<PathBuf>, InputError> {
    let io = |source| InputError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut out = Vec::new();
    let own = dir.join(MANIFEST_NAME);
    if own.is_file() {
        out.push(own);
    }
    for entry in fs::read_dir(dir).map_err(io)? {
        let p = entry.map_err(io)?.path();
        let m = p.join(MANIFEST_NAME);
        if p.is_dir() && m.is_file() {
            out.push(m);
        }
    }
    out.sort();
    Ok(out)
}

/// Write `scene` as a manifest directory with an OBJ mesh and keypoint JSON.
/// Raster masks are not written; the mask box goes inline.
pub fn write_scene(dir: &Path, scene: &Scene) -> Result<PathBuf, InputError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| InputError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let k = &scene.intrinsics;
    let manifest = SceneManifest {
        image: ImageSize {
            width: k.width,
            height: k.height,
        },
        mesh: "mesh.obj".into(),
        keypoints: "keypoints.json".into(),
        mask: None,
        mask_bbox: Some(scene.mask.as_array()),
        intrinsics: (!scene.intrinsics_estimated).then_some(IntrinsicsSource::Inline(
            PinholeRecord {
                fx: k.fx,
                fy: k.fy,
                cx: k.cx,
                cy: k.cy,
            },
        )),
    };
    let records: Vec<_> = scene
        .keypoints
        .iter()
        .map(KeypointRecord::from_keypoint)
        .collect();
    let files = [
        (
            MANIFEST_NAME,
            serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
        ),
        ("mesh.obj", write_obj(scene.mesh.as_slice())),
        (
            "keypoints.json",
            serde_json::to_string_pretty(&records).expect("keypoints serialize"),
        ),
    ];
    for (name, body) in files {
        let p = dir.join(name);
        fs::write(&p, body + "\n").map_err(io(&p))?;
    }
    Ok(dir.join(MANIFEST_NAME))
}
