use std::fs;
use std::path::Path;

use cuboid_core::pipeline::{label_scene, LabelConfig};
use cuboid_label::scene_io::{find_manifests, load_scene, read_mask, ImageSize, InputError};
use cuboid_label::Label3D;
use image::{GrayImage, Luma};
use serde_json::json;

const MESH: &str = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nv 0 0 1\nv 1 0 1\nv 0 1 1\nv 1 1 1\n";

fn keypoints() -> serde_json::Value {
    json!([
        { "name": "nose", "xyz": [0.0, 0.5, 0.5], "uv": [10.0, 20.0] },
        { "name": "tail_base", "xyz": [1.0, 0.5, 0.5], "uv": [50.0, 20.0] },
        { "name": "left_shoulder", "xyz": [0.2, 0.0, 0.5], "uv": [15.0, 10.0], "visible": false },
        { "name": "right_shoulder", "xyz": [0.2, 1.0, 0.5], "uv": [15.0, 30.0], "confidence": 0.4 }
    ])
}

fn write_minimal(
    dir: &Path,
    manifest: serde_json::Value,
    kps: serde_json::Value,
) -> std::path::PathBuf {
    fs::create_dir_all(dir).unwrap();
    fs::write(dir.join("mesh.obj"), MESH).unwrap();
    fs::write(dir.join("keypoints.json"), kps.to_string()).unwrap();
    let m = dir.join("scene.json");
    fs::write(&m, manifest.to_string()).unwrap();
    m
}

fn manifest() -> serde_json::Value {
    json!({
        "image": { "width": 64, "height": 48 },
        "mesh": "mesh.obj",
        "keypoints": "keypoints.json",
        "mask_bbox": [5.0, 5.0, 60.0, 40.0],
        "intrinsics": { "fx": 50.0, "fy": 50.0, "cx": 32.0, "cy": 24.0 }
    })
}

#[test]
fn minimal_scene_loads_with_flags_unset() {
    let dir = tempfile::tempdir().unwrap();
    let loaded = load_scene(&write_minimal(dir.path(), manifest(), keypoints())).unwrap();
    let s = &loaded.scene;
    assert!(!s.intrinsics_estimated);
    assert_eq!(s.mask_area, None);
    assert_eq!(s.mesh.len(), 8);
    assert_eq!(s.keypoints.len(), 4);
    assert!(s.keypoints[0].visible && s.keypoints[0].confidence == 1.0);
    assert!(!s.keypoints[2].visible);
    assert_eq!(s.keypoints[3].confidence, 0.4);
    assert_eq!(s.intrinsics.fx, 50.0);
}

#[test]
fn fixture_label_has_no_warning_flags() {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic/scene.json");
    let loaded = load_scene(&fixture).unwrap();
    let out = label_scene(&loaded.scene, &LabelConfig::default()).unwrap();
    let l = Label3D::from_outcome(&loaded.scene, &out);
    assert!(!l.degenerate.flag);
    assert!(!l.intrinsics.estimated);
    assert!(!l.diagnostics.consensus_failed);
    assert!(!l.diagnostics.refinement_rejected);
    assert!(!l.diagnostics.restarted);
}

#[test]
fn missing_intrinsics_are_estimated() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = manifest();
    m.as_object_mut().unwrap().remove("intrinsics");
    let loaded = load_scene(&write_minimal(dir.path(), m, keypoints())).unwrap();
    let k = &loaded.scene.intrinsics;
    assert!(loaded.scene.intrinsics_estimated);
    assert_eq!((k.cx, k.cy), (32.0, 24.0));
    assert!(k.fx > 0.0 && k.fx == k.fy);
}

#[test]
fn intrinsics_from_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("k.json"),
        r#"{ "fx": 70.0, "fy": 71.0, "cx": 30.0, "cy": 20.0 }"#,
    )
    .unwrap();
    let mut m = manifest();
    m["intrinsics"] = json!("k.json");
    let loaded = load_scene(&write_minimal(dir.path(), m, keypoints())).unwrap();
    assert!(!loaded.scene.intrinsics_estimated);
    assert_eq!(loaded.scene.intrinsics.fy, 71.0);
}

#[test]
fn duplicate_keypoint_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let mut kps = keypoints();
    let first = kps[0].clone();
    kps.as_array_mut().unwrap().push(first);
    let err = load_scene(&write_minimal(dir.path(), manifest(), kps)).unwrap_err();
    match &err {
        InputError::Validation { field, message, .. } => {
            assert_eq!(field, "keypoints");
            assert!(message.contains("nose"), "{message}");
        }
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn out_of_bounds_uv_names_the_keypoint() {
    let dir = tempfile::tempdir().unwrap();
    let mut kps = keypoints();
    kps[1]["uv"] = json!([500.0, 20.0]);
    let err = load_scene(&write_minimal(dir.path(), manifest(), kps)).unwrap_err();
    assert!(err.to_string().contains("tail_base"), "{err}");
}

#[test]
fn obj_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_minimal(dir.path(), manifest(), keypoints());
    fs::write(dir.path().join("mesh.obj"), "v 0 0 0\nv 1 x 0\n").unwrap();
    match load_scene(&m).unwrap_err() {
        InputError::Parse { line, .. } => assert_eq!(line, 2),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn mask_and_bbox_together_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = manifest();
    m["mask"] = json!("mask.png");
    let err = load_scene(&write_minimal(dir.path(), m, keypoints())).unwrap_err();
    assert!(matches!(err, InputError::Validation { ref field, .. } if field == "mask"));
}

#[test]
fn mask_png_gives_pixel_edge_bbox_and_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut img = GrayImage::new(64, 48);
    for y in 5..15 {
        for x in 10..20 {
            img.put_pixel(x, y, Luma([255]));
        }
    }
    img.put_pixel(40, 30, Luma([1]));
    let path = dir.path().join("mask.png");
    img.save(&path).unwrap();

    let size = ImageSize {
        width: 64,
        height: 48,
    };
    let (b, area) = read_mask(&path, size).unwrap();
    assert_eq!(
        [b.x_min, b.y_min, b.x_max, b.y_max],
        [10.0, 5.0, 41.0, 31.0]
    );
    assert_eq!(area, 101.0);

    let mut m = manifest();
    let obj = m.as_object_mut().unwrap();
    obj.remove("mask_bbox");
    obj.insert("mask".into(), json!("mask.png"));
    let loaded = load_scene(&write_minimal(dir.path(), m, keypoints())).unwrap();
    assert_eq!(loaded.scene.mask_area, Some(101.0));

    let wrong = ImageSize {
        width: 32,
        height: 48,
    };
    assert!(read_mask(&path, wrong)
        .unwrap_err()
        .to_string()
        .contains("64x48"));
}

#[test]
fn empty_mask_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mask.png");
    GrayImage::new(8, 8).save(&path).unwrap();
    let size = ImageSize {
        width: 8,
        height: 8,
    };
    assert!(read_mask(&path, size).is_err());
}

#[test]
fn paths_resolve_against_the_manifest() {
    let root = tempfile::tempdir().unwrap();
    let data = root.path().join("shared");
    fs::create_dir_all(&data).unwrap();
    fs::write(data.join("body.obj"), MESH).unwrap();
    fs::write(data.join("kp.json"), keypoints().to_string()).unwrap();
    let scene_dir = root.path().join("scenes/a");
    fs::create_dir_all(&scene_dir).unwrap();
    let mut m = manifest();
    m["mesh"] = json!("../../shared/body.obj");
    m["keypoints"] = json!("../../shared/kp.json");
    fs::write(scene_dir.join("scene.json"), m.to_string()).unwrap();

    let loaded = load_scene(&scene_dir.join("scene.json")).unwrap();
    assert_eq!(loaded.scene.mesh.len(), 8);
    let found = find_manifests(&root.path().join("scenes")).unwrap();
    assert_eq!(found, vec![scene_dir.join("scene.json")]);
}
