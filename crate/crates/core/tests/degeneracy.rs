use cuboid_core::evaluate::{detect_degenerate, DegenerateReason, DEFAULT_DEGENERATE_AREA_FRAC};
use cuboid_core::frame::build_anatomical_frame;
use cuboid_core::obox::{generate_obox, DEFAULT_EPSILON};
use cuboid_core::pipeline::{label_scene, LabelConfig};
use cuboid_core::pose::project;
use cuboid_core::synthetic::{healthy_suite, SyntheticOptions};
use cuboid_core::{AxisPolicy, CameraPose, Matrix3, OrientedBox, Vector3};

fn truth_box(s: &cuboid_core::synthetic::SyntheticScene) -> OrientedBox {
    let frame = build_anatomical_frame(&s.scene.landmarks(), &AxisPolicy::default()).unwrap();
    generate_obox(&s.scene.mesh, &frame, DEFAULT_EPSILON).unwrap()
}

#[test]
fn healthy_scenes_are_never_flagged() {
    let opts = SyntheticOptions {
        pixel_noise: 1.0,
        occlusion_prob: 0.1,
        ..SyntheticOptions::default()
    };
    let mut flagged = Vec::new();
    for (i, s) in healthy_suite(500, 17, &opts).iter().enumerate() {
        let b = truth_box(s);
        let d = detect_degenerate(
            &project(&s.truth, &s.scene.intrinsics, &b.corners_world),
            s.scene.effective_mask_area(),
            DEFAULT_DEGENERATE_AREA_FRAC,
        );
        if d.degenerate {
            flagged.push(i);
        }
    }
    assert!(flagged.is_empty(), "false positives at {flagged:?}");
}

#[test]
fn refined_labels_of_healthy_scenes_are_not_degenerate() {
    for s in healthy_suite(100, 23, &SyntheticOptions::default()) {
        let out = label_scene(&s.scene, &LabelConfig::default()).unwrap();
        assert!(!out.degeneracy.degenerate);
    }
}

#[test]
fn boxes_behind_the_camera_are_always_flagged() {
    let flip = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0));
    for s in healthy_suite(200, 29, &SyntheticOptions::default()) {
        let b = truth_box(&s);
        let k = &s.scene.intrinsics;
        let area = s.scene.effective_mask_area();

        let behind =
            CameraPose::new(flip * s.truth.rotation(), flip * s.truth.translation).unwrap();
        let d = detect_degenerate(
            &project(&behind, k, &b.corners_world),
            area,
            DEFAULT_DEGENERATE_AREA_FRAC,
        );
        assert_eq!(d.reason, Some(DegenerateReason::BehindCamera));

        // camera moved onto the box centroid: some corners straddle the image plane
        let inside =
            CameraPose::new(*s.truth.rotation(), -(s.truth.rotation() * b.center())).unwrap();
        let d = detect_degenerate(
            &project(&inside, k, &b.corners_world),
            area,
            DEFAULT_DEGENERATE_AREA_FRAC,
        );
        assert_eq!(d.reason, Some(DegenerateReason::BehindCamera));
    }
}

#[test]
fn distant_boxes_are_tiny() {
    for s in healthy_suite(50, 31, &SyntheticOptions::default()) {
        let b = truth_box(&s);
        let far = CameraPose::new(*s.truth.rotation(), s.truth.translation * 1e3).unwrap();
        let d = detect_degenerate(
            &project(&far, &s.scene.intrinsics, &b.corners_world),
            s.scene.effective_mask_area(),
            DEFAULT_DEGENERATE_AREA_FRAC,
        );
        assert!(d.degenerate);
        assert_eq!(d.reason, Some(DegenerateReason::TinyArea));
    }
}
