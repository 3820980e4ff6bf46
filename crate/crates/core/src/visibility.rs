//! Which box faces the camera sees, and how much of the view each one takes.

use alloc::vec::Vec;

use nalgebra::Vector3;
use thiserror::Error;

use crate::linalg;
use crate::obox::{Face, OrientedBox};
use crate::pose::{project, CameraPose, Intrinsics};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VisibilityError {
    #[error("camera center lies inside or on the box")]
    CameraInsideBox,
    #[error("face has a corner at or behind the camera plane")]
    BehindCamera,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceGeometry {
    pub face: Face,
    /// Outward unit normal.
    pub normal: Vector3<f64>,
    pub center: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaceVisibility {
    pub face: Face,
    pub visible: bool,
    pub normal: Vector3<f64>,
    /// Projected area in px²; zero for hidden faces.
    pub projected_area: f64,
    /// Share of the total visible projected area, in percent.
    pub percentage: f64,
    /// Visible by the normal test but with a corner behind the camera; area forced to 0.
    pub behind_camera: bool,
}

/// World-space camera center `-Rᵀ t`.
pub fn camera_position(pose: &CameraPose) -> Vector3<f64> {
    -(pose.rotation().transpose() * pose.translation)
}

/// Outward unit normals and centers of the six faces, ordered as [`Face::ALL`].
pub fn face_normals(bbox: &OrientedBox) -> [FaceGeometry; 6] {
    let box_center = bbox.center();
    Face::ALL.map(|face| {
        let [v0, v1, v2, v3] = bbox.face_corners(face);
        let center = (v0 + v1 + v2 + v3) / 4.0;
        let mut normal = (v1 - v0).cross(&(v3 - v0)).normalize();
        if normal.dot(&(center - box_center)) < 0.0 {
            normal = -normal;
        }
        FaceGeometry {
            face,
            normal,
            center,
        }
    })
}

fn camera_inside(bbox: &OrientedBox, cam: &Vector3<f64>) -> bool {
    let l = bbox.to_local(cam);
    (0..3).all(|k| bbox.local_min[k] <= l[k] && l[k] <= bbox.local_max[k])
}

fn is_visible(geom: &FaceGeometry, cam: &Vector3<f64>) -> bool {
    let view = (cam - geom.center).normalize();
    geom.normal.dot(&view) > 0.0
}

/// Faces whose outward normal has a positive dot product with the unit view
/// vector from the face center to the camera.
pub fn visible_faces(bbox: &OrientedBox, cam: &Vector3<f64>) -> Result<Vec<Face>, VisibilityError> {
    if camera_inside(bbox, cam) {
        return Err(VisibilityError::CameraInsideBox);
    }
    Ok(face_normals(bbox)
        .iter()
        .filter(|g| is_visible(g, cam))
        .map(|g| g.face)
        .collect())
}

/// Shoelace area of a projected quad, corners taken in the given order.
pub fn projected_area(
    face_corners: &[Vector3<f64>; 4],
    pose: &CameraPose,
    k: &Intrinsics,
) -> Result<f64, VisibilityError> {
    let proj = project(pose, k, face_corners);
    if proj.iter().any(|p| !p.in_front()) {
        return Err(VisibilityError::BehindCamera);
    }
    let pts: Vec<[f64; 2]> = proj.iter().map(|p| [p.pixel.x, p.pixel.y]).collect();
    Ok(linalg::shoelace(&pts))
}

/// Per-face visibility with percentages normalized over the visible faces.
pub fn visibility_report(
    bbox: &OrientedBox,
    pose: &CameraPose,
    k: &Intrinsics,
) -> Result<Vec<FaceVisibility>, VisibilityError> {
    let cam = camera_position(pose);
    if camera_inside(bbox, &cam) {
        return Err(VisibilityError::CameraInsideBox);
    }
    let mut report: Vec<FaceVisibility> = face_normals(bbox)
        .iter()
        .map(|g| {
            let visible = is_visible(g, &cam);
            let (projected_area, behind_camera) = if visible {
                match projected_area(&bbox.face_corners(g.face), pose, k) {
                    Ok(a) => (a, false),
                    Err(_) => (0.0, true),
                }
            } else {
                (0.0, false)
            };
            FaceVisibility {
                face: g.face,
                visible,
                normal: g.normal,
                projected_area,
                percentage: 0.0,
                behind_camera,
            }
        })
        .collect();
    let total: f64 = report.iter().map(|f| f.projected_area).sum();
    if total > 0.0 {
        for f in report.iter_mut() {
            f.percentage = 100.0 * f.projected_area / total;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{AnatomicalFrame, AxisSource};
    use crate::linalg::so3_exp;
    use crate::obox::{generate_obox, MeshVertices};
    use approx::assert_relative_eq;
    use nalgebra::Matrix3;

    fn centered_cube(frame: &AnatomicalFrame) -> OrientedBox {
        let pts = (0..8)
            .map(|i| {
                Vector3::new(
                    (i >> 2 & 1) as f64 - 0.5,
                    (i >> 1 & 1) as f64 - 0.5,
                    (i & 1) as f64 - 0.5,
                )
            })
            .collect();
        generate_obox(&MeshVertices::new(pts).unwrap(), frame, 0.0).unwrap()
    }

    /// Camera at `cam` looking at the origin.
    fn look_at(cam: Vector3<f64>) -> CameraPose {
        let forward = (-cam).normalize();
        let helper = if forward.x.abs() < 0.9 {
            Vector3::x()
        } else {
            Vector3::y()
        };
        let right = forward.cross(&helper).normalize();
        let down = forward.cross(&right);
        let r = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        CameraPose::new(r, -(r * cam)).unwrap()
    }

    #[test]
    fn camera_position_examples() {
        let pose = CameraPose::identity_at(Vector3::new(0.0, 0.0, -5.0));
        assert_eq!(camera_position(&pose), Vector3::new(0.0, 0.0, 5.0));

        let r = so3_exp(&Vector3::new(0.0, core::f64::consts::PI, 0.0));
        let pose = CameraPose::new(r, Vector3::new(0.0, 0.0, 5.0)).unwrap();
        let c = camera_position(&pose);
        // 4x4 inverse oracle: the camera center is the translation column of T^-1
        let mut t = nalgebra::Matrix4::identity();
        t.fixed_view_mut::<3, 3>(0, 0).copy_from(pose.rotation());
        t.fixed_view_mut::<3, 1>(0, 3).copy_from(&pose.translation);
        let inv = t.try_inverse().unwrap();
        assert_relative_eq!(
            c,
            Vector3::new(inv[(0, 3)], inv[(1, 3)], inv[(2, 3)]),
            epsilon = 1e-12
        );
        assert_relative_eq!(c, Vector3::new(0.0, 0.0, 5.0), epsilon = 1e-12);
        assert!((pose.rotation() * c + pose.translation).norm() < 1e-12);
    }

    #[test]
    fn unit_cube_normals_point_outward() {
        let b = centered_cube(&AnatomicalFrame::identity());
        let geoms = face_normals(&b);
        let expected = [
            (Face::Front, -Vector3::x()),
            (Face::Back, Vector3::x()),
            (Face::Left, -Vector3::y()),
            (Face::Right, Vector3::y()),
            (Face::Top, Vector3::z()),
            (Face::Bottom, -Vector3::z()),
        ];
        for (g, (face, n)) in geoms.iter().zip(expected) {
            assert_eq!(g.face, face);
            assert_relative_eq!(g.normal, n, epsilon = 1e-12);
            assert!((g.normal.norm() - 1.0).abs() < 1e-12);
            assert!(g.normal.dot(&(g.center - b.centroid)) > 0.0);
        }
    }

    #[test]
    fn normals_rotate_with_box() {
        let q = so3_exp(&Vector3::new(0.3, 0.8, -0.4));
        let f =
            AnatomicalFrame::from_rotation(q, AxisSource::Derived, AxisSource::Derived).unwrap();
        let base = face_normals(&centered_cube(&AnatomicalFrame::identity()));
        let rotated = face_normals(&centered_cube(&f));
        for (a, b) in base.iter().zip(rotated.iter()) {
            assert_relative_eq!(q * a.normal, b.normal, epsilon = 1e-9);
        }
    }

    #[test]
    fn axis_camera_sees_one_face() {
        let b = centered_cube(&AnatomicalFrame::identity());
        // brute force over all six faces
        let cam = Vector3::new(10.0, 0.0, 0.0);
        for g in face_normals(&b) {
            let d = g.normal.dot(&(cam - g.center).normalize());
            if g.face == Face::Back {
                assert!(d > 0.99);
            } else if g.face != Face::Front {
                assert_relative_eq!(d, -0.5 / (10.0f64 * 10.0 + 0.25).sqrt(), epsilon = 1e-12);
                assert!((d + 0.0499).abs() < 1e-3);
            }
        }
        assert_eq!(visible_faces(&b, &cam).unwrap(), [Face::Back]);
        assert_eq!(
            visible_faces(&b, &Vector3::new(-10.0, 0.0, 0.0)).unwrap(),
            [Face::Front]
        );
    }

    #[test]
    fn corner_camera_sees_three_faces() {
        let b = centered_cube(&AnatomicalFrame::identity());
        let faces = visible_faces(&b, &Vector3::new(10.0, 10.0, 10.0)).unwrap();
        assert_eq!(faces, [Face::Back, Face::Right, Face::Top]);
    }

    #[test]
    fn camera_inside_is_an_error() {
        let b = centered_cube(&AnatomicalFrame::identity());
        assert_eq!(
            visible_faces(&b, &Vector3::zeros()).unwrap_err(),
            VisibilityError::CameraInsideBox
        );
    }

    #[test]
    fn frontal_unit_square_area() {
        let k = Intrinsics::new(800.0, 800.0, 400.0, 400.0, 800, 800).unwrap();
        let pose = CameraPose::identity_at(Vector3::new(0.0, 0.0, 4.0));
        let quad = [
            Vector3::new(-0.5, -0.5, 0.0),
            Vector3::new(0.5, -0.5, 0.0),
            Vector3::new(0.5, 0.5, 0.0),
            Vector3::new(-0.5, 0.5, 0.0),
        ];
        let a = projected_area(&quad, &pose, &k).unwrap();
        assert_relative_eq!(a, (800.0f64 / 4.0).powi(2), epsilon = 1e-9);

        // edge-on
        let edge = [
            Vector3::new(-0.5, 0.0, -0.5),
            Vector3::new(0.5, 0.0, -0.5),
            Vector3::new(0.5, 0.0, 0.5),
            Vector3::new(-0.5, 0.0, 0.5),
        ];
        let pose_edge = CameraPose::identity_at(Vector3::new(0.0, 0.0, 4.0));
        assert!(projected_area(&edge, &pose_edge, &k).unwrap() < 1e-6 * a);

        let behind = CameraPose::identity_at(Vector3::new(0.0, 0.0, -4.0));
        assert_eq!(
            projected_area(&quad, &behind, &k).unwrap_err(),
            VisibilityError::BehindCamera
        );
    }

    #[test]
    fn frontal_report_is_all_one_face() {
        let b = centered_cube(&AnatomicalFrame::identity());
        let k = Intrinsics::new(800.0, 800.0, 400.0, 400.0, 800, 800).unwrap();
        let rep = visibility_report(&b, &look_at(Vector3::new(-6.0, 0.0, 0.0)), &k).unwrap();
        for f in &rep {
            if f.face == Face::Front {
                assert!(f.visible);
                assert_relative_eq!(f.percentage, 100.0);
            } else {
                assert!(!f.visible);
                assert_eq!(f.percentage, 0.0);
            }
        }
    }

    #[test]
    fn symmetric_corner_view_splits_evenly() {
        let b = centered_cube(&AnatomicalFrame::identity());
        let k = Intrinsics::new(800.0, 800.0, 400.0, 400.0, 800, 800).unwrap();
        let rep = visibility_report(&b, &look_at(Vector3::new(5.0, 5.0, 5.0)), &k).unwrap();
        let visible: Vec<_> = rep.iter().filter(|f| f.visible).collect();
        assert_eq!(visible.len(), 3);
        for f in visible {
            assert!(
                (f.percentage - 100.0 / 3.0).abs() < 0.1,
                "{}: {}",
                f.face,
                f.percentage
            );
        }
        let sum: f64 = rep.iter().map(|f| f.percentage).sum();
        assert!((sum - 100.0).abs() < 1e-6);
    }

    #[test]
    fn overhead_view_favours_top() {
        // long low box seen from high above and slightly to the side
        let pts = (0..8)
            .map(|i| {
                Vector3::new(
                    if i & 4 == 0 { -1.2 } else { 1.2 },
                    if i & 2 == 0 { -0.3 } else { 0.3 },
                    if i & 1 == 0 { -0.4 } else { 0.4 },
                )
            })
            .collect();
        let b = generate_obox(
            &MeshVertices::new(pts).unwrap(),
            &AnatomicalFrame::identity(),
            0.0,
        )
        .unwrap();
        let k = Intrinsics::new(1000.0, 1000.0, 500.0, 500.0, 1000, 1000).unwrap();
        let rep = visibility_report(&b, &look_at(Vector3::new(1.5, 2.0, 12.0)), &k).unwrap();
        let top = rep.iter().find(|f| f.face == Face::Top).unwrap();
        assert!(rep
            .iter()
            .all(|f| f.face == Face::Top || f.percentage < top.percentage));
    }
}
