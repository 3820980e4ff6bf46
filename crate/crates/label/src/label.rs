//! The JSON label record written for every processed scene.

use cuboid_core::pipeline::LabelOutcome;
use cuboid_core::{CameraPose, Matrix3, Scene, Vector3};
use nalgebra::{Rotation3, UnitQuaternion};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CuboidRecord {
    pub centroid: [f64; 3],
    /// Anatomical x, y and z axes in world coordinates.
    pub axes: [[f64; 3]; 3],
    pub local_min: [f64; 3],
    pub local_max: [f64; 3],
    pub margin: f64,
    /// Corner `4*ix + 2*iy + iz`, with `i* = 0` at the minimum.
    pub corners_world: [[f64; 3]; 8],
    pub corners_px: [[f64; 2]; 8],
    pub corner_depths: [f64; 8],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseRecord {
    /// World-to-camera rotation as `[w, x, y, z]`, with `w >= 0`.
    pub quaternion: [f64; 4],
    pub translation: [f64; 3],
    pub refined: bool,
}

impl PoseRecord {
    pub fn from_pose(pose: &CameraPose) -> Self {
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(
            *pose.rotation(),
        ));
        let s = if q.w < 0.0 { -1.0 } else { 1.0 };
        let t = pose.translation;
        Self {
            quaternion: [s * q.w, s * q.i, s * q.j, s * q.k],
            translation: [t.x, t.y, t.z],
            refined: pose.refined,
        }
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        let [w, x, y, z] = self.quaternion;
        UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(w, x, y, z))
            .to_rotation_matrix()
            .into_inner()
    }

    pub fn to_pose(&self) -> CameraPose {
        let mut p = CameraPose::from_approx(&self.rotation(), Vector3::from(self.translation));
        p.refined = self.refined;
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntrinsicsRecord {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub estimated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaceRecord {
    pub label: String,
    pub visible: bool,
    pub percentage: f64,
    pub projected_area_px: f64,
    pub behind_camera: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRecord {
    pub x_source: String,
    pub y_source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegenerateRecord {
    pub flag: bool,
    pub reason: Option<String>,
    pub hull_area_px: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagnostics {
    pub reprojection_error_px: f64,
    pub inlier_count: usize,
    pub ransac_iterations: usize,
    pub consensus_failed: bool,
    pub refinement_iterations: Option<usize>,
    /// Refinement restarted from the depth-flipped pose.
    pub restarted: bool,
    pub refinement_rejected: bool,
    pub initial_cost: Option<f64>,
    pub final_cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Label3D {
    pub schema_version: u32,
    pub cuboid: CuboidRecord,
    pub pose: PoseRecord,
    pub initial_pose: PoseRecord,
    pub intrinsics: IntrinsicsRecord,
    pub faces: Vec<FaceRecord>,
    pub frame: FrameRecord,
    pub degenerate: DegenerateRecord,
    pub diagnostics: Diagnostics,
}

fn arr3(v: &Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}

impl Label3D {
    pub fn from_outcome(scene: &Scene, out: &LabelOutcome) -> Self {
        let b = &out.obox;
        let k = &scene.intrinsics;
        let r = out.refinement.as_ref();
        Self {
            schema_version: SCHEMA_VERSION,
            cuboid: CuboidRecord {
                centroid: arr3(&b.centroid),
                axes: core::array::from_fn(|i| arr3(&b.frame.axis(i))),
                local_min: arr3(&b.local_min),
                local_max: arr3(&b.local_max),
                margin: b.margin,
                corners_world: b.corners_world.map(|c| arr3(&c)),
                corners_px: out.projected_corners.map(|p| [p.x, p.y]),
                corner_depths: out.corner_depths,
            },
            pose: PoseRecord::from_pose(&out.pose),
            initial_pose: PoseRecord::from_pose(&out.initial_pose),
            intrinsics: IntrinsicsRecord {
                fx: k.fx,
                fy: k.fy,
                cx: k.cx,
                cy: k.cy,
                width: k.width,
                height: k.height,
                estimated: scene.intrinsics_estimated,
            },
            faces: out
                .faces
                .iter()
                .map(|f| FaceRecord {
                    label: f.face.label().to_string(),
                    visible: f.visible,
                    percentage: f.percentage,
                    projected_area_px: f.projected_area,
                    behind_camera: f.behind_camera,
                })
                .collect(),
            frame: FrameRecord {
                x_source: b.frame.x_source.to_string(),
                y_source: b.frame.y_source.to_string(),
            },
            degenerate: DegenerateRecord {
                flag: out.degeneracy.degenerate,
                reason: out.degeneracy.reason.map(|r| r.label().to_string()),
                hull_area_px: out.degeneracy.hull_area,
            },
            diagnostics: Diagnostics {
                reprojection_error_px: out.reprojection_error,
                inlier_count: out.inlier_count,
                ransac_iterations: out.ransac_iterations,
                consensus_failed: out.consensus_failed,
                refinement_iterations: r.map(|r| r.iterations),
                restarted: r.is_some_and(|r| r.restarted),
                refinement_rejected: out.refinement_rejected,
                initial_cost: r.map(|r| r.initial_cost),
                final_cost: r.map(|r| r.cost),
            },
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("label serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn face(&self, label: &str) -> Option<&FaceRecord> {
        self.faces.iter().find(|f| f.label == label)
    }
}
