//! Camera pose estimation and refinement.
//!
//! World to camera: `x_cam = R X + t`, pinhole projection without
//! distortion. Initialization is EPnP inside RANSAC over visible
//! keypoints; refinement is a damped least-squares fit of whitened
//! keypoint residuals plus a mask bounding-box term.

mod covariance;
mod epnp;
mod ransac;
mod refine;

pub use covariance::{keypoint_covariance, KeypointCovariance, UncertaintyParams};
pub use epnp::epnp;
pub use ransac::{epnp_ransac, RansacParams, RansacResult};
pub use refine::{
    pose_from_params, pose_params, refine_pose, residual_jacobian, residuals, DegeneracyGuard,
    PoseParams, RefineOptions, RefineReport,
};

use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector2, Vector3};
use thiserror::Error;

use crate::linalg;

/// Points with camera depth at or below this are behind the camera.
pub const MIN_DEPTH: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoseError {
    #[error("need at least {required} visible correspondences, got {actual}")]
    TooFewCorrespondences { required: usize, actual: usize },
    #[error("no consensus: best inlier set has {0} correspondences")]
    NoConsensus(usize),
    #[error("no correspondences given")]
    EmptyCorrespondences,
    #[error("refinement did not converge within {0} iterations")]
    DidNotConverge(usize),
    #[error("both refinement branches ended in a degenerate pose")]
    DegenerateResult,
    #[error("EPnP failed: {0}")]
    Epnp(&'static str),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(&'static str),
    #[error("invalid pose: rotation is not proper")]
    InvalidPose,
    #[error("invalid mask bounding box")]
    InvalidMask,
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("covariance count {covs} does not match correspondence count {corrs}")]
    CovarianceMismatch { corrs: usize, covs: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, PoseError> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    /// Focal length `1.2 * max(width, height)` with the principal point at the image center.
    pub fn estimated(width: u32, height: u32) -> Self {
        let f = 1.2 * f64::from(width.max(height));
        Self {
            fx: f,
            fy: f,
            cx: f64::from(width) / 2.0,
            cy: f64::from(height) / 2.0,
            width,
            height,
        }
    }

    pub fn validate(&self) -> Result<(), PoseError> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(PoseError::InvalidIntrinsics(
                "focal lengths must be positive",
            ));
        }
        if !(0.0..=f64::from(self.width)).contains(&self.cx)
            || !(0.0..=f64::from(self.height)).contains(&self.cy)
        {
            return Err(PoseError::InvalidIntrinsics(
                "principal point outside image",
            ));
        }
        Ok(())
    }

    pub fn focal(&self) -> f64 {
        0.5 * (self.fx + self.fy)
    }

    pub fn diagonal(&self) -> f64 {
        let (w, h) = (f64::from(self.width), f64::from(self.height));
        (w * w + h * h).sqrt()
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Pixel coordinates of a camera-frame point.
    pub fn project_camera(&self, p: &Vector3<f64>) -> Vector2<f64> {
        Vector2::new(self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Correspondence {
    pub point3d: Vector3<f64>,
    pub point2d: Vector2<f64>,
    pub visible: bool,
    pub confidence: f64,
}

impl Correspondence {
    pub fn new(point3d: Vector3<f64>, point2d: Vector2<f64>) -> Self {
        Self {
            point3d,
            point2d,
            visible: true,
            confidence: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraPose {
    rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub refined: bool,
}

impl CameraPose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, PoseError> {
        if !linalg::is_rotation(&rotation, 1e-9) || translation.iter().any(|v| !v.is_finite()) {
            return Err(PoseError::InvalidPose);
        }
        Ok(Self {
            rotation,
            translation,
            refined: false,
        })
    }

    /// Build from a rotation that is only approximately orthonormal.
    pub fn from_approx(rotation: &Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: linalg::nearest_rotation(rotation),
            translation,
            refined: false,
        }
    }

    pub fn identity_at(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
            refined: false,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn to_camera(&self, world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * world + self.translation
    }
}

/// Tight bounds of the segmentation mask in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskBBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl MaskBBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, PoseError> {
        let b = Self {
            x_min,
            y_min,
            x_max,
            y_max,
        };
        if !(x_min < x_max && y_min < y_max) || b.as_array().iter().any(|v| !v.is_finite()) {
            return Err(PoseError::InvalidMask);
        }
        Ok(b)
    }

    /// Tight bounds of a set of pixel positions.
    pub fn from_points(points: &[Vector2<f64>]) -> Result<Self, PoseError> {
        let mut b = [
            f64::INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
        ];
        for p in points {
            b[0] = b[0].min(p.x);
            b[1] = b[1].min(p.y);
            b[2] = b[2].max(p.x);
            b[3] = b[3].max(p.y);
        }
        Self::new(b[0], b[1], b[2], b[3])
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }
}

/// A projected point with its camera depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub pixel: Vector2<f64>,
    pub depth: f64,
}

impl Projection {
    pub fn in_front(&self) -> bool {
        self.depth > MIN_DEPTH
    }
}

/// Pinhole projection; points behind the camera are still projected and
/// reported with their (non-positive) depth.
pub fn project(
    pose: &CameraPose,
    intrinsics: &Intrinsics,
    points: &[Vector3<f64>],
) -> Vec<Projection> {
    points
        .iter()
        .map(|x| {
            let pc = pose.to_camera(x);
            Projection {
                pixel: intrinsics.project_camera(&pc),
                depth: pc.z,
            }
        })
        .collect()
}
