use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{Vector2, Vector3};
use thiserror::Error;

use crate::frame::Landmark3D;
use crate::obox::MeshVertices;
use crate::pose::{Correspondence, Intrinsics, MaskBBox};

/// Keypoints may fall this fraction of the image size outside the image.
pub const UV_SLACK_FRAC: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("duplicate keypoint name `{0}`")]
    DuplicateKeypoint(String),
    #[error("keypoint `{name}`: uv ({u}, {v}) outside the image bounds")]
    UvOutOfBounds { name: String, u: f64, v: f64 },
    #[error("keypoint `{name}`: {field} is not finite")]
    NonFinite { name: String, field: &'static str },
    #[error("keypoint `{name}`: confidence {value} outside [0, 1]")]
    Confidence { name: String, value: f64 },
    #[error("no keypoints")]
    NoKeypoints,
    #[error("intrinsics: {0}")]
    Intrinsics(&'static str),
    #[error("mask area must be positive")]
    MaskArea,
}

/// A co-registered keypoint: a named 3D landmark and its 2D observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Keypoint {
    pub name: String,
    pub position: Vector3<f64>,
    pub pixel: Vector2<f64>,
    pub visible: bool,
    pub confidence: f64,
}

impl Keypoint {
    pub fn new(
        name: impl Into<String>,
        position: Vector3<f64>,
        pixel: Vector2<f64>,
        visible: bool,
    ) -> Self {
        Self {
            name: name.into(),
            position,
            pixel,
            visible,
            confidence: 1.0,
        }
    }

    pub fn landmark(&self) -> Landmark3D {
        Landmark3D {
            name: self.name.clone(),
            position: self.position,
            visible: self.visible,
            confidence: self.confidence,
        }
    }

    pub fn correspondence(&self) -> Correspondence {
        Correspondence {
            point3d: self.position,
            point2d: self.pixel,
            visible: self.visible,
            confidence: self.confidence,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub mesh: MeshVertices,
    pub keypoints: Vec<Keypoint>,
    pub intrinsics: Intrinsics,
    /// Set when the intrinsics were filled in by [`Intrinsics::estimated`].
    pub intrinsics_estimated: bool,
    pub mask: MaskBBox,
    /// Foreground pixel count when a raster mask is available; otherwise the
    /// bounding-box area is used.
    pub mask_area: Option<f64>,
}

impl Scene {
    pub fn validate(&self) -> Result<(), SceneError> {
        if self.keypoints.is_empty() {
            return Err(SceneError::NoKeypoints);
        }
        self.intrinsics.validate().map_err(|e| match e {
            crate::pose::PoseError::InvalidIntrinsics(m) => SceneError::Intrinsics(m),
            _ => SceneError::Intrinsics("invalid"),
        })?;
        if self.mask_area.is_some_and(|a| !(a > 0.0 && a.is_finite())) {
            return Err(SceneError::MaskArea);
        }
        let (w, h) = (
            f64::from(self.intrinsics.width),
            f64::from(self.intrinsics.height),
        );
        let (su, sv) = (UV_SLACK_FRAC * w, UV_SLACK_FRAC * h);
        let mut seen = BTreeSet::new();
        for kp in &self.keypoints {
            if !seen.insert(kp.name.as_str()) {
                return Err(SceneError::DuplicateKeypoint(kp.name.clone()));
            }
            if kp.position.iter().any(|v| !v.is_finite()) {
                return Err(SceneError::NonFinite {
                    name: kp.name.clone(),
                    field: "xyz",
                });
            }
            if kp.pixel.iter().any(|v| !v.is_finite()) {
                return Err(SceneError::NonFinite {
                    name: kp.name.clone(),
                    field: "uv",
                });
            }
            if !(0.0..=1.0).contains(&kp.confidence) {
                return Err(SceneError::Confidence {
                    name: kp.name.clone(),
                    value: kp.confidence,
                });
            }
            let (u, v) = (kp.pixel.x, kp.pixel.y);
            if u < -su || u > w + su || v < -sv || v > h + sv {
                return Err(SceneError::UvOutOfBounds {
                    name: kp.name.clone(),
                    u,
                    v,
                });
            }
        }
        Ok(())
    }

    pub fn correspondences(&self) -> Vec<Correspondence> {
        self.keypoints
            .iter()
            .map(Keypoint::correspondence)
            .collect()
    }

    pub fn landmarks(&self) -> Vec<Landmark3D> {
        self.keypoints.iter().map(Keypoint::landmark).collect()
    }

    pub fn effective_mask_area(&self) -> f64 {
        self.mask_area.unwrap_or_else(|| self.mask.area())
    }
}
