//! Anatomically oriented 3D bounding boxes for fitted animal meshes.
//!
//! The crate turns a fitted mesh, named 3D landmarks with their 2D
//! observations, and a segmentation-mask bounding box into:
//!
//! - an orthonormal anatomical frame ([`frame`]),
//! - a tight oriented box in that frame ([`obox`]),
//! - a refined camera pose ([`pose`]),
//! - per-face profile visibility percentages ([`visibility`]),
//!
//! plus the stability and accuracy metrics used to evaluate them
//! ([`evaluate`]) and a seeded synthetic scene generator ([`synthetic`]).
//!
//! Everything here is pure computation over `alloc`; file formats, rendering
//! and the command line live in the `cuboid-label` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod evaluate;
pub mod frame;
pub mod obox;
pub mod pipeline;
pub mod pose;
pub mod scene;
pub mod synthetic;
pub mod visibility;

mod linalg;

pub use nalgebra::{Matrix3, Vector2, Vector3};

pub use frame::{AnatomicalFrame, AxisPair, AxisPolicy, AxisSource, FrameError, Landmark3D};
pub use obox::{Face, MeshVertices, OrientedBox};
pub use pose::{CameraPose, Correspondence, Intrinsics, MaskBBox};
pub use scene::{Keypoint, Scene};
