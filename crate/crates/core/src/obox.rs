//! Oriented bounding box of mesh vertices in an anatomical frame.

use alloc::vec::Vec;
use core::fmt;

use nalgebra::Vector3;
use thiserror::Error;

use crate::frame::AnatomicalFrame;
use crate::linalg;

/// Default enclosure margin in mesh units.
pub const DEFAULT_EPSILON: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoxError {
    #[error("mesh has no vertices")]
    EmptyMesh,
    #[error("mesh vertex {0} is not finite")]
    NonFiniteVertex(usize),
    #[error("frame rotation is not orthonormal")]
    InvalidFrame,
    #[error("margin must be finite and non-negative, got {0}")]
    InvalidMargin(f64),
}

/// World-space mesh vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshVertices(Vec<Vector3<f64>>);

impl MeshVertices {
    pub fn new(vertices: Vec<Vector3<f64>>) -> Result<Self, BoxError> {
        if vertices.is_empty() {
            return Err(BoxError::EmptyMesh);
        }
        if let Some(i) = vertices
            .iter()
            .position(|v| v.iter().any(|c| !c.is_finite()))
        {
            return Err(BoxError::NonFiniteVertex(i));
        }
        Ok(Self(vertices))
    }

    pub fn as_slice(&self) -> &[Vector3<f64>] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<Vector3<f64>> {
        self.0
    }
}

/// Box faces by anatomical meaning.
///
/// With `x` pointing posterior, the anterior (front) face is the `-x` face.
/// `y` points to the animal's right and `z = x × y` dorsally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Face {
    Front,
    Back,
    Left,
    Right,
    Top,
    Bottom,
}

/// One row per face: label, local axis, sign, and four corner indices in
/// cyclic order. Corner index is `4*ix + 2*iy + iz` with `i* = 0` for min.
const FACE_TABLE: [(Face, usize, f64, [usize; 4]); 6] = [
    (Face::Front, 0, -1.0, [0, 1, 3, 2]),
    (Face::Back, 0, 1.0, [4, 5, 7, 6]),
    (Face::Left, 1, -1.0, [0, 1, 5, 4]),
    (Face::Right, 1, 1.0, [2, 3, 7, 6]),
    (Face::Top, 2, 1.0, [1, 3, 7, 5]),
    (Face::Bottom, 2, -1.0, [0, 2, 6, 4]),
];

/// The 12 box edges as corner index pairs.
pub const EDGES: [(usize, usize); 12] = [
    (0, 1),
    (2, 3),
    (4, 5),
    (6, 7),
    (0, 2),
    (1, 3),
    (4, 6),
    (5, 7),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

impl Face {
    pub const ALL: [Face; 6] = [
        Face::Front,
        Face::Back,
        Face::Left,
        Face::Right,
        Face::Top,
        Face::Bottom,
    ];

    fn row(self) -> &'static (Face, usize, f64, [usize; 4]) {
        &FACE_TABLE[self as usize]
    }

    /// Local axis index (0 = x, 1 = y, 2 = z).
    pub fn axis(self) -> usize {
        self.row().1
    }

    /// Sign of the outward local axis.
    pub fn sign(self) -> f64 {
        self.row().2
    }

    /// Corner indices in cyclic order around the face.
    pub fn corners(self) -> [usize; 4] {
        self.row().3
    }

    pub fn label(self) -> &'static str {
        match self {
            Face::Front => "front",
            Face::Back => "back",
            Face::Left => "left",
            Face::Right => "right",
            Face::Top => "top",
            Face::Bottom => "bottom",
        }
    }

    pub fn from_label(label: &str) -> Option<Face> {
        Face::ALL.into_iter().find(|f| f.label() == label)
    }

    pub fn has_edge(self, a: usize, b: usize) -> bool {
        let c = self.corners();
        (0..4).any(|i| {
            let (p, q) = (c[i], c[(i + 1) % 4]);
            (p == a && q == b) || (p == b && q == a)
        })
    }
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrientedBox {
    pub centroid: Vector3<f64>,
    pub frame: AnatomicalFrame,
    pub local_min: Vector3<f64>,
    pub local_max: Vector3<f64>,
    pub corners_world: [Vector3<f64>; 8],
    pub margin: f64,
    /// Axes along which the vertices had zero extent before the margin.
    pub flat_axes: [bool; 3],
}

impl OrientedBox {
    pub fn corners_local(&self) -> [Vector3<f64>; 8] {
        local_corners(&self.local_min, &self.local_max)
    }

    pub fn to_local(&self, world: &Vector3<f64>) -> Vector3<f64> {
        self.frame.rotation().transpose() * (world - self.centroid)
    }

    pub fn to_world(&self, local: &Vector3<f64>) -> Vector3<f64> {
        self.frame.rotation() * local + self.centroid
    }

    pub fn extents(&self) -> Vector3<f64> {
        self.local_max - self.local_min
    }

    pub fn volume(&self) -> f64 {
        let e = self.extents();
        e.x * e.y * e.z
    }

    /// Center of the box itself, which differs from the vertex centroid.
    pub fn center(&self) -> Vector3<f64> {
        self.to_world(&((self.local_min + self.local_max) * 0.5))
    }

    pub fn face_corners(&self, face: Face) -> [Vector3<f64>; 4] {
        face.corners().map(|i| self.corners_world[i])
    }

    pub fn is_flat(&self) -> bool {
        self.flat_axes.iter().any(|&f| f)
    }
}

fn local_corners(min: &Vector3<f64>, max: &Vector3<f64>) -> [Vector3<f64>; 8] {
    core::array::from_fn(|i| {
        let pick = |bit: usize, k: usize| if i & bit == 0 { min[k] } else { max[k] };
        Vector3::new(pick(4, 0), pick(2, 1), pick(1, 2))
    })
}

pub fn compute_centroid(mesh: &MeshVertices) -> Vector3<f64> {
    linalg::mean(mesh.as_slice())
}

/// Tight box around the mesh in `frame`, padded by `epsilon` on every side.
pub fn generate_obox(
    mesh: &MeshVertices,
    frame: &AnatomicalFrame,
    epsilon: f64,
) -> Result<OrientedBox, BoxError> {
    if mesh.is_empty() {
        return Err(BoxError::EmptyMesh);
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(BoxError::InvalidMargin(epsilon));
    }
    if !linalg::is_rotation(frame.rotation(), 1e-9) {
        return Err(BoxError::InvalidFrame);
    }
    let centroid = compute_centroid(mesh);
    let rt = frame.rotation().transpose();
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for v in mesh.as_slice() {
        let local = rt * (v - centroid);
        lo = lo.inf(&local);
        hi = hi.sup(&local);
    }
    let scale = lo.abs().max().max(hi.abs().max()).max(1.0);
    let flat_axes = core::array::from_fn(|k| hi[k] - lo[k] <= scale * 1e-12);
    let local_min = lo.add_scalar(-epsilon);
    let local_max = hi.add_scalar(epsilon);
    let corners_world =
        local_corners(&local_min, &local_max).map(|c| frame.rotation() * c + centroid);
    Ok(OrientedBox {
        centroid,
        frame: frame.clone(),
        local_min,
        local_max,
        corners_world,
        margin: epsilon,
        flat_axes,
    })
}

/// Fraction of vertices inside the closed box in its local frame.
pub fn enclosure_check(bbox: &OrientedBox, mesh: &MeshVertices) -> f64 {
    if mesh.is_empty() {
        return 0.0;
    }
    let inside = mesh
        .as_slice()
        .iter()
        .filter(|v| {
            let l = bbox.to_local(v);
            (0..3).all(|k| bbox.local_min[k] <= l[k] && l[k] <= bbox.local_max[k])
        })
        .count();
    inside as f64 / mesh.len() as f64
}
