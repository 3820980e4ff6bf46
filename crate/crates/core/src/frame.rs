//! Anatomical coordinate frames built from named landmarks, and the PCA
//! baseline they are compared against.
//!
//! Axis conventions: `x = normalize(posterior - anterior)` (for the default
//! policy, tail base minus nose), `y = normalize(right - left)`, and
//! `z = x × y`, which points dorsally for an upright animal. The frame is
//! always a proper rotation whose columns are the three axes.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::linalg;

/// Minimum landmark confidence for the landmark to count as reliable.
pub const DEFAULT_MIN_CONFIDENCE: f64 = 0.3;

/// Pair endpoints closer than this are treated as coincident.
pub const COINCIDENT_TOL: f64 = 1e-9;

/// Minimum angle between the raw x and y directions.
pub const PARALLEL_TOL_RAD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrameError {
    #[error("no axis can be derived from the reliable landmarks")]
    InsufficientLandmarks,
    #[error("every candidate pair for the {axis} axis has coincident endpoints")]
    DegenerateAxis { axis: char },
    #[error("axis directions are parallel or zero")]
    ParallelAxes,
    #[error("point cloud has covariance rank below 2")]
    DegenerateCloud,
    #[error("landmark {name:?} is invalid: {reason}")]
    InvalidLandmark { name: String, reason: &'static str },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Landmark3D {
    pub name: String,
    pub position: Vector3<f64>,
    pub visible: bool,
    pub confidence: f64,
}

impl Landmark3D {
    pub fn new(name: impl Into<String>, position: Vector3<f64>, visible: bool) -> Self {
        Self {
            name: name.into(),
            position,
            visible,
            confidence: 1.0,
        }
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = confidence;
        self
    }

    pub fn validate(&self) -> Result<(), FrameError> {
        if self.position.iter().any(|v| !v.is_finite()) {
            return Err(FrameError::InvalidLandmark {
                name: self.name.clone(),
                reason: "position is not finite",
            });
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(FrameError::InvalidLandmark {
                name: self.name.clone(),
                reason: "confidence outside [0, 1]",
            });
        }
        Ok(())
    }

    fn is_reliable(&self, min_confidence: f64) -> bool {
        self.visible && self.confidence >= min_confidence
    }
}

/// Directed landmark pair; the axis points from `from` towards `to`.
///
/// Either endpoint may be a synthesized midpoint named `<part>_midpoint`,
/// resolved as the mean of `left_<part>` and `right_<part>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AxisPair {
    pub from: String,
    pub to: String,
}

impl AxisPair {
    pub fn new(from: impl Into<String>, to: impl Into<String>) -> Self {
        Self {
            from: from.into(),
            to: to.into(),
        }
    }
}

/// Ordered candidate pairs per axis; the first reliable pair wins.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisPolicy {
    pub x: Vec<AxisPair>,
    pub y: Vec<AxisPair>,
    pub min_confidence: f64,
}

impl Default for AxisPolicy {
    fn default() -> Self {
        Self {
            x: alloc::vec![
                AxisPair::new("nose", "tail_base"),
                AxisPair::new("neck", "tail_base"),
                AxisPair::new("nose", "hip_midpoint"),
            ],
            y: alloc::vec![
                AxisPair::new("left_shoulder", "right_shoulder"),
                AxisPair::new("left_hip", "right_hip"),
            ],
            min_confidence: DEFAULT_MIN_CONFIDENCE,
        }
    }
}

/// Where an axis of a frame came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AxisSource {
    Pair {
        from: String,
        to: String,
    },
    /// Principal axis of the landmark cloud, used when no pair was reliable.
    PcaFallback,
    /// Plain PCA frame of a vertex cloud.
    Pca,
    /// Derived from the other two axes.
    Derived,
}

impl fmt::Display for AxisSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AxisSource::Pair { from, to } => write!(f, "{from}/{to}"),
            AxisSource::PcaFallback => f.write_str("pca_fallback"),
            AxisSource::Pca => f.write_str("pca"),
            AxisSource::Derived => f.write_str("derived"),
        }
    }
}

impl AxisSource {
    /// Inverse of the `Display` form.
    pub fn parse(tag: &str) -> Self {
        match tag {
            "pca_fallback" => AxisSource::PcaFallback,
            "pca" => AxisSource::Pca,
            "derived" => AxisSource::Derived,
            other => match other.split_once('/') {
                Some((from, to)) => AxisSource::Pair {
                    from: from.to_string(),
                    to: to.to_string(),
                },
                None => AxisSource::Pair {
                    from: other.to_string(),
                    to: String::new(),
                },
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnatomicalFrame {
    rotation: Matrix3<f64>,
    pub x_source: AxisSource,
    pub y_source: AxisSource,
}

impl AnatomicalFrame {
    /// Wrap a rotation, checking orthonormality and handedness to 1e-9.
    pub fn from_rotation(
        rotation: Matrix3<f64>,
        x_source: AxisSource,
        y_source: AxisSource,
    ) -> Result<Self, FrameError> {
        if !linalg::is_rotation(&rotation, 1e-9) {
            return Err(FrameError::ParallelAxes);
        }
        Ok(Self {
            rotation,
            x_source,
            y_source,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            x_source: AxisSource::Derived,
            y_source: AxisSource::Derived,
        }
    }

    /// Columns are the x, y and z axes in world coordinates.
    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn axis(&self, index: usize) -> Vector3<f64> {
        self.rotation.column(index).into_owned()
    }

    /// The same frame expressed after a world rotation `q`.
    pub fn rotated(&self, q: &Matrix3<f64>) -> Self {
        Self {
            rotation: q * self.rotation,
            x_source: self.x_source.clone(),
            y_source: self.y_source.clone(),
        }
    }
}

/// Gram-Schmidt completion of two raw directions into a proper rotation.
pub fn orthonormalize(
    x_raw: &Vector3<f64>,
    y_raw: &Vector3<f64>,
) -> Result<AnatomicalFrame, FrameError> {
    let (xn, yn) = (x_raw.norm(), y_raw.norm());
    if !(xn > 0.0 && yn > 0.0) || !xn.is_finite() || !yn.is_finite() {
        return Err(FrameError::ParallelAxes);
    }
    let x = x_raw / xn;
    let cross = x.cross(&(y_raw / yn));
    if cross.norm() < PARALLEL_TOL_RAD.sin() {
        return Err(FrameError::ParallelAxes);
    }
    let z = cross.normalize();
    let y = z.cross(&x);
    Ok(AnatomicalFrame {
        rotation: Matrix3::from_columns(&[x, y, z]),
        x_source: AxisSource::Derived,
        y_source: AxisSource::Derived,
    })
}

struct LandmarkIndex<'a> {
    landmarks: &'a [Landmark3D],
    min_confidence: f64,
}

impl LandmarkIndex<'_> {
    fn get(&self, name: &str) -> Option<&Landmark3D> {
        self.landmarks.iter().find(|l| l.name == name)
    }

    /// Position of a reliable landmark or synthesized midpoint.
    fn reliable(&self, name: &str) -> Option<Vector3<f64>> {
        if let Some(l) = self.get(name) {
            return l.is_reliable(self.min_confidence).then_some(l.position);
        }
        let part = name.strip_suffix("_midpoint")?;
        let left = self.reliable(&format!("left_{part}"))?;
        let right = self.reliable(&format!("right_{part}"))?;
        Some((left + right) * 0.5)
    }

    fn pair(&self, pair: &AxisPair) -> PairLookup {
        match (self.reliable(&pair.from), self.reliable(&pair.to)) {
            (Some(a), Some(b)) => {
                let d = b - a;
                if d.norm() <= COINCIDENT_TOL {
                    PairLookup::Coincident
                } else {
                    PairLookup::Direction(d)
                }
            }
            _ => PairLookup::Unreliable,
        }
    }
}

enum PairLookup {
    Direction(Vector3<f64>),
    Coincident,
    Unreliable,
}

fn first_pair(
    index: &LandmarkIndex<'_>,
    pairs: &[AxisPair],
    accept: impl Fn(&Vector3<f64>) -> bool,
) -> (Option<(Vector3<f64>, AxisSource)>, bool) {
    let mut saw_coincident = false;
    for pair in pairs {
        match index.pair(pair) {
            PairLookup::Direction(d) if accept(&d) => {
                let source = AxisSource::Pair {
                    from: pair.from.clone(),
                    to: pair.to.clone(),
                };
                return (Some((d, source)), saw_coincident);
            }
            PairLookup::Coincident => saw_coincident = true,
            _ => {}
        }
    }
    (None, saw_coincident)
}

fn expand_name(name: &str) -> Vec<String> {
    match name.strip_suffix("_midpoint") {
        Some(part) => alloc::vec![format!("left_{part}"), format!("right_{part}")],
        None => alloc::vec![name.to_string()],
    }
}

/// Anterior/posterior landmark names implied by the x candidates, in policy order.
fn sign_hints(policy: &AxisPolicy) -> (Vec<String>, Vec<String>) {
    let mut anterior = Vec::new();
    let mut posterior = Vec::new();
    for pair in &policy.x {
        for n in expand_name(&pair.from) {
            if !anterior.contains(&n) {
                anterior.push(n);
            }
        }
        for n in expand_name(&pair.to) {
            if !posterior.contains(&n) {
                posterior.push(n);
            }
        }
    }
    (anterior, posterior)
}

fn pca_fallback_x(
    landmarks: &[Landmark3D],
    index: &LandmarkIndex<'_>,
    policy: &AxisPolicy,
) -> Option<Vector3<f64>> {
    if landmarks.len() < 2 {
        return None;
    }
    let points: Vec<Vector3<f64>> = landmarks.iter().map(|l| l.position).collect();
    let centroid = linalg::mean(&points);
    let (values, vectors) = linalg::sorted_eigen(&linalg::covariance(&points));
    if !(values[0] > 0.0) {
        return None;
    }
    let axis = vectors[0];
    let (anterior, posterior) = sign_hints(policy);
    // x points posterior: away from an anterior landmark, towards a posterior one.
    let hint = anterior
        .iter()
        .find_map(|n| index.reliable(n).map(|p| centroid - p))
        .or_else(|| {
            posterior
                .iter()
                .find_map(|n| index.reliable(n).map(|p| p - centroid))
        })?;
    let dot = axis.dot(&hint);
    if dot.abs() <= COINCIDENT_TOL {
        return None;
    }
    Some(if dot < 0.0 { -axis } else { axis })
}

/// Lateral fallback: the principal direction of the landmark cloud
/// orthogonal to `x`, signed towards any reliable `right_*` landmark.
fn pca_fallback_y(
    landmarks: &[Landmark3D],
    x: &Vector3<f64>,
    policy: &AxisPolicy,
) -> Option<Vector3<f64>> {
    let xn = x.normalize();
    let points: Vec<Vector3<f64>> = landmarks
        .iter()
        .map(|l| l.position - xn * xn.dot(&l.position))
        .collect();
    if points.len() < 2 {
        return None;
    }
    let centroid = linalg::mean(&points);
    let (values, vectors) = linalg::sorted_eigen(&linalg::covariance(&points));
    if !(values[0] > 0.0) {
        return None;
    }
    let mut axis = vectors[0];
    let lateral = landmarks.iter().find_map(|l| {
        if !l.is_reliable(policy.min_confidence) {
            return None;
        }
        let p = l.position - xn * xn.dot(&l.position);
        if l.name.starts_with("right_") {
            Some(p - centroid)
        } else if l.name.starts_with("left_") {
            Some(centroid - p)
        } else {
            None
        }
    });
    if let Some(h) = lateral {
        if axis.dot(&h) < 0.0 {
            axis = -axis;
        }
    }
    Some(axis)
}

/// Build the anatomical frame from named landmarks with the policy's fallbacks.
pub fn build_anatomical_frame(
    landmarks: &[Landmark3D],
    policy: &AxisPolicy,
) -> Result<AnatomicalFrame, FrameError> {
    for l in landmarks {
        l.validate()?;
    }
    if landmarks.len() < 2 {
        return Err(FrameError::InsufficientLandmarks);
    }
    let index = LandmarkIndex {
        landmarks,
        min_confidence: policy.min_confidence,
    };

    let (x_found, x_coincident) = first_pair(&index, &policy.x, |_| true);
    let (x_raw, x_source) = match x_found {
        Some(found) => found,
        None => match pca_fallback_x(landmarks, &index, policy) {
            Some(axis) => (axis, AxisSource::PcaFallback),
            None if x_coincident => return Err(FrameError::DegenerateAxis { axis: 'x' }),
            None => return Err(FrameError::InsufficientLandmarks),
        },
    };

    let xn = x_raw.normalize();
    let not_parallel = |d: &Vector3<f64>| xn.cross(&d.normalize()).norm() >= PARALLEL_TOL_RAD.sin();
    let (y_found, y_coincident) = first_pair(&index, &policy.y, not_parallel);
    let (y_raw, y_source) = match y_found {
        Some(found) => found,
        None => match pca_fallback_y(landmarks, &x_raw, policy) {
            Some(axis) => (axis, AxisSource::PcaFallback),
            None if y_coincident => return Err(FrameError::DegenerateAxis { axis: 'y' }),
            None => return Err(FrameError::InsufficientLandmarks),
        },
    };

    let mut frame = orthonormalize(&x_raw, &y_raw)?;
    frame.x_source = x_source;
    frame.y_source = y_source;
    Ok(frame)
}

/// PCA frame of a vertex cloud: columns are covariance eigenvectors by
/// descending eigenvalue, each with its largest-magnitude component made
/// positive, and the last column flipped if needed for `det = +1`.
pub fn pca_frame(vertices: &[Vector3<f64>]) -> Result<AnatomicalFrame, FrameError> {
    if vertices.len() < 3 || vertices.iter().any(|v| v.iter().any(|c| !c.is_finite())) {
        return Err(FrameError::DegenerateCloud);
    }
    let (values, mut vectors) = linalg::sorted_eigen(&linalg::covariance(vertices));
    if !(values[0] > 0.0) || values[1] <= values[0] * 1e-12 {
        return Err(FrameError::DegenerateCloud);
    }
    for v in vectors.iter_mut() {
        let mut largest = 0;
        for k in 1..3 {
            if v[k].abs() > v[largest].abs() {
                largest = k;
            }
        }
        if v[largest] < 0.0 {
            *v = -*v;
        }
    }
    let mut rotation = Matrix3::from_columns(&vectors);
    if rotation.determinant() < 0.0 {
        rotation.column_mut(2).neg_mut();
    }
    Ok(AnatomicalFrame {
        rotation,
        x_source: AxisSource::Pca,
        y_source: AxisSource::Pca,
    })
}
