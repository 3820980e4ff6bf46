//! Stability and accuracy metrics: geodesic rotation variation, alignment
//! variation, keypoint-noise sweeps, reprojection error and degenerate
//! projection detection.

use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::frame::{build_anatomical_frame, pca_frame, AnatomicalFrame, AxisPolicy, FrameError};
use crate::linalg;
use crate::pose::{CameraPose, Correspondence, Intrinsics, Projection};
use crate::scene::Keypoint;

/// Default noise levels in pixels.
pub const DEFAULT_SIGMAS: [f64; 5] = [0.5, 1.0, 2.0, 3.0, 4.0];

/// A box whose projected hull covers less than this fraction of the mask is degenerate.
pub const DEFAULT_DEGENERATE_AREA_FRAC: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("matrix is not a proper rotation")]
    NotARotation,
    #[error("zero-length alignment vector")]
    ZeroVector,
    #[error("no visible keypoints")]
    NoVisibleKeypoints,
    #[error("invalid sweep configuration: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

/// Geodesic angle in degrees between two rotations, `arccos((tr(R1 R2ᵀ) - 1) / 2)`.
///
/// Evaluated as `atan2(sin, cos)` of the relative rotation, which equals the
/// clamped arccos but keeps full precision near 0° and 180°.
pub fn rotation_variation(r1: &Matrix3<f64>, r2: &Matrix3<f64>) -> Result<f64, EvalError> {
    if !linalg::is_rotation(r1, 1e-6) || !linalg::is_rotation(r2, 1e-6) {
        return Err(EvalError::NotARotation);
    }
    let rd = r1 * r2.transpose();
    let cos = ((rd.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let vee = Vector3::new(
        rd[(2, 1)] - rd[(1, 2)],
        rd[(0, 2)] - rd[(2, 0)],
        rd[(1, 0)] - rd[(0, 1)],
    );
    let sin = (0.5 * vee.norm()).min(1.0);
    Ok(sin.atan2(cos).to_degrees())
}

/// Relative rotation split into angles about the anatomical axes, degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariationComponents {
    /// About x (anterior-posterior).
    pub anterior_posterior: f64,
    /// About y (left-right).
    pub left_right: f64,
    /// About z (dorsal-ventral).
    pub dorsal_ventral: f64,
    pub gimbal_lock: bool,
}

impl VariationComponents {
    pub fn as_array(&self) -> [f64; 3] {
        [
            self.anterior_posterior,
            self.left_right,
            self.dorsal_ventral,
        ]
    }
}

/// Intrinsic XYZ Euler angles of `R_d` expressed in the basis of `frame`,
/// so that `Fᵀ R_d F = Rx(a) Ry(b) Rz(c)`.
pub fn decompose_variation(
    rd: &Matrix3<f64>,
    frame: &AnatomicalFrame,
) -> Result<VariationComponents, EvalError> {
    if !linalg::is_rotation(rd, 1e-6) {
        return Err(EvalError::NotARotation);
    }
    let f = frame.rotation();
    let m = f.transpose() * rd * f;
    let sb = m[(0, 2)].clamp(-1.0, 1.0);
    let b = sb.asin();
    let gimbal_lock = (b.abs() - core::f64::consts::FRAC_PI_2).abs() < 1e-6;
    let (a, c) = if gimbal_lock {
        // only a +- c is observable; put it all on a
        (m[(2, 1)].atan2(m[(1, 1)]), 0.0)
    } else {
        ((-m[(1, 2)]).atan2(m[(2, 2)]), (-m[(0, 1)]).atan2(m[(0, 0)]))
    };
    Ok(VariationComponents {
        anterior_posterior: a.to_degrees(),
        left_right: b.to_degrees(),
        dorsal_ventral: c.to_degrees(),
        gimbal_lock,
    })
}

/// `1 - cos(theta)` between two directions, clamped to `[0, 2]`.
pub fn alignment_variation(
    v_ideal: &Vector3<f64>,
    v_actual: &Vector3<f64>,
) -> Result<f64, EvalError> {
    let (a, b) = (v_ideal.norm(), v_actual.norm());
    if !(a > 0.0 && b > 0.0) {
        return Err(EvalError::ZeroVector);
    }
    Ok((1.0 - v_ideal.dot(v_actual) / (a * b)).clamp(0.0, 2.0))
}

/// Adds `N(0, sigma²)` noise to each pixel coordinate and the back-projected
/// equivalent `N(0, (sigma * depth / focal)²)` to each 3D coordinate, with
/// depth taken under `pose`.
pub fn perturb_keypoints<R: Rng + ?Sized>(
    corrs: &[Correspondence],
    sigma: f64,
    pose: &CameraPose,
    k: &Intrinsics,
    rng: &mut R,
) -> Vec<Correspondence> {
    let focal = k.focal();
    corrs
        .iter()
        .map(|c| {
            let mut out = c.clone();
            let depth = pose.to_camera(&c.point3d).z.abs();
            let s3 = sigma * depth / focal;
            for i in 0..2 {
                let n: f64 = StandardNormal.sample(rng);
                out.point2d[i] += sigma * n;
            }
            for i in 0..3 {
                let n: f64 = StandardNormal.sample(rng);
                out.point3d[i] += s3 * n;
            }
            out
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSweepConfig {
    pub sigmas: Vec<f64>,
    pub trials_per_sigma: usize,
    pub seed: u64,
}

impl Default for NoiseSweepConfig {
    fn default() -> Self {
        Self {
            sigmas: DEFAULT_SIGMAS.to_vec(),
            trials_per_sigma: 100,
            seed: 42,
        }
    }
}

impl NoiseSweepConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.sigmas.is_empty() || self.sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(EvalError::InvalidConfig(
                "sigmas must be finite and non-negative",
            ));
        }
        if self.trials_per_sigma == 0 {
            return Err(EvalError::InvalidConfig("trials must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameMethod {
    Anatomical,
    Pca,
}

impl FrameMethod {
    pub fn label(self) -> &'static str {
        match self {
            FrameMethod::Anatomical => "anatomical",
            FrameMethod::Pca => "pca",
        }
    }
}

/// Variation of one frame under one perturbation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialMeasure {
    pub rotation_deg: f64,
    /// Alignment variation of the x, y and z axes.
    pub alignment: [f64; 3],
    /// Absolute per-axis decomposition of the rotation difference, degrees.
    pub components: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaStats {
    pub sigma: f64,
    pub trials: usize,
    pub mean_rotation_deg: f64,
    pub max_rotation_deg: f64,
    /// Standard error of the mean rotation variation.
    pub stderr_rotation_deg: f64,
    /// Mean alignment variation averaged over the three axes.
    pub mean_alignment: f64,
    pub mean_alignment_per_axis: [f64; 3],
    /// Mean absolute anterior-posterior, left-right, dorsal-ventral components.
    pub mean_components_deg: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityResult {
    pub method: FrameMethod,
    pub per_sigma: Vec<SigmaStats>,
}

fn measure(
    reference: &AnatomicalFrame,
    noisy: &AnatomicalFrame,
) -> Result<TrialMeasure, EvalError> {
    let rotation_deg = rotation_variation(noisy.rotation(), reference.rotation())?;
    let rd = noisy.rotation() * reference.rotation().transpose();
    let comps = decompose_variation(&rd, reference)?;
    let mut alignment = [0.0; 3];
    for (k, a) in alignment.iter_mut().enumerate() {
        *a = alignment_variation(&reference.axis(k), &noisy.axis(k))?;
    }
    Ok(TrialMeasure {
        rotation_deg,
        alignment,
        components: comps.as_array().map(f64::abs),
    })
}

/// Everything a sweep needs about the scene.
#[derive(Debug, Clone, Copy)]
pub struct SweepInput<'a> {
    pub keypoints: &'a [Keypoint],
    /// Camera used to turn pixel noise into 3D noise.
    pub pose: &'a CameraPose,
    pub intrinsics: &'a Intrinsics,
    pub policy: &'a AxisPolicy,
}

struct Frames {
    anatomical: AnatomicalFrame,
    pca: AnatomicalFrame,
}

fn frames_of(
    keypoints: &[Keypoint],
    corrs: &[Correspondence],
    policy: &AxisPolicy,
) -> Result<Frames, EvalError> {
    let landmarks: Vec<_> = keypoints
        .iter()
        .zip(corrs)
        .map(|(kp, c)| {
            let mut l = kp.landmark();
            l.position = c.point3d;
            l
        })
        .collect();
    let points: Vec<_> = corrs.iter().map(|c| c.point3d).collect();
    Ok(Frames {
        anatomical: build_anatomical_frame(&landmarks, policy)?,
        pca: pca_frame(&points)?,
    })
}

/// Independent RNG stream for one (sigma, trial) cell.
pub fn trial_rng(seed: u64, sigma_index: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((sigma_index as u64) << 32) | trial as u64);
    rng
}

/// One perturbation trial, returning the anatomical and PCA measures.
///
/// The PCA baseline is fitted to the same perturbed 3D keypoints the
/// anatomical frame is built from.
pub fn sweep_trial(
    input: &SweepInput<'_>,
    sigma: f64,
    sigma_index: usize,
    trial: usize,
    seed: u64,
) -> Result<(TrialMeasure, TrialMeasure), EvalError> {
    let corrs: Vec<Correspondence> = input
        .keypoints
        .iter()
        .map(Keypoint::correspondence)
        .collect();
    let reference = frames_of(input.keypoints, &corrs, input.policy)?;
    let mut rng = trial_rng(seed, sigma_index, trial);
    let noisy_corrs = perturb_keypoints(&corrs, sigma, input.pose, input.intrinsics, &mut rng);
    let noisy = frames_of(input.keypoints, &noisy_corrs, input.policy)?;
    Ok((
        measure(&reference.anatomical, &noisy.anatomical)?,
        measure(&reference.pca, &noisy.pca)?,
    ))
}

/// Summary statistics over the trials of one sigma.
pub fn aggregate(sigma: f64, measures: &[TrialMeasure]) -> SigmaStats {
    let n = measures.len().max(1) as f64;
    let mean_rotation = measures.iter().map(|m| m.rotation_deg).sum::<f64>() / n;
    let var = if measures.len() > 1 {
        measures
            .iter()
            .map(|m| (m.rotation_deg - mean_rotation).powi(2))
            .sum::<f64>()
            / (n - 1.0)
    } else {
        0.0
    };
    let mut per_axis = [0.0; 3];
    let mut comps = [0.0; 3];
    for m in measures {
        for k in 0..3 {
            per_axis[k] += m.alignment[k] / n;
            comps[k] += m.components[k] / n;
        }
    }
    SigmaStats {
        sigma,
        trials: measures.len(),
        mean_rotation_deg: mean_rotation,
        max_rotation_deg: measures.iter().map(|m| m.rotation_deg).fold(0.0, f64::max),
        stderr_rotation_deg: (var / n).sqrt(),
        mean_alignment: (per_axis[0] + per_axis[1] + per_axis[2]) / 3.0,
        mean_alignment_per_axis: per_axis,
        mean_components_deg: comps,
    }
}

/// Perturb, rebuild both frames, and compare them with the unperturbed ones
/// for every sigma and trial. Returns `(anatomical, pca)`.
pub fn stability_sweep(
    input: &SweepInput<'_>,
    config: &NoiseSweepConfig,
) -> Result<(StabilityResult, StabilityResult), EvalError> {
    config.validate()?;
    let mut anatomical = StabilityResult {
        method: FrameMethod::Anatomical,
        per_sigma: Vec::new(),
    };
    let mut pca = StabilityResult {
        method: FrameMethod::Pca,
        per_sigma: Vec::new(),
    };
    for (si, &sigma) in config.sigmas.iter().enumerate() {
        let mut a = Vec::with_capacity(config.trials_per_sigma);
        let mut p = Vec::with_capacity(config.trials_per_sigma);
        for trial in 0..config.trials_per_sigma {
            let (ma, mp) = sweep_trial(input, sigma, si, trial, config.seed)?;
            a.push(ma);
            p.push(mp);
        }
        anatomical.per_sigma.push(aggregate(sigma, &a));
        pca.per_sigma.push(aggregate(sigma, &p));
    }
    Ok((anatomical, pca))
}

/// Mean pixel distance between projected and observed visible keypoints.
pub fn reprojection_error(
    pose: &CameraPose,
    corrs: &[Correspondence],
    k: &Intrinsics,
) -> Result<f64, EvalError> {
    let errs: Vec<f64> = corrs
        .iter()
        .filter(|c| c.visible)
        .map(|c| (k.project_camera(&pose.to_camera(&c.point3d)) - c.point2d).norm())
        .collect();
    if errs.is_empty() {
        return Err(EvalError::NoVisibleKeypoints);
    }
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegenerateReason {
    TinyArea,
    BehindCamera,
}

impl DegenerateReason {
    pub fn label(self) -> &'static str {
        match self {
            DegenerateReason::TinyArea => "tiny_area",
            DegenerateReason::BehindCamera => "behind_camera",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        match label {
            "tiny_area" => Some(Self::TinyArea),
            "behind_camera" => Some(Self::BehindCamera),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Degeneracy {
    pub degenerate: bool,
    pub reason: Option<DegenerateReason>,
    /// Convex-hull area of the projected points in px².
    pub hull_area: f64,
}

impl Degeneracy {
    pub(crate) fn behind_camera() -> Self {
        Self {
            degenerate: true,
            reason: Some(DegenerateReason::BehindCamera),
            hull_area: 0.0,
        }
    }
}

/// Convex-hull area of projected pixels.
pub fn hull_area(projected: &[Projection]) -> f64 {
    let pts: Vec<[f64; 2]> = projected.iter().map(|p| [p.pixel.x, p.pixel.y]).collect();
    linalg::shoelace(&linalg::convex_hull(&pts))
}

/// Degenerate iff any point is behind the camera or the hull of the
/// projections covers less than `area_frac` of `mask_area`.
pub fn detect_degenerate(projected: &[Projection], mask_area: f64, area_frac: f64) -> Degeneracy {
    if projected.is_empty() || projected.iter().any(|p| !p.in_front()) {
        return Degeneracy::behind_camera();
    }
    let hull_area = hull_area(projected);
    let tiny = !(hull_area >= area_frac * mask_area);
    Degeneracy {
        degenerate: tiny,
        reason: tiny.then_some(DegenerateReason::TinyArea),
        hull_area,
    }
}
