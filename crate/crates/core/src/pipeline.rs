//! End-to-end labelling of one scene:
//! frame -> box -> EPnP/RANSAC -> refinement -> visibility -> degeneracy.

use alloc::vec::Vec;

use nalgebra::{Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::evaluate::{
    self, detect_degenerate, Degeneracy, EvalError, DEFAULT_DEGENERATE_AREA_FRAC,
};
use crate::frame::{
    build_anatomical_frame, pca_frame, AnatomicalFrame, AxisPolicy, AxisSource, FrameError,
};
use crate::obox::{generate_obox, BoxError, OrientedBox, DEFAULT_EPSILON};
use crate::pose::{
    epnp, epnp_ransac, keypoint_covariance, project, refine_pose, CameraPose, Correspondence,
    DegeneracyGuard, PoseError, RansacParams, RansacResult, RefineOptions, UncertaintyParams,
};
use crate::scene::{Scene, SceneError};
use crate::visibility::{visibility_report, FaceVisibility, VisibilityError};

#[derive(Debug, Clone, PartialEq)]
pub struct LabelConfig {
    pub policy: AxisPolicy,
    pub epsilon: f64,
    pub ransac: RansacParams,
    pub uncertainty: UncertaintyParams,
    pub refine: RefineOptions,
    pub degenerate_area_frac: f64,
    /// Run the joint refinement; `false` gives the EPnP-only baseline.
    pub refine_enabled: bool,
    pub seed: u64,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self {
            policy: AxisPolicy::default(),
            epsilon: DEFAULT_EPSILON,
            ransac: RansacParams::default(),
            uncertainty: UncertaintyParams::default(),
            refine: RefineOptions::default(),
            degenerate_area_frac: DEFAULT_DEGENERATE_AREA_FRAC,
            refine_enabled: true,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabelError {
    #[error("scene: {0}")]
    Scene(#[from] SceneError),
    #[error("frame: {0}")]
    Frame(#[from] FrameError),
    #[error("obox: {0}")]
    Box(#[from] BoxError),
    #[error("epnp_ransac: {0}")]
    Initialization(PoseError),
    #[error("refine_pose: {0}")]
    Refinement(PoseError),
    #[error("visibility: {0}")]
    Visibility(#[from] VisibilityError),
    #[error("evaluate: {0}")]
    Evaluate(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineSummary {
    pub iterations: usize,
    pub restarted: bool,
    pub initial_cost: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelOutcome {
    pub frame: AnatomicalFrame,
    pub obox: OrientedBox,
    /// EPnP/RANSAC pose before refinement.
    pub initial_pose: CameraPose,
    pub pose: CameraPose,
    pub inlier_count: usize,
    pub ransac_iterations: usize,
    /// RANSAC found no consensus and the all-point EPnP pose was used.
    pub consensus_failed: bool,
    /// `None` when refinement is disabled or both branches were degenerate.
    pub refinement: Option<RefineSummary>,
    /// The refined branches all failed the degeneracy guard and the initial pose was kept.
    pub refinement_rejected: bool,
    pub projected_corners: [Vector2<f64>; 8],
    pub corner_depths: [f64; 8],
    /// Empty when the pose is degenerate and the camera sits inside the box.
    pub faces: Vec<FaceVisibility>,
    pub degeneracy: Degeneracy,
    pub reprojection_error: f64,
}

fn frame_for(scene: &Scene, policy: &AxisPolicy) -> Result<AnatomicalFrame, LabelError> {
    match build_anatomical_frame(&scene.landmarks(), policy) {
        Ok(f) => Ok(f),
        Err(FrameError::InsufficientLandmarks) => {
            let mut f = pca_frame(scene.mesh.as_slice())?;
            f.x_source = AxisSource::Pca;
            f.y_source = AxisSource::Pca;
            Ok(f)
        }
        Err(e) => Err(e.into()),
    }
}

/// Pose initialization. With fewer than four visible keypoints the occluded
/// ones are admitted too, since their pixel estimates are still informative.
fn initialize(
    corrs: &[Correspondence],
    scene: &Scene,
    config: &LabelConfig,
) -> Result<(RansacResult, bool), LabelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let visible = corrs.iter().filter(|c| c.visible).count();
    let admitted: Vec<Correspondence>;
    let used = if visible < config.ransac.sample_size.max(4) {
        admitted = corrs
            .iter()
            .map(|c| Correspondence {
                visible: true,
                ..c.clone()
            })
            .collect();
        &admitted
    } else {
        corrs
    };
    match epnp_ransac(used, &scene.intrinsics, &config.ransac, &mut rng) {
        Ok(r) => Ok((r, false)),
        // no sample explains the data: keep the all-point solution and let
        // refinement and the degeneracy check judge it
        Err(PoseError::NoConsensus(_)) => {
            let visible: Vec<Correspondence> = used.iter().filter(|c| c.visible).cloned().collect();
            let pose = epnp(&visible, &scene.intrinsics).map_err(LabelError::Initialization)?;
            Ok((
                RansacResult {
                    pose,
                    inliers: alloc::vec![false; used.len()],
                    iterations: config.ransac.max_iters,
                },
                true,
            ))
        }
        Err(e) => Err(LabelError::Initialization(e)),
    }
}

pub fn label_scene(scene: &Scene, config: &LabelConfig) -> Result<LabelOutcome, LabelError> {
    scene.validate()?;
    let frame = frame_for(scene, &config.policy)?;
    let obox = generate_obox(&scene.mesh, &frame, config.epsilon)?;
    let corrs = scene.correspondences();
    let k = &scene.intrinsics;

    let (init, consensus_failed) = initialize(&corrs, scene, config)?;
    let mut pose = init.pose.clone();
    let mut refinement = None;
    let mut refinement_rejected = false;
    if config.refine_enabled {
        let covs: Vec<_> = corrs
            .iter()
            .map(|c| keypoint_covariance(c, k, &config.uncertainty))
            .collect();
        let opts = RefineOptions {
            guard: DegeneracyGuard {
                extent_points: obox.corners_world.to_vec(),
                mask_area: Some(scene.effective_mask_area()),
                area_frac: config.degenerate_area_frac,
            },
            ..config.refine.clone()
        };
        match refine_pose(&init.pose, &corrs, &covs, &scene.mask, k, &opts) {
            Ok(report) => {
                refinement = Some(RefineSummary {
                    iterations: report.iterations,
                    restarted: report.restarted,
                    initial_cost: report.initial_cost,
                    cost: report.cost,
                });
                pose = report.pose;
            }
            Err(PoseError::DegenerateResult) => refinement_rejected = true,
            Err(e) => return Err(LabelError::Refinement(e)),
        }
    }

    let projections = project(&pose, k, &obox.corners_world);
    let degeneracy = detect_degenerate(
        &projections,
        scene.effective_mask_area(),
        config.degenerate_area_frac,
    );
    let faces = match visibility_report(&obox, &pose, k) {
        Ok(f) => f,
        Err(_) if degeneracy.degenerate => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    let reprojection_error = match evaluate::reprojection_error(&pose, &corrs, k) {
        Ok(e) => e,
        Err(EvalError::NoVisibleKeypoints) => {
            let all: Vec<_> = corrs
                .iter()
                .map(|c| Correspondence {
                    visible: true,
                    ..c.clone()
                })
                .collect();
            evaluate::reprojection_error(&pose, &all, k)?
        }
        Err(e) => return Err(e.into()),
    };

    Ok(LabelOutcome {
        frame,
        obox,
        inlier_count: init.inlier_count(),
        ransac_iterations: init.iterations,
        consensus_failed,
        initial_pose: init.pose,
        pose,
        refinement,
        refinement_rejected,
        projected_corners: core::array::from_fn(|i| projections[i].pixel),
        corner_depths: core::array::from_fn(|i| projections[i].depth),
        faces,
        degeneracy,
        reprojection_error,
    })
}

/// Box corners projected under an arbitrary pose.
pub fn project_corners(
    obox: &OrientedBox,
    pose: &CameraPose,
    k: &crate::pose::Intrinsics,
) -> [Vector2<f64>; 8] {
    let world: [Vector3<f64>; 8] = obox.corners_world;
    core::array::from_fn(|i| k.project_camera(&pose.to_camera(&world[i])))
}
