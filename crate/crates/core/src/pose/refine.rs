//! Joint keypoint + mask-box refinement.
//!
//! The residual vector has `2K + 4` entries: `sqrt(lambda) (x_i - x̂_i) / sigma_i`
//! for every keypoint coordinate, then `sqrt(1 - lambda)` times the four
//! coordinate differences between the projected keypoint bounds and the mask
//! bounds. Its squared norm is the squared analogue of
//! `lambda * sum(d_mahalanobis) + (1 - lambda) * d_bbox`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Matrix3, SMatrix, SVector, Vector3};

use super::{
    project, CameraPose, Correspondence, Intrinsics, KeypointCovariance, MaskBBox, PoseError,
};
use crate::evaluate::{detect_degenerate, Degeneracy, DEFAULT_DEGENERATE_AREA_FRAC};
use crate::linalg;

pub type PoseParams = SVector<f64, 6>;

/// What a refined pose is checked against before it is accepted.
#[derive(Debug, Clone, PartialEq)]
pub struct DegeneracyGuard {
    /// Points that must project in front of the camera with a non-tiny hull
    /// (typically the box corners). Empty means the correspondences' 3D points.
    pub extent_points: Vec<Vector3<f64>>,
    /// Mask area in px²; `None` uses the mask bounding-box area.
    pub mask_area: Option<f64>,
    pub area_frac: f64,
}

impl Default for DegeneracyGuard {
    fn default() -> Self {
        Self {
            extent_points: Vec::new(),
            mask_area: None,
            area_frac: DEFAULT_DEGENERATE_AREA_FRAC,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOptions {
    pub lambda: f64,
    pub xtol: f64,
    pub ftol: f64,
    pub gtol: f64,
    pub max_iters: usize,
    pub guard: DegeneracyGuard,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self {
            lambda: 0.8,
            xtol: 1e-8,
            ftol: 1e-8,
            gtol: 1e-8,
            max_iters: 200,
            guard: DegeneracyGuard::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineReport {
    pub pose: CameraPose,
    /// Half the squared residual norm at the returned pose.
    pub cost: f64,
    pub initial_cost: f64,
    pub iterations: usize,
    /// The first branch was degenerate and the depth-flipped restart won.
    pub restarted: bool,
}

pub fn pose_params(pose: &CameraPose) -> PoseParams {
    let w = linalg::so3_log(pose.rotation());
    PoseParams::new(
        w.x,
        w.y,
        w.z,
        pose.translation.x,
        pose.translation.y,
        pose.translation.z,
    )
}

pub fn pose_from_params(p: &PoseParams) -> CameraPose {
    CameraPose {
        rotation: linalg::so3_exp(&Vector3::new(p[0], p[1], p[2])),
        translation: Vector3::new(p[3], p[4], p[5]),
        refined: false,
    }
}

fn check_inputs(
    corrs: &[Correspondence],
    covs: &[KeypointCovariance],
    lambda: f64,
) -> Result<(), PoseError> {
    if corrs.is_empty() {
        return Err(PoseError::EmptyCorrespondences);
    }
    if corrs.len() != covs.len() {
        return Err(PoseError::CovarianceMismatch {
            corrs: corrs.len(),
            covs: covs.len(),
        });
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(PoseError::InvalidParameter("lambda outside [0, 1]"));
    }
    if covs.iter().any(|c| !(c.sigma_sq > 0.0)) {
        return Err(PoseError::InvalidParameter(
            "non-positive keypoint variance",
        ));
    }
    Ok(())
}

fn safe_depth(z: f64) -> f64 {
    if z.abs() < 1e-9 {
        if z < 0.0 {
            -1e-9
        } else {
            1e-9
        }
    } else {
        z
    }
}

struct Evaluation {
    residuals: DVector<f64>,
    jacobian: Option<DMatrix<f64>>,
}

fn evaluate(
    params: &PoseParams,
    corrs: &[Correspondence],
    covs: &[KeypointCovariance],
    mask: &MaskBBox,
    k: &Intrinsics,
    lambda: f64,
    with_jacobian: bool,
) -> Evaluation {
    let n = corrs.len();
    let w = Vector3::new(params[0], params[1], params[2]);
    let t = Vector3::new(params[3], params[4], params[5]);
    let r = linalg::so3_exp(&w);
    let jl = linalg::so3_left_jacobian(&w);
    let (wk, wb) = (lambda.sqrt(), (1.0 - lambda).sqrt());

    let mut res = DVector::zeros(2 * n + 4);
    let mut jac = with_jacobian.then(|| DMatrix::zeros(2 * n + 4, 6));
    let mut pixels = Vec::with_capacity(n);
    // d(u, v)/d(params) per keypoint
    let mut pixel_jac: Vec<SMatrix<f64, 2, 6>> =
        Vec::with_capacity(if with_jacobian { n } else { 0 });

    for (i, (c, cov)) in corrs.iter().zip(covs).enumerate() {
        let rx = r * c.point3d;
        let pc = rx + t;
        let z = safe_depth(pc.z);
        let u = k.fx * pc.x / z + k.cx;
        let v = k.fy * pc.y / z + k.cy;
        pixels.push((u, v));
        let s = cov.sigma();
        res[2 * i] = wk * (c.point2d.x - u) / s;
        res[2 * i + 1] = wk * (c.point2d.y - v) / s;

        if let Some(jac) = jac.as_mut() {
            let dproj = SMatrix::<f64, 2, 3>::new(
                k.fx / z,
                0.0,
                -k.fx * pc.x / (z * z),
                0.0,
                k.fy / z,
                -k.fy * pc.y / (z * z),
            );
            let dpc_dw: Matrix3<f64> = -linalg::skew(&rx) * jl;
            let mut dp = SMatrix::<f64, 2, 6>::zeros();
            dp.fixed_view_mut::<2, 3>(0, 0).copy_from(&(dproj * dpc_dw));
            dp.fixed_view_mut::<2, 3>(0, 3).copy_from(&dproj);
            for col in 0..6 {
                jac[(2 * i, col)] = -wk * dp[(0, col)] / s;
                jac[(2 * i + 1, col)] = -wk * dp[(1, col)] / s;
            }
            pixel_jac.push(dp);
        }
    }

    // argmin/argmax keep the first index on ties
    let pick = |better: fn(f64, f64) -> bool, coord: usize| {
        let mut best = 0;
        for i in 1..n {
            let val = |j: usize| if coord == 0 { pixels[j].0 } else { pixels[j].1 };
            if better(val(i), val(best)) {
                best = i;
            }
        }
        best
    };
    let less = |a: f64, b: f64| a < b;
    let greater = |a: f64, b: f64| a > b;
    let extremes = [
        pick(less, 0),
        pick(less, 1),
        pick(greater, 0),
        pick(greater, 1),
    ];
    let mask_bounds = mask.as_array();
    for (e, &idx) in extremes.iter().enumerate() {
        let coord = e % 2;
        let value = if coord == 0 {
            pixels[idx].0
        } else {
            pixels[idx].1
        };
        res[2 * n + e] = wb * (value - mask_bounds[e]);
        if let Some(jac) = jac.as_mut() {
            for col in 0..6 {
                jac[(2 * n + e, col)] = wb * pixel_jac[idx][(coord, col)];
            }
        }
    }
    Evaluation {
        residuals: res,
        jacobian: jac,
    }
}

/// Residual vector of the joint objective at `params` (axis-angle, translation).
pub fn residuals(
    params: &PoseParams,
    corrs: &[Correspondence],
    covs: &[KeypointCovariance],
    mask: &MaskBBox,
    k: &Intrinsics,
    lambda: f64,
) -> Result<DVector<f64>, PoseError> {
    check_inputs(corrs, covs, lambda)?;
    Ok(evaluate(params, corrs, covs, mask, k, lambda, false).residuals)
}

/// Analytic Jacobian of [`residuals`] with respect to the six pose parameters.
pub fn residual_jacobian(
    params: &PoseParams,
    corrs: &[Correspondence],
    covs: &[KeypointCovariance],
    mask: &MaskBBox,
    k: &Intrinsics,
    lambda: f64,
) -> Result<DMatrix<f64>, PoseError> {
    check_inputs(corrs, covs, lambda)?;
    Ok(evaluate(params, corrs, covs, mask, k, lambda, true)
        .jacobian
        .expect("jacobian requested"))
}

struct LmOutcome {
    params: PoseParams,
    cost: f64,
    iterations: usize,
}

/// Damping relative to the (running maximum) diagonal of `JᵀJ`.
const INITIAL_DAMPING: f64 = 1e-3;

fn levenberg_marquardt(
    start: PoseParams,
    corrs: &[Correspondence],
    covs: &[KeypointCovariance],
    mask: &MaskBBox,
    k: &Intrinsics,
    opts: &RefineOptions,
) -> Result<LmOutcome, PoseError> {
    let cost_of = |p: &PoseParams| {
        0.5 * evaluate(p, corrs, covs, mask, k, opts.lambda, false)
            .residuals
            .norm_squared()
    };
    let mut x = start;
    let mut eval = evaluate(&x, corrs, covs, mask, k, opts.lambda, true);
    let mut cost = 0.5 * eval.residuals.norm_squared();
    if !cost.is_finite() {
        return Err(PoseError::InvalidParameter("non-finite initial cost"));
    }
    let mut mu = -1.0;
    let mut nu = 2.0;
    let mut scale = SVector::<f64, 6>::zeros();

    for iter in 1..=opts.max_iters {
        if cost == 0.0 {
            return Ok(LmOutcome {
                params: x,
                cost,
                iterations: iter - 1,
            });
        }
        let jac = eval.jacobian.as_ref().expect("jacobian");
        let a: SMatrix<f64, 6, 6> = SMatrix::from_fn(|r, c| jac.column(r).dot(&jac.column(c)));
        let g: SVector<f64, 6> = SVector::from_fn(|r, _| jac.column(r).dot(&eval.residuals));
        if g.amax() < opts.gtol {
            return Ok(LmOutcome {
                params: x,
                cost,
                iterations: iter - 1,
            });
        }
        for i in 0..6 {
            scale[i] = scale[i].max(a[(i, i)]).max(1e-12);
        }
        if mu < 0.0 {
            mu = INITIAL_DAMPING;
        }
        let mut damped = a;
        for i in 0..6 {
            damped[(i, i)] += mu * scale[i];
        }
        let Some(chol) = damped.cholesky() else {
            mu *= nu;
            nu *= 2.0;
            continue;
        };
        let step = chol.solve(&(-g));
        // step test in the scaled metric, so rotation and translation are comparable
        let d = scale.map(f64::sqrt);
        let small_step =
            step.component_mul(&d).norm() < opts.xtol * (opts.xtol + x.component_mul(&d).norm());
        let candidate = x + step;
        let new_cost = cost_of(&candidate);
        let predicted = -(g.dot(&step)) - 0.5 * (step.transpose() * a * step)[(0, 0)];

        if new_cost.is_finite() && new_cost < cost {
            let reduction = cost - new_cost;
            let rho = if predicted > 0.0 {
                reduction / predicted
            } else {
                0.0
            };
            x = candidate;
            let old_cost = cost;
            cost = new_cost;
            eval = evaluate(&x, corrs, covs, mask, k, opts.lambda, true);
            mu *= (1.0 / 3.0f64).max(1.0 - (2.0 * rho - 1.0).powi(3));
            nu = 2.0;
            if reduction < opts.ftol * old_cost || small_step {
                return Ok(LmOutcome {
                    params: x,
                    cost,
                    iterations: iter,
                });
            }
        } else {
            if small_step {
                return Ok(LmOutcome {
                    params: x,
                    cost,
                    iterations: iter,
                });
            }
            mu *= nu;
            nu *= 2.0;
        }
    }
    Err(PoseError::DidNotConverge(opts.max_iters))
}

/// Rotate the configuration 180° about the camera x-axis. The pivot is the
/// object centroid when it is in front of the camera, otherwise the camera
/// center (which brings a mirrored-behind object back in front).
pub(crate) fn depth_flip(pose: &CameraPose, centroid_world: &Vector3<f64>) -> CameraPose {
    let flip = Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0);
    let c = pose.to_camera(centroid_world);
    let pivot = if c.z > 0.0 { c } else { Vector3::zeros() };
    let r = flip * pose.rotation();
    let t = flip * (pose.translation - pivot) + pivot;
    CameraPose::from_approx(&r, t)
}

fn branch_degeneracy(
    pose: &CameraPose,
    corrs: &[Correspondence],
    mask: &MaskBBox,
    k: &Intrinsics,
    guard: &DegeneracyGuard,
) -> Degeneracy {
    let keypoint_behind = corrs
        .iter()
        .any(|c| c.visible && pose.to_camera(&c.point3d).z <= super::MIN_DEPTH);
    if keypoint_behind {
        return Degeneracy::behind_camera();
    }
    let points: Vec<Vector3<f64>> = if guard.extent_points.is_empty() {
        corrs.iter().map(|c| c.point3d).collect()
    } else {
        guard.extent_points.clone()
    };
    let projected = project(pose, k, &points);
    detect_degenerate(
        &projected,
        guard.mask_area.unwrap_or_else(|| mask.area()),
        guard.area_frac,
    )
}

/// Damped least-squares refinement from `init`, restarting once from a
/// depth-flipped pose if the first solution is degenerate.
pub fn refine_pose(
    init: &CameraPose,
    corrs: &[Correspondence],
    covs: &[KeypointCovariance],
    mask: &MaskBBox,
    k: &Intrinsics,
    opts: &RefineOptions,
) -> Result<RefineReport, PoseError> {
    check_inputs(corrs, covs, opts.lambda)?;
    if corrs.len() < 4 {
        return Err(PoseError::TooFewCorrespondences {
            required: 4,
            actual: corrs.len(),
        });
    }
    if !(opts.xtol > 0.0 && opts.ftol > 0.0 && opts.gtol >= 0.0) || opts.max_iters == 0 {
        return Err(PoseError::InvalidParameter("refinement tolerances"));
    }
    let start = pose_params(init);
    let initial_cost = 0.5
        * evaluate(&start, corrs, covs, mask, k, opts.lambda, false)
            .residuals
            .norm_squared();

    let first = levenberg_marquardt(start, corrs, covs, mask, k, opts)?;
    let first_pose = pose_from_params(&first.params);
    if !branch_degeneracy(&first_pose, corrs, mask, k, &opts.guard).degenerate {
        return Ok(RefineReport {
            pose: CameraPose {
                refined: true,
                ..first_pose
            },
            cost: first.cost,
            initial_cost,
            iterations: first.iterations,
            restarted: false,
        });
    }

    let points: Vec<Vector3<f64>> = corrs.iter().map(|c| c.point3d).collect();
    let flipped = depth_flip(init, &linalg::mean(&points));
    let second = levenberg_marquardt(pose_params(&flipped), corrs, covs, mask, k, opts)?;
    let second_pose = pose_from_params(&second.params);
    if branch_degeneracy(&second_pose, corrs, mask, k, &opts.guard).degenerate {
        return Err(PoseError::DegenerateResult);
    }
    Ok(RefineReport {
        pose: CameraPose {
            refined: true,
            ..second_pose
        },
        cost: second.cost,
        initial_cost,
        iterations: first.iterations + second.iterations,
        restarted: true,
    })
}
