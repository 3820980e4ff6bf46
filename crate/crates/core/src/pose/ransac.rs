use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;

use super::{epnp, CameraPose, Correspondence, Intrinsics, PoseError, MIN_DEPTH};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams {
    /// Inlier reprojection threshold in pixels.
    pub threshold_px: f64,
    pub confidence: f64,
    pub max_iters: usize,
    pub sample_size: usize,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            threshold_px: 8.0,
            confidence: 0.999,
            max_iters: 1000,
            sample_size: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacResult {
    pub pose: CameraPose,
    /// One flag per input correspondence; occluded ones are never inliers.
    pub inliers: Vec<bool>,
    pub iterations: usize,
}

impl RansacResult {
    pub fn inlier_count(&self) -> usize {
        self.inliers.iter().filter(|&&b| b).count()
    }
}

struct Score {
    count: usize,
    sq_error: f64,
}

impl Score {
    fn better_than(&self, other: &Score) -> bool {
        self.count > other.count || (self.count == other.count && self.sq_error < other.sq_error)
    }
}

fn score(
    pose: &CameraPose,
    corrs: &[Correspondence],
    k: &Intrinsics,
    thr_sq: f64,
    mask: &mut [bool],
) -> Score {
    let mut s = Score {
        count: 0,
        sq_error: 0.0,
    };
    for (c, m) in corrs.iter().zip(mask.iter_mut()) {
        let pc = pose.to_camera(&c.point3d);
        *m = false;
        if !c.visible || pc.z <= MIN_DEPTH {
            continue;
        }
        let e = (k.project_camera(&pc) - c.point2d).norm_squared();
        if e <= thr_sq {
            *m = true;
            s.count += 1;
            s.sq_error += e;
        }
    }
    s
}

fn required_iterations(
    inlier_ratio: f64,
    confidence: f64,
    sample_size: usize,
    cap: usize,
) -> usize {
    let all_good = inlier_ratio.powi(sample_size as i32);
    if all_good >= 1.0 {
        return 1;
    }
    if all_good <= 0.0 {
        return cap;
    }
    let n = (1.0 - confidence).ln() / (1.0 - all_good).ln();
    if n.is_finite() {
        (n.ceil() as usize).clamp(1, cap)
    } else {
        cap
    }
}

/// EPnP on random minimal samples of visible correspondences, keeping the
/// pose with most inliers (ties broken by inlier error), then re-fit on the
/// consensus set.
pub fn epnp_ransac<R: Rng + ?Sized>(
    corrs: &[Correspondence],
    k: &Intrinsics,
    params: &RansacParams,
    rng: &mut R,
) -> Result<RansacResult, PoseError> {
    if !(params.threshold_px > 0.0) || !(params.confidence > 0.0 && params.confidence < 1.0) {
        return Err(PoseError::InvalidParameter("ransac threshold/confidence"));
    }
    let sample_size = params.sample_size.max(4);
    let visible: Vec<usize> = (0..corrs.len()).filter(|&i| corrs[i].visible).collect();
    if visible.len() < sample_size {
        return Err(PoseError::TooFewCorrespondences {
            required: sample_size,
            actual: visible.len(),
        });
    }
    let thr_sq = params.threshold_px * params.threshold_px;
    let mut mask = alloc::vec![false; corrs.len()];
    let mut best: Option<(Score, CameraPose, Vec<bool>)> = None;
    // a single possible sample needs a single iteration
    let mut needed = if visible.len() == sample_size {
        1
    } else {
        params.max_iters.max(1)
    };
    let mut iterations = 0;
    let mut sample = Vec::with_capacity(sample_size);

    while iterations < needed {
        iterations += 1;
        sample.clear();
        sample.extend(
            index::sample(rng, visible.len(), sample_size)
                .iter()
                .map(|i| corrs[visible[i]].clone()),
        );
        let Ok(pose) = epnp(&sample, k) else { continue };
        let s = score(&pose, corrs, k, thr_sq, &mut mask);
        if best.as_ref().is_none_or(|(b, _, _)| s.better_than(b)) {
            let ratio = s.count as f64 / visible.len() as f64;
            needed = needed.min(required_iterations(
                ratio,
                params.confidence,
                sample_size,
                params.max_iters,
            ));
            best = Some((s, pose, mask.clone()));
        }
    }

    let (best_score, mut pose, mut inliers) = best.ok_or(PoseError::NoConsensus(0))?;
    if best_score.count < 4 {
        return Err(PoseError::NoConsensus(best_score.count));
    }
    let consensus: Vec<Correspondence> = corrs
        .iter()
        .zip(&inliers)
        .filter(|(_, &m)| m)
        .map(|(c, _)| c.clone())
        .collect();
    if let Ok(refit) = epnp(&consensus, k) {
        let s = score(&refit, corrs, k, thr_sq, &mut mask);
        if s.count >= best_score.count {
            pose = refit;
            inliers = mask;
        }
    }
    Ok(RansacResult {
        pose,
        inliers,
        iterations,
    })
}
