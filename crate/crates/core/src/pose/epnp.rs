//! EPnP: four virtual control points, a 12-dimensional null-space search
//! for their camera coordinates, and Procrustes alignment.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Matrix3, SMatrix, SVector, SymmetricEigen, Vector3, Vector4};

use super::{CameraPose, Correspondence, Intrinsics, PoseError};
use crate::linalg;

type Matrix6x10 = SMatrix<f64, 6, 10>;
type Vector6 = SVector<f64, 6>;

/// Gauss-Newton steps on the betas; a handful suffice for n > 4, the minimal
/// case needs more because the linearized start is poor.
const GN_ITERS: usize = 50;

const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Closed-form pose from at least four correspondences (visibility ignored).
pub fn epnp(corrs: &[Correspondence], k: &Intrinsics) -> Result<CameraPose, PoseError> {
    let n = corrs.len();
    if n < 4 {
        return Err(PoseError::TooFewCorrespondences {
            required: 4,
            actual: n,
        });
    }
    let world: Vec<Vector3<f64>> = corrs.iter().map(|c| c.point3d).collect();
    let control = control_points(&world);
    let alphas = barycentric(&world, &control)?;

    let mut m = DMatrix::<f64>::zeros(2 * n, 12);
    for (i, (a, c)) in alphas.iter().zip(corrs).enumerate() {
        let (u, v) = (c.point2d.x, c.point2d.y);
        for j in 0..4 {
            m[(2 * i, 3 * j)] = a[j] * k.fx;
            m[(2 * i, 3 * j + 2)] = a[j] * (k.cx - u);
            m[(2 * i + 1, 3 * j + 1)] = a[j] * k.fy;
            m[(2 * i + 1, 3 * j + 2)] = a[j] * (k.cy - v);
        }
    }
    let mtm = m.transpose() * &m;
    let eig = SymmetricEigen::try_new(mtm, f64::EPSILON, linalg::MAX_SWEEPS)
        .ok_or(PoseError::Epnp("null-space decomposition failed"))?;
    let mut order: Vec<usize> = (0..12).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    // null[0] belongs to the smallest eigenvalue.
    let null: [SVector<f64, 12>; 4] = core::array::from_fn(|i| {
        SVector::<f64, 12>::from_iterator(eig.eigenvectors.column(order[i]).iter().copied())
    });

    let l = l_6x10(&null);
    let rho = Vector6::from_fn(|r, _| {
        let (a, b) = PAIRS[r];
        (control[a] - control[b]).norm_squared()
    });

    let mut best: Option<Candidate> = None;
    let try_start = |best: &mut Option<Candidate>, betas: [f64; 4]| {
        let betas = gauss_newton(&l, &rho, betas);
        let Some((pose, mirrored)) = pose_from_betas(&betas, &null, &alphas, &world) else {
            return;
        };
        let err = reprojection_sq(&pose, corrs, k);
        if !err.is_finite() {
            return;
        }
        let fit = (rho - l * beta_products(&betas)).norm() / rho.norm();
        let cand = Candidate {
            mirrored,
            err,
            fit,
            pose,
        };
        if best.as_ref().is_none_or(|b| cand.better_than(b)) {
            *best = Some(cand);
        }
    };
    for approx in [betas_approx_1, betas_approx_2, betas_approx_3] {
        if let Some(b) = approx(&l, &rho) {
            try_start(&mut best, b);
        }
    }
    // The linearized starts can land GN in a spurious or mirrored solution of
    // the distance equations, mostly for minimal sets; then try a fixed spread
    // of further starts.
    if best
        .as_ref()
        .is_none_or(|b| b.mirrored || !(b.fit <= RESTART_FIT))
    {
        for dir in start_directions() {
            let c = l * beta_products(&dir);
            let scale = c.dot(&rho) / c.norm_squared();
            if scale > 0.0 && scale.is_finite() {
                try_start(&mut best, dir.map(|v| v * scale.sqrt()));
            }
        }
    }
    best.map(|b| b.pose)
        .ok_or(PoseError::Epnp("no finite solution"))
}

struct Candidate {
    /// Camera-frame control points are a reflection of the world ones.
    mirrored: bool,
    err: f64,
    fit: f64,
    pose: CameraPose,
}

impl Candidate {
    fn better_than(&self, other: &Candidate) -> bool {
        (self.mirrored, self.err) < (other.mirrored, other.err)
    }
}

/// Halton starts tried after the four single-vector ones.
const START_COUNT: usize = 16;

/// Relative distance-equation residual above which extra starts are tried.
const RESTART_FIT: f64 = 1e-2;

/// Deterministic, roughly uniform unit directions in beta space (Halton points).
fn start_directions() -> impl Iterator<Item = [f64; 4]> {
    fn halton(mut i: usize, base: usize) -> f64 {
        let (mut f, mut r) = (1.0, 0.0);
        while i > 0 {
            f /= base as f64;
            r += f * (i % base) as f64;
            i /= base;
        }
        r
    }
    let axes = (0..4).map(|i| {
        let mut d = [0.0; 4];
        d[i] = 1.0;
        d
    });
    axes.chain((1..=START_COUNT).filter_map(|i| {
        let d = [2, 3, 5, 7].map(|b| 2.0 * halton(i, b) - 1.0);
        let n = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        (n > 1e-3).then(|| d.map(|v| v / n))
    }))
}

fn control_points(world: &[Vector3<f64>]) -> [Vector3<f64>; 4] {
    let c0 = linalg::mean(world);
    let (values, vectors) = linalg::sorted_eigen(&linalg::covariance(world));
    let mut cw = [c0; 4];
    for i in 0..3 {
        cw[i + 1] = c0 + vectors[i] * values[i].max(0.0).sqrt();
    }
    cw
}

fn barycentric(
    world: &[Vector3<f64>],
    cw: &[Vector3<f64>; 4],
) -> Result<Vec<Vector4<f64>>, PoseError> {
    let b = Matrix3::from_columns(&[cw[1] - cw[0], cw[2] - cw[0], cw[3] - cw[0]]);
    let b_inv = match b.try_inverse() {
        Some(inv) if inv.iter().all(|v| v.is_finite()) => inv,
        _ => b
            .pseudo_inverse(1e-12)
            .map_err(|_| PoseError::Epnp("degenerate control points"))?,
    };
    Ok(world
        .iter()
        .map(|p| {
            let l = b_inv * (p - cw[0]);
            Vector4::new(1.0 - l.x - l.y - l.z, l.x, l.y, l.z)
        })
        .collect())
}

/// Rows pair control points; columns are the ten products
/// `[b11, b12, b22, b13, b23, b33, b14, b24, b34, b44]`.
fn l_6x10(null: &[SVector<f64, 12>; 4]) -> Matrix6x10 {
    let mut l = Matrix6x10::zeros();
    for (r, &(a, b)) in PAIRS.iter().enumerate() {
        let dv: [Vector3<f64>; 4] = core::array::from_fn(|i| {
            Vector3::new(
                null[i][3 * a] - null[i][3 * b],
                null[i][3 * a + 1] - null[i][3 * b + 1],
                null[i][3 * a + 2] - null[i][3 * b + 2],
            )
        });
        let row = [
            dv[0].dot(&dv[0]),
            2.0 * dv[0].dot(&dv[1]),
            dv[1].dot(&dv[1]),
            2.0 * dv[0].dot(&dv[2]),
            2.0 * dv[1].dot(&dv[2]),
            dv[2].dot(&dv[2]),
            2.0 * dv[0].dot(&dv[3]),
            2.0 * dv[1].dot(&dv[3]),
            2.0 * dv[2].dot(&dv[3]),
            dv[3].dot(&dv[3]),
        ];
        for (c, v) in row.into_iter().enumerate() {
            l[(r, c)] = v;
        }
    }
    l
}

fn solve_columns(l: &Matrix6x10, rho: &Vector6, cols: &[usize]) -> Option<DVector<f64>> {
    let sub = DMatrix::from_fn(6, cols.len(), |r, c| l[(r, cols[c])]);
    let rhs = DVector::from_column_slice(rho.as_slice());
    let x = sub
        .try_svd(true, true, f64::EPSILON, linalg::MAX_SWEEPS)?
        .solve(&rhs, 1e-14)
        .ok()?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn betas_approx_1(l: &Matrix6x10, rho: &Vector6) -> Option<[f64; 4]> {
    let b = solve_columns(l, rho, &[0, 1, 3, 6])?;
    if b[0] == 0.0 {
        return None;
    }
    if b[0] < 0.0 {
        let b0 = (-b[0]).sqrt();
        Some([b0, -b[1] / b0, -b[2] / b0, -b[3] / b0])
    } else {
        let b0 = b[0].sqrt();
        Some([b0, b[1] / b0, b[2] / b0, b[3] / b0])
    }
}

fn first_two(b: &DVector<f64>) -> [f64; 2] {
    let (mut b0, b1) = if b[0] < 0.0 {
        (
            (-b[0]).sqrt(),
            if b[2] < 0.0 { (-b[2]).sqrt() } else { 0.0 },
        )
    } else {
        (b[0].sqrt(), if b[2] > 0.0 { b[2].sqrt() } else { 0.0 })
    };
    if b[1] < 0.0 {
        b0 = -b0;
    }
    [b0, b1]
}

fn betas_approx_2(l: &Matrix6x10, rho: &Vector6) -> Option<[f64; 4]> {
    let b = solve_columns(l, rho, &[0, 1, 2])?;
    let [b0, b1] = first_two(&b);
    Some([b0, b1, 0.0, 0.0])
}

fn betas_approx_3(l: &Matrix6x10, rho: &Vector6) -> Option<[f64; 4]> {
    let b = solve_columns(l, rho, &[0, 1, 2, 3, 4])?;
    let [b0, b1] = first_two(&b);
    if b0 == 0.0 {
        return None;
    }
    Some([b0, b1, b[3] / b0, 0.0])
}

fn beta_products(b: &[f64; 4]) -> SVector<f64, 10> {
    SVector::<f64, 10>::from_column_slice(&[
        b[0] * b[0],
        b[0] * b[1],
        b[1] * b[1],
        b[0] * b[2],
        b[1] * b[2],
        b[2] * b[2],
        b[0] * b[3],
        b[1] * b[3],
        b[2] * b[3],
        b[3] * b[3],
    ])
}

fn gauss_newton(l: &Matrix6x10, rho: &Vector6, mut b: [f64; 4]) -> [f64; 4] {
    for _ in 0..GN_ITERS {
        let mut a = SMatrix::<f64, 6, 4>::zeros();
        for r in 0..6 {
            let row = l.row(r);
            a[(r, 0)] = 2.0 * row[0] * b[0] + row[1] * b[1] + row[3] * b[2] + row[6] * b[3];
            a[(r, 1)] = row[1] * b[0] + 2.0 * row[2] * b[1] + row[4] * b[2] + row[7] * b[3];
            a[(r, 2)] = row[3] * b[0] + row[4] * b[1] + 2.0 * row[5] * b[2] + row[8] * b[3];
            a[(r, 3)] = row[6] * b[0] + row[7] * b[1] + row[8] * b[2] + 2.0 * row[9] * b[3];
        }
        let resid = rho - l * beta_products(&b);
        if a.iter().chain(resid.iter()).any(|v| !v.is_finite()) {
            break;
        }
        let Some(dx) = (a.transpose() * a)
            .cholesky()
            .map(|c| c.solve(&(a.transpose() * resid)))
        else {
            break;
        };
        if dx.iter().any(|v| !v.is_finite()) {
            break;
        }
        for i in 0..4 {
            b[i] += dx[i];
        }
        if dx.norm() <= 1e-15 * (1.0 + b.iter().map(|v| v * v).sum::<f64>().sqrt()) {
            break;
        }
    }
    b
}

fn pose_from_betas(
    betas: &[f64; 4],
    null: &[SVector<f64, 12>; 4],
    alphas: &[Vector4<f64>],
    world: &[Vector3<f64>],
) -> Option<(CameraPose, bool)> {
    let mut ccs = [Vector3::zeros(); 4];
    for (i, beta) in betas.iter().enumerate() {
        for (j, cc) in ccs.iter_mut().enumerate() {
            *cc += Vector3::new(null[i][3 * j], null[i][3 * j + 1], null[i][3 * j + 2]) * *beta;
        }
    }
    let mut pcs: Vec<Vector3<f64>> = alphas
        .iter()
        .map(|a| ccs[0] * a[0] + ccs[1] * a[1] + ccs[2] * a[2] + ccs[3] * a[3])
        .collect();
    let mean_depth: f64 = pcs.iter().map(|p| p.z).sum::<f64>() / pcs.len() as f64;
    if mean_depth < 0.0 {
        for p in pcs.iter_mut() {
            *p = -*p;
        }
    }
    let pc0 = linalg::mean(&pcs);
    let pw0 = linalg::mean(world);
    let mut abt = Matrix3::zeros();
    for (pc, pw) in pcs.iter().zip(world) {
        abt += (pc - pc0) * (pw - pw0).transpose();
    }
    if abt.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let r = linalg::nearest_rotation(&abt);
    let t = pc0 - r * pw0;
    Some((CameraPose::from_approx(&r, t), abt.determinant() < 0.0))
}

fn reprojection_sq(pose: &CameraPose, corrs: &[Correspondence], k: &Intrinsics) -> f64 {
    corrs
        .iter()
        .map(|c| (k.project_camera(&pose.to_camera(&c.point3d)) - c.point2d).norm_squared())
        .sum()
}
