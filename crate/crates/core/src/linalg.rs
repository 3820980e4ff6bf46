//! Small shared linear-algebra helpers.

use alloc::vec::Vec;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

pub(crate) fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rodrigues map from an axis-angle vector to a rotation matrix.
pub(crate) fn so3_exp(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta_sq = omega.norm_squared();
    let k = skew(omega);
    let (a, b) = if theta_sq < 1e-16 {
        (1.0 - theta_sq / 6.0, 0.5 - theta_sq / 24.0)
    } else {
        let theta = theta_sq.sqrt();
        (theta.sin() / theta, (1.0 - theta.cos()) / theta_sq)
    };
    Matrix3::identity() + k * a + k * k * b
}

/// Inverse of [`so3_exp`]; returns the axis-angle vector with angle in `[0, pi]`.
pub(crate) fn so3_log(r: &Matrix3<f64>) -> Vector3<f64> {
    let vee = Vector3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    );
    let sin_theta = 0.5 * vee.norm();
    let cos_theta = 0.5 * (r.trace() - 1.0);
    let theta = sin_theta.atan2(cos_theta);
    if theta < 1e-8 {
        return vee * 0.5;
    }
    if core::f64::consts::PI - theta > 1e-5 {
        return vee * (theta / (2.0 * sin_theta));
    }
    // Near pi the antisymmetric part vanishes; recover the axis from R + I.
    let b = (r + Matrix3::identity()) * 0.5;
    let mut col = 0;
    for i in 1..3 {
        if b[(i, i)] > b[(col, col)] {
            col = i;
        }
    }
    let mut axis: Vector3<f64> = b.column(col).into_owned();
    axis /= axis.norm();
    if axis.dot(&vee) < 0.0 {
        axis = -axis;
    }
    axis * theta
}

/// Left Jacobian of SO(3): `exp(w + d) ~= exp(J_l(w) d) exp(w)`.
pub(crate) fn so3_left_jacobian(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta_sq = omega.norm_squared();
    let k = skew(omega);
    let (a, b) = if theta_sq < 1e-12 {
        (0.5 - theta_sq / 24.0, 1.0 / 6.0 - theta_sq / 120.0)
    } else {
        let theta = theta_sq.sqrt();
        (
            (1.0 - theta.cos()) / theta_sq,
            (theta - theta.sin()) / (theta_sq * theta),
        )
    };
    Matrix3::identity() + k * a + k * k * b
}

pub(crate) fn is_rotation(r: &Matrix3<f64>, tol: f64) -> bool {
    if r.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let gram = r.transpose() * r - Matrix3::identity();
    gram.iter().all(|v| v.abs() <= tol) && (r.determinant() - 1.0).abs() <= tol
}

/// Iteration cap for the dense decompositions; NaN input would otherwise never converge.
pub(crate) const MAX_SWEEPS: usize = 500;

/// Project a near-rotation onto SO(3) through its SVD.
pub(crate) fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let Some(svd) = m.try_svd(true, true, f64::EPSILON, MAX_SWEEPS) else {
        return Matrix3::identity();
    };
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Matrix3::identity(),
    };
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut u_fix = u;
        u_fix.column_mut(2).neg_mut();
        r = u_fix * v_t;
    }
    r
}

pub(crate) fn mean(points: &[Vector3<f64>]) -> Vector3<f64> {
    let mut acc = Vector3::zeros();
    for p in points {
        acc += p;
    }
    acc / points.len() as f64
}

/// Population covariance of a point cloud.
pub(crate) fn covariance(points: &[Vector3<f64>]) -> Matrix3<f64> {
    let c = mean(points);
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - c;
        cov += d * d.transpose();
    }
    cov / points.len() as f64
}

/// Eigenpairs of a symmetric 3x3 matrix sorted by descending eigenvalue.
pub(crate) fn sorted_eigen(m: &Matrix3<f64>) -> ([f64; 3], [Vector3<f64>; 3]) {
    let Some(eig) = SymmetricEigen::try_new(*m, f64::EPSILON, MAX_SWEEPS) else {
        return ([f64::NAN; 3], [Vector3::x(), Vector3::y(), Vector3::z()]);
    };
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = [
        eig.eigenvalues[order[0]],
        eig.eigenvalues[order[1]],
        eig.eigenvalues[order[2]],
    ];
    let vectors = [
        eig.eigenvectors.column(order[0]).into_owned(),
        eig.eigenvectors.column(order[1]).into_owned(),
        eig.eigenvectors.column(order[2]).into_owned(),
    ];
    (values, vectors)
}

/// Shoelace area of a closed polygon given in order.
pub(crate) fn shoelace(points: &[[f64; 2]]) -> f64 {
    let n = points.len();
    if n < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..n {
        let [x0, y0] = points[i];
        let [x1, y1] = points[(i + 1) % n];
        twice += x0 * y1 - y0 * x1;
    }
    0.5 * twice.abs()
}

/// Convex hull (monotone chain) of 2D points, counter-clockwise, no collinear points.
pub(crate) fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}
