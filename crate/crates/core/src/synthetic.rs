//! Seeded synthetic quadruped scenes with known camera, used by the tests,
//! the acceptance suite and the bundled fixture.
//!
//! An animal is an elongated vertex cloud (ellipsoidal body, neck, head,
//! four legs, tail) in anatomical coordinates (x posterior, y right,
//! z dorsal), placed in the world by a random rigid motion and viewed by a
//! pinhole camera at 3 to 15 body lengths.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector2, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg;
use crate::obox::MeshVertices;
use crate::pose::{CameraPose, Intrinsics, MaskBBox};
use crate::scene::{Keypoint, Scene};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticOptions {
    pub image_size: u32,
    /// Focal length is chosen so that the body length spans this many pixels
    /// when seen side-on.
    pub target_length_px: f64,
    /// Camera distance range in body lengths.
    pub distance_range: (f64, f64),
    /// Inclusive landmark count range.
    pub landmark_range: (usize, usize),
    pub mesh_points: usize,
    /// Std-dev of Gaussian noise added to the observed pixels.
    pub pixel_noise: f64,
    pub occlusion_prob: f64,
    /// Rescale the dorsal axis so the landmark cloud's two minor principal
    /// variances coincide: the elongated case where only the long PCA axis
    /// is well defined.
    pub isotropic_cross_section: bool,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        Self {
            image_size: 4096,
            target_length_px: 2400.0,
            distance_range: (3.0, 15.0),
            landmark_range: (12, 26),
            mesh_points: 1500,
            pixel_noise: 0.0,
            occlusion_prob: 0.0,
            isotropic_cross_section: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub scene: Scene,
    pub truth: CameraPose,
    /// Noise-free projections of every keypoint under `truth`.
    pub clean_pixels: Vec<Vector2<f64>>,
    /// Anatomical axes of the animal in the world (columns x, y, z).
    pub anatomy: Matrix3<f64>,
    pub body_length: f64,
}

/// Uniformly distributed rotation.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Matrix3<f64> {
    loop {
        let q: [f64; 4] = core::array::from_fn(|_| StandardNormal.sample(rng));
        let n = q.iter().map(|v| v * v).sum::<f64>();
        if n > 1e-12 {
            return UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]))
                .to_rotation_matrix()
                .into_inner();
        }
    }
}

pub fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v: Vector3<f64> = Vector3::from_fn(|_, _| StandardNormal.sample(rng));
        let n = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}

/// Camera at `eye` looking at `target`; `up` only needs to be non-parallel
/// to the viewing direction.
pub fn look_at(eye: &Vector3<f64>, target: &Vector3<f64>, up: &Vector3<f64>) -> CameraPose {
    let z = (target - eye).normalize();
    let x = z.cross(up).normalize();
    let y = z.cross(&x);
    let r = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
    CameraPose::from_approx(&r, -(r * eye))
}

/// Tight box around the given pixels.
pub fn exact_mask(pixels: &[Vector2<f64>]) -> MaskBBox {
    MaskBBox::from_points(pixels).expect("non-empty finite pixels")
}

struct Body {
    half_width: f64,
    half_height: f64,
    leg_length: f64,
}

impl Body {
    fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            half_width: rng.random_range(0.13..0.19),
            half_height: rng.random_range(0.15..0.21),
            leg_length: rng.random_range(0.3..0.45),
        }
    }

    fn paw_z(&self) -> f64 {
        -self.half_height - self.leg_length
    }
}

const FRONT_X: f64 = -0.3;
const HIND_X: f64 = 0.33;

type NamedPoints = Vec<(&'static str, Vector3<f64>)>;

/// Core landmarks always present, then optional extras in order of preference.
fn landmark_table(b: &Body) -> (NamedPoints, NamedPoints) {
    let (w, h, pz) = (b.half_width, b.half_height, b.paw_z());
    let leg_y = 0.65 * w;
    let core = alloc::vec![
        ("nose", Vector3::new(-0.78, 0.0, 0.22)),
        ("tail_base", Vector3::new(0.5, 0.0, 0.06)),
        ("left_shoulder", Vector3::new(FRONT_X, -0.85 * w, 0.25 * h)),
        ("right_shoulder", Vector3::new(FRONT_X, 0.85 * w, 0.25 * h)),
        ("left_hip", Vector3::new(HIND_X, -0.85 * w, 0.25 * h)),
        ("right_hip", Vector3::new(HIND_X, 0.85 * w, 0.25 * h)),
        ("left_front_paw", Vector3::new(FRONT_X, -leg_y, pz)),
        ("right_front_paw", Vector3::new(FRONT_X, leg_y, pz)),
        ("left_back_paw", Vector3::new(HIND_X, -leg_y, pz)),
        ("right_back_paw", Vector3::new(HIND_X, leg_y, pz)),
        ("neck", Vector3::new(-0.47, 0.0, 0.1)),
        ("withers", Vector3::new(FRONT_X, 0.0, h)),
    ];
    let knee_z = -h - 0.5 * b.leg_length;
    let extra = alloc::vec![
        ("left_eye", Vector3::new(-0.7, -0.045, 0.3)),
        ("right_eye", Vector3::new(-0.7, 0.045, 0.3)),
        ("left_ear", Vector3::new(-0.62, -0.06, 0.37)),
        ("right_ear", Vector3::new(-0.62, 0.06, 0.37)),
        ("chin", Vector3::new(-0.72, 0.0, 0.17)),
        ("tail_tip", Vector3::new(0.82, 0.0, -0.12)),
        ("left_elbow", Vector3::new(FRONT_X, -leg_y, knee_z)),
        ("right_elbow", Vector3::new(FRONT_X, leg_y, knee_z)),
        ("left_knee", Vector3::new(HIND_X, -leg_y, knee_z)),
        ("right_knee", Vector3::new(HIND_X, leg_y, knee_z)),
        ("rump", Vector3::new(0.4, 0.0, 0.8 * h)),
        ("belly", Vector3::new(0.0, 0.0, -h)),
        ("throat", Vector3::new(-0.55, 0.0, 0.05)),
        ("spine_mid", Vector3::new(0.05, 0.0, h)),
    ];
    (core, extra)
}

fn surface_points<R: Rng + ?Sized>(b: &Body, n: usize, rng: &mut R) -> Vec<Vector3<f64>> {
    let mut pts = Vec::with_capacity(n);
    let share = |f: f64| ((n as f64) * f).ceil() as usize;
    let (w, h) = (b.half_width, b.half_height);
    // torso
    for _ in 0..share(0.45) {
        let d = random_unit(rng);
        pts.push(Vector3::new(0.5 * d.x, w * d.y, h * d.z));
    }
    // head
    let head = Vector3::new(-0.67, 0.0, 0.27);
    for _ in 0..share(0.1) {
        let d = random_unit(rng);
        pts.push(head + Vector3::new(0.11 * d.x, 0.075 * d.y, 0.08 * d.z));
    }
    // neck, tail
    let segments = [
        (
            Vector3::new(-0.42, 0.0, 0.05),
            Vector3::new(-0.62, 0.0, 0.24),
            0.06,
            0.08,
        ),
        (
            Vector3::new(0.48, 0.0, 0.06),
            Vector3::new(0.82, 0.0, -0.12),
            0.015,
            0.05,
        ),
    ];
    for (a, c, r, f) in segments {
        for _ in 0..share(f) {
            let s: f64 = rng.random();
            let d = random_unit(rng);
            pts.push(a + (c - a) * s + d * r);
        }
    }
    // legs
    for (lx, ly) in [
        (FRONT_X, -1.0),
        (FRONT_X, 1.0),
        (HIND_X, -1.0),
        (HIND_X, 1.0),
    ] {
        for _ in 0..share(0.08) {
            let s: f64 = rng.random();
            let a: f64 = rng.random_range(0.0..core::f64::consts::TAU);
            let r = 0.035;
            pts.push(Vector3::new(
                lx + r * a.cos(),
                ly * 0.65 * w + r * a.sin(),
                -0.5 * h + s * (b.paw_z() + 0.5 * h),
            ));
        }
    }
    pts
}

/// Dorsal scale that makes the two smallest principal variances of `pts`
/// as close as possible.
fn equalizing_dorsal_scale(pts: &[Vector3<f64>]) -> f64 {
    let gap = |s: f64| {
        let scaled: Vec<_> = pts
            .iter()
            .map(|p| Vector3::new(p.x, p.y, s * p.z))
            .collect();
        let (vals, _) = linalg::sorted_eigen(&linalg::covariance(&scaled));
        (vals[1] - vals[2]) / vals[1]
    };
    // coarse scan, then golden-section refinement around the best cell
    let (lo, hi, steps) = (0.2, 2.5, 92);
    let step = (hi - lo) / steps as f64;
    let mut best = lo;
    let mut best_gap = f64::INFINITY;
    for i in 0..=steps {
        let s = lo + step * i as f64;
        let g = gap(s);
        if g < best_gap {
            best_gap = g;
            best = s;
        }
    }
    let (mut a, mut b) = ((best - step).max(lo), (best + step).min(hi));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if gap(c) < gap(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

struct Animal {
    names: Vec<String>,
    landmarks_local: Vec<Vector3<f64>>,
    mesh_local: Vec<Vector3<f64>>,
}

fn random_animal<R: Rng + ?Sized>(opts: &SyntheticOptions, rng: &mut R) -> Animal {
    let body = Body::random(rng);
    let (core, extra) = landmark_table(&body);
    let (lo, hi) = opts.landmark_range;
    let count = rng
        .random_range(lo..=hi.max(lo))
        .clamp(core.len(), core.len() + extra.len());
    // extras come in left/right pairs where they exist, keeping the cloud symmetric
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, (name, _)) in extra.iter().enumerate() {
        match name.strip_prefix("right_") {
            Some(part) => {
                if let Some(g) = groups
                    .iter_mut()
                    .find(|g| extra[g[0]].0.strip_prefix("left_") == Some(part))
                {
                    g.push(i);
                    continue;
                }
                groups.push(alloc::vec![i]);
            }
            None => groups.push(alloc::vec![i]),
        }
    }
    let mut picks = Vec::new();
    let mut total = core.len();
    for g in rand::seq::index::sample(rng, groups.len(), groups.len()) {
        if total + groups[g].len() <= count {
            total += groups[g].len();
            picks.extend_from_slice(&groups[g]);
        }
    }
    picks.sort_unstable();
    let mut chosen: Vec<(&str, Vector3<f64>)> = core;
    chosen.extend(picks.into_iter().map(|i| extra[i]));

    let mut mesh = surface_points(&body, opts.mesh_points, rng);
    let mut landmarks: Vec<Vector3<f64>> = chosen.iter().map(|(_, p)| *p).collect();
    if opts.isotropic_cross_section {
        let s = equalizing_dorsal_scale(&landmarks);
        for p in mesh.iter_mut().chain(landmarks.iter_mut()) {
            p.z *= s;
        }
    }
    mesh.extend(landmarks.iter().copied());
    Animal {
        names: chosen.iter().map(|(n, _)| String::from(*n)).collect(),
        landmarks_local: landmarks,
        mesh_local: mesh,
    }
}

fn assemble<R: Rng + ?Sized>(
    animal: Animal,
    opts: &SyntheticOptions,
    rng: &mut R,
) -> SyntheticScene {
    let scale: f64 = rng.random_range(0.5..3.0);
    let anatomy = random_rotation(rng);
    let offset = Vector3::from_fn(|_, _| rng.random_range(-5.0..5.0));
    let to_world = |p: &Vector3<f64>| anatomy * (p * scale) + offset;
    let mesh: Vec<Vector3<f64>> = animal.mesh_local.iter().map(to_world).collect();
    let landmarks: Vec<Vector3<f64>> = animal.landmarks_local.iter().map(to_world).collect();
    let body_length = scale * 1.6;

    let target = linalg::mean(&mesh);
    let distance = rng.random_range(opts.distance_range.0..=opts.distance_range.1) * body_length;
    let dir = random_unit(rng);
    let mut up = random_unit(rng);
    while up.cross(&dir).norm() < 0.1 {
        up = random_unit(rng);
    }
    let truth = look_at(&(target + dir * distance), &target, &up);
    let size = opts.image_size;
    let half = f64::from(size) / 2.0;
    let focal = opts.target_length_px * distance / body_length;
    let k =
        Intrinsics::new(focal, focal, half, half, size, size).expect("valid synthetic intrinsics");

    let clean_pixels: Vec<Vector2<f64>> = landmarks
        .iter()
        .map(|p| k.project_camera(&truth.to_camera(p)))
        .collect();
    let keypoints = animal
        .names
        .into_iter()
        .zip(&landmarks)
        .zip(&clean_pixels)
        .map(|((name, x), uv)| {
            let noise = Vector2::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
                * opts.pixel_noise;
            let visible =
                !(opts.occlusion_prob > 0.0 && rng.random_bool(opts.occlusion_prob.min(1.0)));
            Keypoint::new(name, *x, uv + noise, visible)
        })
        .collect();
    let mask = exact_mask(&clean_pixels);
    SyntheticScene {
        scene: Scene {
            mesh: MeshVertices::new(mesh).expect("finite synthetic mesh"),
            keypoints,
            intrinsics: k,
            intrinsics_estimated: false,
            mask,
            mask_area: None,
        },
        truth,
        clean_pixels,
        anatomy,
        body_length,
    }
}

pub fn scene_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A well-conditioned random scene.
pub fn healthy_scene(seed: u64, opts: &SyntheticOptions) -> SyntheticScene {
    let mut rng = scene_rng(seed, 0);
    let animal = random_animal(opts, &mut rng);
    assemble(animal, opts, &mut rng)
}

pub fn healthy_suite(count: usize, seed: u64, opts: &SyntheticOptions) -> Vec<SyntheticScene> {
    (0..count as u64)
        .map(|i| {
            let mut rng = scene_rng(seed, i);
            let animal = random_animal(opts, &mut rng);
            assemble(animal, opts, &mut rng)
        })
        .collect()
}

/// Options for scenes whose few keypoints lie on a plane, the configuration
/// where EPnP becomes ill-conditioned and pose flips appear.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialOptions {
    pub base: SyntheticOptions,
    /// Out-of-plane spread of the keypoints relative to body length.
    pub thickness: f64,
    pub keypoints: usize,
}

impl Default for AdversarialOptions {
    fn default() -> Self {
        Self {
            base: SyntheticOptions {
                pixel_noise: 4.0,
                distance_range: (8.0, 15.0),
                isotropic_cross_section: false,
                ..SyntheticOptions::default()
            },
            thickness: 0.0,
            keypoints: 4,
        }
    }
}

/// Keypoints restricted to the dorsal line and flanks and flattened onto
/// a plane; the mesh keeps its full extent.
pub fn adversarial_scene(seed: u64, index: u64, opts: &AdversarialOptions) -> SyntheticScene {
    let mut rng = scene_rng(seed, index);
    let mut animal = random_animal(&opts.base, &mut rng);
    let plane_z = animal.landmarks_local[2].z;
    let mut kept = Vec::new();
    for (i, name) in animal.names.iter().enumerate() {
        if !name.ends_with("paw")
            && !name.ends_with("knee")
            && !name.ends_with("elbow")
            && kept.len() < opts.keypoints
        {
            kept.push(i);
        }
    }
    let thickness = opts.thickness;
    animal.names = kept.iter().map(|&i| animal.names[i].clone()).collect();
    animal.landmarks_local = kept
        .iter()
        .map(|&i| {
            let p = animal.landmarks_local[i];
            Vector3::new(p.x, p.y, plane_z + thickness * rng.random_range(-1.0..1.0))
        })
        .collect();
    animal
        .mesh_local
        .extend(animal.landmarks_local.iter().copied());
    assemble(animal, &opts.base, &mut rng)
}

/// Move one keypoint that is not on the keypoint bounding box towards the
/// box centre by `magnitude_px`. Returns its index, or `None` when every
/// keypoint is extremal.
pub fn corrupt_interior_keypoint<R: Rng + ?Sized>(
    scene: &mut SyntheticScene,
    magnitude_px: f64,
    rng: &mut R,
) -> Option<usize> {
    let m = exact_mask(&scene.clean_pixels);
    let margin = magnitude_px + 1.0;
    let interior: Vec<usize> = scene
        .clean_pixels
        .iter()
        .enumerate()
        .filter(|(_, p)| {
            p.x > m.x_min + margin
                && p.x < m.x_max - margin
                && p.y > m.y_min + margin
                && p.y < m.y_max - margin
        })
        .map(|(i, _)| i)
        .collect();
    if interior.is_empty() {
        return None;
    }
    let i = interior[rng.random_range(0..interior.len())];
    let centre = Vector2::new(0.5 * (m.x_min + m.x_max), 0.5 * (m.y_min + m.y_max));
    let kp = &mut scene.scene.keypoints[i];
    let dir = centre - kp.pixel;
    if dir.norm() > 1e-9 {
        kp.pixel += dir.normalize() * magnitude_px.min(dir.norm());
    }
    Some(i)
}
