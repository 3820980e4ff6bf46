//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Every criterion must also finish inside its time budget.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Instant;

use cuboid_core::evaluate::{
    alignment_variation, rotation_variation, stability_sweep, NoiseSweepConfig, StabilityResult,
    SweepInput, DEFAULT_SIGMAS,
};
use cuboid_core::frame::{build_anatomical_frame, pca_frame};
use cuboid_core::obox::{enclosure_check, generate_obox, DEFAULT_EPSILON};
use cuboid_core::pipeline::{label_scene, LabelConfig};
use cuboid_core::synthetic::{
    adversarial_scene, corrupt_interior_keypoint, healthy_suite, look_at, random_rotation,
    random_unit, AdversarialOptions, SyntheticOptions, SyntheticScene,
};
use cuboid_core::visibility::{projected_area, visibility_report};
use cuboid_core::{
    AnatomicalFrame, AxisPolicy, AxisSource, CameraPose, Face, Intrinsics, Matrix3, MeshVertices,
    OrientedBox, Vector2, Vector3,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const SUITE_SCENES: usize = 200;
const SUITE_SEED: u64 = 42;
const TIME_BUDGET_S: f64 = 60.0;

const MAX_ANATOMICAL_ROTATION_DEG: f64 = 1.0;
const MIN_PCA_RATIO: f64 = 10.0;
const MAX_ANATOMICAL_ALIGNMENT: f64 = 0.01;
const MIN_PCA_ALIGNMENT: f64 = 0.1;
const HEALTHY_NOISE_PX: f64 = 2.0;
const HEALTHY_OCCLUSION: f64 = 0.2;
const CORRUPTION_PX: f64 = 6.0;
const CORRUPTED_CONFIDENCE: f64 = 0.1;
const MIN_WIN_RATE: f64 = 0.95;
const MIN_MEDIAN_IMPROVEMENT: f64 = 0.5;
const MAX_ORACLE_REPROJECTION_PX: f64 = 1e-3;
const MAX_ORACLE_ROTATION_DEG: f64 = 0.01;
const MIN_ENCLOSURE_TESTS: usize = 1_000_000;
const VISIBILITY_POSES: usize = 500;
const PERCENT_SUM_TOL: f64 = 1e-6;
const CORNER_VIEW_TOL: f64 = 0.1;
const RASTER_FACES: usize = 500;
const RASTER_SUBSAMPLES: usize = 4;
const RASTER_REL_TOL: f64 = 0.02;
const QUATERNION_PAIRS: usize = 10_000;
const QUATERNION_TOL_DEG: f64 = 1e-9;

struct Verdict {
    pass: bool,
    detail: String,
}

fn fmt_list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", items.join(", "))
}

fn suite(opts: &SyntheticOptions) -> Vec<SyntheticScene> {
    healthy_suite(SUITE_SCENES, SUITE_SEED, opts)
}

/// Default sweep on every scene of the default suite, seen from the true camera.
fn suite_sweeps() -> &'static [(StabilityResult, StabilityResult)] {
    static CELL: OnceLock<Vec<(StabilityResult, StabilityResult)>> = OnceLock::new();
    CELL.get_or_init(|| {
        let policy = AxisPolicy::default();
        let config = NoiseSweepConfig::default();
        suite(&SyntheticOptions::default())
            .par_iter()
            .map(|s| {
                let input = SweepInput {
                    keypoints: &s.scene.keypoints,
                    pose: &s.truth,
                    intrinsics: &s.scene.intrinsics,
                    policy: &policy,
                };
                stability_sweep(&input, &config).expect("sweep")
            })
            .collect()
    })
}

/// Mean over scenes of a per-sigma statistic.
fn suite_mean(pick: impl Fn(&(StabilityResult, StabilityResult), usize) -> f64) -> Vec<f64> {
    let sw = suite_sweeps();
    (0..DEFAULT_SIGMAS.len())
        .map(|i| sw.iter().map(|r| pick(r, i)).sum::<f64>() / sw.len() as f64)
        .collect()
}

fn frame_stability() -> Verdict {
    let anat = suite_mean(|r, i| r.0.per_sigma[i].mean_rotation_deg);
    let pca = suite_mean(|r, i| r.1.per_sigma[i].mean_rotation_deg);
    let pass = anat
        .iter()
        .zip(&pca)
        .all(|(a, p)| *a <= MAX_ANATOMICAL_ROTATION_DEG && *p >= MIN_PCA_RATIO * a);
    Verdict {
        pass,
        detail: format!(
            "sigmas {:?}: anatomical mean θ_R {} deg, pca {} deg",
            DEFAULT_SIGMAS,
            fmt_list(&anat),
            fmt_list(&pca)
        ),
    }
}

fn alignment_stability() -> Verdict {
    let i = DEFAULT_SIGMAS.iter().position(|s| *s == 4.0).unwrap();
    let anat = suite_mean(|r, k| r.0.per_sigma[k].mean_alignment)[i];
    let pca = suite_mean(|r, k| r.1.per_sigma[k].mean_alignment)[i];
    Verdict {
        pass: anat <= MAX_ANATOMICAL_ALIGNMENT && pca >= MIN_PCA_ALIGNMENT,
        detail: format!("sigma 4: anatomical mean δ_a {anat:.3e}, pca {pca:.4}"),
    }
}

fn basic_config() -> LabelConfig {
    LabelConfig {
        refine_enabled: false,
        ..LabelConfig::default()
    }
}

fn degeneracy_elimination() -> Verdict {
    let opts = SyntheticOptions {
        pixel_noise: HEALTHY_NOISE_PX,
        occlusion_prob: HEALTHY_OCCLUSION,
        ..SyntheticOptions::default()
    };
    let healthy: Vec<Option<bool>> = suite(&opts)
        .par_iter()
        .map(|s| {
            label_scene(&s.scene, &LabelConfig::default())
                .ok()
                .map(|o| o.degeneracy.degenerate)
        })
        .collect();
    let healthy_failed = healthy.iter().filter(|d| d.is_none()).count();
    let healthy_degenerate = healthy.iter().filter(|d| **d == Some(true)).count();

    let adv = AdversarialOptions::default();
    let paths: Vec<(bool, bool)> = (0..SUITE_SCENES as u64)
        .into_par_iter()
        .map(|i| {
            let s = adversarial_scene(SUITE_SEED, i, &adv);
            let deg =
                |c: &LabelConfig| label_scene(&s.scene, c).is_ok_and(|o| o.degeneracy.degenerate);
            (deg(&basic_config()), deg(&LabelConfig::default()))
        })
        .collect();
    let basic = paths.iter().filter(|p| p.0).count();
    let refined = paths.iter().filter(|p| p.1).count();
    Verdict {
        pass: healthy_degenerate == 0 && healthy_failed == 0 && basic >= 1,
        detail: format!(
            "healthy refined degenerate {healthy_degenerate}/{SUITE_SCENES} (errors {healthy_failed}); \
             adversarial basic degenerate {basic}/{SUITE_SCENES}, refined {refined}/{SUITE_SCENES}"
        ),
    }
}

/// Mean distance of the projections under `pose` to the noise-free pixels.
fn truth_error(pose: &CameraPose, s: &SyntheticScene) -> f64 {
    let k = &s.scene.intrinsics;
    let total: f64 = s
        .scene
        .keypoints
        .iter()
        .zip(&s.clean_pixels)
        .map(|(kp, uv)| (k.project_camera(&pose.to_camera(&kp.position)) - uv).norm())
        .sum();
    total / s.clean_pixels.len() as f64
}

/// (refined wins, trials, median relative improvement)
fn corruption_trials(confidence: f64) -> (usize, usize, f64) {
    let mut rows: Vec<(bool, f64)> = suite(&SyntheticOptions::default())
        .into_par_iter()
        .enumerate()
        .filter_map(|(i, mut s)| {
            let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED ^ (i as u64) << 8);
            let j = corrupt_interior_keypoint(&mut s, CORRUPTION_PX, &mut rng)?;
            s.scene.keypoints[j].confidence = confidence;
            let basic = label_scene(&s.scene, &basic_config()).ok()?;
            let refined = label_scene(&s.scene, &LabelConfig::default()).ok()?;
            let (eb, er) = (truth_error(&basic.pose, &s), truth_error(&refined.pose, &s));
            Some((er < eb, 1.0 - er / eb))
        })
        .collect();
    let wins = rows.iter().filter(|r| r.0).count();
    rows.sort_by(|a, b| a.1.total_cmp(&b.1));
    let median = rows.get(rows.len() / 2).map_or(f64::NAN, |r| r.1);
    (wins, rows.len(), median)
}

fn refinement_benefit() -> Verdict {
    let (wins, n, median) = corruption_trials(CORRUPTED_CONFIDENCE);
    let (wins_u, n_u, median_u) = corruption_trials(1.0);
    Verdict {
        pass: n >= SUITE_SCENES / 2
            && wins as f64 >= MIN_WIN_RATE * n as f64
            && median >= MIN_MEDIAN_IMPROVEMENT,
        detail: format!(
            "refined better in {wins}/{n}, median improvement {:.1}% \
             (diagnostic, corrupted point at full confidence: {wins_u}/{n_u}, {:.1}%)",
            100.0 * median,
            100.0 * median_u
        ),
    }
}

fn pose_recovery() -> Verdict {
    let rows: Vec<Option<(f64, f64)>> = suite(&SyntheticOptions::default())
        .par_iter()
        .map(|s| {
            let o = label_scene(&s.scene, &LabelConfig::default()).ok()?;
            let dr = rotation_variation(o.pose.rotation(), s.truth.rotation()).ok()?;
            Some((o.reprojection_error, dr))
        })
        .collect();
    let ok = rows
        .iter()
        .filter(|r| {
            r.is_some_and(|(e, d)| e < MAX_ORACLE_REPROJECTION_PX && d < MAX_ORACLE_ROTATION_DEG)
        })
        .count();
    let worst_e = rows.iter().flatten().map(|r| r.0).fold(0.0, f64::max);
    let worst_r = rows.iter().flatten().map(|r| r.1).fold(0.0, f64::max);
    Verdict {
        pass: ok == SUITE_SCENES,
        detail: format!(
            "{ok}/{SUITE_SCENES} recovered; worst reprojection {worst_e:.2e} px, worst rotation {worst_r:.2e} deg"
        ),
    }
}

/// Half-space test against the six face planes rebuilt from the world corners.
fn inside_corners(b: &OrientedBox, v: &Vector3<f64>) -> bool {
    let c = b.corners_world;
    let center = c.iter().sum::<Vector3<f64>>() / 8.0;
    Face::ALL.iter().all(|f| {
        let [i0, i1, _, i3] = f.corners();
        let mut n = (c[i1] - c[i0]).cross(&(c[i3] - c[i0]));
        if n.dot(&(c[i0] - center)) < 0.0 {
            n = -n;
        }
        n.dot(&(v - c[i0])) <= 0.0
    })
}

fn enclosure() -> Verdict {
    let scenes = healthy_suite(
        2 * SUITE_SCENES,
        SUITE_SEED + 1,
        &SyntheticOptions::default(),
    );
    let policy = AxisPolicy::default();
    let rows: Vec<(usize, usize, bool)> = scenes
        .par_iter()
        .map(|s| {
            let mesh = &s.scene.mesh;
            let frames = [
                build_anatomical_frame(&s.scene.landmarks(), &policy).expect("frame"),
                pca_frame(mesh.as_slice()).expect("pca"),
            ];
            let (mut tests, mut inside, mut check) = (0, 0, true);
            for f in &frames {
                let b = generate_obox(mesh, f, DEFAULT_EPSILON).expect("box");
                check &= enclosure_check(&b, mesh) == 1.0;
                tests += mesh.len();
                inside += mesh
                    .as_slice()
                    .iter()
                    .filter(|v| inside_corners(&b, v))
                    .count();
            }
            (tests, inside, check)
        })
        .collect();
    let tests: usize = rows.iter().map(|r| r.0).sum();
    let inside: usize = rows.iter().map(|r| r.1).sum();
    let all_one = rows.iter().all(|r| r.2);
    Verdict {
        pass: tests >= MIN_ENCLOSURE_TESTS && inside == tests && all_one,
        detail: format!(
            "{} boxes, {inside}/{tests} vertex tests inside, enclosure_check = 1 for all: {all_one}",
            2 * scenes.len()
        ),
    }
}

fn box_from(rotation: Matrix3<f64>, center: Vector3<f64>, half: Vector3<f64>) -> OrientedBox {
    let corners: Vec<Vector3<f64>> = (0..8)
        .map(|i| {
            let s = Vector3::new(
                if i & 4 != 0 { 1.0 } else { -1.0 },
                if i & 2 != 0 { 1.0 } else { -1.0 },
                if i & 1 != 0 { 1.0 } else { -1.0 },
            );
            center + rotation * half.component_mul(&s)
        })
        .collect();
    let frame = AnatomicalFrame::from_rotation(rotation, AxisSource::Derived, AxisSource::Derived)
        .expect("rotation");
    generate_obox(&MeshVertices::new(corners).unwrap(), &frame, 0.0).unwrap()
}

struct Posed {
    bbox: OrientedBox,
    pose: CameraPose,
    eye: Vector3<f64>,
}

fn random_posed(rng: &mut ChaCha8Rng) -> Posed {
    let half = Vector3::from_fn(|_, _| rng.random_range(0.2..1.5));
    let center = Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0));
    let bbox = box_from(random_rotation(rng), center, half);
    let eye = center + random_unit(rng) * half.norm() * rng.random_range(1.5..6.0);
    let target = center + random_unit(rng) * 0.1 * half.min();
    let pose = look_at(&eye, &target, &random_unit(rng));
    Posed { bbox, pose, eye }
}

/// Entry parameter of the segment `eye + t (p - eye)` into the box, by slabs.
fn ray_entry(b: &OrientedBox, eye: &Vector3<f64>, p: &Vector3<f64>) -> f64 {
    let (o, d) = (b.to_local(eye), b.to_local(p) - b.to_local(eye));
    let mut t0 = f64::NEG_INFINITY;
    for k in 0..3 {
        if d[k].abs() > 1e-300 {
            let (a, c) = (
                (b.local_min[k] - o[k]) / d[k],
                (b.local_max[k] - o[k]) / d[k],
            );
            t0 = t0.max(a.min(c));
        }
    }
    t0
}

fn visibility_correctness() -> Verdict {
    let k = Intrinsics::new(800.0, 800.0, 640.0, 480.0, 1280, 960).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED);
    let (mut agree, mut worst_sum) = (0, 0.0f64);
    for _ in 0..VISIBILITY_POSES {
        let p = random_posed(&mut rng);
        let rep = visibility_report(&p.bbox, &p.pose, &k).expect("report");
        let oracle_ok = rep.iter().all(|f| {
            let c = p.bbox.face_corners(f.face).iter().sum::<Vector3<f64>>() / 4.0;
            let hit_first = ray_entry(&p.bbox, &p.eye, &c) > 1.0 - 1e-9;
            hit_first == f.visible
        });
        agree += usize::from(oracle_ok);
        let sum: f64 = rep.iter().map(|f| f.percentage).sum();
        worst_sum = worst_sum.max((sum - 100.0).abs());
    }

    let mut worst_corner = 0.0f64;
    for (i, d) in [2.0, 5.0, 20.0].into_iter().enumerate() {
        let r = if i == 0 {
            Matrix3::identity()
        } else {
            random_rotation(&mut rng)
        };
        let b = box_from(r, Vector3::new(0.3, -0.2, 1.0), Vector3::repeat(0.5));
        let diag = r * Vector3::new(1.0, 1.0, 1.0).normalize();
        let eye = b.center() + diag * d;
        let pose = look_at(&eye, &b.center(), &(r * Vector3::z()));
        for f in visibility_report(&b, &pose, &k).unwrap() {
            if f.visible {
                worst_corner = worst_corner.max((f.percentage - 100.0 / 3.0).abs());
            }
        }
    }
    Verdict {
        pass: agree == VISIBILITY_POSES
            && worst_sum <= PERCENT_SUM_TOL
            && worst_corner <= CORNER_VIEW_TOL,
        detail: format!(
            "ray-cast agreement {agree}/{VISIBILITY_POSES}, worst |Σ% − 100| {worst_sum:.1e}, \
             corner view worst |p − 33.33| {worst_corner:.2e}"
        ),
    }
}

fn pinhole(pose: &CameraPose, k: &Intrinsics, p: &Vector3<f64>) -> Vector2<f64> {
    let c = pose.rotation() * p + pose.translation;
    Vector2::new(k.fx * c.x / c.z + k.cx, k.fy * c.y / c.z + k.cy)
}

/// Area of a convex quad by counting sub-pixel sample centers inside it.
fn raster_area(q: &[Vector2<f64>; 4]) -> f64 {
    let n = RASTER_SUBSAMPLES as f64;
    let (x0, x1) = q
        .iter()
        .fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p.x), a.1.max(p.x)));
    let (y0, y1) = q
        .iter()
        .fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p.y), a.1.max(p.y)));
    let cross = |a: &Vector2<f64>, b: &Vector2<f64>, p: &Vector2<f64>| {
        (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
    };
    let orient = cross(&q[0], &q[1], &q[2]).signum();
    let mut count = 0usize;
    let mut y = (y0 * n).floor() / n + 0.5 / n;
    while y < y1 {
        let mut x = (x0 * n).floor() / n + 0.5 / n;
        while x < x1 {
            let p = Vector2::new(x, y);
            if (0..4).all(|i| orient * cross(&q[i], &q[(i + 1) % 4], &p) >= 0.0) {
                count += 1;
            }
            x += 1.0 / n;
        }
        y += 1.0 / n;
    }
    count as f64 / (n * n)
}

fn shoelace_vs_raster() -> Verdict {
    let k = Intrinsics::new(300.0, 300.0, 320.0, 240.0, 640, 480).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED + 8);
    let mut faces = Vec::new();
    while faces.len() < RASTER_FACES {
        let p = random_posed(&mut rng);
        let rep = visibility_report(&p.bbox, &p.pose, &k).unwrap();
        for f in rep
            .iter()
            .filter(|f| f.visible && f.projected_area >= 400.0)
        {
            if faces.len() < RASTER_FACES {
                faces.push((p.bbox.face_corners(f.face), p.pose.clone()));
            }
        }
    }
    let errs: Vec<f64> = faces
        .par_iter()
        .map(|(c, pose)| {
            let shoelace = projected_area(c, pose, &k).unwrap();
            let raster = raster_area(&c.map(|v| pinhole(pose, &k, &v)));
            (shoelace - raster).abs() / raster
        })
        .collect();
    let worst = errs.iter().copied().fold(0.0, f64::max);
    Verdict {
        pass: errs.len() == RASTER_FACES && worst <= RASTER_REL_TOL,
        detail: format!(
            "{} faces, worst relative difference {:.3}% ({RASTER_SUBSAMPLES}x{RASTER_SUBSAMPLES} samples per px)",
            errs.len(),
            100.0 * worst
        ),
    }
}

/// Uniform unit quaternion `[w, x, y, z]` from three uniforms.
fn random_quaternion(rng: &mut ChaCha8Rng) -> [f64; 4] {
    let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    [
        b * (2.0 * PI * u3).cos(),
        a * (2.0 * PI * u2).sin(),
        a * (2.0 * PI * u2).cos(),
        b * (2.0 * PI * u3).sin(),
    ]
}

fn quaternion_matrix([w, x, y, z]: [f64; 4]) -> Matrix3<f64> {
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Angle of `q1 · conj(q2)`.
fn quaternion_angle_deg(q1: [f64; 4], q2: [f64; 4]) -> f64 {
    let [a1, b1, c1, d1] = q1;
    let [a2, b2, c2, d2] = [q2[0], -q2[1], -q2[2], -q2[3]];
    let w = a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2;
    let x = a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2;
    let y = a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2;
    let z = a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2;
    let v = (x * x + y * y + z * z).sqrt();
    (2.0 * v.atan2(w.abs())).to_degrees()
}

fn metric_identities() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED + 9);
    let mut worst = 0.0f64;
    for _ in 0..QUATERNION_PAIRS {
        let (q1, q2) = (random_quaternion(&mut rng), random_quaternion(&mut rng));
        let got = rotation_variation(&quaternion_matrix(q1), &quaternion_matrix(q2)).unwrap();
        worst = worst.max((got - quaternion_angle_deg(q1, q2)).abs());
    }
    let axes = [Vector3::x(), Vector3::y(), Vector3::z()];
    let mut endpoints_exact = true;
    for (i, a) in axes.iter().enumerate() {
        for (j, b) in axes.iter().enumerate() {
            let want = if i == j { 0.0 } else { 1.0 };
            endpoints_exact &= alignment_variation(a, b).unwrap() == want;
            endpoints_exact &= alignment_variation(a, &(-b)).unwrap() == 2.0 - want;
        }
    }
    Verdict {
        pass: worst <= QUATERNION_TOL_DEG && endpoints_exact,
        detail: format!(
            "{QUATERNION_PAIRS} pairs, worst |θ_R − quaternion angle| {worst:.2e} deg; δ_a endpoints exact: {endpoints_exact}"
        ),
    }
}

fn determinism() -> Verdict {
    let fixture = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic");
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let report = dir.path().join(name);
        let args = [
            "cuboid".into(),
            "sweep".into(),
            fixture.display().to_string(),
            "--seed".into(),
            "42".into(),
            "--report".into(),
            report.display().to_string(),
        ];
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = cuboid_label::cli::run(args, &mut out, &mut err);
        (code, std::fs::read(&report).unwrap_or_default(), out)
    };
    let (c1, r1, t1) = run("a.json");
    let (c2, r2, t2) = run("b.json");
    let identical = r1 == r2 && t1 == t2 && !r1.is_empty();
    Verdict {
        pass: c1 == 0 && c2 == 0 && identical,
        detail: format!(
            "exit codes {c1}/{c2}, reports {} bytes, byte-identical: {identical}",
            r1.len()
        ),
    }
}

fn main() {
    type Criterion = (&'static str, fn() -> Verdict);
    let criteria: [Criterion; 10] = [
        ("frame stability", frame_stability),
        ("alignment stability", alignment_stability),
        ("degeneracy elimination", degeneracy_elimination),
        ("refinement benefit", refinement_benefit),
        ("pose recovery oracle", pose_recovery),
        ("enclosure", enclosure),
        ("visibility correctness", visibility_correctness),
        ("shoelace vs rasterization", shoelace_vs_raster),
        ("metric identities", metric_identities),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let v = run();
        let secs = t.elapsed().as_secs_f64();
        let pass = v.pass && secs < TIME_BUDGET_S;
        failures += usize::from(!pass);
        println!(
            "criterion {:>2} {name}: {} | {} | {secs:.1}s",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
