//! Machine-readable reports and their text tables for `sweep` and `evaluate`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cuboid_core::evaluate::{
    aggregate, sweep_trial, EvalError, FrameMethod, NoiseSweepConfig, SigmaStats, StabilityResult,
    SweepInput,
};
use cuboid_core::pipeline::{label_scene, LabelConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::scene_io::load_scene;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Same cells and the same per-cell RNG streams as the sequential sweep in
/// the core crate, with trials spread over threads.
pub fn parallel_sweep(
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
        let cells = (0..config.trials_per_sigma)
            .into_par_iter()
            .map(|t| sweep_trial(input, sigma, si, t, config.seed))
            .collect::<Result<Vec<_>, _>>()?;
        let (a, p): (Vec<_>, Vec<_>) = cells.into_iter().unzip();
        anatomical.per_sigma.push(aggregate(sigma, &a));
        pca.per_sigma.push(aggregate(sigma, &p));
    }
    Ok((anatomical, pca))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentsRecord {
    pub anterior_posterior: f64,
    pub left_right: f64,
    pub dorsal_ventral: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaRow {
    pub sigma: f64,
    pub trials: usize,
    pub mean_rotation_deg: f64,
    pub max_rotation_deg: f64,
    pub stderr_rotation_deg: f64,
    pub mean_alignment: f64,
    pub mean_alignment_per_axis: [f64; 3],
    pub mean_components_deg: ComponentsRecord,
}

impl From<&SigmaStats> for SigmaRow {
    fn from(s: &SigmaStats) -> Self {
        let [ap, lr, dv] = s.mean_components_deg;
        Self {
            sigma: s.sigma,
            trials: s.trials,
            mean_rotation_deg: s.mean_rotation_deg,
            max_rotation_deg: s.max_rotation_deg,
            stderr_rotation_deg: s.stderr_rotation_deg,
            mean_alignment: s.mean_alignment,
            mean_alignment_per_axis: s.mean_alignment_per_axis,
            mean_components_deg: ComponentsRecord {
                anterior_posterior: ap,
                left_right: lr,
                dorsal_ventral: dv,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub rows: Vec<SigmaRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub scene: String,
    pub seed: u64,
    pub trials_per_sigma: usize,
    pub sigmas: Vec<f64>,
    pub methods: Vec<MethodReport>,
    /// Per sigma, `100 * (1 - anatomical / pca)` of the mean rotation variation.
    pub stability_gain_pct: Vec<Option<f64>>,
}

impl SweepReport {
    pub fn new(
        scene: &str,
        config: &NoiseSweepConfig,
        anatomical: &StabilityResult,
        pca: &StabilityResult,
    ) -> Self {
        let method = |r: &StabilityResult| MethodReport {
            method: r.method.label().to_string(),
            rows: r.per_sigma.iter().map(SigmaRow::from).collect(),
        };
        let gain = anatomical
            .per_sigma
            .iter()
            .zip(&pca.per_sigma)
            .map(|(a, p)| {
                (p.mean_rotation_deg > 0.0)
                    .then(|| 100.0 * (1.0 - a.mean_rotation_deg / p.mean_rotation_deg))
            })
            .collect();
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            scene: scene.to_string(),
            seed: config.seed,
            trials_per_sigma: config.trials_per_sigma,
            sigmas: config.sigmas.clone(),
            methods: vec![method(anatomical), method(pca)],
            stability_gain_pct: gain,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>6}  {:<10}  {:>12}  {:>12}  {:>10}  {:>9}  {:>9}  {:>9}",
            "sigma",
            "method",
            "mean_rot_deg",
            "max_rot_deg",
            "mean_align",
            "ap_deg",
            "lr_deg",
            "dv_deg"
        );
        for (i, sigma) in self.sigmas.iter().enumerate() {
            for m in &self.methods {
                let r = &m.rows[i];
                let c = &r.mean_components_deg;
                let _ = writeln!(
                    s,
                    "{:>6.2}  {:<10}  {:>12.6}  {:>12.6}  {:>10.3e}  {:>9.4}  {:>9.4}  {:>9.4}",
                    sigma,
                    m.method,
                    r.mean_rotation_deg,
                    r.max_rotation_deg,
                    r.mean_alignment,
                    c.anterior_posterior,
                    c.left_right,
                    c.dorsal_ventral
                );
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub reprojection_error_px: f64,
    pub degenerate: bool,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEvaluation {
    pub scene: String,
    pub error: Option<String>,
    /// EPnP/RANSAC only.
    pub basic: Option<PathRecord>,
    pub refined: Option<PathRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateSummary {
    pub scenes: usize,
    pub failed: usize,
    pub basic_degenerate: usize,
    pub refined_degenerate: usize,
    /// Percent of processed instances.
    pub basic_degenerate_pct: f64,
    pub refined_degenerate_pct: f64,
    pub mean_basic_error_px: Option<f64>,
    pub mean_refined_error_px: Option<f64>,
    pub error_reduction_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateReport {
    pub schema_version: u32,
    pub seed: u64,
    pub summary: EvaluateSummary,
    pub scenes: Vec<SceneEvaluation>,
}

fn evaluate_one(manifest: &Path, root: &Path, config: &LabelConfig) -> SceneEvaluation {
    let name = manifest
        .parent()
        .and_then(|p| p.strip_prefix(root).ok())
        .map(|p| p.display().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| ".".into());
    let run = || -> Result<(PathRecord, PathRecord), String> {
        let loaded = load_scene(manifest).map_err(|e| e.to_string())?;
        let mut c = config.clone();
        let path = |c: &LabelConfig| {
            label_scene(&loaded.scene, c)
                .map(|o| PathRecord {
                    reprojection_error_px: o.reprojection_error,
                    degenerate: o.degeneracy.degenerate,
                    reason: o.degeneracy.reason.map(|r| r.label().to_string()),
                })
                .map_err(|e| e.to_string())
        };
        c.refine_enabled = false;
        let basic = path(&c)?;
        c.refine_enabled = true;
        Ok((basic, path(&c)?))
    };
    match run() {
        Ok((basic, refined)) => SceneEvaluation {
            scene: name,
            error: None,
            basic: Some(basic),
            refined: Some(refined),
        },
        Err(e) => SceneEvaluation {
            scene: name,
            error: Some(e),
            basic: None,
            refined: None,
        },
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Basic and refined labelling of every manifest, in parallel; rows keep
/// the order of `manifests`.
pub fn evaluate_scenes(manifests: &[PathBuf], root: &Path, config: &LabelConfig) -> EvaluateReport {
    let scenes: Vec<SceneEvaluation> = manifests
        .par_iter()
        .map(|m| evaluate_one(m, root, config))
        .collect();
    let ok: Vec<_> = scenes
        .iter()
        .filter_map(|s| Some((s.basic.as_ref()?, s.refined.as_ref()?)))
        .collect();
    let n = ok.len();
    let basic_degenerate = ok.iter().filter(|(b, _)| b.degenerate).count();
    let refined_degenerate = ok.iter().filter(|(_, r)| r.degenerate).count();
    let pct = |k: usize| {
        if n == 0 {
            0.0
        } else {
            100.0 * k as f64 / n as f64
        }
    };
    let be: Vec<f64> = ok.iter().map(|(b, _)| b.reprojection_error_px).collect();
    let re: Vec<f64> = ok.iter().map(|(_, r)| r.reprojection_error_px).collect();
    let (mb, mr) = (mean(&be), mean(&re));
    EvaluateReport {
        schema_version: REPORT_SCHEMA_VERSION,
        seed: config.seed,
        summary: EvaluateSummary {
            scenes: scenes.len(),
            failed: scenes.len() - n,
            basic_degenerate,
            refined_degenerate,
            basic_degenerate_pct: pct(basic_degenerate),
            refined_degenerate_pct: pct(refined_degenerate),
            mean_basic_error_px: mb,
            mean_refined_error_px: mr,
            error_reduction_pct: match (mb, mr) {
                (Some(b), Some(r)) if b > 0.0 => Some(100.0 * (1.0 - r / b)),
                _ => None,
            },
        },
        scenes,
    }
}

impl EvaluateReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<24}  {:>14}  {:>14}  {:>10}  {:>10}",
            "scene", "basic_err_px", "refined_err_px", "basic_deg", "refined_deg"
        );
        for e in &self.scenes {
            match (&e.basic, &e.refined, &e.error) {
                (Some(b), Some(r), _) => {
                    let _ = writeln!(
                        s,
                        "{:<24}  {:>14.4}  {:>14.4}  {:>10}  {:>10}",
                        e.scene,
                        b.reprojection_error_px,
                        r.reprojection_error_px,
                        b.reason.as_deref().unwrap_or("-"),
                        r.reason.as_deref().unwrap_or("-")
                    );
                }
                (_, _, err) => {
                    let _ = writeln!(
                        s,
                        "{:<24}  error: {}",
                        e.scene,
                        err.as_deref().unwrap_or("?")
                    );
                }
            }
        }
        let m = &self.summary;
        let f = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(
            s,
            "{} scenes, {} failed; degenerate basic {:.2}% refined {:.2}%; mean error basic {} refined {} px (reduction {}%)",
            m.scenes,
            m.failed,
            m.basic_degenerate_pct,
            m.refined_degenerate_pct,
            f(m.mean_basic_error_px),
            f(m.mean_refined_error_px),
            f(m.error_reduction_pct)
        );
        s
    }
}
