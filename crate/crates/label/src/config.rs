//! Pipeline configuration file (TOML).
//!
//! Every key is optional; missing keys take the defaults below.

use std::fs;
use std::path::Path;

use cuboid_core::evaluate::{NoiseSweepConfig, DEFAULT_DEGENERATE_AREA_FRAC, DEFAULT_SIGMAS};
use cuboid_core::frame::DEFAULT_MIN_CONFIDENCE;
use cuboid_core::obox::DEFAULT_EPSILON;
use cuboid_core::pipeline::LabelConfig;
use cuboid_core::pose::{RansacParams, RefineOptions, UncertaintyParams};
use cuboid_core::{AxisPair, AxisPolicy};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("config: {field}: {message}")]
    Invalid {
        field: &'static str,
        message: &'static str,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RansacSection {
    pub threshold_px: f64,
    pub confidence: f64,
    pub max_iters: usize,
}

impl Default for RansacSection {
    fn default() -> Self {
        let p = RansacParams::default();
        Self {
            threshold_px: p.threshold_px,
            confidence: p.confidence,
            max_iters: p.max_iters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub sigmas: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            sigmas: DEFAULT_SIGMAS.to_vec(),
            trials: 100,
            seed: 42,
        }
    }
}

/// Ordered `[from, to]` landmark pairs per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AxesSection {
    pub x: Vec<[String; 2]>,
    pub y: Vec<[String; 2]>,
    pub min_confidence: f64,
}

impl Default for AxesSection {
    fn default() -> Self {
        let p = AxisPolicy::default();
        let pairs = |v: &[AxisPair]| v.iter().map(|a| [a.from.clone(), a.to.clone()]).collect();
        Self {
            x: pairs(&p.x),
            y: pairs(&p.y),
            min_confidence: DEFAULT_MIN_CONFIDENCE,
        }
    }
}

impl AxesSection {
    pub fn policy(&self) -> AxisPolicy {
        let pairs = |v: &[[String; 2]]| {
            v.iter()
                .map(|[a, b]| AxisPair::new(a.clone(), b.clone()))
                .collect()
        };
        AxisPolicy {
            x: pairs(&self.x),
            y: pairs(&self.y),
            min_confidence: self.min_confidence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Weight of the keypoint term against the mask-box term.
    pub lambda: f64,
    /// Box margin in mesh units.
    pub epsilon: f64,
    pub xtol: f64,
    pub ftol: f64,
    pub gtol: f64,
    pub max_iters: usize,
    pub sigma_vis: f64,
    pub sigma_occ: f64,
    pub conf_floor: f64,
    pub edge_margin_frac: f64,
    pub degenerate_area_frac: f64,
    pub ransac: RansacSection,
    pub sweep: SweepSection,
    pub axes: AxesSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let r = RefineOptions::default();
        let u = UncertaintyParams::default();
        Self {
            lambda: r.lambda,
            epsilon: DEFAULT_EPSILON,
            xtol: r.xtol,
            ftol: r.ftol,
            gtol: r.gtol,
            max_iters: r.max_iters,
            sigma_vis: u.sigma_vis,
            sigma_occ: u.sigma_occ,
            conf_floor: u.conf_floor,
            edge_margin_frac: u.edge_margin_frac,
            degenerate_area_frac: DEFAULT_DEGENERATE_AREA_FRAC,
            ransac: RansacSection::default(),
            sweep: SweepSection::default(),
            axes: AxesSection::default(),
        }
    }
}

fn check(ok: bool, field: &'static str, message: &'static str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::Invalid { field, message })
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: "<config>".into(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        check(
            (0.0..=1.0).contains(&self.lambda),
            "lambda",
            "must lie in [0, 1]",
        )?;
        check(self.epsilon >= 0.0, "epsilon", "must be non-negative")?;
        for (v, f) in [
            (self.xtol, "xtol"),
            (self.ftol, "ftol"),
            (self.gtol, "gtol"),
        ] {
            check(v > 0.0, f, "must be positive")?;
        }
        check(self.max_iters > 0, "max_iters", "must be positive")?;
        check(self.sigma_vis > 0.0, "sigma_vis", "must be positive")?;
        check(self.sigma_occ > 0.0, "sigma_occ", "must be positive")?;
        check(
            self.conf_floor > 0.0 && self.conf_floor <= 1.0,
            "conf_floor",
            "must lie in (0, 1]",
        )?;
        check(
            (0.0..0.5).contains(&self.edge_margin_frac),
            "edge_margin_frac",
            "must lie in [0, 0.5)",
        )?;
        check(
            (0.0..1.0).contains(&self.degenerate_area_frac),
            "degenerate_area_frac",
            "must lie in [0, 1)",
        )?;
        check(
            self.ransac.threshold_px > 0.0,
            "ransac.threshold_px",
            "must be positive",
        )?;
        check(
            self.ransac.confidence > 0.0 && self.ransac.confidence < 1.0,
            "ransac.confidence",
            "must lie in (0, 1)",
        )?;
        check(
            self.ransac.max_iters > 0,
            "ransac.max_iters",
            "must be positive",
        )?;
        check(
            !self.sweep.sigmas.is_empty()
                && self.sweep.sigmas.iter().all(|s| s.is_finite() && *s >= 0.0),
            "sweep.sigmas",
            "must be a non-empty list of non-negative numbers",
        )?;
        check(self.sweep.trials > 0, "sweep.trials", "must be positive")?;
        check(!self.axes.x.is_empty(), "axes.x", "needs at least one pair")?;
        check(!self.axes.y.is_empty(), "axes.y", "needs at least one pair")?;
        Ok(())
    }

    /// Pipeline settings with `seed` driving RANSAC sampling.
    pub fn label_config(&self, seed: u64) -> LabelConfig {
        LabelConfig {
            policy: self.axes.policy(),
            epsilon: self.epsilon,
            ransac: RansacParams {
                threshold_px: self.ransac.threshold_px,
                confidence: self.ransac.confidence,
                max_iters: self.ransac.max_iters,
                ..RansacParams::default()
            },
            uncertainty: UncertaintyParams {
                sigma_vis: self.sigma_vis,
                sigma_occ: self.sigma_occ,
                conf_floor: self.conf_floor,
                edge_margin_frac: self.edge_margin_frac,
            },
            refine: RefineOptions {
                lambda: self.lambda,
                xtol: self.xtol,
                ftol: self.ftol,
                gtol: self.gtol,
                max_iters: self.max_iters,
                ..RefineOptions::default()
            },
            degenerate_area_frac: self.degenerate_area_frac,
            refine_enabled: true,
            seed,
        }
    }

    pub fn sweep_config(&self) -> NoiseSweepConfig {
        NoiseSweepConfig {
            sigmas: self.sweep.sigmas.clone(),
            trials_per_sigma: self.sweep.trials,
            seed: self.sweep.seed,
        }
    }
}
