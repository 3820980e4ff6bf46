//! Command-line entry points.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 only degenerate
//! results were produced.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use cuboid_core::evaluate::SweepInput;
use cuboid_core::pipeline::label_scene;
use cuboid_core::synthetic::{healthy_scene, SyntheticOptions};

use crate::config::PipelineConfig;
use crate::label::Label3D;
use crate::render::{render_overlay, RenderOutcome};
use crate::report::{evaluate_scenes, parallel_sweep, SweepReport};
use crate::scene_io::{find_manifests, load_scene, manifest_path, write_scene, LoadedScene};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "cuboid",
    version,
    about = "Anatomically oriented 3D box labels for fitted animal meshes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// TOML pipeline config; missing keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Label one scene and write the JSON label.
    Label {
        /// Scene manifest, or a directory containing scene.json.
        scene: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Skip the joint refinement (EPnP/RANSAC pose only).
        #[arg(long)]
        basic: bool,
    },
    /// Label every scene under a directory with and without refinement.
    Evaluate {
        scene_dir: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        /// Write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Keypoint-noise stability sweep of the anatomical and PCA frames.
    Sweep {
        scene: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        /// Comma-separated pixel standard deviations.
        #[arg(long, value_delimiter = ',')]
        sigmas: Option<Vec<f64>>,
        #[arg(long)]
        trials: Option<usize>,
        /// Defaults to the config's sweep.seed (42).
        #[arg(long)]
        seed: Option<u64>,
        /// Write the JSON report here and print the table; otherwise the
        /// JSON goes to stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Draw a label over the scene's image frame as SVG.
    Render {
        scene: PathBuf,
        label: PathBuf,
        out: PathBuf,
        /// Also write a PNG next to the SVG.
        #[arg(long)]
        png: bool,
    },
    /// Write seeded synthetic scenes.
    Synth {
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Gaussian pixel noise on the observed keypoints.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0.0)]
        occlusion: f64,
        #[arg(long, default_value_t = 1500)]
        mesh_points: usize,
    },
    /// Print the default config as TOML.
    Defaults,
}

struct Failure {
    code: i32,
    message: String,
}

fn data(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_DATA,
        message: e.to_string(),
    }
}

fn load_config(arg: &ConfigArg) -> Result<PipelineConfig, Failure> {
    match &arg.config {
        Some(p) => PipelineConfig::load(p).map_err(data),
        None => Ok(PipelineConfig::default()),
    }
}

fn load(scene: &Path) -> Result<LoadedScene, Failure> {
    load_scene(&manifest_path(scene)).map_err(data)
}

fn write_file(path: &Path, body: &str) -> Result<(), Failure> {
    fs::write(path, body).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn scene_name(loaded: &LoadedScene) -> String {
    let p = &loaded.path;
    p.parent()
        .and_then(|d| d.file_name())
        .or_else(|| p.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn execute(cmd: Command, out: &mut dyn Write) -> Result<i32, Failure> {
    let io = |e: std::io::Error| data(format!("stdout: {e}"));
    match cmd {
        Command::Label {
            scene,
            config,
            out: dest,
            seed,
            basic,
        } => {
            let cfg = load_config(&config)?;
            let loaded = load(&scene)?;
            let mut lc = cfg.label_config(seed);
            lc.refine_enabled = !basic;
            let outcome = label_scene(&loaded.scene, &lc).map_err(data)?;
            let label = Label3D::from_outcome(&loaded.scene, &outcome);
            let json = label.to_json();
            match dest {
                Some(p) => write_file(&p, &json)?,
                None => out.write_all(json.as_bytes()).map_err(io)?,
            }
            Ok(if label.degenerate.flag {
                EXIT_DEGENERATE
            } else {
                EXIT_OK
            })
        }
        Command::Evaluate {
            scene_dir,
            config,
            report,
            seed,
        } => {
            let cfg = load_config(&config)?;
            let manifests = find_manifests(&scene_dir).map_err(data)?;
            if manifests.is_empty() {
                return Err(data(format!(
                    "{}: no scene manifests found",
                    scene_dir.display()
                )));
            }
            let rep = evaluate_scenes(&manifests, &scene_dir, &cfg.label_config(seed));
            write!(out, "{}", rep.table()).map_err(io)?;
            if let Some(p) = report {
                write_file(&p, &rep.to_json())?;
            }
            let s = &rep.summary;
            let processed = s.scenes - s.failed;
            Ok(if processed == 0 {
                EXIT_DATA
            } else if s.refined_degenerate == processed {
                EXIT_DEGENERATE
            } else {
                EXIT_OK
            })
        }
        Command::Sweep {
            scene,
            config,
            sigmas,
            trials,
            seed,
            report,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = sigmas {
                cfg.sweep.sigmas = s;
            }
            if let Some(t) = trials {
                cfg.sweep.trials = t;
            }
            if let Some(s) = seed {
                cfg.sweep.seed = s;
            }
            cfg.validate().map_err(data)?;
            let loaded = load(&scene)?;
            let sweep_cfg = cfg.sweep_config();
            let lc = cfg.label_config(sweep_cfg.seed);
            let outcome = label_scene(&loaded.scene, &lc).map_err(data)?;
            let input = SweepInput {
                keypoints: &loaded.scene.keypoints,
                pose: &outcome.pose,
                intrinsics: &loaded.scene.intrinsics,
                policy: &lc.policy,
            };
            let (a, p) =
                parallel_sweep(&input, &sweep_cfg).map_err(|e| data(format!("sweep: {e}")))?;
            let rep = SweepReport::new(&scene_name(&loaded), &sweep_cfg, &a, &p);
            match report {
                Some(path) => {
                    write_file(&path, &rep.to_json())?;
                    write!(out, "{}", rep.table()).map_err(io)?;
                }
                None => out.write_all(rep.to_json().as_bytes()).map_err(io)?,
            }
            Ok(EXIT_OK)
        }
        Command::Render {
            scene,
            label,
            out: dest,
            png,
        } => {
            let loaded = load(&scene)?;
            let text = fs::read_to_string(&label)
                .map_err(|e| data(format!("{}: {e}", label.display())))?;
            let lbl =
                Label3D::from_json(&text).map_err(|e| data(format!("{}: {e}", label.display())))?;
            match render_overlay(&lbl, &loaded.scene.keypoints, &dest, png).map_err(data)? {
                RenderOutcome::Drawn => Ok(EXIT_OK),
                RenderOutcome::Refused { reason } => {
                    writeln!(out, "refused to draw degenerate label ({reason})").map_err(io)?;
                    Ok(EXIT_DEGENERATE)
                }
            }
        }
        Command::Synth {
            out_dir,
            count,
            seed,
            noise,
            occlusion,
            mesh_points,
        } => {
            if !(noise >= 0.0 && (0.0..=1.0).contains(&occlusion) && mesh_points > 0 && count > 0) {
                return Err(Failure {
                    code: EXIT_USAGE,
                    message:
                        "synth: need count > 0, mesh-points > 0, noise >= 0, occlusion in [0, 1]"
                            .into(),
                });
            }
            let opts = SyntheticOptions {
                pixel_noise: noise,
                occlusion_prob: occlusion,
                mesh_points,
                ..SyntheticOptions::default()
            };
            for i in 0..count {
                let s = healthy_scene(seed.wrapping_add(i as u64), &opts);
                let dir = if count == 1 {
                    out_dir.clone()
                } else {
                    out_dir.join(format!("scene-{i:03}"))
                };
                let m = write_scene(&dir, &s.scene).map_err(data)?;
                writeln!(out, "{}", m.display()).map_err(io)?;
            }
            Ok(EXIT_OK)
        }
        Command::Defaults => {
            write!(out, "{}", PipelineConfig::default().to_toml()).map_err(io)?;
            Ok(EXIT_OK)
        }
    }
}

/// Run the CLI on `args` (including the program name) and return the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}
