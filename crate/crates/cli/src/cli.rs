//! Argument parsing and dispatch.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use lineart::optimize::Profile;

use crate::commands::{cmd_eval, cmd_gen_candidates, cmd_optimize, cmd_render, cmd_train_ranker, with_threads, write_eval_csv};
use crate::config::{CameraMode, RunConfig, ScorerConfig};
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "lineart", version, about = "Line drawings from triangle meshes")]
pub struct Cli {
    /// TOML run configuration; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads; 0 uses all logical cores.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw with fixed thresholds.
    Render(RenderArgs),
    /// Search thresholds that maximize a scorer.
    Optimize(OptimizeArgs),
    /// Compare drawings against references; writes CSV.
    Eval(EvalArgs),
    /// Write candidate drawings and the k most distinct ones.
    GenCandidates(GenArgs),
    /// Train the mini scorer on synthetic preference pairs.
    TrainRanker(TrainArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SceneArgs {
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub azimuth: Option<f64>,
    #[arg(long)]
    pub elevation: Option<f64>,
    /// Seeded camera placement; picks view 0 or 1.
    #[arg(long)]
    pub auto_view: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    #[arg(long)]
    pub t_s: Option<f64>,
    #[arg(long)]
    pub t_r: Option<f64>,
    #[arg(long)]
    pub t_v: Option<f64>,
    #[arg(long)]
    pub t_a: Option<f64>,
    #[arg(long)]
    pub boundaries: bool,
    #[arg(long)]
    pub creases: bool,
    #[arg(long)]
    pub dump_maps: bool,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// 16 starts instead of 256.
    #[arg(long)]
    pub fast: bool,
    /// Reference-matching scorer target.
    #[arg(long, conflicts_with_all = ["checkpoint", "constant"])]
    pub reference: Option<PathBuf>,
    /// Mini scorer checkpoint.
    #[arg(long, conflicts_with = "constant")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub constant: Option<f64>,
    #[arg(long)]
    pub creases: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub synthetic: PathBuf,
    pub reference: PathBuf,
    /// Contour masks with matching names; enables silhouette removal.
    #[arg(long)]
    pub contours: Option<PathBuf>,
    #[arg(long)]
    pub near_radius_px: Option<f64>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    #[arg(long)]
    pub select_k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
}

impl SceneArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(m) = &self.mesh {
            cfg.mesh = Some(m.clone());
        }
        if let Some(o) = &self.output {
            cfg.output = o.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(w) = self.width {
            cfg.width = w;
        }
        if let Some(h) = self.height {
            cfg.height = h;
        }
        if let Some(a) = self.azimuth {
            cfg.camera.azimuth = a;
            cfg.camera.mode = CameraMode::Orbit;
        }
        if let Some(e) = self.elevation {
            cfg.camera.elevation = e;
            cfg.camera.mode = CameraMode::Orbit;
        }
        if let Some(v) = self.auto_view {
            cfg.camera.mode = CameraMode::Auto;
            cfg.camera.view = v;
        }
    }
}

impl Cli {
    /// Defaults, then the config file, then flags.
    pub fn resolve_config(&self) -> CliResult<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        match &self.command {
            Command::Render(a) => {
                a.scene.apply(&mut cfg);
                let mut t = cfg.thresholds.unwrap_or_default();
                for (slot, v) in [(&mut t.t_s, a.t_s), (&mut t.t_r, a.t_r), (&mut t.t_v, a.t_v), (&mut t.t_a, a.t_a)] {
                    if let Some(v) = v {
                        *slot = v;
                    }
                }
                t.include_boundaries |= a.boundaries;
                t.include_creases |= a.creases;
                cfg.thresholds = Some(t);
                cfg.dump_maps |= a.dump_maps;
            }
            Command::Optimize(a) => {
                a.scene.apply(&mut cfg);
                if a.fast {
                    cfg.optimize.profile = Profile::Fast;
                }
                cfg.optimize.include_creases |= a.creases;
                if let Some(p) = &a.reference {
                    cfg.scorer = ScorerConfig::Reference { target: p.clone() };
                }
                if let Some(p) = &a.checkpoint {
                    cfg.scorer = ScorerConfig::Mini { checkpoint: p.clone() };
                }
                if let Some(v) = a.constant {
                    cfg.scorer = ScorerConfig::Constant { value: v };
                }
            }
            Command::Eval(a) => {
                if a.near_radius_px.is_some() {
                    cfg.near_radius_px = a.near_radius_px;
                }
            }
            Command::GenCandidates(a) => {
                a.scene.apply(&mut cfg);
                if let Some(k) = a.select_k {
                    cfg.select_k = k;
                }
            }
            Command::TrainRanker(a) => {
                if let Some(o) = &a.output {
                    cfg.output = o.clone();
                }
                if let Some(s) = a.seed {
                    cfg.seed = s;
                }
                if let Some(e) = a.epochs {
                    cfg.train.config.epochs = e;
                }
                if let Some(lr) = a.lr {
                    cfg.train.config.lr = lr;
                }
            }
        }
        Ok(cfg)
    }

    /// Runs the command and returns a one-line summary for stdout.
    pub fn run(&self) -> CliResult<String> {
        let cfg = self.resolve_config()?;
        with_threads(self.threads, || self.dispatch(&cfg))?
    }

    fn dispatch(&self, cfg: &RunConfig) -> CliResult<String> {
        Ok(match &self.command {
            Command::Render(_) => {
                let out = cmd_render(cfg)?;
                format!("wrote {}", out.png.display())
            }
            Command::Optimize(_) => {
                let out = cmd_optimize(cfg)?;
                serde_json::to_string(&out.record)?
            }
            Command::Eval(a) => {
                let summary = cmd_eval(&a.synthetic, &a.reference, a.contours.as_deref(), cfg)?;
                match &a.csv {
                    Some(p) => {
                        write_eval_csv(&summary, std::fs::File::create(p)?)?;
                        format!("wrote {} rows to {}", summary.rows.len(), p.display())
                    }
                    None => {
                        let mut buf = Vec::new();
                        write_eval_csv(&summary, &mut buf)?;
                        let mut stdout = std::io::stdout().lock();
                        stdout.write_all(&buf)?;
                        String::new()
                    }
                }
            }
            Command::GenCandidates(_) => {
                let out = cmd_gen_candidates(cfg)?;
                out.view_dirs
                    .iter()
                    .map(|d| format!("wrote {}", d.display()))
                    .collect::<Vec<_>>()
                    .join("\n")
            }
            Command::TrainRanker(_) => {
                let r = cmd_train_ranker(cfg)?;
                serde_json::to_string(&r)?
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "seed = 3\nwidth = 100\n[optimize]\nprofile = \"full\"\n").unwrap();
        let cli = Cli::parse_from([
            "lineart",
            "--config",
            path.to_str().unwrap(),
            "optimize",
            "--seed",
            "5",
            "--fast",
            "--constant",
            "2",
        ]);
        let cfg = cli.resolve_config().unwrap();
        assert_eq!((cfg.seed, cfg.width), (5, 100));
        assert_eq!(cfg.optimize.profile, Profile::Fast);
        assert_eq!(cfg.scorer, ScorerConfig::Constant { value: 2.0 });
    }

    #[test]
    fn render_threshold_flags() {
        let cli = Cli::parse_from(["lineart", "render", "--t-s", "inf", "--t-a", "0.3", "--boundaries"]);
        let t = cli.resolve_config().unwrap().thresholds.unwrap();
        assert!(t.t_s.is_infinite());
        assert_eq!((t.t_r, t.t_a, t.include_boundaries), (0.0, 0.3, true));
    }
}
