//! Run configuration read from TOML; command-line flags override it.

use std::path::{Path, PathBuf};

use lineart::camera::{Camera, DEFAULT_RESOLUTION};
use lineart::dataset::{place_cameras, CandidateConfig, DEFAULT_SELECT_K};
use lineart::optimize::OptimizeConfig;
use lineart::raster::RenderOptions;
use lineart::ranker::{MiniTopology, SyntheticConfig, TrainConfig};
use lineart::{ThresholdSet, TriangleMesh};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mesh: Option<PathBuf>,
    pub output: PathBuf,
    pub width: usize,
    pub height: usize,
    /// Source of all randomness.
    pub seed: u64,
    /// Defaults to 1% of the image height.
    pub near_radius_px: Option<f64>,
    /// Also write the float dump of all maps.
    pub dump_maps: bool,
    pub camera: CameraConfig,
    pub render: RenderOptions,
    pub thresholds: Option<ThresholdSet>,
    pub optimize: OptimizeConfig,
    pub scorer: ScorerConfig,
    pub candidates: CandidateConfig,
    pub select_k: usize,
    pub train: TrainSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mesh: None,
            output: PathBuf::from("out"),
            width: DEFAULT_RESOLUTION,
            height: DEFAULT_RESOLUTION,
            seed: 0,
            near_radius_px: None,
            dump_maps: false,
            camera: CameraConfig::default(),
            render: RenderOptions::default(),
            thresholds: None,
            optimize: OptimizeConfig::default(),
            scorer: ScorerConfig::default(),
            candidates: CandidateConfig::default(),
            select_k: DEFAULT_SELECT_K,
            train: TrainSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CameraMode {
    /// Explicit azimuth and elevation around the centroid.
    #[default]
    Orbit,
    /// Seeded placement; `view` picks one of the two cameras.
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    pub mode: CameraMode,
    pub azimuth: f64,
    pub elevation: f64,
    pub view: usize,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            mode: CameraMode::Orbit,
            azimuth: 30.0,
            elevation: 30.0,
            view: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScorerConfig {
    /// Negative mean squared difference to a target drawing.
    Reference { target: PathBuf },
    /// Learned scorer checkpoint.
    Mini { checkpoint: PathBuf },
    Constant { value: f64 },
    #[default]
    Unset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub config: TrainConfig,
    pub data: SyntheticConfig,
    pub topology: MiniTopology,
    /// Pairs drawn with `data.seed + 1` for accuracy reporting.
    pub held_out: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            config: TrainConfig::default(),
            data: SyntheticConfig::default(),
            topology: MiniTopology::default().with_downsample(1),
            held_out: 200,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::bad_input("bad_config", e.to_string().replace('\n', " ")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::bad_input("config_not_found", format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn mesh_path(&self) -> CliResult<&Path> {
        self.mesh
            .as_deref()
            .ok_or_else(|| CliError::bad_input("missing_mesh", "no mesh given"))
    }

    pub fn camera_for(&self, mesh: &TriangleMesh) -> CliResult<Camera> {
        let c = &self.camera;
        let cam = match c.mode {
            CameraMode::Orbit => Camera::framing(mesh, c.azimuth, c.elevation, self.width, self.height)?,
            CameraMode::Auto => {
                if c.view > 1 {
                    return Err(CliError::bad_input("bad_config", format!("camera view {} not in 0..2", c.view)));
                }
                place_cameras(mesh, self.seed, self.width, self.height)?[c.view]
            }
        };
        Ok(cam)
    }

    pub fn near_radius(&self, height: usize) -> CliResult<f64> {
        match self.near_radius_px {
            Some(r) if !(r > 0.0 && r.is_finite()) => {
                Err(CliError::bad_input("bad_config", format!("near radius must be > 0, got {r}")))
            }
            Some(r) => Ok(r),
            None => Ok(lineart::eval::default_near_radius(height)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("colour = 3").is_err());
        assert!(RunConfig::from_toml("[camera]\nzoom = 2").is_err());
        assert!(RunConfig::from_toml("[scorer]\nkind = \"constant\"\nvalue = 1.0\nextra = 2").is_err());
        assert_eq!(RunConfig::from_toml("[optimize]\nprofile = \"warp\"").unwrap_err().exit_code(), 2);
    }

    #[test]
    fn full_config_parses() {
        let c = RunConfig::from_toml(
            r#"
mesh = "a.obj"
output = "o"
width = 64
height = 48
seed = 9
near_radius_px = 2.5
[camera]
mode = "auto"
view = 1
[thresholds]
t_s = inf
t_r = 0.1
t_v = 0.1
t_a = 0.2
include_boundaries = true
[optimize]
profile = "fast"
[scorer]
kind = "reference"
target = "t.png"
[candidates]
sc = [0.01, "off"]
[train.config]
epochs = 0
"#,
        )
        .unwrap();
        assert_eq!(c.camera.mode, CameraMode::Auto);
        assert!(c.thresholds.unwrap().t_s.is_infinite());
        assert_eq!(c.scorer, ScorerConfig::Reference { target: "t.png".into() });
        assert_eq!(c.candidates.sc.len(), 2);
        assert_eq!(c.train.config.epochs, 0);
        assert_eq!(c.near_radius(48).unwrap(), 2.5);
        assert_eq!(RunConfig::default().near_radius(768).unwrap(), 7.68);
    }
}
