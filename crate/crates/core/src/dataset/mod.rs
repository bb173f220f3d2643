//! Candidate drawings for training data: camera placement, the geometric
//! threshold ladder, edge-image drawings and k-medoids selection.

mod kmedoids;

pub use kmedoids::{medoid_cost, pam, Pam};

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{Camera, DEFAULT_DISTANCE_FACTOR, DEFAULT_RESOLUTION};
use crate::error::{Error, Result};
use crate::eval::{binarize, chamfer_matrix, BinaryDrawing, DEFAULT_BINARIZE_THRESHOLD};
use crate::filter::{compose, ThresholdSet};
use crate::image::Drawing;
use crate::mesh::{TriangleMesh, Vec3};
use crate::raster::{canny_with_sigma, MapStack};

pub const CAMERA_ELEVATION_DEG: f64 = 30.0;
/// Minimum azimuth separation between the two cameras.
pub const MIN_AZIMUTH_GAP_DEG: f64 = 5.0;
pub const DEFAULT_SELECT_K: usize = 8;
/// Blur widths of the two edge-image families.
pub const EDGE_SIGMAS: [f64; 2] = [1.0, 2.0];
/// Canny low threshold as a fraction of the high one.
pub const CANNY_LOW_RATIO: f64 = 0.4;

/// A threshold ladder entry; infinite means the kind is off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LevelRepr", into = "LevelRepr")]
pub struct Level(pub f64);

impl Level {
    pub const OFF: Level = Level(f64::INFINITY);

    pub fn is_off(&self) -> bool {
        self.0.is_infinite()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LevelRepr {
    Value(f64),
    Word(String),
}

impl TryFrom<LevelRepr> for Level {
    type Error = String;

    fn try_from(r: LevelRepr) -> std::result::Result<Self, String> {
        match r {
            LevelRepr::Value(v) if v >= 0.0 => Ok(Level(v)),
            LevelRepr::Value(v) => Err(format!("negative threshold {v}")),
            LevelRepr::Word(w) if w == "off" => Ok(Level::OFF),
            LevelRepr::Word(w) => Err(format!("expected a number or \"off\", got {w:?}")),
        }
    }
}

impl From<Level> for LevelRepr {
    fn from(l: Level) -> Self {
        if l.is_off() {
            LevelRepr::Word("off".into())
        } else {
            LevelRepr::Value(l.0)
        }
    }
}

fn default_ladder() -> Vec<Level> {
    vec![Level(0.001), Level(0.01), Level(0.1), Level::OFF]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CandidateConfig {
    /// Suggestive contour thresholds.
    pub sc: Vec<Level>,
    /// Apparent ridge thresholds.
    pub ar: Vec<Level>,
    /// Shared ridge and valley thresholds.
    pub rv: Vec<Level>,
    /// Canny high thresholds on the Sobel magnitude of the shaded image.
    pub edge_thresholds: Vec<f64>,
}

impl Default for CandidateConfig {
    fn default() -> Self {
        Self {
            sc: default_ladder(),
            ar: default_ladder(),
            rv: default_ladder(),
            edge_thresholds: vec![0.1, 0.2, 0.4, 0.8],
        }
    }
}

impl CandidateConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, l) in [("sc", &self.sc), ("ar", &self.ar), ("rv", &self.rv)] {
            if l.is_empty() || l.iter().any(|v| !(v.0 >= 0.0)) {
                return Err(Error::InvalidArgument(format!("{name} ladder must be non-empty and non-negative")));
            }
        }
        if self.edge_thresholds.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidArgument("edge thresholds must be positive".into()));
        }
        Ok(())
    }

    pub fn candidate_count(&self) -> usize {
        self.sc.len() * self.ar.len() * self.rv.len() * 4 + EDGE_SIGMAS.len() * self.edge_thresholds.len()
    }

    fn thresholds(&self, sc: usize, ar: usize, rv: usize, creases: bool, borders: bool) -> ThresholdSet {
        let r = self.rv[rv].0;
        ThresholdSet::from_array([self.sc[sc].0, r, r, self.ar[ar].0])
            .with_creases(creases)
            .with_boundaries(borders)
    }
}

/// How a candidate was drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Provenance {
    /// Filtered line maps; fields index the ladders. Contours always on.
    Geometric {
        sc: usize,
        ar: usize,
        rv: usize,
        creases: bool,
        borders: bool,
    },
    /// Canny edges of the unsmoothed shaded image.
    Edge { sigma: f64, threshold: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub drawing: Drawing,
    pub provenance: Provenance,
}

pub fn provenance_list(cfg: &CandidateConfig) -> Vec<Provenance> {
    let mut out = Vec::with_capacity(cfg.candidate_count());
    for sc in 0..cfg.sc.len() {
        for ar in 0..cfg.ar.len() {
            for rv in 0..cfg.rv.len() {
                for creases in [false, true] {
                    for borders in [false, true] {
                        out.push(Provenance::Geometric {
                            sc,
                            ar,
                            rv,
                            creases,
                            borders,
                        });
                    }
                }
            }
        }
    }
    for sigma in EDGE_SIGMAS {
        for threshold in 0..cfg.edge_thresholds.len() {
            out.push(Provenance::Edge { sigma, threshold });
        }
    }
    out
}

/// Re-renders one candidate from its provenance.
pub fn render_candidate(maps: &MapStack, cfg: &CandidateConfig, p: &Provenance) -> Result<Drawing> {
    match *p {
        Provenance::Geometric {
            sc,
            ar,
            rv,
            creases,
            borders,
        } => {
            if sc >= cfg.sc.len() || ar >= cfg.ar.len() || rv >= cfg.rv.len() {
                return Err(Error::InvalidArgument(format!("ladder index out of range in {p:?}")));
            }
            compose(maps, &cfg.thresholds(sc, ar, rv, creases, borders))
        }
        Provenance::Edge { sigma, threshold } => {
            let high = *cfg
                .edge_thresholds
                .get(threshold)
                .ok_or_else(|| Error::InvalidArgument(format!("edge threshold index {threshold} out of range")))?;
            let shaded = maps
                .shaded
                .first()
                .ok_or_else(|| Error::InvalidArgument("map stack has no shaded image".into()))?;
            Ok(canny_with_sigma(shaded, sigma, CANNY_LOW_RATIO * high, high))
        }
    }
}

/// All geometric and edge candidates in provenance order.
pub fn generate_candidates(maps: &MapStack, cfg: &CandidateConfig) -> Result<Vec<Candidate>> {
    cfg.validate()?;
    provenance_list(cfg)
        .into_par_iter()
        .map(|p| {
            Ok(Candidate {
                drawing: render_candidate(maps, cfg, &p)?,
                provenance: p,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Indices into the candidate list, in medoid order.
    pub selected: Vec<usize>,
    /// Candidates dropped because they binarize to nothing.
    pub dropped_empty: Vec<usize>,
    pub cost: f64,
    pub build_cost: f64,
}

/// The `k` most distinct candidates: k-medoids under symmetric Chamfer
/// distance between binarized drawings. Empty candidates are dropped first.
pub fn select_distinct(drawings: &[Drawing], k: usize) -> Result<Selection> {
    let bins: Vec<BinaryDrawing> = drawings
        .par_iter()
        .map(|d| binarize(d, DEFAULT_BINARIZE_THRESHOLD))
        .collect();
    let (kept, dropped_empty): (Vec<usize>, Vec<usize>) = (0..bins.len()).partition(|&i| !bins[i].is_empty());
    if !dropped_empty.is_empty() {
        log::warn!("{} empty candidates dropped before selection", dropped_empty.len());
    }
    if kept.len() < k {
        return Err(Error::TooFew {
            needed: k,
            got: kept.len(),
        });
    }
    let kept_bins: Vec<BinaryDrawing> = kept.iter().map(|&i| bins[i].clone()).collect();
    let dist = chamfer_matrix(&kept_bins)?;
    let r = pam(&dist, k)?;
    Ok(Selection {
        selected: r.medoids.iter().map(|&m| kept[m]).collect(),
        dropped_empty,
        cost: r.cost,
        build_cost: r.build_cost,
    })
}

/// Two cameras at fixed elevation and seeded random azimuths, aimed at the
/// centroid from 2.5 bounding radii. Missing up axis defaults to +Y.
pub fn place_cameras(mesh: &TriangleMesh, seed: u64, width: usize, height: usize) -> Result<[Camera; 2]> {
    let up = mesh.ground_up_axis().unwrap_or_else(|| {
        log::warn!("mesh has no ground up axis, using +Y");
        Vec3::y()
    });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a0: f64 = rng.gen_range(0.0..360.0);
    let a1 = loop {
        let a: f64 = rng.gen_range(0.0..360.0);
        let gap = (a - a0).rem_euclid(360.0);
        if gap.min(360.0 - gap) >= MIN_AZIMUTH_GAP_DEG {
            break a;
        }
    };
    let (_, radius) = mesh.bounding_sphere();
    let target = mesh.centroid();
    let dist = DEFAULT_DISTANCE_FACTOR * radius;
    let cam = |az| Camera::orbit(target, dist, az, CAMERA_ELEVATION_DEG, up, width, height);
    Ok([cam(a0)?, cam(a1)?])
}

pub fn place_default_cameras(mesh: &TriangleMesh, seed: u64) -> Result<[Camera; 2]> {
    place_cameras(mesh, seed, DEFAULT_RESOLUTION, DEFAULT_RESOLUTION)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub shape: String,
    pub view: usize,
    pub seed: u64,
    pub camera: Camera,
    pub config: CandidateConfig,
    pub candidates: Vec<ManifestEntry>,
    pub selected: Vec<usize>,
    pub dropped_empty: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub provenance: Provenance,
}

pub fn candidate_file_name(index: usize) -> String {
    format!("candidate_{index:03}.png")
}

/// Writes `<root>/<shape>/<view>/candidate_###.png` and `manifest.json`;
/// returns the view directory.
#[allow(clippy::too_many_arguments)]
pub fn write_candidate_set(
    root: &Path,
    shape: &str,
    view: usize,
    seed: u64,
    camera: &Camera,
    cfg: &CandidateConfig,
    candidates: &[Candidate],
    selection: &Selection,
) -> Result<PathBuf> {
    let dir = root.join(shape).join(view.to_string());
    fs::create_dir_all(&dir)?;
    candidates
        .par_iter()
        .enumerate()
        .try_for_each(|(i, c)| c.drawing.save_png(dir.join(candidate_file_name(i))))?;
    let manifest = Manifest {
        shape: shape.to_string(),
        view,
        seed,
        camera: *camera,
        config: cfg.clone(),
        candidates: candidates
            .iter()
            .enumerate()
            .map(|(i, c)| ManifestEntry {
                file: candidate_file_name(i),
                provenance: c.provenance,
            })
            .collect(),
        selected: selection.selected.clone(),
        dropped_empty: selection.dropped_empty.clone(),
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Image;
    use crate::mesh::primitives::icosphere;
    use crate::raster::{render_maps, RenderOptions};

    fn maps() -> MapStack {
        let mesh = crate::mesh::normalize_size(&crate::mesh::primitives::lobed_torus(1.0, 0.3, 4, 0.15, 48, 24)).unwrap();
        let cam = Camera::framing(&mesh, 30.0, 35.0, 96, 96).unwrap();
        render_maps(&mesh, &cam, &RenderOptions::default())
    }

    #[test]
    fn default_config_yields_264_candidates() {
        let cfg = CandidateConfig::default();
        assert_eq!(cfg.candidate_count(), 264);
        assert_eq!(provenance_list(&cfg).len(), 264);
        let geometric = provenance_list(&cfg)
            .iter()
            .filter(|p| matches!(p, Provenance::Geometric { .. }))
            .count();
        assert_eq!(geometric, 256);
    }

    #[test]
    fn all_off_candidate_is_contours_only() {
        let m = maps();
        let cfg = CandidateConfig::default();
        let p = Provenance::Geometric {
            sc: 3,
            ar: 3,
            rv: 3,
            creases: false,
            borders: false,
        };
        let d = render_candidate(&m, &cfg, &p).unwrap();
        assert_eq!(d, m.contour.mask.to_drawing());
    }

    #[test]
    fn provenance_round_trip_is_bit_exact() {
        let m = maps();
        let cfg = CandidateConfig::default();
        let cands = generate_candidates(&m, &cfg).unwrap();
        assert_eq!(cands.len(), 264);
        for c in cands.iter().step_by(7) {
            let json = serde_json::to_string(&c.provenance).unwrap();
            let p: Provenance = serde_json::from_str(&json).unwrap();
            assert_eq!(render_candidate(&m, &cfg, &p).unwrap(), c.drawing);
        }
    }

    #[test]
    fn ladder_serializes_off_as_word() {
        let cfg = CandidateConfig::default();
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(json.contains("\"off\""));
        assert_eq!(serde_json::from_str::<CandidateConfig>(&json).unwrap(), cfg);
        assert!(serde_json::from_str::<Level>("\"on\"").is_err());
        assert!(serde_json::from_str::<Level>("-1.0").is_err());
    }

    #[test]
    fn cameras_are_elevated_and_deterministic() {
        let mesh = icosphere(2, 1.0).with_ground_up_axis(Vec3::z());
        let cams = place_cameras(&mesh, 42, 64, 64).unwrap();
        assert_eq!(cams, place_cameras(&mesh, 42, 64, 64).unwrap());
        let (_, r) = mesh.bounding_sphere();
        let mut az = Vec::new();
        for c in &cams {
            let v = c.position - mesh.centroid();
            let elev = (v.dot(&Vec3::z()) / v.norm()).asin().to_degrees();
            assert!((elev - 30.0).abs() < 1e-6);
            assert!((v.norm() - 2.5 * r).abs() < 1e-9);
            assert_eq!(c.target, mesh.centroid());
            az.push(v.y.atan2(v.x).to_degrees());
        }
        let gap = (az[0] - az[1]).rem_euclid(360.0);
        assert!(gap.min(360.0 - gap) >= MIN_AZIMUTH_GAP_DEG);
        for seed in 0..200 {
            let c = place_cameras(&mesh, seed, 8, 8).unwrap();
            assert_ne!(c[0].position, c[1].position);
        }
    }

    fn bar(w: usize, y: usize, x0: usize, x1: usize) -> Drawing {
        Image::from_fn(w, w, |x, yy| if yy == y && (x0..x1).contains(&x) { 1.0 } else { 0.0 })
    }

    #[test]
    fn selection_drops_empty_and_returns_everything_when_k_equals_n() {
        let ds: Vec<Drawing> = (0..8).map(|i| bar(40, 3 + 4 * i, 5, 30)).chain([Drawing::new(40, 40)]).collect();
        let s = select_distinct(&ds, 8).unwrap();
        assert_eq!(s.dropped_empty, vec![8]);
        let mut sel = s.selected.clone();
        sel.sort();
        assert_eq!(sel, (0..8).collect::<Vec<_>>());
        assert!(matches!(select_distinct(&ds, 9), Err(Error::TooFew { needed: 9, got: 8 })));
    }

    #[test]
    fn selection_picks_one_per_cluster() {
        let mut ds = Vec::new();
        for base in [5, 20, 35] {
            for j in 0..4 {
                ds.push(bar(48, base + j % 2, 4 + j, 40));
            }
        }
        let s = select_distinct(&ds, 3).unwrap();
        let mut clusters: Vec<usize> = s.selected.iter().map(|i| i / 4).collect();
        clusters.sort();
        assert_eq!(clusters, vec![0, 1, 2]);
        assert!(s.cost <= s.build_cost);
    }

    #[test]
    fn candidate_set_layout() {
        let dir = tempfile::tempdir().unwrap();
        let m = maps();
        let cfg = CandidateConfig {
            sc: vec![Level(0.01), Level::OFF],
            ar: vec![Level::OFF],
            rv: vec![Level::OFF],
            edge_thresholds: vec![0.2],
        };
        let cands = generate_candidates(&m, &cfg).unwrap();
        assert_eq!(cands.len(), 2 * 4 + 2);
        let sel = Selection {
            selected: vec![0, 9],
            dropped_empty: vec![],
            cost: 0.0,
            build_cost: 0.0,
        };
        let cam = Camera::framing(&icosphere(1, 1.0), 0.0, 30.0, 96, 96).unwrap();
        let out = write_candidate_set(dir.path(), "blob", 1, 7, &cam, &cfg, &cands, &sel).unwrap();
        assert_eq!(out, dir.path().join("blob").join("1"));
        assert!(out.join("candidate_009.png").exists());
        let man: Manifest = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(man.candidates.len(), 10);
        assert_eq!(man.selected, vec![0, 9]);
        assert_eq!(man.config, cfg);
    }
}
