use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use lineart::camera::Camera;
use lineart::dataset::{generate_candidates, select_distinct, write_candidate_set};
use lineart::eval::{binarize, evaluate, remove_silhouettes, EvalReport, DEFAULT_BINARIZE_THRESHOLD};
use lineart::mesh::{load_mesh, normalize_size};
use lineart::optimize::{boundary_check, final_drawing, optimize_thresholds, Objective, OptimizeFlags, OptimizeResult};
use lineart::raster::{render_maps, MapStack};
use lineart::ranker::{
    hinge_rank_loss, ranking_accuracy, synthetic_preference_pairs, train_mini_scorer, ConstantScorer, MiniScorer,
    ReferenceScorer, Scorer, SyntheticConfig,
};
use lineart::{Drawing, ThresholdSet, TriangleMesh};
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, ScorerConfig};
use crate::error::{CliError, CliResult};

/// Runs `f` on a dedicated pool of `threads` workers; 0 keeps the default.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::computation("thread_pool", e.to_string()))?;
    Ok(pool.install(f))
}

pub struct Scene {
    pub name: String,
    pub mesh: TriangleMesh,
    pub camera: Camera,
    pub maps: MapStack,
}

pub fn load_scene(cfg: &RunConfig) -> CliResult<(String, TriangleMesh)> {
    let path = cfg.mesh_path()?;
    let mesh = normalize_size(&load_mesh(path)?)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "mesh".into());
    Ok((name, mesh))
}

pub fn prepare(cfg: &RunConfig) -> CliResult<Scene> {
    let (name, mesh) = load_scene(cfg)?;
    let camera = cfg.camera_for(&mesh)?;
    let maps = render_maps(&mesh, &camera, &cfg.render);
    Ok(Scene {
        name,
        mesh,
        camera,
        maps,
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderRecord {
    pub mesh: String,
    pub camera: Camera,
    pub thresholds: ThresholdSet,
}

pub struct RenderOutput {
    pub drawing: Drawing,
    pub png: PathBuf,
}

/// Fixed-threshold drawing: `drawing.png`, `render.json`, optional `maps.bin`.
pub fn cmd_render(cfg: &RunConfig) -> CliResult<RenderOutput> {
    let t = cfg.thresholds.unwrap_or_default();
    t.validate()?;
    let scene = prepare(cfg)?;
    let drawing = lineart::filter::compose(&scene.maps, &t)?;
    fs::create_dir_all(&cfg.output)?;
    let png = cfg.output.join("drawing.png");
    drawing.save_png(&png)?;
    write_json(
        &cfg.output.join("render.json"),
        &RenderRecord {
            mesh: scene.name,
            camera: scene.camera,
            thresholds: t,
        },
    )?;
    if cfg.dump_maps {
        scene.maps.write_dump(BufWriter::new(fs::File::create(cfg.output.join("maps.bin"))?))?;
    }
    Ok(RenderOutput { drawing, png })
}

pub fn resolve_scorer(cfg: &ScorerConfig) -> CliResult<Box<dyn Scorer>> {
    Ok(match cfg {
        ScorerConfig::Reference { target } => Box::new(ReferenceScorer::new(
            Drawing::load_png(target)
                .map_err(|e| CliError::bad_input("scorer_load", format!("{}: {e}", target.display())))?,
        )),
        ScorerConfig::Mini { checkpoint } => Box::new(
            MiniScorer::load(checkpoint)
                .map_err(|e| CliError::bad_input("scorer_load", format!("{}: {e}", checkpoint.display())))?,
        ),
        ScorerConfig::Constant { value } => Box::new(ConstantScorer(*value)),
        ScorerConfig::Unset => return Err(CliError::bad_input("missing_scorer", "no scorer configured")),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeRecord {
    pub mesh: String,
    pub camera: Camera,
    /// Chosen thresholds, including the boundary decision.
    pub thresholds: ThresholdSet,
    /// Score of the written drawing.
    pub score: f64,
    /// Best score found by the threshold search, boundaries off.
    pub search_score: f64,
    pub include_boundaries: bool,
    pub flags: OptimizeFlags,
    pub starts: usize,
}

pub struct OptimizeOutput {
    pub record: OptimizeRecord,
    pub result: OptimizeResult,
    pub drawing: Drawing,
    pub png: PathBuf,
}

/// Threshold search, boundary decision and final drawing: `drawing.png`,
/// `result.json`, `trace.jsonl`.
pub fn cmd_optimize(cfg: &RunConfig) -> CliResult<OptimizeOutput> {
    let scorer = resolve_scorer(&cfg.scorer)?;
    let scene = prepare(cfg)?;
    optimize_scene(cfg, &scene, scorer.as_ref())
}

pub fn optimize_scene(cfg: &RunConfig, scene: &Scene, scorer: &dyn Scorer) -> CliResult<OptimizeOutput> {
    let result = optimize_thresholds(&scene.maps, scorer, None, &cfg.optimize)?;
    log::info!(
        "{} starts in {:.2} s, best score {}",
        result.starts.len(),
        result.wall_time_s,
        result.best_score
    );
    let borders = boundary_check(&scene.maps, scorer, None, &result.best)?;
    let drawing = final_drawing(&scene.maps, &result.best, borders, None)?;
    let t = result.best.with_boundaries(borders);
    let score = Objective::new(&scene.maps, scorer, None)?.score(&t)?;
    fs::create_dir_all(&cfg.output)?;
    let png = cfg.output.join("drawing.png");
    drawing.save_png(&png)?;
    let record = OptimizeRecord {
        mesh: scene.name.clone(),
        camera: scene.camera,
        thresholds: t,
        score,
        search_score: result.best_score,
        include_boundaries: borders,
        flags: result.flags.clone(),
        starts: result.starts.len(),
    };
    write_json(&cfg.output.join("result.json"), &record)?;
    let mut trace = BufWriter::new(fs::File::create(cfg.output.join("trace.jsonl"))?);
    result.write_trace(&mut trace)?;
    trace.flush()?;
    Ok(OptimizeOutput {
        record,
        result,
        drawing,
        png,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub name: String,
    /// Percent.
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub iou: f64,
    /// Pixels; empty when undefined.
    pub chamfer: Option<f64>,
    pub synthetic_pixels: usize,
    pub human_pixels: usize,
}

impl EvalRow {
    fn from_report(name: String, r: &EvalReport) -> Self {
        Self {
            name,
            precision: 100.0 * r.precision,
            recall: 100.0 * r.recall,
            f1: 100.0 * r.f1,
            iou: 100.0 * r.iou,
            chamfer: r.chamfer,
            synthetic_pixels: r.synthetic_pixels,
            human_pixels: r.human_pixels,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub rows: Vec<EvalRow>,
    pub mean: Option<EvalRow>,
    /// File names present on one side only.
    pub unpaired: Vec<String>,
}

fn png_files(dir: &Path) -> CliResult<BTreeMap<String, PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::bad_input("dir_not_found", format!("{}: {e}", dir.display())))?;
    let mut out = BTreeMap::new();
    for e in entries {
        let p = e?.path();
        let is_png = p
            .extension()
            .is_some_and(|x| x.to_string_lossy().eq_ignore_ascii_case("png"));
        if p.is_file() && is_png {
            if let Some(name) = p.file_name() {
                out.insert(name.to_string_lossy().into_owned(), p);
            }
        }
    }
    Ok(out)
}

fn mean_row(rows: &[EvalRow]) -> Option<EvalRow> {
    if rows.is_empty() {
        return None;
    }
    let n = rows.len() as f64;
    let avg = |f: fn(&EvalRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    let cds: Vec<f64> = rows.iter().filter_map(|r| r.chamfer).collect();
    Some(EvalRow {
        name: "mean".into(),
        precision: avg(|r| r.precision),
        recall: avg(|r| r.recall),
        f1: avg(|r| r.f1),
        iou: avg(|r| r.iou),
        chamfer: (!cds.is_empty()).then(|| cds.iter().sum::<f64>() / cds.len() as f64),
        synthetic_pixels: rows.iter().map(|r| r.synthetic_pixels).sum(),
        human_pixels: rows.iter().map(|r| r.human_pixels).sum(),
    })
}

/// Compares same-named PNGs in two directories. Contour masks, when given,
/// remove silhouette pixels from both sides first.
pub fn cmd_eval(synthetic: &Path, reference: &Path, contours: Option<&Path>, cfg: &RunConfig) -> CliResult<EvalSummary> {
    let syn = png_files(synthetic)?;
    let refs = png_files(reference)?;
    let masks = contours.map(png_files).transpose()?;
    let mut unpaired: Vec<String> = syn.keys().filter(|k| !refs.contains_key(*k)).cloned().collect();
    unpaired.extend(refs.keys().filter(|k| !syn.contains_key(*k)).cloned());
    unpaired.sort();
    for u in &unpaired {
        log::warn!("unpaired file skipped: {u}");
    }
    let mut rows = Vec::new();
    for (name, sp) in &syn {
        let Some(rp) = refs.get(name) else { continue };
        let s = binarize(&Drawing::load_png(sp)?, DEFAULT_BINARIZE_THRESHOLD);
        let h = binarize(&Drawing::load_png(rp)?, DEFAULT_BINARIZE_THRESHOLD);
        let radius = cfg.near_radius(s.dims().1)?;
        let (s, h) = match masks.as_ref().and_then(|m| m.get(name)) {
            Some(mp) => {
                let mask = Drawing::load_png(mp)?.map(|&v| v >= DEFAULT_BINARIZE_THRESHOLD);
                (remove_silhouettes(&s, &mask, radius)?, remove_silhouettes(&h, &mask, radius)?)
            }
            None => (s, h),
        };
        rows.push(EvalRow::from_report(name.clone(), &evaluate(&s, &h, radius)?));
    }
    if rows.is_empty() {
        log::warn!("no paired drawings found");
    }
    let mean = mean_row(&rows);
    Ok(EvalSummary { rows, mean, unpaired })
}

pub fn write_eval_csv(summary: &EvalSummary, out: impl Write) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["name", "precision", "recall", "f1", "iou", "chamfer", "synthetic_pixels", "human_pixels"])?;
    for r in summary.rows.iter().chain(&summary.mean) {
        w.write_record([
            r.name.clone(),
            format!("{:.4}", r.precision),
            format!("{:.4}", r.recall),
            format!("{:.4}", r.f1),
            format!("{:.4}", r.iou),
            r.chamfer.map(|c| format!("{c:.4}")).unwrap_or_default(),
            r.synthetic_pixels.to_string(),
            r.human_pixels.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub struct CandidateOutput {
    pub view_dirs: Vec<PathBuf>,
    pub candidate_counts: Vec<usize>,
    pub selected: Vec<Vec<usize>>,
}

/// Candidate drawings for both auto-placed views of the mesh.
pub fn cmd_gen_candidates(cfg: &RunConfig) -> CliResult<CandidateOutput> {
    let (name, mesh) = load_scene(cfg)?;
    let cameras = lineart::dataset::place_cameras(&mesh, cfg.seed, cfg.width, cfg.height)?;
    let mut out = CandidateOutput {
        view_dirs: Vec::new(),
        candidate_counts: Vec::new(),
        selected: Vec::new(),
    };
    for (view, cam) in cameras.iter().enumerate() {
        let maps = render_maps(&mesh, cam, &cfg.render);
        let cands = generate_candidates(&maps, &cfg.candidates)?;
        let drawings: Vec<Drawing> = cands.iter().map(|c| c.drawing.clone()).collect();
        let sel = select_distinct(&drawings, cfg.select_k)?;
        let dir = write_candidate_set(&cfg.output, &name, view, cfg.seed, cam, &cfg.candidates, &cands, &sel)?;
        out.view_dirs.push(dir);
        out.candidate_counts.push(cands.len());
        out.selected.push(sel.selected);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub pairs: usize,
    /// Mean hinge loss per pair before training.
    pub initial_loss: f64,
    pub epoch_loss: Vec<f64>,
    pub final_loss: f64,
    pub steps: usize,
    pub held_out_pairs: usize,
    pub held_out_accuracy_before: f64,
    pub held_out_accuracy_after: f64,
    pub checkpoint: PathBuf,
}

/// Trains the mini scorer on synthetic preference pairs: `ranker.ckpt` and
/// `train_report.json`.
pub fn cmd_train_ranker(cfg: &RunConfig) -> CliResult<TrainRecord> {
    let t = &cfg.train;
    let data = SyntheticConfig {
        seed: cfg.seed,
        ..t.data.clone()
    };
    let pairs = synthetic_preference_pairs(&data)?;
    let held = if t.held_out == 0 {
        Vec::new()
    } else {
        synthetic_preference_pairs(&SyntheticConfig {
            seed: cfg.seed.wrapping_add(1),
            pairs: t.held_out,
            ..data.clone()
        })?
    };
    let init = MiniScorer::init(t.topology.clone(), cfg.seed)?;
    let train_cfg = lineart::ranker::TrainConfig {
        seed: cfg.seed,
        ..t.config.clone()
    };
    let n = pairs.len() as f64;
    let (initial_loss, _) = hinge_rank_loss(&init, &pairs, train_cfg.margin)?;
    let before = if held.is_empty() { 0.0 } else { ranking_accuracy(&init, &held)? };
    let (trained, report) = train_mini_scorer(&init, &pairs, &train_cfg)?;
    let (final_loss, _) = hinge_rank_loss(&trained, &pairs, train_cfg.margin)?;
    let after = if held.is_empty() { 0.0 } else { ranking_accuracy(&trained, &held)? };
    fs::create_dir_all(&cfg.output)?;
    let checkpoint = cfg.output.join("ranker.ckpt");
    trained.save(&checkpoint)?;
    let record = TrainRecord {
        pairs: pairs.len(),
        initial_loss: initial_loss / n,
        epoch_loss: report.epoch_loss,
        final_loss: final_loss / n,
        steps: report.steps,
        held_out_pairs: held.len(),
        held_out_accuracy_before: before,
        held_out_accuracy_after: after,
        checkpoint: checkpoint.clone(),
    };
    write_json(&cfg.output.join("train_report.json"), &record)?;
    Ok(record)
}
