//! Test-time threshold selection by maximizing a scorer.

pub mod lbfgs;

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use lbfgs::{LbfgsConfig, StopReason};

use crate::error::{Error, Result};
use crate::filter::{CompiledMaps, ThresholdSet};
use crate::image::Drawing;
use crate::raster::MapStack;
use crate::ranker::{Scorer, ScorerInput};

/// Per-threshold start values of the full profile.
pub const FULL_GRID: [f64; 4] = [0.0, 0.05, 0.2, 0.5];
/// Per-threshold start values of the fast profile.
pub const FAST_GRID: [f64; 2] = [0.05, 0.5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    #[default]
    Full,
    Fast,
}

impl Profile {
    pub fn grid_values(self) -> &'static [f64] {
        match self {
            Profile::Full => &FULL_GRID,
            Profile::Fast => &FAST_GRID,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeConfig {
    /// Per-threshold start values; overrides the profile when set.
    pub grid: Option<Vec<f64>>,
    pub profile: Profile,
    pub lbfgs: LbfgsConfig,
    /// Creases are not optimized; this fixes whether they are drawn.
    pub include_creases: bool,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            grid: None,
            profile: Profile::Full,
            lbfgs: LbfgsConfig::default(),
            include_creases: false,
        }
    }
}

impl OptimizeConfig {
    pub fn fast() -> Self {
        Self {
            profile: Profile::Fast,
            ..Self::default()
        }
    }

    pub fn starts(&self) -> Vec<[f64; 4]> {
        init_grid(self.grid.as_deref().unwrap_or(self.profile.grid_values()))
    }
}

/// Every 4-tuple over `values`, with `t_s` varying slowest.
pub fn init_grid(values: &[f64]) -> Vec<[f64; 4]> {
    let n = values.len();
    (0..n.pow(4))
        .map(|k| std::array::from_fn(|i| values[(k / n.pow(3 - i as u32)) % n]))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartTrace {
    pub index: usize,
    pub initial: [f64; 4],
    pub initial_score: f64,
    #[serde(rename = "final")]
    pub final_t: [f64; 4],
    pub final_score: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Score after each accepted step.
    pub scores: Vec<f64>,
    pub stop: StopReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptimizeFlags {
    /// No start made progress and all start scores were equal.
    pub flat_objective: bool,
    /// None of the thresholded kinds had a visible pixel.
    pub empty_maps: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub best: ThresholdSet,
    pub best_score: f64,
    pub starts: Vec<StartTrace>,
    pub flags: OptimizeFlags,
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl OptimizeResult {
    /// One JSON record per start.
    pub fn write_trace(&self, mut out: impl Write) -> Result<()> {
        for s in &self.starts {
            serde_json::to_writer(&mut out, s)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Score and threshold gradient of the merged drawing.
pub struct Objective<'a> {
    maps: &'a MapStack,
    compiled: CompiledMaps,
    scorer: &'a dyn Scorer,
    external: Option<&'a Drawing>,
}

impl<'a> Objective<'a> {
    pub fn new(maps: &'a MapStack, scorer: &'a dyn Scorer, external: Option<&'a Drawing>) -> Result<Self> {
        if let Some(e) = external {
            if e.dims() != (maps.width, maps.height) {
                return Err(Error::DimensionMismatch {
                    expected: (maps.width, maps.height),
                    got: e.dims(),
                });
            }
        }
        Ok(Self {
            maps,
            compiled: CompiledMaps::new(maps)?,
            scorer,
            external,
        })
    }

    pub fn drawing(&self, t: &ThresholdSet) -> Result<Drawing> {
        self.compiled.render(t, self.external)
    }

    pub fn score(&self, t: &ThresholdSet) -> Result<f64> {
        let d = self.drawing(t)?;
        self.scorer.score(&ScorerInput::from_maps(&d, self.maps))
    }

    pub fn score_and_grad(&self, t: &ThresholdSet) -> Result<(f64, [f64; 4])> {
        let d = self.drawing(t)?;
        let (p, dp) = self.scorer.score_with_grad(&ScorerInput::from_maps(&d, self.maps))?;
        let g = self.compiled.grad(t, self.external, &dp)?;
        Ok((p, g.to_array()))
    }
}

fn pick_best(starts: &[StartTrace]) -> Option<&StartTrace> {
    // Strictly greater wins, so the lowest index keeps ties.
    starts.iter().fold(None, |best: Option<&StartTrace>, s| match best {
        Some(b) if s.final_score <= b.final_score => Some(b),
        _ => Some(s),
    })
}

/// Maximizes the score over non-negative thresholds from every grid start.
/// Boundaries stay off during the search; see [`boundary_check`].
pub fn optimize_thresholds(
    maps: &MapStack,
    scorer: &dyn Scorer,
    external: Option<&Drawing>,
    cfg: &OptimizeConfig,
) -> Result<OptimizeResult> {
    let clock = Instant::now();
    let objective = Objective::new(maps, scorer, external)?;
    let base = ThresholdSet::default().with_creases(cfg.include_creases);

    if maps.filtered_maps_empty() {
        let score = objective.score(&base)?;
        return Ok(OptimizeResult {
            best: base,
            best_score: score,
            starts: Vec::new(),
            flags: OptimizeFlags {
                empty_maps: true,
                flat_objective: false,
            },
            wall_time_s: clock.elapsed().as_secs_f64(),
        });
    }

    let grid = cfg.starts();
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let starts: Vec<StartTrace> = grid
        .par_iter()
        .enumerate()
        .map(|(index, &t0)| {
            let eval = |x: &[f64; 4]| -> Result<(f64, [f64; 4])> {
                let (p, g) = objective.score_and_grad(&base.with_values(*x))?;
                Ok((-p, g.map(|v| -v)))
            };
            let m = lbfgs::minimize(eval, t0, &cfg.lbfgs)?;
            Ok(StartTrace {
                index,
                initial: t0,
                initial_score: -m.trace[0],
                final_t: m.x,
                final_score: -m.f,
                iterations: m.iterations,
                evaluations: m.evaluations,
                scores: m.trace.iter().map(|v| -v).collect(),
                stop: m.stop,
            })
        })
        .collect::<Result<_>>()?;

    let best = pick_best(&starts).expect("nonempty grid");
    let flat = starts.iter().all(|s| s.iterations == 0 && s.initial_score == starts[0].initial_score);
    if flat {
        log::warn!("flat objective: no start made progress");
    }
    Ok(OptimizeResult {
        best: base.with_values(best.final_t),
        best_score: best.final_score,
        flags: OptimizeFlags {
            flat_objective: flat,
            empty_maps: false,
        },
        starts,
        wall_time_s: clock.elapsed().as_secs_f64(),
    })
}

/// True iff drawing boundaries strictly raises the score at `t`.
pub fn boundary_check(maps: &MapStack, scorer: &dyn Scorer, external: Option<&Drawing>, t: &ThresholdSet) -> Result<bool> {
    let objective = Objective::new(maps, scorer, external)?;
    let with = objective.score(&t.with_boundaries(true))?;
    let without = objective.score(&t.with_boundaries(false))?;
    Ok(with > without)
}

/// The drawing at the selected parameters.
pub fn final_drawing(maps: &MapStack, t: &ThresholdSet, include_boundaries: bool, external: Option<&Drawing>) -> Result<Drawing> {
    crate::filter::render_drawing(maps, &t.with_boundaries(include_boundaries), external)
}

/// Exhaustive minimization of `objective` over `grid`; ties go to the
/// lexicographically smallest threshold vector.
pub fn grid_search_baseline<F>(
    maps: &MapStack,
    external: Option<&Drawing>,
    grid: &[ThresholdSet],
    objective: F,
) -> Result<ThresholdSet>
where
    F: Fn(&Drawing) -> Result<f64> + Sync,
{
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let compiled = CompiledMaps::new(maps)?;
    let values: Vec<f64> = grid
        .par_iter()
        .map(|t| objective(&compiled.render(t, external)?))
        .collect::<Result<_>>()?;
    let mut best = 0;
    for k in 1..grid.len() {
        let (a, b) = (values[k], values[best]);
        let smaller = grid[k].to_array().partial_cmp(&grid[best].to_array()) == Some(std::cmp::Ordering::Less);
        if a < b || (a == b && smaller) {
            best = k;
        }
    }
    Ok(grid[best])
}
