//! Drawing-quality scorers and ranking losses.

mod mini;
mod train;

pub use mini::{MiniScorer, MiniTopology, CHECKPOINT_MAGIC};
pub use train::{
    ranking_accuracy, synthetic_preference_pairs, train_mini_scorer, SyntheticConfig, TrainConfig, TrainReport,
};

use crate::error::{Error, Result};
use crate::image::{Drawing, Image};
use crate::raster::MapStack;

/// Default hinge margin.
pub const DEFAULT_MARGIN: f64 = 1.0;
/// Lower clamp on predicted probabilities in the cross-entropy loss.
pub const CE_CLAMP: f64 = 1e-7;

/// What a scorer sees: the drawing plus the depth image and shaded stack.
#[derive(Debug, Clone, Copy)]
pub struct ScorerInput<'a> {
    pub drawing: &'a Drawing,
    pub depth: &'a Image<f64>,
    pub shaded: &'a [Image<f64>],
}

impl<'a> ScorerInput<'a> {
    pub fn new(drawing: &'a Drawing, depth: &'a Image<f64>, shaded: &'a [Image<f64>]) -> Self {
        Self { drawing, depth, shaded }
    }

    pub fn from_maps(drawing: &'a Drawing, maps: &'a MapStack) -> Self {
        Self::new(drawing, &maps.depth, &maps.shaded)
    }

    pub fn dims(&self) -> (usize, usize) {
        self.drawing.dims()
    }

    pub fn channel_count(&self) -> usize {
        2 + self.shaded.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.drawing.check_same_dims(self.depth)?;
        for s in self.shaded {
            self.drawing.check_same_dims(s)?;
        }
        Ok(())
    }

    /// Channels in network order: drawing, depth, shaded images.
    pub fn channels(&self) -> Vec<&'a Image<f64>> {
        let mut c = vec![self.drawing, self.depth];
        c.extend(self.shaded.iter());
        c
    }
}

/// Owned counterpart of [`ScorerInput`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScorerSample {
    pub drawing: Drawing,
    pub depth: Image<f64>,
    pub shaded: Vec<Image<f64>>,
}

impl ScorerSample {
    pub fn input(&self) -> ScorerInput<'_> {
        ScorerInput::new(&self.drawing, &self.depth, &self.shaded)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreferencePair {
    pub best: ScorerSample,
    pub other: ScorerSample,
}

/// A differentiable drawing-quality function; higher is better.
pub trait Scorer: Send + Sync {
    fn score(&self, input: &ScorerInput<'_>) -> Result<f64>;

    /// Score and its gradient with respect to the drawing channel.
    fn score_with_grad(&self, input: &ScorerInput<'_>) -> Result<(f64, Image<f64>)>;

    fn score_grad_wrt_drawing(&self, input: &ScorerInput<'_>) -> Result<Image<f64>> {
        Ok(self.score_with_grad(input)?.1)
    }
}

/// Negative mean squared difference to a fixed target drawing.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceScorer {
    pub target: Drawing,
}

impl ReferenceScorer {
    pub fn new(target: Drawing) -> Self {
        Self { target }
    }
}

impl Scorer for ReferenceScorer {
    fn score(&self, input: &ScorerInput<'_>) -> Result<f64> {
        self.target.check_same_dims(input.drawing)?;
        let n = self.target.len().max(1) as f64;
        let ss: f64 = input
            .drawing
            .as_slice()
            .iter()
            .zip(self.target.as_slice())
            .map(|(i, t)| (i - t) * (i - t))
            .sum();
        Ok(-ss / n)
    }

    fn score_with_grad(&self, input: &ScorerInput<'_>) -> Result<(f64, Image<f64>)> {
        let p = self.score(input)?;
        let n = self.target.len().max(1) as f64;
        let (w, h) = self.target.dims();
        let g = input
            .drawing
            .as_slice()
            .iter()
            .zip(self.target.as_slice())
            .map(|(i, t)| -2.0 * (i - t) / n)
            .collect();
        Ok((p, Image::from_vec(w, h, g)?))
    }
}

/// Ignores its input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantScorer(pub f64);

impl Scorer for ConstantScorer {
    fn score(&self, _: &ScorerInput<'_>) -> Result<f64> {
        Ok(self.0)
    }

    fn score_with_grad(&self, input: &ScorerInput<'_>) -> Result<(f64, Image<f64>)> {
        let (w, h) = input.dims();
        Ok((self.0, Image::new(w, h)))
    }
}

/// `sum max(margin - best + other, 0)` over `(best, other)` score pairs.
pub fn hinge_loss(scores: &[(f64, f64)], margin: f64) -> f64 {
    scores.iter().map(|(b, o)| (margin - b + o).max(0.0)).sum()
}

/// Hinge ranking loss of the mini scorer and its parameter gradient. Only
/// violated pairs contribute to the gradient.
pub fn hinge_rank_loss(scorer: &MiniScorer, pairs: &[PreferencePair], margin: f64) -> Result<(f64, Vec<f64>)> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no preference pairs".into()));
    }
    if !(margin > 0.0) {
        return Err(Error::InvalidArgument(format!("margin must be > 0, got {margin}")));
    }
    let enc: Vec<_> = pairs
        .iter()
        .map(|p| Ok((scorer.encode(&p.best.input())?, scorer.encode(&p.other.input())?)))
        .collect::<Result<_>>()?;
    Ok(train::hinge_batch(scorer, &enc, margin))
}

/// Summed binary cross-entropy with predictions clamped to
/// `[CE_CLAMP, 1 - CE_CLAMP]`, and its gradient.
pub fn pixel_cross_entropy(predicted: &Drawing, target: &Drawing) -> Result<(f64, Image<f64>)> {
    predicted.check_same_dims(target)?;
    let (w, h) = predicted.dims();
    let mut loss = 0.0;
    let grad = predicted
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(&p, &t)| {
            let p = p.clamp(CE_CLAMP, 1.0 - CE_CLAMP);
            loss -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
            (p - t) / (p * (1.0 - p))
        })
        .collect();
    Ok((loss, Image::from_vec(w, h, grad)?))
}
