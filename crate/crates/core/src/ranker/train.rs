use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mini::{MiniScorer, Tensor};
use super::{PreferencePair, Scorer, ScorerSample, DEFAULT_MARGIN};
use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub margin: f64,
    pub seed: u64,
    /// Reshuffle pairs every epoch; otherwise batches follow list order.
    pub shuffle: bool,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            lr: 2e-5,
            batch: 32,
            margin: DEFAULT_MARGIN,
            seed: 0,
            shuffle: true,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean hinge loss per pair, one entry per epoch.
    pub epoch_loss: Vec<f64>,
    pub steps: usize,
}

/// Summed hinge loss over encoded pairs and its parameter gradient.
pub(super) fn hinge_batch(scorer: &MiniScorer, pairs: &[(Tensor, Tensor)], margin: f64) -> (f64, Vec<f64>) {
    let parts: Vec<(f64, Option<Vec<f64>>)> = pairs
        .par_iter()
        .map(|(b, o)| {
            let (sb, gb) = scorer.score_and_param_grad(b);
            let (so, go) = scorer.score_and_param_grad(o);
            let v = margin - sb + so;
            if v > 0.0 {
                (v, Some(go.iter().zip(&gb).map(|(x, y)| x - y).collect()))
            } else {
                (0.0, None)
            }
        })
        .collect();
    let mut loss = 0.0;
    let mut grad = vec![0.0; scorer.param_count()];
    for (l, g) in parts {
        loss += l;
        if let Some(g) = g {
            grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
    }
    (loss, grad)
}

/// Adam on the hinge ranking loss. Batch gradients are averaged over the
/// batch; reductions run in pair order so results do not depend on threads.
pub fn train_mini_scorer(init: &MiniScorer, pairs: &[PreferencePair], cfg: &TrainConfig) -> Result<(MiniScorer, TrainReport)> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no preference pairs".into()));
    }
    if cfg.batch == 0 || !(cfg.lr > 0.0) || !(cfg.margin > 0.0) {
        return Err(Error::InvalidArgument(format!("bad training config {cfg:?}")));
    }
    let enc: Vec<(Tensor, Tensor)> = pairs
        .par_iter()
        .map(|p| Ok((init.encode(&p.best.input())?, init.encode(&p.other.input())?)))
        .collect::<Result<_>>()?;

    let mut model = init.clone();
    let n = model.param_count();
    let (mut m, mut v) = (vec![0.0; n], vec![0.0; n]);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..enc.len()).collect();
    let mut report = TrainReport::default();

    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch) {
            let batch: Vec<(Tensor, Tensor)> = chunk.iter().map(|&i| enc[i].clone()).collect();
            let (loss, grad) = hinge_batch(&model, &batch, cfg.margin);
            total += loss;
            report.steps += 1;
            let t = report.steps as i32;
            let (c1, c2) = (1.0 - cfg.beta1.powi(t), 1.0 - cfg.beta2.powi(t));
            let scale = 1.0 / chunk.len() as f64;
            for k in 0..n {
                let g = grad[k] * scale;
                m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
                v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
                model.params[k] -= cfg.lr * (m[k] / c1) / ((v[k] / c2).sqrt() + cfg.eps);
            }
        }
        let mean = total / enc.len() as f64;
        log::debug!("epoch {epoch}: mean hinge loss {mean:.6}");
        report.epoch_loss.push(mean);
    }
    model.epochs = init.epochs + cfg.epochs;
    Ok((model, report))
}

/// Fraction of pairs the scorer orders strictly correctly.
pub fn ranking_accuracy(scorer: &dyn Scorer, pairs: &[PreferencePair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no preference pairs".into()));
    }
    let correct: Vec<bool> = pairs
        .par_iter()
        .map(|p| Ok(scorer.score(&p.best.input())? > scorer.score(&p.other.input())?))
        .collect::<Result<_>>()?;
    Ok(correct.iter().filter(|&&c| c).count() as f64 / pairs.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub size: usize,
    pub pairs: usize,
    /// Ink pixels per drawing.
    pub ink: usize,
    /// Minimum difference in template overlap between best and other.
    pub min_gap: usize,
    pub strokes: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            size: 32,
            pairs: 256,
            ink: 48,
            min_gap: 8,
            strokes: 5,
            seed: 0,
        }
    }
}

fn stroke_template(size: usize, strokes: usize, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let mut t = vec![false; size * size];
    for _ in 0..strokes {
        let p0: (f64, f64) = (rng.gen_range(0.0..size as f64), rng.gen_range(0.0..size as f64));
        let p1: (f64, f64) = (rng.gen_range(0.0..size as f64), rng.gen_range(0.0..size as f64));
        let n = ((p1.0 - p0.0).abs().max((p1.1 - p0.1).abs()).ceil() as usize).max(1);
        for k in 0..=n {
            let a = k as f64 / n as f64;
            let x = (p0.0 + (p1.0 - p0.0) * a) as usize;
            let y = (p0.1 + (p1.1 - p0.1) * a) as usize;
            t[y.min(size - 1) * size + x.min(size - 1)] = true;
        }
    }
    t
}

/// Preference pairs over a fixed stroke template carried in the depth and
/// shaded channels. Every drawing has the same amount of ink; the preferred
/// one places at least `min_gap` more of it on the template.
pub fn synthetic_preference_pairs(cfg: &SyntheticConfig) -> Result<Vec<PreferencePair>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let s = cfg.size;
    let template = stroke_template(s, cfg.strokes, &mut ChaCha8Rng::seed_from_u64(0x7e57));
    let on: Vec<usize> = (0..s * s).filter(|&i| template[i]).collect();
    let off: Vec<usize> = (0..s * s).filter(|&i| !template[i]).collect();
    if cfg.ink > on.len() || cfg.ink > off.len() || cfg.min_gap > cfg.ink {
        return Err(Error::InvalidArgument(format!(
            "ink {} does not fit template ({} on, {} off pixels)",
            cfg.ink,
            on.len(),
            off.len()
        )));
    }
    let ctx = Image::from_vec(s, s, template.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())?;
    let sample = |k: usize, rng: &mut ChaCha8Rng| -> ScorerSample {
        let mut d = vec![0.0; s * s];
        for &i in on.choose_multiple(rng, k) {
            d[i] = 1.0;
        }
        for &i in off.choose_multiple(rng, cfg.ink - k) {
            d[i] = 1.0;
        }
        ScorerSample {
            drawing: Image::from_vec(s, s, d).expect("square"),
            depth: ctx.clone(),
            shaded: vec![ctx.clone(); 6],
        }
    };
    Ok((0..cfg.pairs)
        .map(|_| {
            let kb = rng.gen_range(cfg.min_gap..=cfg.ink);
            let ko = rng.gen_range(0..=kb - cfg.min_gap);
            PreferencePair {
                best: sample(kb, &mut rng),
                other: sample(ko, &mut rng),
            }
        })
        .collect())
}
