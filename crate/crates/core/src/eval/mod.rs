//! Drawing comparison: binarization, nearness-based precision and recall,
//! IoU, symmetric Chamfer distance, silhouette removal.

mod morphology;

pub use morphology::{distance_transform, zhang_suen};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Drawing, Image, Mask};

pub const DEFAULT_BINARIZE_THRESHOLD: f64 = 0.5;
/// Nearness radius as a fraction of image height.
pub const DEFAULT_RADIUS_FRACTION: f64 = 0.01;

pub fn default_near_radius(height: usize) -> f64 {
    DEFAULT_RADIUS_FRACTION * height as f64
}

/// Thinned binary drawing.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryDrawing {
    pub mask: Mask,
}

impl BinaryDrawing {
    /// Wraps a mask as is, without thinning.
    pub fn from_mask(mask: Mask) -> Self {
        Self { mask }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.mask.dims()
    }

    pub fn count(&self) -> usize {
        self.mask.count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.any()
    }

    pub fn to_drawing(&self) -> Drawing {
        self.mask.to_drawing()
    }

    fn distances(&self) -> Image<f64> {
        distance_transform(&self.mask)
    }
}

/// Pixels with intensity at or above `threshold`, thinned to skeletons.
pub fn binarize(drawing: &Drawing, threshold: f64) -> BinaryDrawing {
    BinaryDrawing {
        mask: zhang_suen(&drawing.map(|&v| v >= threshold)),
    }
}

fn check_dims(a: &BinaryDrawing, b: &BinaryDrawing) -> Result<()> {
    a.mask.check_same_dims(&b.mask)
}

/// Set pixels of `a` within `radius` of `b`.
fn matched(a: &BinaryDrawing, b_dist: &Image<f64>, radius: f64) -> usize {
    a.mask
        .as_slice()
        .iter()
        .zip(b_dist.as_slice())
        .filter(|(&on, &d)| on && d <= radius)
        .count()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    /// Precision is undefined and reported as 0.
    pub empty_synthetic: bool,
    /// Recall is undefined and reported as 0.
    pub empty_human: bool,
}

impl PrecisionRecall {
    pub fn f1(&self) -> f64 {
        f1(self.precision, self.recall)
    }
}

pub fn f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

fn ratio(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

pub fn precision_recall(synthetic: &BinaryDrawing, human: &BinaryDrawing, radius: f64) -> Result<PrecisionRecall> {
    check_dims(synthetic, human)?;
    check_radius(radius)?;
    let (ns, nh) = (synthetic.count(), human.count());
    Ok(PrecisionRecall {
        precision: ratio(matched(synthetic, &human.distances(), radius), ns),
        recall: ratio(matched(human, &synthetic.distances(), radius), nh),
        empty_synthetic: ns == 0,
        empty_human: nh == 0,
    })
}

fn check_radius(radius: f64) -> Result<()> {
    if radius > 0.0 && radius.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("nearness radius must be > 0, got {radius}")))
    }
}

fn iou_from_counts(ns: usize, nh: usize, ms: usize, mh: usize) -> f64 {
    if ns == 0 && nh == 0 {
        return 1.0;
    }
    let inter = (ms + mh) as f64 / 2.0;
    let union = (ns + nh - ms.min(mh)) as f64;
    inter / union
}

/// Fuzzy IoU: intersection `(m_s + m_h) / 2`, union `|S| + |H| - min(m_s, m_h)`
/// where `m_s` counts synthetic pixels near the human drawing and vice
/// versa. Both empty gives 1.
pub fn iou(synthetic: &BinaryDrawing, human: &BinaryDrawing, radius: f64) -> Result<f64> {
    check_dims(synthetic, human)?;
    check_radius(radius)?;
    let ms = matched(synthetic, &human.distances(), radius);
    let mh = matched(human, &synthetic.distances(), radius);
    Ok(iou_from_counts(synthetic.count(), human.count(), ms, mh))
}

fn mean_distance(a: &BinaryDrawing, b_dist: &Image<f64>) -> f64 {
    let (sum, n) = a
        .mask
        .as_slice()
        .iter()
        .zip(b_dist.as_slice())
        .filter(|(&on, _)| on)
        .fold((0.0, 0usize), |(s, n), (_, d)| (s + d, n + 1));
    sum / n as f64
}

/// Symmetric mean nearest-pixel distance in pixels.
pub fn chamfer(synthetic: &BinaryDrawing, human: &BinaryDrawing) -> Result<f64> {
    check_dims(synthetic, human)?;
    if synthetic.is_empty() {
        return Err(Error::UndefinedChamfer("synthetic"));
    }
    if human.is_empty() {
        return Err(Error::UndefinedChamfer("human"));
    }
    Ok(0.5 * (mean_distance(synthetic, &human.distances()) + mean_distance(human, &synthetic.distances())))
}

/// Drops pixels within `radius` of the contour mask.
pub fn remove_silhouettes(drawing: &BinaryDrawing, contour_mask: &Mask, radius: f64) -> Result<BinaryDrawing> {
    drawing.mask.check_same_dims(contour_mask)?;
    let d = distance_transform(contour_mask);
    let (w, h) = drawing.dims();
    let kept = drawing
        .mask
        .as_slice()
        .iter()
        .zip(d.as_slice())
        .map(|(&on, &dist)| on && dist > radius)
        .collect();
    Ok(BinaryDrawing {
        mask: Image::from_vec(w, h, kept)?,
    })
}

/// Symmetric pairwise Chamfer matrix with zero diagonal.
pub fn chamfer_matrix(drawings: &[BinaryDrawing]) -> Result<Vec<Vec<f64>>> {
    let n = drawings.len();
    for (i, d) in drawings.iter().enumerate() {
        if d.is_empty() {
            return Err(Error::InvalidArgument(format!("drawing {i} is empty")));
        }
        check_dims(d, &drawings[0])?;
    }
    let ink: Vec<Vec<usize>> = drawings
        .iter()
        .map(|d| (0..d.mask.len()).filter(|&i| d.mask.as_slice()[i]).collect())
        .collect();
    // Column j holds mean distances from every drawing to drawing j; one
    // distance transform is alive per worker.
    let cols: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let dj = drawings[j].distances();
            let dj = dj.as_slice();
            (0..n)
                .map(|i| if i == j { 0.0 } else { ink[i].iter().map(|&p| dj[p]).sum::<f64>() / ink[i].len() as f64 })
                .collect()
        })
        .collect();
    let means: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect();
    Ok((0..n)
        .map(|i| (0..n).map(|j| 0.5 * (means[i][j] + means[j][i])).collect())
        .collect())
}

/// Index of the drawing with least mean Chamfer distance to the others;
/// ties go to the lowest index.
pub fn most_consistent(drawings: &[BinaryDrawing]) -> Result<usize> {
    if drawings.len() < 2 {
        return Err(Error::TooFew {
            needed: 2,
            got: drawings.len(),
        });
    }
    let m = chamfer_matrix(drawings)?;
    let n = drawings.len();
    let mut best = (0, f64::INFINITY);
    for (i, row) in m.iter().enumerate() {
        let mean = row.iter().sum::<f64>() / (n - 1) as f64;
        if mean < best.1 {
            best = (i, mean);
        }
    }
    Ok(best.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub iou: f64,
    /// `None` when either side is empty.
    pub chamfer: Option<f64>,
    pub synthetic_pixels: usize,
    pub human_pixels: usize,
}

/// All metrics for one synthetic/human pair of binary drawings.
pub fn evaluate(synthetic: &BinaryDrawing, human: &BinaryDrawing, radius: f64) -> Result<EvalReport> {
    check_dims(synthetic, human)?;
    check_radius(radius)?;
    let (ds, dh) = (synthetic.distances(), human.distances());
    let (ns, nh) = (synthetic.count(), human.count());
    let ms = matched(synthetic, &dh, radius);
    let mh = matched(human, &ds, radius);
    let (p, r) = (ratio(ms, ns), ratio(mh, nh));
    let chamfer = (ns > 0 && nh > 0).then(|| 0.5 * (mean_distance(synthetic, &dh) + mean_distance(human, &ds)));
    Ok(EvalReport {
        precision: p,
        recall: r,
        f1: f1(p, r),
        iou: iou_from_counts(ns, nh, ms, mh),
        chamfer,
        synthetic_pixels: ns,
        human_pixels: nh,
    })
}
