//! A small convolutional scorer with hand-written reverse mode.
//!
//! Topology: area downsampling, three 3x3 stride-2 convolutions with ReLU,
//! global average pooling and a linear head to one scalar.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Scorer, ScorerInput};
use crate::error::{Error, Result};
use crate::image::Image;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"LARANK01";
const KERNEL: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MiniTopology {
    pub input_channels: usize,
    pub conv_channels: Vec<usize>,
    /// Side of the square averaging block applied before the first conv.
    pub downsample: usize,
}

impl Default for MiniTopology {
    fn default() -> Self {
        Self {
            input_channels: 8,
            conv_channels: vec![16, 32, 64],
            downsample: 4,
        }
    }
}

impl MiniTopology {
    pub fn with_downsample(mut self, d: usize) -> Self {
        self.downsample = d;
        self
    }

    fn layers(&self) -> Vec<(usize, usize)> {
        let mut cin = self.input_channels;
        self.conv_channels
            .iter()
            .map(|&c| {
                let l = (cin, c);
                cin = c;
                l
            })
            .collect()
    }

    fn features(&self) -> usize {
        *self.conv_channels.last().unwrap_or(&self.input_channels)
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|(i, o)| o * i * KERNEL * KERNEL + o).sum::<usize>() + self.features() + 1
    }

    fn validate(&self) -> Result<()> {
        if self.input_channels == 0 || self.downsample == 0 || self.conv_channels.contains(&0) {
            return Err(Error::InvalidArgument(format!("invalid scorer topology {self:?}")));
        }
        Ok(())
    }
}

/// Channel-major activation volume.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    fn zeros(c: usize, h: usize, w: usize) -> Self {
        Self {
            c,
            h,
            w,
            data: vec![0.0; c * h * w],
        }
    }

    fn plane(&self, c: usize) -> &[f64] {
        &self.data[c * self.h * self.w..(c + 1) * self.h * self.w]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CheckpointHeader {
    format: String,
    topology: MiniTopology,
    seed: u64,
    epochs: usize,
    param_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiniScorer {
    pub topology: MiniTopology,
    pub params: Vec<f64>,
    pub seed: u64,
    pub epochs: usize,
}

/// Offsets of one conv layer's weights and biases in the flat vector.
#[derive(Debug, Clone, Copy)]
struct LayerSlots {
    cin: usize,
    cout: usize,
    w: usize,
    b: usize,
}

struct Forward {
    /// Patch matrix of each conv layer's input, with the input shape.
    cols: Vec<(DMatrix<f64>, usize, usize, usize)>,
    /// Pre-activation output of each conv layer.
    pre: Vec<Tensor>,
    pooled: Vec<f64>,
    score: f64,
}

fn out_size(n: usize) -> usize {
    n.div_ceil(2)
}

/// Output indices `o` for which `2o + k - 1` lies in `0..n_in`.
fn valid(k: usize, n_in: usize, n_out: usize) -> std::ops::Range<usize> {
    let lo = usize::from(k == 0);
    let hi = if n_in + 1 > k { (n_in + 1 - k).div_ceil(2).min(n_out) } else { 0 };
    lo..hi.max(lo)
}

/// Patch matrix of a stride-2, pad-1 3x3 convolution: one row per
/// (channel, ky, kx), one column per output pixel.
fn im2col(x: &Tensor) -> DMatrix<f64> {
    let (oh, ow) = (out_size(x.h), out_size(x.w));
    let k = x.c * KERNEL * KERNEL;
    let mut rows = vec![0.0; k * oh * ow];
    rows.par_chunks_mut(oh * ow).enumerate().for_each(|(r, dst)| {
        let (c, ky, kx) = (r / (KERNEL * KERNEL), (r / KERNEL) % KERNEL, r % KERNEL);
        let src = x.plane(c);
        let xs = valid(kx, x.w, ow);
        for oy in valid(ky, x.h, oh) {
            let row = &src[(2 * oy + ky - 1) * x.w..];
            for ox in xs.clone() {
                dst[oy * ow + ox] = row[2 * ox + kx - 1];
            }
        }
    });
    DMatrix::from_row_slice(k, oh * ow, &rows)
}

/// Adjoint of [`im2col`].
fn col2im(cols: &DMatrix<f64>, c: usize, h: usize, w: usize) -> Tensor {
    let (oh, ow) = (out_size(h), out_size(w));
    let mut out = Tensor::zeros(c, h, w);
    out.data.par_chunks_mut(h * w).enumerate().for_each(|(ch, plane)| {
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let r = (ch * KERNEL + ky) * KERNEL + kx;
                let xs = valid(kx, w, ow);
                for oy in valid(ky, h, oh) {
                    let row = &mut plane[(2 * oy + ky - 1) * w..];
                    for ox in xs.clone() {
                        row[2 * ox + kx - 1] += cols[(r, oy * ow + ox)];
                    }
                }
            }
        }
    });
    out
}

fn conv_forward(cols: &DMatrix<f64>, w: &[f64], b: &[f64], cout: usize, oh: usize, ow: usize) -> Tensor {
    let wm = DMatrix::from_row_slice(cout, cols.nrows(), w);
    let z = wm * cols;
    let mut out = Tensor::zeros(cout, oh, ow);
    for (o, plane) in out.data.chunks_mut(oh * ow).enumerate() {
        for (p, v) in plane.iter_mut().enumerate() {
            *v = z[(o, p)] + b[o];
        }
    }
    out
}

/// Weight, bias and (optionally) patch-matrix gradients of one conv layer
/// given the gradient at its pre-activation.
fn conv_backward(cols: &DMatrix<f64>, w: &[f64], dpre: &Tensor, want_input: bool) -> (Vec<f64>, Vec<f64>, Option<DMatrix<f64>>) {
    let p = dpre.h * dpre.w;
    let g = DMatrix::from_row_slice(dpre.c, p, &dpre.data);
    let dwm = &g * cols.transpose();
    let mut dw = Vec::with_capacity(dpre.c * cols.nrows());
    for o in 0..dpre.c {
        dw.extend(dwm.row(o).iter());
    }
    let db: Vec<f64> = (0..dpre.c).map(|o| dpre.plane(o).iter().sum()).collect();
    let dcols = want_input.then(|| DMatrix::from_row_slice(dpre.c, cols.nrows(), w).transpose() * g);
    (dw, db, dcols)
}

/// Block-average downsampling; border blocks average the pixels they hold.
fn downsample(img: &Image<f64>, d: usize) -> (usize, usize, Vec<f64>) {
    let (w, h) = img.dims();
    let (ow, oh) = (w.div_ceil(d), h.div_ceil(d));
    let mut out = vec![0.0; ow * oh];
    for y in 0..h {
        for x in 0..w {
            out[(y / d) * ow + x / d] += img.get(x, y);
        }
    }
    for by in 0..oh {
        for bx in 0..ow {
            let cnt = ((w - bx * d).min(d) * (h - by * d).min(d)) as f64;
            out[by * ow + bx] /= cnt;
        }
    }
    (ow, oh, out)
}

/// Adjoint of [`downsample`].
fn upsample_adjoint(g: &[f64], w: usize, h: usize, d: usize) -> Image<f64> {
    let ow = w.div_ceil(d);
    Image::from_fn(w, h, |x, y| {
        let (bx, by) = (x / d, y / d);
        let cnt = ((w - bx * d).min(d) * (h - by * d).min(d)) as f64;
        g[by * ow + bx] / cnt
    })
}

impl MiniScorer {
    /// He-initialized weights, zero biases.
    pub fn init(topology: MiniTopology, seed: u64) -> Result<Self> {
        topology.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; topology.param_count()];
        let mut s = Self {
            topology,
            params: Vec::new(),
            seed,
            epochs: 0,
        };
        for l in s.slots() {
            let std = (2.0 / (l.cin * KERNEL * KERNEL) as f64).sqrt();
            let n = Normal::new(0.0, std).expect("finite std");
            for p in &mut params[l.w..l.b] {
                *p = n.sample(&mut rng);
            }
        }
        let head = s.head_offset();
        let f = s.topology.features();
        let n = Normal::new(0.0, (1.0 / f as f64).sqrt()).expect("finite std");
        for p in &mut params[head..head + f] {
            *p = n.sample(&mut rng);
        }
        s.params = params;
        Ok(s)
    }

    /// All parameters zero except the final bias.
    pub fn zeros(topology: MiniTopology, bias: f64) -> Result<Self> {
        topology.validate()?;
        let mut params = vec![0.0; topology.param_count()];
        *params.last_mut().expect("nonempty") = bias;
        Ok(Self {
            topology,
            params,
            seed: 0,
            epochs: 0,
        })
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn slots(&self) -> Vec<LayerSlots> {
        let mut off = 0;
        self.topology
            .layers()
            .into_iter()
            .map(|(cin, cout)| {
                let w = off;
                let b = w + cout * cin * KERNEL * KERNEL;
                off = b + cout;
                LayerSlots { cin, cout, w, b }
            })
            .collect()
    }

    fn head_offset(&self) -> usize {
        self.slots().last().map_or(0, |l| l.b + l.cout)
    }

    /// Downsampled channel volume fed to the first conv.
    pub fn encode(&self, input: &ScorerInput<'_>) -> Result<Tensor> {
        input.validate()?;
        if input.channel_count() != self.topology.input_channels {
            return Err(Error::Scorer(format!(
                "expected {} input channels, got {}",
                self.topology.input_channels,
                input.channel_count()
            )));
        }
        let d = self.topology.downsample;
        let planes: Vec<(usize, usize, Vec<f64>)> = input.channels().iter().map(|c| downsample(c, d)).collect();
        let (w, h) = (planes[0].0, planes[0].1);
        let data = planes.into_iter().flat_map(|p| p.2).collect();
        Ok(Tensor {
            c: self.topology.input_channels,
            h,
            w,
            data,
        })
    }

    fn forward(&self, x: &Tensor) -> Forward {
        let mut cols = Vec::new();
        let mut pre = Vec::new();
        let mut cur = x.clone();
        for l in self.slots() {
            let m = im2col(&cur);
            let (oh, ow) = (out_size(cur.h), out_size(cur.w));
            let z = conv_forward(&m, &self.params[l.w..l.b], &self.params[l.b..l.b + l.cout], l.cout, oh, ow);
            let mut a = z.clone();
            a.data.iter_mut().for_each(|v| *v = v.max(0.0));
            cols.push((m, cur.c, cur.h, cur.w));
            cur = a;
            pre.push(z);
        }
        let area = (cur.h * cur.w).max(1) as f64;
        let pooled: Vec<f64> = (0..cur.c).map(|c| cur.plane(c).iter().sum::<f64>() / area).collect();
        let head = self.head_offset();
        let f = pooled.len();
        let score = pooled.iter().zip(&self.params[head..head + f]).map(|(a, b)| a * b).sum::<f64>() + self.params[head + f];
        Forward {
            cols,
            pre,
            pooled,
            score,
        }
    }

    /// Parameter gradient of `dscore * score`, and the input-volume
    /// gradient when requested. ReLU has zero subgradient at 0.
    fn backward(&self, fwd: &Forward, dscore: f64, want_input: bool) -> (Vec<f64>, Option<Tensor>) {
        let mut grad = vec![0.0; self.params.len()];
        let head = self.head_offset();
        let f = fwd.pooled.len();
        for (k, a) in fwd.pooled.iter().enumerate() {
            grad[head + k] = dscore * a;
        }
        grad[head + f] = dscore;
        let slots = self.slots();
        let last = fwd.pre.last().expect("at least one layer");
        let area = (last.h * last.w) as f64;
        let mut dact = Tensor::zeros(last.c, last.h, last.w);
        for c in 0..last.c {
            let g = dscore * self.params[head + c] / area;
            dact.data[c * last.h * last.w..(c + 1) * last.h * last.w].fill(g);
        }
        let mut dx = None;
        for (li, l) in slots.iter().enumerate().rev() {
            let z = &fwd.pre[li];
            let mut dpre = dact;
            for (d, zv) in dpre.data.iter_mut().zip(&z.data) {
                if *zv <= 0.0 {
                    *d = 0.0;
                }
            }
            let need = li > 0 || want_input;
            let (m, c, h, w) = &fwd.cols[li];
            let (dw, db, dcols) = conv_backward(m, &self.params[l.w..l.b], &dpre, need);
            grad[l.w..l.b].copy_from_slice(&dw);
            grad[l.b..l.b + l.cout].copy_from_slice(&db);
            match dcols.map(|d| col2im(&d, *c, *h, *w)) {
                Some(t) if li > 0 => dact = t,
                other => {
                    dx = other;
                    break;
                }
            }
        }
        (grad, dx)
    }

    pub fn score_encoded(&self, x: &Tensor) -> f64 {
        self.forward(x).score
    }

    /// Score and parameter gradient for an encoded input.
    pub fn score_and_param_grad(&self, x: &Tensor) -> (f64, Vec<f64>) {
        let fwd = self.forward(x);
        let (g, _) = self.backward(&fwd, 1.0, false);
        (fwd.score, g)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_checkpoint(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_checkpoint(std::io::BufReader::new(f))
    }

    /// Magic, u32 header length, JSON header, then f32 little-endian params.
    pub fn write_checkpoint(&self, mut out: impl Write) -> Result<()> {
        let header = serde_json::to_vec(&CheckpointHeader {
            format: "mini-scorer".into(),
            topology: self.topology.clone(),
            seed: self.seed,
            epochs: self.epochs,
            param_count: self.params.len(),
        })?;
        out.write_all(CHECKPOINT_MAGIC)?;
        out.write_all(&(header.len() as u32).to_le_bytes())?;
        out.write_all(&header)?;
        for p in &self.params {
            out.write_all(&(*p as f32).to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_checkpoint(mut input: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::BadCheckpoint("wrong magic".into()));
        }
        let mut len = [0u8; 4];
        input.read_exact(&mut len)?;
        let mut header = vec![0u8; u32::from_le_bytes(len) as usize];
        input.read_exact(&mut header)?;
        let header: CheckpointHeader = serde_json::from_slice(&header)?;
        header.topology.validate()?;
        if header.param_count != header.topology.param_count() {
            return Err(Error::BadCheckpoint(format!(
                "header lists {} params, topology needs {}",
                header.param_count,
                header.topology.param_count()
            )));
        }
        let mut raw = vec![0u8; header.param_count * 4];
        input.read_exact(&mut raw)?;
        let params: Vec<f64> = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::BadCheckpoint("non-finite parameter".into()));
        }
        Ok(Self {
            topology: header.topology,
            params,
            seed: header.seed,
            epochs: header.epochs,
        })
    }

    /// Parameters rounded to the checkpoint precision.
    pub fn rounded(&self) -> Self {
        Self {
            params: self.params.iter().map(|p| *p as f32 as f64).collect(),
            ..self.clone()
        }
    }
}

impl Scorer for MiniScorer {
    fn score(&self, input: &ScorerInput<'_>) -> Result<f64> {
        Ok(self.score_encoded(&self.encode(input)?))
    }

    fn score_with_grad(&self, input: &ScorerInput<'_>) -> Result<(f64, Image<f64>)> {
        let x = self.encode(input)?;
        let fwd = self.forward(&x);
        let (_, dx) = self.backward(&fwd, 1.0, true);
        let dx = dx.expect("input gradient requested");
        let (w, h) = input.dims();
        Ok((fwd.score, upsample_adjoint(dx.plane(0), w, h, self.topology.downsample)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranker::ScorerSample;
    use rand::Rng;

    fn random_sample(w: usize, h: usize, seed: u64) -> ScorerSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut img = || Image::from_fn(w, h, |_, _| rng.gen::<f64>());
        ScorerSample {
            drawing: img(),
            depth: img(),
            shaded: (0..6).map(|_| img()).collect(),
        }
    }

    #[test]
    fn default_topology_size() {
        let t = MiniTopology::default();
        assert_eq!(t.param_count(), (16 * 8 * 9 + 16) + (32 * 16 * 9 + 32) + (64 * 32 * 9 + 64) + 65);
    }

    #[test]
    fn zero_weights_score_the_bias() {
        let s = MiniScorer::zeros(MiniTopology::default().with_downsample(1), 0.75).unwrap();
        let a = random_sample(9, 7, 1);
        assert_eq!(s.score(&a.input()).unwrap(), 0.75);
        let z = ScorerSample {
            drawing: Image::new(9, 7),
            depth: Image::new(9, 7),
            shaded: vec![Image::new(9, 7); 6],
        };
        let g = MiniScorer::zeros(MiniTopology::default(), 0.0)
            .unwrap()
            .score_grad_wrt_drawing(&z.input())
            .unwrap();
        assert!(g.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn drawing_gradient_matches_finite_differences() {
        for (d, w, h) in [(1, 13, 11), (4, 26, 21)] {
            let s = MiniScorer::init(MiniTopology::default().with_downsample(d), 7).unwrap();
            let mut x = random_sample(w, h, 3);
            let g = s.score_grad_wrt_drawing(&x.input()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let step = 1e-4;
            for _ in 0..20 {
                let (px, py) = (rng.gen_range(0..w), rng.gen_range(0..h));
                let v = *x.drawing.get(px, py);
                *x.drawing.get_mut(px, py) = v + step;
                let up = s.score(&x.input()).unwrap();
                *x.drawing.get_mut(px, py) = v - step;
                let dn = s.score(&x.input()).unwrap();
                *x.drawing.get_mut(px, py) = v;
                let fd = (up - dn) / (2.0 * step);
                let a = *g.get(px, py);
                assert!((a - fd).abs() <= 1e-3 * a.abs().max(fd.abs()) + 1e-9, "d={d} ({px},{py}) {a} vs {fd}");
            }
        }
    }

    #[test]
    fn parameter_gradient_matches_finite_differences() {
        let mut s = MiniScorer::init(MiniTopology::default().with_downsample(1), 5).unwrap();
        let x = s.encode(&random_sample(10, 9, 8).input()).unwrap();
        let (_, g) = s.score_and_param_grad(&x);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let step = 1e-5;
        for _ in 0..30 {
            let k = rng.gen_range(0..s.params.len());
            let v = s.params[k];
            s.params[k] = v + step;
            let up = s.score_encoded(&x);
            s.params[k] = v - step;
            let dn = s.score_encoded(&x);
            s.params[k] = v;
            let fd = (up - dn) / (2.0 * step);
            assert!((g[k] - fd).abs() <= 1e-4 * g[k].abs().max(fd.abs()) + 1e-8, "param {k}: {} vs {fd}", g[k]);
        }
    }

    #[test]
    fn scores_are_bit_reproducible() {
        let s = MiniScorer::init(MiniTopology::default().with_downsample(2), 9).unwrap();
        let x = random_sample(20, 16, 4);
        let a = s.score_with_grad(&x.input()).unwrap();
        let b = s.score_with_grad(&x.input()).unwrap();
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn checkpoint_round_trip() {
        let s = MiniScorer::init(MiniTopology::default(), 21).unwrap();
        let mut buf = Vec::new();
        s.write_checkpoint(&mut buf).unwrap();
        let back = MiniScorer::read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back, s.rounded());
        buf[0] = b'X';
        assert!(matches!(MiniScorer::read_checkpoint(buf.as_slice()), Err(Error::BadCheckpoint(_))));
    }

    #[test]
    fn wrong_channel_count_is_an_error() {
        let s = MiniScorer::init(MiniTopology::default(), 0).unwrap();
        let mut x = random_sample(8, 8, 0);
        x.shaded.pop();
        assert!(matches!(s.score(&x.input()), Err(Error::Scorer(_))));
    }
}
