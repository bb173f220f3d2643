//! Differentiable thresholding of the line maps and their composition into a
//! drawing.
//!
//! Each thresholded kind contributes `mask * max(1 - t / scalar, 0)`. The
//! composition is a hard per-pixel max; gradients go to the kind that wins
//! the max, with ties resolved by [`KIND_PRIORITY`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Drawing, Image};
use crate::lines::LineKind;
use crate::raster::{LineMap, MapStack};

/// Order in which equal intensities claim a pixel; earlier wins. An
/// external line image comes after all of these.
pub const KIND_PRIORITY: [LineKind; 7] = [
    LineKind::Suggestive,
    LineKind::Ridge,
    LineKind::Valley,
    LineKind::ApparentRidge,
    LineKind::Contour,
    LineKind::Boundary,
    LineKind::Crease,
];

/// The four thresholded kinds in parameter-vector order.
pub const FILTERED_KINDS: [LineKind; 4] = [
    LineKind::Suggestive,
    LineKind::Ridge,
    LineKind::Valley,
    LineKind::ApparentRidge,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSet {
    pub t_s: f64,
    pub t_r: f64,
    pub t_v: f64,
    pub t_a: f64,
    #[serde(default)]
    pub include_boundaries: bool,
    #[serde(default)]
    pub include_creases: bool,
}

impl Default for ThresholdSet {
    fn default() -> Self {
        Self::from_array([0.0; 4])
    }
}

impl ThresholdSet {
    pub fn new(t_s: f64, t_r: f64, t_v: f64, t_a: f64) -> Result<Self> {
        let t = Self::from_array([t_s, t_r, t_v, t_a]);
        t.validate()?;
        Ok(t)
    }

    /// Boundaries and creases off.
    pub fn from_array(t: [f64; 4]) -> Self {
        Self {
            t_s: t[0],
            t_r: t[1],
            t_v: t[2],
            t_a: t[3],
            include_boundaries: false,
            include_creases: false,
        }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.t_s, self.t_r, self.t_v, self.t_a]
    }

    pub fn with_values(&self, t: [f64; 4]) -> Self {
        Self {
            t_s: t[0],
            t_r: t[1],
            t_v: t[2],
            t_a: t[3],
            ..*self
        }
    }

    pub fn with_boundaries(self, on: bool) -> Self {
        Self {
            include_boundaries: on,
            ..self
        }
    }

    pub fn with_creases(self, on: bool) -> Self {
        Self {
            include_creases: on,
            ..self
        }
    }

    /// Thresholds must be non-negative; `+inf` switches a kind off.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in ["t_s", "t_r", "t_v", "t_a"].iter().zip(self.to_array()) {
            if v.is_nan() || v < 0.0 {
                return Err(Error::InvalidArgument(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn threshold(&self, kind: LineKind) -> Option<f64> {
        match kind {
            LineKind::Suggestive => Some(self.t_s),
            LineKind::Ridge => Some(self.t_r),
            LineKind::Valley => Some(self.t_v),
            LineKind::ApparentRidge => Some(self.t_a),
            _ => None,
        }
    }

    fn includes(&self, kind: LineKind) -> bool {
        match kind {
            LineKind::Boundary => self.include_boundaries,
            LineKind::Crease => self.include_creases,
            _ => true,
        }
    }
}

/// Derivative of a scalar objective with respect to each threshold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterGradient {
    pub d_t_s: f64,
    pub d_t_r: f64,
    pub d_t_v: f64,
    pub d_t_a: f64,
}

impl FilterGradient {
    pub fn from_array(g: [f64; 4]) -> Self {
        Self {
            d_t_s: g[0],
            d_t_r: g[1],
            d_t_v: g[2],
            d_t_a: g[3],
        }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.d_t_s, self.d_t_r, self.d_t_v, self.d_t_a]
    }
}

/// `max(1 - t / d, 0)`, zero when `d <= 0`.
#[inline]
pub fn taper(t: f64, d: f64) -> f64 {
    if d > 0.0 {
        (1.0 - t / d).max(0.0)
    } else {
        0.0
    }
}

fn mask_value(m: &LineMap, i: usize) -> f64 {
    if m.mask.as_slice()[i] {
        1.0
    } else {
        0.0
    }
}

fn pixel(maps: &MapStack, kind: LineKind, t: &ThresholdSet, i: usize) -> f64 {
    let m = maps.line(kind);
    match t.threshold(kind) {
        Some(th) => mask_value(m, i) * taper(th, m.scalar.as_slice()[i]),
        None => mask_value(m, i),
    }
}

/// Index into [`KIND_PRIORITY`] and value of the largest entry; earlier
/// entries win ties. `None` when all are zero.
fn pick(values: &[f64; 7]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (k, &v) in values.iter().enumerate() {
        if v > 0.0 && best.is_none_or(|(_, b)| v > b) {
            best = Some((k, v));
        }
    }
    best
}

/// `mask * max(1 - t / scalar, 0)` for one line map.
pub fn filter_map(map: &LineMap, t: f64) -> Drawing {
    let (w, h) = map.mask.dims();
    let mask = map.mask.as_slice();
    let s = map.scalar.as_slice();
    let data = (0..w * h)
        .into_par_iter()
        .map(|i| if mask[i] { taper(t, s[i]) } else { 0.0 })
        .collect();
    Image::from_vec(w, h, data).expect("dims from the map")
}

pub fn filter_sc(maps: &MapStack, t_s: f64) -> Drawing {
    filter_map(&maps.sc, t_s)
}

pub fn filter_rv(maps: &MapStack, t_r: f64, t_v: f64) -> (Drawing, Drawing) {
    (filter_map(&maps.ridge, t_r), filter_map(&maps.valley, t_v))
}

pub fn filter_ar(maps: &MapStack, t_a: f64) -> Drawing {
    filter_map(&maps.ar, t_a)
}

fn check_maps(maps: &MapStack) -> Result<()> {
    let expected = (maps.width, maps.height);
    for k in LineKind::ALL {
        let m = maps.line(k);
        for got in [m.mask.dims(), m.scalar.dims()] {
            if got != expected {
                return Err(Error::DimensionMismatch { expected, got });
            }
        }
    }
    Ok(())
}

/// Winning kind and intensity at pixel `i`.
fn winner(maps: &MapStack, t: &ThresholdSet, i: usize) -> Option<(usize, f64)> {
    let values = KIND_PRIORITY.map(|k| if t.includes(k) { pixel(maps, k, t, i) } else { 0.0 });
    pick(&values)
}

/// Geometric drawing: the per-pixel max of all included kinds.
pub fn compose(maps: &MapStack, t: &ThresholdSet) -> Result<Drawing> {
    check_maps(maps)?;
    let n = maps.width * maps.height;
    let data = (0..n)
        .into_par_iter()
        .map(|i| winner(maps, t, i).map_or(0.0, |(_, v)| v))
        .collect();
    Image::from_vec(maps.width, maps.height, data)
}

/// `max(geometric, external)`; identity without an external image.
pub fn merge_external(geometric: &Drawing, external: Option<&Drawing>) -> Result<Drawing> {
    let Some(ext) = external else {
        return Ok(geometric.clone());
    };
    geometric.check_same_dims(ext)?;
    let (w, h) = geometric.dims();
    let data = geometric
        .as_slice()
        .iter()
        .zip(ext.as_slice())
        .map(|(a, b)| a.max(*b))
        .collect();
    Image::from_vec(w, h, data)
}

/// Composed and merged drawing for thresholds `t`.
pub fn render_drawing(maps: &MapStack, t: &ThresholdSet, external: Option<&Drawing>) -> Result<Drawing> {
    merge_external(&compose(maps, t)?, external)
}

/// Chain rule through the filter layer: accumulates `upstream * dI/dt` over
/// pixels. A thresholded kind receives gradient only on pixels it wins and
/// where its taper is strictly positive.
pub fn grad_thresholds(
    maps: &MapStack,
    t: &ThresholdSet,
    external: Option<&Drawing>,
    upstream: &Image<f64>,
) -> Result<FilterGradient> {
    check_maps(maps)?;
    let expected = (maps.width, maps.height);
    if upstream.dims() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: upstream.dims(),
        });
    }
    if let Some(e) = external {
        if e.dims() != expected {
            return Err(Error::DimensionMismatch { expected, got: e.dims() });
        }
    }
    let up = upstream.as_slice();
    let ext = external.map(|e| e.as_slice());
    let w = maps.width;
    // Fixed row-wise reduction order keeps the sum independent of threads.
    let rows: Vec<[f64; 4]> = (0..maps.height)
        .into_par_iter()
        .map(|y| {
            let mut g = [0.0; 4];
            for i in y * w..(y + 1) * w {
                if up[i] == 0.0 {
                    continue;
                }
                let Some((slot, v)) = winner(maps, t, i) else {
                    continue;
                };
                if slot >= 4 || ext.is_some_and(|e| e[i] > v) {
                    continue;
                }
                g[slot] -= up[i] / maps.line(KIND_PRIORITY[slot]).scalar.as_slice()[i];
            }
            g
        })
        .collect();
    let mut g = [0.0; 4];
    for r in rows {
        for k in 0..4 {
            g[k] += r[k];
        }
    }
    Ok(FilterGradient::from_array(g))
}

/// The pixels of a map stack that carry any line, in row-major order, for
/// repeated composition at many threshold vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledMaps {
    pub width: usize,
    pub height: usize,
    pixels: Vec<usize>,
    /// Per pixel: mask bits in [`KIND_PRIORITY`] order.
    masks: Vec<u8>,
    /// Per pixel: scalars of the four thresholded kinds.
    scalars: Vec<[f64; 4]>,
}

impl CompiledMaps {
    pub fn new(maps: &MapStack) -> Result<Self> {
        check_maps(maps)?;
        let mut out = Self {
            width: maps.width,
            height: maps.height,
            pixels: Vec::new(),
            masks: Vec::new(),
            scalars: Vec::new(),
        };
        for i in 0..maps.width * maps.height {
            let mut bits = 0u8;
            for (k, kind) in KIND_PRIORITY.iter().enumerate() {
                if maps.line(*kind).mask.as_slice()[i] {
                    bits |= 1 << k;
                }
            }
            if bits != 0 {
                out.pixels.push(i);
                out.masks.push(bits);
                out.scalars
                    .push(FILTERED_KINDS.map(|k| maps.line(k).scalar.as_slice()[i]));
            }
        }
        Ok(out)
    }

    pub fn active_pixels(&self) -> usize {
        self.pixels.len()
    }

    fn values(&self, j: usize, t: &ThresholdSet) -> [f64; 7] {
        let th = t.to_array();
        let bits = self.masks[j];
        let mut v = [0.0; 7];
        for (k, kind) in KIND_PRIORITY.iter().enumerate() {
            if bits & (1 << k) == 0 || !t.includes(*kind) {
                continue;
            }
            v[k] = if k < 4 { taper(th[k], self.scalars[j][k]) } else { 1.0 };
        }
        v
    }

    /// Same result as [`compose`] on the source stack.
    pub fn compose(&self, t: &ThresholdSet) -> Drawing {
        let mut d = vec![0.0; self.width * self.height];
        for (j, &i) in self.pixels.iter().enumerate() {
            if let Some((_, v)) = pick(&self.values(j, t)) {
                d[i] = v;
            }
        }
        Image::from_vec(self.width, self.height, d).expect("dims from the stack")
    }

    pub fn render(&self, t: &ThresholdSet, external: Option<&Drawing>) -> Result<Drawing> {
        merge_external(&self.compose(t), external)
    }

    /// Same result as [`grad_thresholds`] on the source stack.
    pub fn grad(&self, t: &ThresholdSet, external: Option<&Drawing>, upstream: &Image<f64>) -> Result<FilterGradient> {
        let expected = (self.width, self.height);
        if upstream.dims() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: upstream.dims(),
            });
        }
        if let Some(e) = external {
            if e.dims() != expected {
                return Err(Error::DimensionMismatch { expected, got: e.dims() });
            }
        }
        let up = upstream.as_slice();
        let ext = external.map(|e| e.as_slice());
        let mut g = [0.0; 4];
        for (j, &i) in self.pixels.iter().enumerate() {
            if up[i] == 0.0 {
                continue;
            }
            let Some((slot, v)) = pick(&self.values(j, t)) else {
                continue;
            };
            if slot >= 4 || ext.is_some_and(|e| e[i] > v) {
                continue;
            }
            g[slot] -= up[i] / self.scalars[j][slot];
        }
        Ok(FilterGradient::from_array(g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stack_with(kind: LineKind, pixels: &[(usize, usize, f64)], w: usize, h: usize) -> MapStack {
        let mut maps = MapStack::empty(w, h);
        let m = maps.line_mut(kind);
        for &(x, y, s) in pixels {
            *m.mask.get_mut(x, y) = true;
            *m.scalar.get_mut(x, y) = s;
        }
        maps
    }

    #[test]
    fn zero_threshold_keeps_full_intensity() {
        let maps = stack_with(LineKind::Suggestive, &[(1, 1, 0.3), (2, 0, 5.0)], 4, 3);
        let i = filter_sc(&maps, 0.0);
        assert_eq!(i, maps.sc.mask.to_drawing());
    }

    #[test]
    fn half_intensity_at_twice_threshold() {
        let maps = stack_with(LineKind::ApparentRidge, &[(0, 0, 2.0)], 2, 2);
        assert!((*filter_ar(&maps, 1.0).get(0, 0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn threshold_above_max_clears_map() {
        let maps = stack_with(LineKind::Suggestive, &[(0, 0, 2.0), (1, 0, 0.7)], 2, 1);
        assert_eq!(filter_sc(&maps, 2.0).max_value(), 0.0);
        assert_eq!(filter_sc(&maps, 10.0).max_value(), 0.0);
    }

    #[test]
    fn ridge_threshold_equal_to_curvature_gives_zero() {
        let maps = stack_with(LineKind::Ridge, &[(0, 0, 0.8)], 1, 1);
        let (r, _) = filter_rv(&maps, 0.8, 0.0);
        assert_eq!(*r.get(0, 0), 0.0);
    }

    #[test]
    fn ratio_form_is_scale_free() {
        let a = stack_with(LineKind::Valley, &[(0, 0, 0.9), (1, 0, 1.7)], 2, 1);
        let b = stack_with(LineKind::Valley, &[(0, 0, 1.8), (1, 0, 3.4)], 2, 1);
        let (_, va) = filter_rv(&a, 0.0, 0.4);
        let (_, vb) = filter_rv(&b, 0.0, 0.8);
        for (x, y) in va.as_slice().iter().zip(vb.as_slice()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_scalar_pixels_are_blank() {
        let maps = stack_with(LineKind::Suggestive, &[(0, 0, 0.0)], 1, 1);
        assert_eq!(*filter_sc(&maps, 0.0).get(0, 0), 0.0);
    }

    #[test]
    fn huge_thresholds_leave_contours_and_boundaries() {
        let mut maps = stack_with(LineKind::Ridge, &[(0, 0, 1.0)], 3, 1);
        *maps.contour.mask.get_mut(1, 0) = true;
        *maps.boundary.mask.get_mut(2, 0) = true;
        let t = ThresholdSet::from_array([1e30; 4]).with_boundaries(true);
        let d = compose(&maps, &t).unwrap();
        assert_eq!(d.as_slice(), &[0.0, 1.0, 1.0]);
        let d = compose(&maps, &t.with_boundaries(false)).unwrap();
        assert_eq!(d.as_slice(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn creases_follow_their_flag() {
        let mut maps = MapStack::empty(1, 1);
        *maps.crease.mask.get_mut(0, 0) = true;
        let t = ThresholdSet::default();
        assert_eq!(*compose(&maps, &t).unwrap().get(0, 0), 0.0);
        assert_eq!(*compose(&maps, &t.with_creases(true)).unwrap().get(0, 0), 1.0);
    }

    #[test]
    fn merge_identities() {
        let g = Image::from_fn(3, 2, |x, y| (x + y) as f64 / 4.0);
        assert_eq!(merge_external(&g, None).unwrap(), g);
        assert_eq!(merge_external(&g, Some(&g)).unwrap(), g);
        let ones = Image::filled(3, 2, 1.0);
        assert_eq!(merge_external(&g, Some(&ones)).unwrap(), ones);
        assert!(merge_external(&g, Some(&Image::filled(2, 2, 1.0))).is_err());
    }

    #[test]
    fn compose_rejects_mismatched_maps() {
        let mut maps = MapStack::empty(3, 3);
        maps.ar.scalar = Image::new(2, 3);
        assert!(matches!(compose(&maps, &ThresholdSet::default()), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn single_pixel_gradient() {
        let maps = stack_with(LineKind::Suggestive, &[(0, 0, 2.0)], 1, 1);
        let t = ThresholdSet::from_array([1.0, 0.0, 0.0, 0.0]);
        let g = grad_thresholds(&maps, &t, None, &Image::filled(1, 1, 1.0)).unwrap();
        assert!((g.d_t_s + 0.5).abs() < 1e-15);
        assert_eq!([g.d_t_r, g.d_t_v, g.d_t_a], [0.0; 3]);
    }

    #[test]
    fn clamped_pixels_give_zero_gradient() {
        let maps = stack_with(LineKind::Ridge, &[(0, 0, 0.5), (1, 0, 0.2)], 2, 1);
        let t = ThresholdSet::from_array([0.0, 0.6, 0.0, 0.0]);
        let g = grad_thresholds(&maps, &t, None, &Image::filled(2, 1, 1.0)).unwrap();
        assert_eq!(g.to_array(), [0.0; 4]);
    }

    #[test]
    fn contour_and_external_block_gradient() {
        let mut maps = stack_with(LineKind::Suggestive, &[(0, 0, 2.0), (1, 0, 2.0)], 2, 1);
        *maps.contour.mask.get_mut(0, 0) = true;
        let t = ThresholdSet::from_array([1.0, 0.0, 0.0, 0.0]);
        let up = Image::filled(2, 1, 1.0);
        let g = grad_thresholds(&maps, &t, None, &up).unwrap();
        assert!((g.d_t_s + 0.5).abs() < 1e-15);
        let ext = Image::from_vec(2, 1, vec![0.0, 0.9]).unwrap();
        let g = grad_thresholds(&maps, &t, Some(&ext), &up).unwrap();
        assert_eq!(g.d_t_s, 0.0);
    }

    #[test]
    fn ties_go_to_the_earlier_kind() {
        let mut maps = stack_with(LineKind::Suggestive, &[(0, 0, 2.0)], 1, 1);
        *maps.ridge.mask.get_mut(0, 0) = true;
        *maps.ridge.scalar.get_mut(0, 0) = 4.0;
        let t = ThresholdSet::from_array([1.0, 2.0, 0.0, 0.0]);
        let g = grad_thresholds(&maps, &t, None, &Image::filled(1, 1, 1.0)).unwrap();
        assert!((g.d_t_s + 0.5).abs() < 1e-15);
        assert_eq!(g.d_t_r, 0.0);
    }

    #[test]
    fn negative_thresholds_are_rejected() {
        assert!(ThresholdSet::new(0.0, -1e-9, 0.0, 0.0).is_err());
        assert!(ThresholdSet::new(0.0, 0.0, f64::NAN, 0.0).is_err());
        assert!(ThresholdSet::new(0.0, 0.0, f64::INFINITY, 0.0).is_ok());
    }

    fn random_stack(seed: &[(u8, u8, u8)], w: usize, h: usize) -> MapStack {
        let mut maps = MapStack::empty(w, h);
        for (i, &(kind, px, s)) in seed.iter().enumerate() {
            let k = KIND_PRIORITY[kind as usize % 7];
            let p = (px as usize + i * 7) % (w * h);
            let m = maps.line_mut(k);
            m.mask.as_mut_slice()[p] = true;
            m.scalar.as_mut_slice()[p] = 0.05 + s as f64 / 64.0;
        }
        maps
    }

    proptest! {
        #[test]
        fn compiled_maps_match_dense_path(
            seed in prop::collection::vec((0u8..7, any::<u8>(), any::<u8>()), 1..60),
            t in prop::array::uniform4(0.0f64..2.0), b in any::<bool>(), c in any::<bool>(),
            ext_level in 0.0f64..1.0,
        ) {
            let maps = random_stack(&seed, 9, 7);
            let ts = ThresholdSet::from_array(t).with_boundaries(b).with_creases(c);
            let cm = CompiledMaps::new(&maps).unwrap();
            prop_assert_eq!(cm.compose(&ts), compose(&maps, &ts).unwrap());
            let ext = Image::from_fn(9, 7, |x, y| if (x + y) % 3 == 0 { ext_level } else { 0.0 });
            let up = Image::from_fn(9, 7, |x, y| (x as f64 - 4.0) * 0.3 + y as f64 * 0.1);
            for e in [None, Some(&ext)] {
                let a = cm.grad(&ts, e, &up).unwrap().to_array();
                let b = grad_thresholds(&maps, &ts, e, &up).unwrap().to_array();
                for k in 0..4 {
                    prop_assert!((a[k] - b[k]).abs() <= 1e-12 * (1.0 + b[k].abs()), "{:?} vs {:?}", a, b);
                }
            }
        }

        #[test]
        fn filters_are_monotone_and_bounded(
            seed in prop::collection::vec((0u8..7, any::<u8>(), any::<u8>()), 1..40),
            t in 0.0f64..3.0, dt in 0.0f64..1.0,
        ) {
            let maps = random_stack(&seed, 8, 6);
            for k in FILTERED_KINDS {
                let a = filter_map(maps.line(k), t);
                let b = filter_map(maps.line(k), t + dt);
                for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                    prop_assert!(*y <= *x);
                    prop_assert!((0.0..=1.0).contains(x));
                }
            }
        }

        #[test]
        fn compose_is_idempotent_and_dominates_contours(
            seed in prop::collection::vec((0u8..7, any::<u8>(), any::<u8>()), 1..40),
            t in prop::array::uniform4(0.0f64..3.0), b in any::<bool>(),
        ) {
            let maps = random_stack(&seed, 8, 6);
            let ts = ThresholdSet::from_array(t).with_boundaries(b);
            let d = compose(&maps, &ts).unwrap();
            prop_assert_eq!(merge_external(&d, Some(&d)).unwrap(), d.clone());
            for (v, c) in d.as_slice().iter().zip(maps.contour.mask.as_slice()) {
                prop_assert!(!*c || *v == 1.0);
                prop_assert!((0.0..=1.0).contains(v));
            }
        }
    }
}
