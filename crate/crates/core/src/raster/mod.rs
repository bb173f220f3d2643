//! Software rasterization: depth, shading, visible line maps and the map
//! stack consumed by the filter layer.

mod canny;
mod zbuffer;

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::curvature::{self, CurvatureField, ViewDependentField};
use crate::error::Result;
use crate::image::{write_float_dump, Image, Mask};
use crate::lines::{self, LineKind, LineSegment3D};
use crate::mesh::{smooth_normals, TriangleMesh, Vec3};

pub use canny::{canny_lines, canny_with_sigma, gaussian_blur, DEFAULT_CANNY_SIGMA};
pub use zbuffer::{rasterize_depth, DepthBuffer, NO_FACE};

/// Normal smoothing levels of the shaded stack, in mean edge lengths.
pub const SHADED_SIGMAS: [f64; 6] = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
pub const DEFAULT_DEPTH_BIAS: f64 = 1e-3;
pub const DEFAULT_LINE_WIDTH: f64 = 1.0;

/// Knobs for turning a mesh and camera into a [`MapStack`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderOptions {
    pub line_width: f64,
    /// Visibility tolerance as a fraction of the scene depth range.
    pub depth_bias: f64,
    pub crease_angle_deg: f64,
    pub ridge_anisotropy: f64,
    /// Normalize view-dependent curvature by the k1 percentile instead of
    /// its own.
    pub joint_kt_normalization: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            line_width: DEFAULT_LINE_WIDTH,
            depth_bias: DEFAULT_DEPTH_BIAS,
            crease_angle_deg: lines::DEFAULT_CREASE_ANGLE_DEG,
            ridge_anisotropy: lines::DEFAULT_RIDGE_ANISOTROPY,
            joint_kt_normalization: false,
        }
    }
}

/// Visible pixels of one line kind and the filter scalar stored there.
#[derive(Debug, Clone, PartialEq)]
pub struct LineMap {
    pub mask: Mask,
    /// Positive exactly where `mask` is set.
    pub scalar: Image<f64>,
}

impl LineMap {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            mask: Mask::new(width, height),
            scalar: Image::new(width, height),
        }
    }
}

/// Image-space inputs of the filter layer and the scorer.
#[derive(Debug, Clone, PartialEq)]
pub struct MapStack {
    pub width: usize,
    pub height: usize,
    /// Suggestive contours; scalar is the radial curvature derivative.
    pub sc: LineMap,
    /// Ridges; scalar is k1.
    pub ridge: LineMap,
    /// Valleys; scalar is |k2|.
    pub valley: LineMap,
    /// Apparent ridges; scalar is the view-dependent curvature.
    pub ar: LineMap,
    pub contour: LineMap,
    pub boundary: LineMap,
    pub crease: LineMap,
    /// Depth image, nearer is larger, background 0.
    pub depth: Image<f64>,
    /// Shaded images under increasingly smoothed normals.
    pub shaded: Vec<Image<f64>>,
    /// Extracted 3D segments per kind, before visibility.
    pub segment_counts: BTreeMap<LineKind, usize>,
}

impl MapStack {
    pub fn empty(width: usize, height: usize) -> Self {
        let lm = LineMap::empty(width, height);
        Self {
            width,
            height,
            sc: lm.clone(),
            ridge: lm.clone(),
            valley: lm.clone(),
            ar: lm.clone(),
            contour: lm.clone(),
            boundary: lm.clone(),
            crease: lm,
            depth: Image::new(width, height),
            shaded: vec![Image::new(width, height); SHADED_SIGMAS.len()],
            segment_counts: BTreeMap::new(),
        }
    }

    pub fn line(&self, kind: LineKind) -> &LineMap {
        match kind {
            LineKind::Contour => &self.contour,
            LineKind::Boundary => &self.boundary,
            LineKind::Crease => &self.crease,
            LineKind::Suggestive => &self.sc,
            LineKind::Ridge => &self.ridge,
            LineKind::Valley => &self.valley,
            LineKind::ApparentRidge => &self.ar,
        }
    }

    pub fn line_mut(&mut self, kind: LineKind) -> &mut LineMap {
        match kind {
            LineKind::Contour => &mut self.contour,
            LineKind::Boundary => &mut self.boundary,
            LineKind::Crease => &mut self.crease,
            LineKind::Suggestive => &mut self.sc,
            LineKind::Ridge => &mut self.ridge,
            LineKind::Valley => &mut self.valley,
            LineKind::ApparentRidge => &mut self.ar,
        }
    }

    /// True when none of the four thresholded kinds has a visible pixel.
    pub fn filtered_maps_empty(&self) -> bool {
        ![&self.sc, &self.ridge, &self.valley, &self.ar]
            .iter()
            .any(|m| m.mask.any())
    }

    /// Writes all channels as a float dump: the seven line scalars, depth,
    /// then the shaded stack.
    pub fn write_dump(&self, out: impl Write) -> Result<()> {
        let n = self.width * self.height;
        let mut channels: Vec<&[f64]> = LineKind::ALL.iter().map(|&k| self.line(k).scalar.as_slice()).collect();
        channels.push(self.depth.as_slice());
        channels.extend(self.shaded.iter().map(|s| s.as_slice()));
        let c = channels.len();
        let mut values = Vec::with_capacity(n * c);
        for i in 0..n {
            values.extend(channels.iter().map(|ch| ch[i]));
        }
        write_float_dump(out, n, c, &values)
    }
}

/// Near and far view depths enclosing the mesh's bounding sphere.
pub fn depth_range(mesh: &TriangleMesh, camera: &Camera) -> (f64, f64) {
    let (c, r) = mesh.bounding_sphere();
    let zc = camera.to_view(&c).z;
    let r = r.max(1e-12);
    ((zc - r).max(1e-9), zc + r)
}

/// Depth image from a z-buffer: foreground mapped affinely into (0, 1] with
/// nearer pixels larger, background exactly 0.
pub fn depth_image(zb: &DepthBuffer, range: (f64, f64)) -> Image<f64> {
    let (near, far) = range;
    let span = (far - near).max(f64::MIN_POSITIVE);
    let data = zb
        .depth
        .iter()
        .map(|&z| {
            if z.is_finite() {
                ((far - z) / span).clamp(1e-6, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    Image::from_vec(zb.width, zb.height, data).expect("buffer sized from camera")
}

pub fn render_depth(mesh: &TriangleMesh, camera: &Camera) -> Image<f64> {
    if mesh.is_empty() {
        return Image::new(camera.width, camera.height);
    }
    depth_image(&rasterize_depth(mesh, camera), depth_range(mesh, camera))
}

/// Gouraud shading with the light at the eye: per-vertex `max(0, n . l)`
/// interpolated across faces; background 0.
pub fn shade(mesh: &TriangleMesh, camera: &Camera, zb: &DepthBuffer, normals: &[Vec3]) -> Image<f64> {
    let intensity: Vec<f64> = mesh
        .vertices()
        .iter()
        .zip(normals)
        .map(|(v, n)| {
            let l = camera.position - v;
            let len = l.norm();
            if len > 0.0 {
                n.dot(&(l / len)).max(0.0)
            } else {
                0.0
            }
        })
        .collect();
    let faces = mesh.faces();
    let data = (0..zb.face.len())
        .into_par_iter()
        .map(|i| {
            let f = zb.face[i];
            if f == NO_FACE {
                return 0.0;
            }
            let face = faces[f as usize];
            let b = zb.bary[i];
            (b[0] * intensity[face[0]] + b[1] * intensity[face[1]] + b[2] * intensity[face[2]]).clamp(0.0, 1.0)
        })
        .collect();
    Image::from_vec(zb.width, zb.height, data).expect("buffer sized from camera")
}

pub fn render_shaded(mesh: &TriangleMesh, camera: &Camera, normals: &[Vec3]) -> Image<f64> {
    shade(mesh, camera, &rasterize_depth(mesh, camera), normals)
}

/// Six shaded images with normals smoothed at [`SHADED_SIGMAS`].
pub fn render_shaded_stack(mesh: &TriangleMesh, camera: &Camera) -> Vec<Image<f64>> {
    shaded_stack(mesh, camera, &rasterize_depth(mesh, camera))
}

pub fn shaded_stack(mesh: &TriangleMesh, camera: &Camera, zb: &DepthBuffer) -> Vec<Image<f64>> {
    SHADED_SIGMAS
        .iter()
        .map(|&s| shade(mesh, camera, zb, &smooth_normals(mesh, s).normals))
        .collect()
}

/// Depth-tested line stamping against a fixed z-buffer.
pub struct LineRasterizer<'a> {
    pub camera: &'a Camera,
    pub zbuffer: &'a DepthBuffer,
    /// Absolute depth tolerance.
    pub bias: f64,
    pub line_width: f64,
}

impl<'a> LineRasterizer<'a> {
    pub fn new(mesh: &TriangleMesh, camera: &'a Camera, zbuffer: &'a DepthBuffer, depth_bias: f64, line_width: f64) -> Self {
        let (near, far) = depth_range(mesh, camera);
        Self {
            camera,
            zbuffer,
            bias: depth_bias * (far - near),
            line_width,
        }
    }

    /// Marks pixels whose centers lie within half the line width of a
    /// projected segment and pass the visibility test. A pixel is visible
    /// when the line depth there does not exceed the farthest z-buffer
    /// depth in its 3x3 neighbourhood plus the bias; this keeps grazing
    /// silhouette pixels that a single-pixel test would reject.
    pub fn rasterize(&self, segments: &[LineSegment3D]) -> LineMap {
        let (w, h) = (self.camera.width, self.camera.height);
        let mut out = LineMap::empty(w, h);
        let hw = self.line_width / 2.0;
        for seg in segments {
            let va = self.camera.to_view(&seg.p[0]);
            let vb = self.camera.to_view(&seg.p[1]);
            if va.z <= 1e-9 || vb.z <= 1e-9 {
                continue;
            }
            let (pa, pb) = (self.camera.project_view(&va), self.camera.project_view(&vb));
            let (ax, ay, bx, by) = (pa.x, pa.y, pb.x, pb.y);
            let x0 = ((ax.min(bx) - hw - 0.5).ceil().max(0.0)) as i64;
            let x1 = ((ax.max(bx) + hw - 0.5).floor().min(w as f64 - 1.0)) as i64;
            let y0 = ((ay.min(by) - hw - 0.5).ceil().max(0.0)) as i64;
            let y1 = ((ay.max(by) + hw - 0.5).floor().min(h as f64 - 1.0)) as i64;
            if x1 < x0 || y1 < y0 {
                continue;
            }
            let (dx, dy) = (bx - ax, by - ay);
            let len2 = dx * dx + dy * dy;
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                    let t = if len2 > 0.0 {
                        (((px - ax) * dx + (py - ay) * dy) / len2).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    let (cx, cy) = (ax + t * dx, ay + t * dy);
                    if (px - cx).hypot(py - cy) > hw {
                        continue;
                    }
                    let iz = (1.0 - t) / va.z + t / vb.z;
                    let z = 1.0 / iz;
                    let (xu, yu) = (x as usize, y as usize);
                    if z > self.zbuffer.neighborhood_max(xu, yu) + self.bias {
                        continue;
                    }
                    let s = ((1.0 - t) * seg.s[0] / va.z + t * seg.s[1] / vb.z) * z;
                    if s > 0.0 {
                        let i = yu * w + xu;
                        let cur = &mut out.scalar.as_mut_slice()[i];
                        if s > *cur {
                            *cur = s;
                        }
                        out.mask.as_mut_slice()[i] = true;
                    }
                }
            }
        }
        out
    }
}

/// Binary mask and scalar map of visible segment pixels.
pub fn rasterize_lines(segments: &[LineSegment3D], mesh: &TriangleMesh, camera: &Camera, line_width: f64) -> (Mask, Image<f64>) {
    let zb = rasterize_depth(mesh, camera);
    let lm = LineRasterizer::new(mesh, camera, &zb, DEFAULT_DEPTH_BIAS, line_width).rasterize(segments);
    (lm.mask, lm.scalar)
}

/// All 3D line sets for one view, grouped by kind.
#[derive(Debug, Clone, Default)]
pub struct ViewLines {
    pub segments: BTreeMap<LineKind, Vec<LineSegment3D>>,
}

/// Curvature analysis and line extraction for one camera.
pub fn extract_view_lines(mesh: &TriangleMesh, camera: &Camera, field: &CurvatureField, opts: &RenderOptions) -> ViewLines {
    let dirs = camera.view_directions(mesh.vertices());
    let rc = curvature::radial_curvature(field, &dirs);
    let vd: ViewDependentField = curvature::view_dependent_from_dirs(field, mesh, &dirs);
    let vd = if opts.joint_kt_normalization {
        vd.normalize_by(field.percentile_scale)
    } else {
        vd.normalize_percentile()
    };
    let mut segments: BTreeMap<LineKind, Vec<LineSegment3D>> = BTreeMap::new();
    for s in lines::occluding_contours(mesh, camera) {
        segments.entry(LineKind::Contour).or_default().push(s);
    }
    for s in lines::boundaries_and_creases(mesh, opts.crease_angle_deg) {
        segments.entry(s.kind).or_default().push(s);
    }
    segments.insert(LineKind::Suggestive, lines::suggestive_contours_from(mesh, &rc));
    for s in lines::ridges_valleys_with(mesh, field, opts.ridge_anisotropy) {
        segments.entry(s.kind).or_default().push(s);
    }
    segments.insert(LineKind::ApparentRidge, lines::apparent_ridges(mesh, field, &vd));
    ViewLines { segments }
}

/// Renders every image-space input for one view of a (size-normalized)
/// mesh.
pub fn render_maps(mesh: &TriangleMesh, camera: &Camera, opts: &RenderOptions) -> MapStack {
    render_maps_with_field(mesh, camera, &curvature::analyze(mesh), opts)
}

pub fn render_maps_with_field(mesh: &TriangleMesh, camera: &Camera, field: &CurvatureField, opts: &RenderOptions) -> MapStack {
    let (w, h) = (camera.width, camera.height);
    let mut maps = MapStack::empty(w, h);
    if mesh.is_empty() {
        return maps;
    }
    let zb = rasterize_depth(mesh, camera);
    let view = extract_view_lines(mesh, camera, field, opts);
    let lr = LineRasterizer::new(mesh, camera, &zb, opts.depth_bias, opts.line_width);
    for (&kind, segs) in &view.segments {
        maps.segment_counts.insert(kind, segs.len());
        *maps.line_mut(kind) = lr.rasterize(segs);
    }
    maps.depth = depth_image(&zb, depth_range(mesh, camera));
    maps.shaded = shaded_stack(mesh, camera, &zb);
    maps
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;

    fn cam(pos: Vec3, w: usize, h: usize) -> Camera {
        Camera::new(pos, Vec3::zeros(), Vec3::y(), 40.0, w, h).unwrap()
    }

    #[test]
    fn empty_mesh_depth_is_zero() {
        let m = TriangleMesh::new(vec![], vec![], None).unwrap();
        let d = render_depth(&m, &cam(Vec3::new(0.0, 0.0, 3.0), 16, 16));
        assert!(d.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn frame_filling_quad_has_constant_depth() {
        let m = primitives::grid_plane(4, 10.0);
        let c = Camera::new(Vec3::new(0.0, 0.0, 50.0), Vec3::zeros(), Vec3::y(), 5.0, 32, 32).unwrap();
        let d = render_depth(&m, &c);
        let v0 = d.as_slice()[0];
        assert!(v0 > 0.0);
        assert!(d.as_slice().iter().all(|&v| (v - v0).abs() < 1e-12));
    }

    #[test]
    fn sphere_depth_peaks_at_projected_center() {
        let m = primitives::icosphere(4, 1.0);
        let c = cam(Vec3::new(0.0, 0.0, 4.0), 96, 96);
        let d = render_depth(&m, &c);
        let (imax, _) = d.as_slice().iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        let (x, y) = ((imax % 96) as f64 + 0.5, (imax / 96) as f64 + 0.5);
        assert!((x - 48.0).hypot(y - 48.0) <= 2.0);
        // Radial symmetry: equal radii give nearly equal depth.
        let at = |dx: i64, dy: i64| *d.get((48 + dx) as usize, (48 + dy) as usize);
        assert!((at(10, 0) - at(0, 10)).abs() < 0.02);
        assert!((at(-10, 0) - at(0, -10)).abs() < 0.02);
    }

    #[test]
    fn head_on_plane_is_uniformly_lit() {
        let m = primitives::grid_plane(4, 0.2);
        let c = Camera::new(Vec3::new(0.0, 0.0, 100.0), Vec3::zeros(), Vec3::y(), 40.0, 32, 32).unwrap();
        let img = render_shaded(&m, &c, m.normals());
        for &v in img.as_slice().iter().filter(|&&v| v > 0.0) {
            assert!((v - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn sphere_shading_falls_off_toward_silhouette() {
        let m = primitives::icosphere(4, 1.0);
        let c = cam(Vec3::new(0.0, 0.0, 4.0), 96, 96);
        let img = render_shaded(&m, &c, m.normals());
        let center = *img.get(48, 48);
        assert!(center > 0.99);
        let row: Vec<f64> = (48..96).map(|x| *img.get(x, 48)).collect();
        let last_lit = row.iter().rposition(|&v| v > 0.0).unwrap();
        assert!(row[last_lit] < 0.35);
        assert!(row[..=last_lit].windows(2).all(|w| w[1] <= w[0] + 1e-9));
    }

    #[test]
    fn backfacing_geometry_is_dark() {
        let m = primitives::grid_plane(4, 1.0);
        let c = cam(Vec3::new(0.0, 0.0, -3.0), 32, 32);
        let img = render_shaded(&m, &c, m.normals());
        assert!(img.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stack_first_level_equals_raw_shading() {
        let m = primitives::torus(1.0, 0.3, 40, 20);
        let c = cam(Vec3::new(0.5, 1.0, 4.0), 48, 48);
        let stack = render_shaded_stack(&m, &c);
        assert_eq!(stack.len(), 6);
        assert_eq!(stack[0], render_shaded(&m, &c, m.normals()));
    }

    #[test]
    fn flat_plane_stack_is_constant_across_levels() {
        let m = primitives::grid_plane(8, 1.0);
        let c = cam(Vec3::new(0.2, 0.3, 3.0), 32, 32);
        let stack = render_shaded_stack(&m, &c);
        for s in &stack[1..] {
            assert_eq!(s, &stack[0]);
        }
    }

    #[test]
    fn empty_segment_list_gives_empty_mask() {
        let m = primitives::icosphere(2, 1.0);
        let (mask, scalar) = rasterize_lines(&[], &m, &cam(Vec3::new(0.0, 0.0, 4.0), 32, 32), 1.0);
        assert!(!mask.any());
        assert!(scalar.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn segment_behind_the_mesh_is_hidden() {
        let m = primitives::icosphere(3, 1.0);
        let seg = LineSegment3D {
            kind: LineKind::Ridge,
            p: [Vec3::new(-0.3, 0.0, -0.9), Vec3::new(0.3, 0.0, -0.9)],
            s: [1.0, 1.0],
            face: 0,
        };
        let (mask, _) = rasterize_lines(&[seg], &m, &cam(Vec3::new(0.0, 0.0, 4.0), 64, 64), 1.0);
        assert_eq!(mask.count(), 0);
        let front = LineSegment3D {
            p: [Vec3::new(-0.3, 0.0, 1.01), Vec3::new(0.3, 0.0, 1.01)],
            ..seg
        };
        let (mask, _) = rasterize_lines(&[front], &m, &cam(Vec3::new(0.0, 0.0, 4.0), 64, 64), 1.0);
        assert!(mask.count() > 5);
    }

    #[test]
    fn scalar_map_is_positive_exactly_on_mask() {
        let m = primitives::lobed_torus(1.0, 0.3, 4, 0.15, 96, 48);
        let c = Camera::new(Vec3::new(2.4, 1.2, 1.6), Vec3::zeros(), Vec3::z(), 40.0, 128, 128).unwrap();
        let maps = render_maps(&m, &c, &RenderOptions::default());
        for kind in LineKind::ALL {
            let lm = maps.line(kind);
            for (s, &b) in lm.scalar.as_slice().iter().zip(lm.mask.as_slice()) {
                assert_eq!(*s > 0.0, b, "{kind}");
            }
        }
    }
}
