//! Line generators on the surface, extracted per face as short 3D segments.
//!
//! Every extractor visits faces in index order and emits segments in local
//! edge order, so output order does not depend on parallelism.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::curvature::{radial_curvature, CurvatureField, RadialCurvature, ViewDependentField};
use crate::mesh::{Topology, TriangleMesh, Vec3};

/// Segments shorter than this (object units) are dropped.
pub const MIN_SEGMENT_LENGTH: f64 = 1e-6;
pub const DEFAULT_CREASE_ANGLE_DEG: f64 = 60.0;
/// Ridges need `k1 - |k2| > margin * |k1|` at all face corners; valleys the
/// mirror condition. Screens out near-umbilic noise.
pub const DEFAULT_RIDGE_ANISOTROPY: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LineKind {
    Contour,
    Boundary,
    Crease,
    Suggestive,
    Ridge,
    Valley,
    ApparentRidge,
}

impl LineKind {
    pub const ALL: [LineKind; 7] = [
        LineKind::Contour,
        LineKind::Boundary,
        LineKind::Crease,
        LineKind::Suggestive,
        LineKind::Ridge,
        LineKind::Valley,
        LineKind::ApparentRidge,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            LineKind::Contour => "contour",
            LineKind::Boundary => "boundary",
            LineKind::Crease => "crease",
            LineKind::Suggestive => "sc",
            LineKind::Ridge => "ridge",
            LineKind::Valley => "valley",
            LineKind::ApparentRidge => "ar",
        }
    }
}

impl fmt::Display for LineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// A straight piece of a line lying on face `face`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSegment3D {
    pub kind: LineKind,
    pub p: [Vec3; 2],
    /// Filter scalar at each endpoint; 1 for parameter-free kinds.
    pub s: [f64; 2],
    pub face: usize,
}

impl LineSegment3D {
    pub fn length(&self) -> f64 {
        (self.p[1] - self.p[0]).norm()
    }
}

/// Writes one `kind x1 y1 z1 s1 x2 y2 z2 s2` record per segment.
pub fn write_segments(mut out: impl Write, segments: &[LineSegment3D]) -> std::io::Result<()> {
    for s in segments {
        writeln!(
            out,
            "{} {} {} {} {} {} {} {} {}",
            s.kind, s.p[0].x, s.p[0].y, s.p[0].z, s.s[0], s.p[1].x, s.p[1].y, s.p[1].z, s.s[1]
        )?;
    }
    Ok(())
}

fn keep(seg: LineSegment3D) -> Option<LineSegment3D> {
    (seg.length() >= MIN_SEGMENT_LENGTH).then_some(seg)
}

/// Point where the linear interpolant of `g` vanishes on edge `(a, b)`.
/// Computed in ascending index order so that both faces sharing the edge
/// get bit-identical results.
fn edge_zero(v: &[Vec3], g: &[f64], a: usize, b: usize) -> (Vec3, f64) {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let w = g[lo] / (g[lo] - g[hi]);
    let p = v[lo] + (v[hi] - v[lo]) * w;
    let t = if lo == a { w } else { 1.0 - w };
    (p, t)
}

/// Isoline `g = 0` crossing one face, as the two crossed local edges and
/// the interpolated points. Local edge `j` joins corners `j` and `j + 1`.
fn face_zero_set(v: &[Vec3], g: &[f64], f: &[usize; 3]) -> Option<[(usize, Vec3, f64); 2]> {
    let neg = f.map(|i| g[i] < 0.0);
    if neg[0] == neg[1] && neg[1] == neg[2] {
        return None;
    }
    let mut out = Vec::with_capacity(2);
    for j in 0..3 {
        let (a, b) = (f[j], f[(j + 1) % 3]);
        if neg[j] != neg[(j + 1) % 3] {
            let (p, t) = edge_zero(v, g, a, b);
            out.push((j, p, t));
        }
    }
    Some([out[0], out[1]])
}

/// Zero set of `n . (camera - v)` interpolated along edges.
pub fn occluding_contours(mesh: &TriangleMesh, camera: &Camera) -> Vec<LineSegment3D> {
    occluding_contours_from(mesh, &camera.position)
}

pub fn occluding_contours_from(mesh: &TriangleMesh, eye: &Vec3) -> Vec<LineSegment3D> {
    let v = mesh.vertices();
    let g: Vec<f64> = v
        .iter()
        .zip(mesh.normals())
        .map(|(p, n)| n.dot(&(eye - p)))
        .collect();
    mesh.faces()
        .par_iter()
        .enumerate()
        .filter_map(|(fi, f)| {
            let [(_, p0, _), (_, p1, _)] = face_zero_set(v, &g, f)?;
            keep(LineSegment3D {
                kind: LineKind::Contour,
                p: [p0, p1],
                s: [1.0, 1.0],
                face: fi,
            })
        })
        .collect()
}

/// Boundary edges and creases sharper than `crease_angle_deg`, ordered by
/// owning face then local edge.
pub fn boundaries_and_creases(mesh: &TriangleMesh, crease_angle_deg: f64) -> Vec<LineSegment3D> {
    let topo = Topology::build(mesh);
    let cos_limit = crease_angle_deg.to_radians().cos();
    let v = mesh.vertices();
    let mut keyed: Vec<((usize, usize), LineSegment3D)> = Vec::new();
    for e in topo.edges() {
        let kind = match e.faces.len() {
            1 => LineKind::Boundary,
            2 => {
                let (a, b) = (mesh.face_normal(e.faces[0].0), mesh.face_normal(e.faces[1].0));
                if a.dot(&b) < cos_limit {
                    LineKind::Crease
                } else {
                    continue;
                }
            }
            _ => continue,
        };
        let (f, j) = e.faces[0];
        let face = mesh.faces()[f];
        let seg = LineSegment3D {
            kind,
            p: [v[face[j]], v[face[(j + 1) % 3]]],
            s: [1.0, 1.0],
            face: f,
        };
        if let Some(seg) = keep(seg) {
            keyed.push(((f, j), seg));
        }
    }
    keyed.sort_by_key(|(k, _)| *k);
    keyed.into_iter().map(|(_, s)| s).collect()
}

/// Zero set of radial curvature where its derivative toward the camera is
/// positive at both segment ends. Fully back-facing faces are skipped.
pub fn suggestive_contours(mesh: &TriangleMesh, camera: &Camera, field: &CurvatureField) -> Vec<LineSegment3D> {
    let rc = radial_curvature(field, &camera.view_directions(mesh.vertices()));
    suggestive_contours_from(mesh, &rc)
}

pub fn suggestive_contours_from(mesh: &TriangleMesh, rc: &RadialCurvature) -> Vec<LineSegment3D> {
    let v = mesh.vertices();
    mesh.faces()
        .par_iter()
        .enumerate()
        .filter_map(|(fi, f)| {
            if f.iter().all(|&i| rc.ndotv[i] <= 0.0) {
                return None;
            }
            let crossings = face_zero_set(v, &rc.kr, f)?;
            let s = crossings.map(|(j, _, t)| {
                let (a, b) = (f[j], f[(j + 1) % 3]);
                rc.dkr[a] * (1.0 - t) + rc.dkr[b] * t
            });
            if !(s[0] > 0.0 && s[1] > 0.0) {
                return None;
            }
            keep(LineSegment3D {
                kind: LineKind::Suggestive,
                p: [crossings[0].1, crossings[1].1],
                s,
                face: fi,
            })
        })
        .collect()
}

/// Per-vertex inputs of an extremal-line search.
struct Extremum<'a> {
    kind: LineKind,
    /// Derivative of the curvature along `dir` (sign follows `dir`).
    deriv: &'a [f64],
    dir: &'a [Vec3],
    /// Filter scalar written to segment endpoints.
    scalar: &'a [f64],
    maximum: bool,
}

fn extremal_lines(mesh: &TriangleMesh, x: &Extremum<'_>, face_ok: impl Fn(&[usize; 3]) -> bool + Sync) -> Vec<LineSegment3D> {
    let v = mesh.vertices();
    let per_face: Vec<Vec<LineSegment3D>> = mesh
        .faces()
        .par_iter()
        .enumerate()
        .map(|(fi, f)| {
            if !face_ok(f) {
                return Vec::new();
            }
            extremal_face(v, x, fi, f)
        })
        .collect();
    per_face.into_iter().flatten().collect()
}

fn extremal_face(v: &[Vec3], x: &Extremum<'_>, fi: usize, f: &[usize; 3]) -> Vec<LineSegment3D> {
    // Direction fields are defined up to sign: align to the first corner.
    let d0 = x.dir[f[0]];
    let sign = f.map(|i| if x.dir[i].dot(&d0) < 0.0 { -1.0 } else { 1.0 });
    let e = [0, 1, 2].map(|j| x.deriv[f[j]] * sign[j]);
    let d = [0, 1, 2].map(|j| x.dir[f[j]] * sign[j]);
    let k = f.map(|i| x.scalar[i]);

    // Crossing on local edge j (corners j, j+1) when the direction-weighted
    // derivatives point against each other.
    let z = [0, 1, 2].map(|j| {
        let a = (j + 1) % 3;
        (d[j] * e[j]).dot(&(d[a] * e[a])) <= 0.0
    });
    let count = z.iter().filter(|&&b| b).count();
    if count < 2 {
        return Vec::new();
    }

    // Extremum type from the in-face gradient of the aligned derivative.
    let (p0, p1, p2) = (v[f[0]], v[f[1]], v[f[2]]);
    let n = (p1 - p0).cross(&(p2 - p0));
    let area2 = n.norm();
    if area2 == 0.0 {
        return Vec::new();
    }
    let nh = n / area2;
    let grad = (nh.cross(&(p2 - p1)) * e[0] + nh.cross(&(p0 - p2)) * e[1] + nh.cross(&(p1 - p0)) * e[2]) / area2;
    let slope = grad.dot(&(d[0] + d[1] + d[2]));
    if (x.maximum && slope >= 0.0) || (!x.maximum && slope <= 0.0) {
        return Vec::new();
    }

    let point_on = |j: usize| {
        let a = (j + 1) % 3;
        let denom = e[j].abs() + e[a].abs();
        let w = if denom > 0.0 { e[j].abs() / denom } else { 0.5 };
        (v[f[j]] * (1.0 - w) + v[f[a]] * w, (k[j] * (1.0 - w) + k[a] * w).abs())
    };
    let make = |a: (Vec3, f64), b: (Vec3, f64)| {
        keep(LineSegment3D {
            kind: x.kind,
            p: [a.0, b.0],
            s: [a.1, b.1],
            face: fi,
        })
    };
    if count == 3 {
        let center = ((p0 + p1 + p2) / 3.0, (k[0] + k[1] + k[2]).abs() / 3.0);
        (0..3).filter_map(|j| make(point_on(j), center)).collect()
    } else {
        let edges: Vec<usize> = (0..3).filter(|&j| z[j]).collect();
        make(point_on(edges[0]), point_on(edges[1])).into_iter().collect()
    }
}

/// Ridges (maxima of k1 along e1 where k1 dominates) and valleys (minima of
/// k2 along e2 where -k2 dominates), with the default anisotropy margin.
pub fn ridges_valleys(mesh: &TriangleMesh, field: &CurvatureField) -> Vec<LineSegment3D> {
    ridges_valleys_with(mesh, field, DEFAULT_RIDGE_ANISOTROPY)
}

pub fn ridges_valleys_with(mesh: &TriangleMesh, field: &CurvatureField, margin: f64) -> Vec<LineSegment3D> {
    let c111: Vec<f64> = field.dcurv.iter().map(|c| c[0]).collect();
    let c222: Vec<f64> = field.dcurv.iter().map(|c| c[3]).collect();
    let abs_k2: Vec<f64> = field.k2.iter().map(|k| k.abs()).collect();
    let ridge_ok = |i: usize| field.k1[i] - field.k2[i].abs() > margin * field.k1[i].abs();
    let valley_ok = |i: usize| -field.k2[i] - field.k1[i].abs() > margin * field.k2[i].abs();
    let mut ridges = extremal_lines(
        mesh,
        &Extremum {
            kind: LineKind::Ridge,
            deriv: &c111,
            dir: &field.e1,
            scalar: &field.k1,
            maximum: true,
        },
        |f| f.iter().all(|&i| ridge_ok(i)),
    );
    let valleys = extremal_lines(
        mesh,
        &Extremum {
            kind: LineKind::Valley,
            deriv: &c222,
            dir: &field.e2,
            scalar: &abs_k2,
            maximum: false,
        },
        |f| f.iter().all(|&i| valley_ok(i)),
    );
    ridges.extend(valleys);
    ridges
}

/// Maxima of view-dependent curvature along its maximizing direction on
/// faces with at least one front-facing corner.
pub fn apparent_ridges(mesh: &TriangleMesh, field: &CurvatureField, vd: &ViewDependentField) -> Vec<LineSegment3D> {
    let dirs: Vec<Vec3> = (0..field.len()).map(|i| vd.t1_world(field, i)).collect();
    extremal_lines(
        mesh,
        &Extremum {
            kind: LineKind::ApparentRidge,
            deriv: &vd.dt1,
            dir: &dirs,
            scalar: &vd.kt,
            maximum: true,
        },
        |f| f.iter().any(|&i| vd.ndotv[i] > 0.0),
    )
}
