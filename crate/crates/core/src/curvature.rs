//! Per-vertex differential geometry on triangle meshes.
//!
//! Principal curvatures and their derivatives are fitted per face from
//! normal (respectively curvature) differences along the edges and then
//! averaged into the vertices with Voronoi corner-area weights. Positive
//! curvature means convex with respect to the outward normal.

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use rayon::prelude::*;

use crate::camera::Camera;
use crate::mesh::{Topology, TriangleMesh, Vec3};

/// Smallest |n·v| used when the view-dependent shape operator is formed.
pub const MIN_NDOTV: f64 = 0.01;

/// Principal curvature data for every vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureField {
    /// Maximum principal curvature (signed); `k1[i] >= k2[i]`.
    pub k1: Vec<f64>,
    pub k2: Vec<f64>,
    pub e1: Vec<Vec3>,
    pub e2: Vec<Vec3>,
    /// Vertex normals the frames were built against.
    pub normals: Vec<Vec3>,
    /// Curvature derivative tensor in the (e1, e2) frame as
    /// `[C111, C112, C122, C222]`; zeros until [`curvature_derivative`] runs.
    pub dcurv: Vec<[f64; 4]>,
    pub has_derivative: bool,
    /// Divisor applied by [`normalize_percentile`]; 1 for raw fields.
    pub percentile_scale: f64,
    /// Set when normalization met an all-zero field and left it unchanged.
    pub zero_field: bool,
    /// Vertices without incident faces; they get zero curvature.
    pub isolated: Vec<usize>,
}

impl CurvatureField {
    pub fn len(&self) -> usize {
        self.k1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k1.is_empty()
    }

    /// Normal curvature in the unit tangent direction `(a, b)` of the
    /// principal frame.
    pub fn normal_curvature(&self, i: usize, a: f64, b: f64) -> f64 {
        self.k1[i] * a * a + self.k2[i] * b * b
    }

    /// Third-order form C(w, w, w) for `w = a e1 + b e2`.
    pub fn dcurv_along(&self, i: usize, a: f64, b: f64) -> f64 {
        let c = &self.dcurv[i];
        a * a * a * c[0] + 3.0 * a * a * b * c[1] + 3.0 * a * b * b * c[2] + b * b * b * c[3]
    }
}

/// Voronoi corner areas per face (obtuse triangles clamped) and their
/// per-vertex sums.
pub fn corner_areas(mesh: &TriangleMesh) -> (Vec<[f64; 3]>, Vec<f64>) {
    let v = mesh.vertices();
    let corners: Vec<[f64; 3]> = mesh
        .faces()
        .par_iter()
        .map(|f| {
            let e = face_edges(v, f);
            let area = 0.5 * e[0].cross(&e[1]).norm();
            let l2 = [e[0].norm_squared(), e[1].norm_squared(), e[2].norm_squared()];
            let ew = [
                l2[0] * (l2[1] + l2[2] - l2[0]),
                l2[1] * (l2[2] + l2[0] - l2[1]),
                l2[2] * (l2[0] + l2[1] - l2[2]),
            ];
            let mut c = [0.0; 3];
            if ew[0] <= 0.0 {
                c[1] = -0.25 * l2[2] * area / e[0].dot(&e[2]);
                c[2] = -0.25 * l2[1] * area / e[0].dot(&e[1]);
                c[0] = area - c[1] - c[2];
            } else if ew[1] <= 0.0 {
                c[2] = -0.25 * l2[0] * area / e[1].dot(&e[0]);
                c[0] = -0.25 * l2[2] * area / e[1].dot(&e[2]);
                c[1] = area - c[2] - c[0];
            } else if ew[2] <= 0.0 {
                c[0] = -0.25 * l2[1] * area / e[2].dot(&e[1]);
                c[1] = -0.25 * l2[0] * area / e[2].dot(&e[0]);
                c[2] = area - c[0] - c[1];
            } else {
                let s = 0.5 * area / (ew[0] + ew[1] + ew[2]);
                for j in 0..3 {
                    c[j] = s * (ew[(j + 1) % 3] + ew[(j + 2) % 3]);
                }
            }
            c
        })
        .collect();
    let mut point = vec![0.0; v.len()];
    for (f, c) in mesh.faces().iter().zip(&corners) {
        for j in 0..3 {
            point[f[j]] += c[j];
        }
    }
    (corners, point)
}

/// Edge `j` is opposite corner `j`, running from corner `j+1` to `j+2`.
fn face_edges(v: &[Vec3], f: &[usize; 3]) -> [Vec3; 3] {
    [v[f[2]] - v[f[1]], v[f[0]] - v[f[2]], v[f[1]] - v[f[0]]]
}

/// Orthonormal tangent frame of a face: first edge direction and its
/// in-plane perpendicular.
fn face_frame(e: &[Vec3; 3]) -> (Vec3, Vec3) {
    let t = e[0].normalize();
    let n = e[0].cross(&e[1]);
    let b = n.cross(&t).normalize();
    (t, b)
}

/// Rotates the frame `(u, v)` about their common perpendicular so its normal
/// becomes `new_norm`.
fn rot_coord_sys(u: &Vec3, v: &Vec3, new_norm: &Vec3) -> (Vec3, Vec3) {
    let old_norm = u.cross(v);
    let ndot = old_norm.dot(new_norm);
    if ndot <= -1.0 {
        return (-u, -v);
    }
    let perp_old = new_norm - old_norm * ndot;
    let dperp = (old_norm + new_norm) / (1.0 + ndot);
    (u - dperp * u.dot(&perp_old), v - dperp * v.dot(&perp_old))
}

/// Re-expresses the second fundamental form `(ku, kuv, kv)` given in frame
/// `(old_u, old_v)` in frame `(new_u, new_v)`.
fn proj_curv(old_u: &Vec3, old_v: &Vec3, ku: f64, kuv: f64, kv: f64, new_u: &Vec3, new_v: &Vec3) -> [f64; 3] {
    let (ru, rv) = rot_coord_sys(new_u, new_v, &old_u.cross(old_v));
    let (u1, v1) = (ru.dot(old_u), ru.dot(old_v));
    let (u2, v2) = (rv.dot(old_u), rv.dot(old_v));
    [
        ku * u1 * u1 + kuv * 2.0 * u1 * v1 + kv * v1 * v1,
        ku * u1 * u2 + kuv * (u1 * v2 + u2 * v1) + kv * v1 * v2,
        ku * u2 * u2 + kuv * 2.0 * u2 * v2 + kv * v2 * v2,
    ]
}

/// Same as [`proj_curv`] for the symmetric third-order tensor.
fn proj_dcurv(old_u: &Vec3, old_v: &Vec3, c: &[f64; 4], new_u: &Vec3, new_v: &Vec3) -> [f64; 4] {
    let (ru, rv) = rot_coord_sys(new_u, new_v, &old_u.cross(old_v));
    let (u1, v1) = (ru.dot(old_u), ru.dot(old_v));
    let (u2, v2) = (rv.dot(old_u), rv.dot(old_v));
    [
        c[0] * u1 * u1 * u1 + c[1] * 3.0 * u1 * u1 * v1 + c[2] * 3.0 * u1 * v1 * v1 + c[3] * v1 * v1 * v1,
        c[0] * u1 * u1 * u2
            + c[1] * (u1 * u1 * v2 + 2.0 * u2 * u1 * v1)
            + c[2] * (u2 * v1 * v1 + 2.0 * u1 * v1 * v2)
            + c[3] * v1 * v1 * v2,
        c[0] * u1 * u2 * u2
            + c[1] * (u2 * u2 * v1 + 2.0 * u1 * u2 * v2)
            + c[2] * (u1 * v2 * v2 + 2.0 * u2 * v2 * v1)
            + c[3] * v1 * v2 * v2,
        c[0] * u2 * u2 * u2 + c[1] * 3.0 * u2 * u2 * v2 + c[2] * 3.0 * u2 * v2 * v2 + c[3] * v2 * v2 * v2,
    ]
}

/// Eigen-decomposition of the 2x2 form in frame `(u, v)` rotated onto
/// `normal`. Returns `(k1, k2, e1, e2)` with `k1 >= k2`.
fn diagonalize(u: &Vec3, v: &Vec3, ku: f64, kuv: f64, kv: f64, normal: &Vec3) -> (f64, f64, Vec3, Vec3) {
    let (ru, rv) = rot_coord_sys(u, v, normal);
    let (mut c, mut s, mut tt) = (1.0, 0.0, 0.0);
    if kuv != 0.0 {
        let h = 0.5 * (kv - ku) / kuv;
        tt = if h < 0.0 {
            1.0 / (h - (1.0 + h * h).sqrt())
        } else {
            1.0 / (h + (1.0 + h * h).sqrt())
        };
        c = 1.0 / (1.0 + tt * tt).sqrt();
        s = tt * c;
    }
    let ka = ku - tt * kuv;
    let kb = kv + tt * kuv;
    let (k1, k2, d1) = if ka >= kb {
        (ka, kb, ru * c - rv * s)
    } else {
        (kb, ka, ru * s + rv * c)
    };
    let d1 = d1.normalize();
    (k1, k2, d1, normal.cross(&d1))
}

fn arbitrary_tangent(n: &Vec3) -> Vec3 {
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    n.cross(&helper).normalize()
}

/// Fits principal curvatures and directions at every vertex.
pub fn principal_curvatures(mesh: &TriangleMesh) -> CurvatureField {
    let v = mesh.vertices();
    let normals = mesh.normals().to_vec();
    let nv = v.len();

    // Initial per-vertex frames from an incident edge.
    let mut pdir1 = vec![Vec3::zeros(); nv];
    for f in mesh.faces() {
        pdir1[f[0]] = v[f[1]] - v[f[0]];
        pdir1[f[1]] = v[f[2]] - v[f[1]];
        pdir1[f[2]] = v[f[0]] - v[f[2]];
    }
    let mut pdir2 = vec![Vec3::zeros(); nv];
    for i in 0..nv {
        let d = pdir1[i].cross(&normals[i]);
        pdir1[i] = if d.norm() > 0.0 { d.normalize() } else { arbitrary_tangent(&normals[i]) };
        pdir2[i] = normals[i].cross(&pdir1[i]);
    }

    let (corners, point_areas) = corner_areas(mesh);
    let per_face: Vec<Option<(Vec3, Vec3, [f64; 3])>> = mesh
        .faces()
        .par_iter()
        .map(|f| {
            let e = face_edges(v, f);
            let (t, b) = face_frame(&e);
            let mut m = Vector3::zeros();
            let mut w = Matrix3::zeros();
            for j in 0..3 {
                let (u, vv) = (e[j].dot(&t), e[j].dot(&b));
                w[(0, 0)] += u * u;
                w[(0, 1)] += u * vv;
                w[(2, 2)] += vv * vv;
                let dn = normals[f[(j + 2) % 3]] - normals[f[(j + 1) % 3]];
                let (dnu, dnv) = (dn.dot(&t), dn.dot(&b));
                m[0] += dnu * u;
                m[1] += dnu * vv + dnv * u;
                m[2] += dnv * vv;
            }
            w[(1, 1)] = w[(0, 0)] + w[(2, 2)];
            w[(1, 2)] = w[(0, 1)];
            w[(1, 0)] = w[(0, 1)];
            w[(2, 1)] = w[(1, 2)];
            let sol = w.cholesky()?.solve(&m);
            Some((t, b, [sol[0], sol[1], sol[2]]))
        })
        .collect();

    let mut acc = vec![[0.0f64; 3]; nv];
    for (fi, f) in mesh.faces().iter().enumerate() {
        let Some((t, b, s)) = &per_face[fi] else { continue };
        for j in 0..3 {
            let vj = f[j];
            let c = proj_curv(t, b, s[0], s[1], s[2], &pdir1[vj], &pdir2[vj]);
            let wt = corners[fi][j] / point_areas[vj];
            for k in 0..3 {
                acc[vj][k] += wt * c[k];
            }
        }
    }

    let mut field = CurvatureField {
        k1: vec![0.0; nv],
        k2: vec![0.0; nv],
        e1: vec![Vec3::zeros(); nv],
        e2: vec![Vec3::zeros(); nv],
        normals,
        dcurv: vec![[0.0; 4]; nv],
        has_derivative: false,
        percentile_scale: 1.0,
        zero_field: false,
        isolated: Vec::new(),
    };
    for i in 0..nv {
        if !(point_areas[i] > 0.0) {
            field.isolated.push(i);
            field.e1[i] = pdir1[i];
            field.e2[i] = pdir2[i];
            continue;
        }
        let (k1, k2, d1, d2) = diagonalize(&pdir1[i], &pdir2[i], acc[i][0], acc[i][1], acc[i][2], &field.normals[i]);
        field.k1[i] = k1;
        field.k2[i] = k2;
        field.e1[i] = d1;
        field.e2[i] = d2;
    }
    if !field.isolated.is_empty() {
        log::warn!("{} isolated vertices get zero curvature", field.isolated.len());
    }
    field
}

/// Fits the derivative-of-curvature tensor at every vertex.
pub fn curvature_derivative(mesh: &TriangleMesh, field: &CurvatureField) -> CurvatureField {
    let v = mesh.vertices();
    let nv = v.len();
    let (corners, point_areas) = corner_areas(mesh);
    let per_face: Vec<Option<(Vec3, Vec3, [f64; 4])>> = mesh
        .faces()
        .par_iter()
        .map(|f| {
            let e = face_edges(v, f);
            let (t, b) = face_frame(&e);
            let fc: [[f64; 3]; 3] =
                [0, 1, 2].map(|j| proj_curv(&field.e1[f[j]], &field.e2[f[j]], field.k1[f[j]], 0.0, field.k2[f[j]], &t, &b));
            let mut m = Vector4::zeros();
            let mut w = Matrix4::zeros();
            for j in 0..3 {
                let prev = fc[(j + 2) % 3];
                let next = fc[(j + 1) % 3];
                let d = [prev[0] - next[0], prev[1] - next[1], prev[2] - next[2]];
                let (u, vv) = (e[j].dot(&t), e[j].dot(&b));
                w[(0, 0)] += u * u;
                w[(0, 1)] += u * vv;
                w[(3, 3)] += vv * vv;
                m[0] += u * d[0];
                m[1] += vv * d[0] + 2.0 * u * d[1];
                m[2] += 2.0 * vv * d[1] + u * d[2];
                m[3] += vv * d[2];
            }
            w[(1, 1)] = 2.0 * w[(0, 0)] + w[(3, 3)];
            w[(1, 2)] = 2.0 * w[(0, 1)];
            w[(2, 2)] = w[(0, 0)] + 2.0 * w[(3, 3)];
            w[(2, 3)] = w[(0, 1)];
            w.fill_lower_triangle_with_upper_triangle();
            let sol = w.cholesky()?.solve(&m);
            Some((t, b, [sol[0], sol[1], sol[2], sol[3]]))
        })
        .collect();

    let mut dcurv = vec![[0.0f64; 4]; nv];
    for (fi, f) in mesh.faces().iter().enumerate() {
        let Some((t, b, c)) = &per_face[fi] else { continue };
        for j in 0..3 {
            let vj = f[j];
            let pc = proj_dcurv(t, b, c, &field.e1[vj], &field.e2[vj]);
            let wt = corners[fi][j] / point_areas[vj];
            for k in 0..4 {
                dcurv[vj][k] += wt * pc[k];
            }
        }
    }
    let mut out = field.clone();
    out.dcurv = dcurv;
    out.has_derivative = true;
    out
}

/// Principal curvatures and their derivative, normalized.
pub fn analyze(mesh: &TriangleMesh) -> CurvatureField {
    let field = principal_curvatures(mesh);
    let field = curvature_derivative(mesh, &field);
    normalize_percentile(&field)
}

/// Nearest-rank percentile (`p` in (0, 100]) of a sample.
pub fn nearest_rank_percentile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Divides curvatures by the 90th percentile `s` of |k1|. The derivative
/// tensor is divided by `s^2`, which is the same as uniformly scaling the
/// mesh by `s`. An all-zero field is returned unchanged and flagged.
pub fn normalize_percentile(field: &CurvatureField) -> CurvatureField {
    let abs: Vec<f64> = field.k1.iter().map(|k| k.abs()).collect();
    let s = nearest_rank_percentile(&abs, 90.0);
    let mut out = field.clone();
    if !(s > 0.0 && s.is_finite()) {
        out.zero_field = true;
        return out;
    }
    out.k1.iter_mut().for_each(|k| *k /= s);
    out.k2.iter_mut().for_each(|k| *k /= s);
    let s2 = s * s;
    out.dcurv.iter_mut().for_each(|c| c.iter_mut().for_each(|x| *x /= s2));
    out.percentile_scale = s;
    out
}

/// Radial curvature and its directional derivative for one view.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialCurvature {
    /// Normal curvature along the tangent projection `w` of the view vector.
    pub kr: Vec<f64>,
    /// Derivative of `kr` along `w`.
    pub dkr: Vec<f64>,
    /// Cosine between normal and the direction toward the camera.
    pub ndotv: Vec<f64>,
    /// `w` in principal-frame coordinates.
    pub w: Vec<[f64; 2]>,
    /// Vertices whose view vector is parallel to the normal; `w = e1` there.
    pub along_normal: Vec<usize>,
}

/// Radial curvature for per-vertex unit view vectors pointing toward the
/// camera.
pub fn radial_curvature(field: &CurvatureField, view_dirs: &[Vec3]) -> RadialCurvature {
    let n = field.len();
    let mut out = RadialCurvature {
        kr: vec![0.0; n],
        dkr: vec![0.0; n],
        ndotv: vec![0.0; n],
        w: vec![[1.0, 0.0]; n],
        along_normal: Vec::new(),
    };
    for i in 0..n {
        let view = &view_dirs[i];
        let ndotv = view.dot(&field.normals[i]);
        let (u, v) = (view.dot(&field.e1[i]), view.dot(&field.e2[i]));
        let sin = (u * u + v * v).sqrt();
        out.ndotv[i] = ndotv;
        if sin < 1e-12 {
            out.along_normal.push(i);
            out.kr[i] = field.k1[i];
            out.dkr[i] = field.dcurv[i][0];
            continue;
        }
        let (a, b) = (u / sin, v / sin);
        out.w[i] = [a, b];
        out.kr[i] = field.normal_curvature(i, a, b);
        let tau = (field.k2[i] - field.k1[i]) * a * b;
        out.dkr[i] = field.dcurv_along(i, a, b) - 2.0 * tau * tau * ndotv / sin;
    }
    out
}

/// View-dependent curvature: the largest singular value of the shape
/// operator composed with the inverse screen projection.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewDependentField {
    /// Non-negative view-dependent curvature.
    pub kt: Vec<f64>,
    /// Maximizing direction in principal-frame coordinates (unit, sign
    /// arbitrary).
    pub t1: Vec<[f64; 2]>,
    /// Derivative of `kt` along `t1` measured in projected distance.
    pub dt1: Vec<f64>,
    pub ndotv: Vec<f64>,
    /// Divisor applied by normalization; 1 when raw.
    pub scale: f64,
    pub zero_field: bool,
}

impl ViewDependentField {
    /// Divides by the 90th percentile of `kt`; all-zero fields are flagged.
    pub fn normalize_percentile(&self) -> Self {
        let s = nearest_rank_percentile(&self.kt, 90.0);
        if !(s > 0.0 && s.is_finite()) {
            let mut out = self.clone();
            out.zero_field = true;
            return out;
        }
        self.normalize_by(s)
    }

    pub fn normalize_by(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.kt.iter_mut().for_each(|k| *k /= s);
        out.dt1.iter_mut().for_each(|k| *k /= s);
        out.scale = self.scale * s;
        out
    }

    pub fn t1_world(&self, field: &CurvatureField, i: usize) -> Vec3 {
        field.e1[i] * self.t1[i][0] + field.e2[i] * self.t1[i][1]
    }
}

/// Largest singular value and right singular vector of the 2x2 matrix
/// `[[q11, q12], [q21, q22]]`.
fn max_singular(q11: f64, q12: f64, q21: f64, q22: f64) -> (f64, [f64; 2]) {
    let a = q11 * q11 + q21 * q21;
    let b = q11 * q12 + q21 * q22;
    let c = q12 * q12 + q22 * q22;
    let mean = 0.5 * (a + c);
    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let lambda = mean + rad;
    let v1 = [b, lambda - a];
    let v2 = [lambda - c, b];
    let n1 = v1[0].hypot(v1[1]);
    let n2 = v2[0].hypot(v2[1]);
    let dir = if n1 >= n2 && n1 > 0.0 {
        [v1[0] / n1, v1[1] / n1]
    } else if n2 > 0.0 {
        [v2[0] / n2, v2[1] / n2]
    } else if a >= c {
        [1.0, 0.0]
    } else {
        [0.0, 1.0]
    };
    (lambda.max(0.0).sqrt(), dir)
}

/// View-dependent curvature for a perspective camera, using the true ray
/// from each vertex to the camera.
pub fn view_dependent_curvature(field: &CurvatureField, mesh: &TriangleMesh, camera: &Camera) -> ViewDependentField {
    view_dependent_from_dirs(field, mesh, &camera.view_directions(mesh.vertices()))
}

pub fn view_dependent_from_dirs(field: &CurvatureField, mesh: &TriangleMesh, view_dirs: &[Vec3]) -> ViewDependentField {
    let n = field.len();
    let mut kt = vec![0.0; n];
    let mut t1 = vec![[1.0, 0.0]; n];
    let mut ndotv = vec![0.0; n];
    for i in 0..n {
        let view = &view_dirs[i];
        let nd = view.dot(&field.normals[i]);
        ndotv[i] = nd;
        let (u, v) = (view.dot(&field.e1[i]), view.dot(&field.e2[i]));
        let s2 = u * u + v * v;
        let (k1, k2) = (field.k1[i], field.k2[i]);
        let (q11, q12, q21, q22) = if s2 < 1e-24 {
            (k1, 0.0, 0.0, k2)
        } else {
            let tt = 1.0 / nd.abs().max(MIN_NDOTV) - 1.0;
            (
                k1 * (1.0 + tt * u * u / s2),
                k1 * tt * u * v / s2,
                k2 * tt * u * v / s2,
                k2 * (1.0 + tt * v * v / s2),
            )
        };
        let (q, dir) = max_singular(q11, q12, q21, q22);
        kt[i] = q;
        t1[i] = dir;
    }

    let topo = Topology::build(mesh);
    let verts = mesh.vertices();
    let faces = mesh.faces();
    let dt1: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let t = field.e1[i] * t1[i][0] + field.e2[i] * t1[i][1];
            let t2 = field.normals[i].cross(&t);
            let v0 = verts[i];
            let v0t2 = v0.dot(&t2);
            let mut sum = 0.0;
            let mut count = 0;
            for &f in topo.vertex_faces(i) {
                let face = faces[f];
                let k = face.iter().position(|&x| x == i).unwrap();
                let (i1, i2) = (face[(k + 1) % 3], face[(k + 2) % 3]);
                let (a, b) = (verts[i1].dot(&t2), verts[i2].dot(&t2));
                let w1 = (b - v0t2) / (b - a);
                if !(0.0..1.0).contains(&w1) {
                    continue;
                }
                let w2 = 1.0 - w1;
                let p = verts[i1] * w1 + verts[i2] * w2;
                let interp = w1 * kt[i1] + w2 * kt[i2];
                let dist = (p - v0).dot(&t) * ndotv[i].abs().max(MIN_NDOTV);
                if dist == 0.0 {
                    continue;
                }
                sum += (interp - kt[i]) / dist;
                count += 1;
                if count == 2 {
                    break;
                }
            }
            if count == 2 {
                sum * 0.5
            } else {
                sum
            }
        })
        .collect();

    ViewDependentField {
        kt,
        t1,
        dt1,
        ndotv,
        scale: 1.0,
        zero_field: false,
    }
}
