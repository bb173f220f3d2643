//! Triangle meshes: construction, size normalization, normal fields and
//! basic topology queries.

mod obj;
pub mod primitives;
mod topology;

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub use obj::{load_mesh, load_mesh_with_report, save_obj, weld_vertices, MeshDiagnostics};
pub use topology::{Edge, Topology};

pub type Vec3 = Vector3<f64>;

/// Indexed triangle surface with unit per-vertex normals.
///
/// Faces are counter-clockwise when seen from the side their normal points
/// to. Instances are immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    normals: Vec<Vec3>,
    ground_up_axis: Option<Vec3>,
    degenerate_removed: usize,
}

impl TriangleMesh {
    /// Builds a mesh, dropping degenerate faces (repeated indices or zero
    /// area). Normals are computed as area-weighted face normal averages when
    /// `normals` is `None`, and renormalized otherwise.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>, normals: Option<Vec<Vec3>>) -> Result<Self> {
        let nv = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if f.iter().any(|&i| i >= nv) {
                return Err(Error::InvalidArgument(format!(
                    "face {fi} references vertex beyond {nv}"
                )));
            }
        }
        let before = faces.len();
        let faces: Vec<[usize; 3]> = faces
            .into_iter()
            .filter(|f| {
                f[0] != f[1]
                    && f[1] != f[2]
                    && f[0] != f[2]
                    && face_cross(&vertices, f).norm_squared() > 0.0
            })
            .collect();
        let degenerate_removed = before - faces.len();

        let normals = match normals {
            Some(n) => {
                if n.len() != nv {
                    return Err(Error::InvalidArgument(format!(
                        "{} normals for {nv} vertices",
                        n.len()
                    )));
                }
                n.into_iter()
                    .map(|v| {
                        let len = v.norm();
                        if len > 0.0 && len.is_finite() {
                            v / len
                        } else {
                            Vec3::z()
                        }
                    })
                    .collect()
            }
            None => area_weighted_normals(&vertices, &faces),
        };

        Ok(Self {
            vertices,
            faces,
            normals,
            ground_up_axis: None,
            degenerate_removed,
        })
    }

    pub fn with_ground_up_axis(mut self, up: Vec3) -> Self {
        let n = up.norm();
        self.ground_up_axis = (n > 0.0).then(|| up / n);
        self
    }

    #[inline]
    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    #[inline]
    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    #[inline]
    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    #[inline]
    pub fn ground_up_axis(&self) -> Option<Vec3> {
        self.ground_up_axis
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn degenerate_faces_removed(&self) -> usize {
        self.degenerate_removed
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    /// Unnormalized face normal (twice the area).
    pub fn face_cross(&self, f: usize) -> Vec3 {
        face_cross(&self.vertices, &self.faces[f])
    }

    pub fn face_normal(&self, f: usize) -> Vec3 {
        self.face_cross(f).normalize()
    }

    pub fn face_area(&self, f: usize) -> f64 {
        0.5 * self.face_cross(f).norm()
    }

    /// Axis-aligned bounds as (min, max). Zero vectors for an empty mesh.
    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        if self.vertices.is_empty() {
            return (Vec3::zeros(), Vec3::zeros());
        }
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    /// Center and radius of the sphere circumscribing the bounding box.
    pub fn bounding_sphere(&self) -> (Vec3, f64) {
        let (lo, hi) = self.bounding_box();
        ((lo + hi) * 0.5, 0.5 * (hi - lo).norm())
    }

    /// Mean of the vertex positions.
    pub fn centroid(&self) -> Vec3 {
        if self.vertices.is_empty() {
            return Vec3::zeros();
        }
        self.vertices.iter().sum::<Vec3>() / self.vertices.len() as f64
    }

    pub fn mean_edge_length(&self) -> f64 {
        let mut total = 0.0;
        let mut n = 0usize;
        for f in &self.faces {
            for j in 0..3 {
                total += (self.vertices[f[(j + 1) % 3]] - self.vertices[f[j]]).norm();
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            total / n as f64
        }
    }

    /// Returns a copy with every vertex and normal transformed by the rigid
    /// motion `x -> rotation * x + translation`.
    pub fn transformed(&self, rotation: &nalgebra::Rotation3<f64>, translation: Vec3) -> Self {
        Self {
            vertices: self.vertices.iter().map(|v| rotation * v + translation).collect(),
            faces: self.faces.clone(),
            normals: self.normals.iter().map(|n| rotation * n).collect(),
            ground_up_axis: self.ground_up_axis.map(|u| rotation * u),
            degenerate_removed: self.degenerate_removed,
        }
    }

    /// Returns a copy uniformly scaled about the origin.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            vertices: self.vertices.iter().map(|v| v * s).collect(),
            ..self.clone()
        }
    }

    pub fn with_normals(&self, normals: Vec<Vec3>) -> Result<Self> {
        let mut m = Self::new(self.vertices.clone(), self.faces.clone(), Some(normals))?;
        m.ground_up_axis = self.ground_up_axis;
        Ok(m)
    }

    #[cfg(test)]
    pub(crate) fn from_parts_unchecked(
        vertices: Vec<Vec3>,
        faces: Vec<[usize; 3]>,
        normals: Vec<Vec3>,
    ) -> Self {
        Self {
            vertices,
            faces,
            normals,
            ground_up_axis: None,
            degenerate_removed: 0,
        }
    }
}

fn face_cross(vertices: &[Vec3], f: &[usize; 3]) -> Vec3 {
    (vertices[f[1]] - vertices[f[0]]).cross(&(vertices[f[2]] - vertices[f[0]]))
}

/// Area-weighted average of incident face normals; isolated vertices get +Z.
pub fn area_weighted_normals(vertices: &[Vec3], faces: &[[usize; 3]]) -> Vec<Vec3> {
    let mut acc = vec![Vec3::zeros(); vertices.len()];
    for f in faces {
        // |cross| is twice the area, so the raw cross product is the weight.
        let c = face_cross(vertices, f);
        for &i in f {
            acc[i] += c;
        }
    }
    acc.into_iter()
        .map(|n| {
            let len = n.norm();
            if len > 0.0 {
                n / len
            } else {
                Vec3::z()
            }
        })
        .collect()
}

/// Uniformly scales and recenters so the bounding-box center sits at the
/// origin and the longest axis-aligned extent is 1.
pub fn normalize_size(mesh: &TriangleMesh) -> Result<TriangleMesh> {
    if mesh.vertices.is_empty() {
        return Err(Error::NoFaces);
    }
    let (lo, hi) = mesh.bounding_box();
    let extent = (hi - lo).max();
    if !(extent > 0.0) {
        return Err(Error::ZeroExtent);
    }
    let center = (lo + hi) * 0.5;
    let s = 1.0 / extent;
    let mut out = mesh.clone();
    for v in &mut out.vertices {
        *v = (*v - center) * s;
    }
    Ok(out)
}

/// Per-vertex unit normals after Gaussian one-ring smoothing.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalField {
    pub normals: Vec<Vec3>,
    pub sigma: f64,
}

/// Smooths vertex normals by a Gaussian-weighted one-ring average.
///
/// Each normal becomes the renormalized sum of its own normal (weight 1) and
/// its one-ring neighbours' normals weighted by `exp(-d^2 / (2 s^2))`, where
/// `d` is the vertex distance and `s = sigma * mean_edge_length`.
/// `sigma == 0` returns the mesh normals unchanged.
pub fn smooth_normals(mesh: &TriangleMesh, sigma: f64) -> NormalField {
    if sigma <= 0.0 {
        return NormalField {
            normals: mesh.normals.clone(),
            sigma: 0.0,
        };
    }
    let topo = Topology::build(mesh);
    let scale = sigma * mesh.mean_edge_length();
    let inv = if scale > 0.0 { 1.0 / (2.0 * scale * scale) } else { 0.0 };
    let normals = (0..mesh.vertex_count())
        .map(|i| {
            let p = mesh.vertices[i];
            let mut acc = mesh.normals[i];
            for &j in topo.vertex_neighbors(i) {
                let d2 = (mesh.vertices[j] - p).norm_squared();
                acc += mesh.normals[j] * (-d2 * inv).exp();
            }
            let len = acc.norm();
            if len > 1e-12 {
                acc / len
            } else {
                mesh.normals[i]
            }
        })
        .collect();
    NormalField { normals, sigma }
}
