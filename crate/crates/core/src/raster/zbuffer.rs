use rayon::prelude::*;

use crate::camera::Camera;
use crate::mesh::{TriangleMesh, Vec3};

/// Rows per parallel band.
const BAND: usize = 16;
/// Faces with a vertex closer than this to the eye plane are skipped.
const NEAR_EPS: f64 = 1e-9;

pub const NO_FACE: u32 = u32::MAX;

/// Per-pixel nearest surface sample: view depth, face id and
/// perspective-correct barycentrics (in the face's corner order).
#[derive(Debug, Clone, PartialEq)]
pub struct DepthBuffer {
    pub width: usize,
    pub height: usize,
    /// View-space depth; `f64::INFINITY` where no surface is hit.
    pub depth: Vec<f64>,
    pub face: Vec<u32>,
    pub bary: Vec<[f64; 3]>,
}

impl DepthBuffer {
    pub fn is_covered(&self, i: usize) -> bool {
        self.face[i] != NO_FACE
    }

    /// Largest depth in the 3x3 neighbourhood of `(x, y)`; infinite when
    /// any neighbour is background.
    pub fn neighborhood_max(&self, x: usize, y: usize) -> f64 {
        let mut m = f64::NEG_INFINITY;
        for yy in y.saturating_sub(1)..=(y + 1).min(self.height - 1) {
            for xx in x.saturating_sub(1)..=(x + 1).min(self.width - 1) {
                m = m.max(self.depth[yy * self.width + xx]);
            }
        }
        m
    }
}

struct ScreenTri {
    face: u32,
    /// Screen corners, reordered to positive orientation.
    p: [[f64; 2]; 3],
    inv_z: [f64; 3],
    /// Original corner index of each entry of `p`.
    corner: [usize; 3],
    bbox: [f64; 4],
}

fn edge(a: &[f64; 2], b: &[f64; 2], p: &[f64; 2]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

/// Ownership of pixel centers lying exactly on an edge. Positively oriented
/// neighbours traverse a shared edge in opposite directions, so exactly one
/// of them owns it.
fn owns_edge(a: &[f64; 2], b: &[f64; 2]) -> bool {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    dy < 0.0 || (dy == 0.0 && dx > 0.0)
}

fn setup(mesh: &TriangleMesh, camera: &Camera) -> Vec<ScreenTri> {
    let view: Vec<Vec3> = mesh.vertices().iter().map(|v| camera.to_view(v)).collect();
    mesh.faces()
        .iter()
        .enumerate()
        .filter_map(|(fi, f)| {
            if f.iter().any(|&i| view[i].z <= NEAR_EPS) {
                return None;
            }
            let proj = |i: usize| {
                let q = camera.project_view(&view[i]);
                [q.x, q.y]
            };
            let area = edge(&proj(f[0]), &proj(f[1]), &proj(f[2]));
            if area == 0.0 || !area.is_finite() {
                return None;
            }
            let corner = if area > 0.0 { [0, 1, 2] } else { [0, 2, 1] };
            let p = corner.map(|k| proj(f[k]));
            let inv_z = corner.map(|k| 1.0 / view[f[k]].z);
            let bbox = [
                p[0][0].min(p[1][0]).min(p[2][0]),
                p[0][1].min(p[1][1]).min(p[2][1]),
                p[0][0].max(p[1][0]).max(p[2][0]),
                p[0][1].max(p[1][1]).max(p[2][1]),
            ];
            Some(ScreenTri {
                face: fi as u32,
                p,
                inv_z,
                corner,
                bbox,
            })
        })
        .collect()
}

/// Z-buffers all faces regardless of winding. Equal depths resolve to the
/// lower face id, so the result does not depend on traversal order.
pub fn rasterize_depth(mesh: &TriangleMesh, camera: &Camera) -> DepthBuffer {
    let (w, h) = (camera.width, camera.height);
    let tris = setup(mesh, camera);
    let mut depth = vec![f64::INFINITY; w * h];
    let mut face = vec![NO_FACE; w * h];
    let mut bary = vec![[0.0; 3]; w * h];

    depth
        .par_chunks_mut(BAND * w)
        .zip(face.par_chunks_mut(BAND * w))
        .zip(bary.par_chunks_mut(BAND * w))
        .enumerate()
        .for_each(|(band, ((dz, fc), bc))| {
            let y0 = band * BAND;
            let rows = dz.len() / w;
            for t in &tris {
                let ys = (t.bbox[1] - 0.5).ceil().max(y0 as f64);
                let ye = (t.bbox[3] - 0.5).floor().min((y0 + rows) as f64 - 1.0);
                let xs = (t.bbox[0] - 0.5).ceil().max(0.0);
                let xe = (t.bbox[2] - 0.5).floor().min(w as f64 - 1.0);
                if ye < ys || xe < xs {
                    continue;
                }
                let area = edge(&t.p[0], &t.p[1], &t.p[2]);
                let own = [
                    owns_edge(&t.p[1], &t.p[2]),
                    owns_edge(&t.p[2], &t.p[0]),
                    owns_edge(&t.p[0], &t.p[1]),
                ];
                for y in ys as usize..=ye as usize {
                    for x in xs as usize..=xe as usize {
                        let pc = [x as f64 + 0.5, y as f64 + 0.5];
                        let l = [
                            edge(&t.p[1], &t.p[2], &pc),
                            edge(&t.p[2], &t.p[0], &pc),
                            edge(&t.p[0], &t.p[1], &pc),
                        ];
                        if (0..3).any(|k| l[k] < 0.0 || (l[k] == 0.0 && !own[k])) {
                            continue;
                        }
                        let l = l.map(|v| v / area);
                        let z = 1.0 / (l[0] * t.inv_z[0] + l[1] * t.inv_z[1] + l[2] * t.inv_z[2]);
                        let k = (y - y0) * w + x;
                        if z < dz[k] || (z == dz[k] && t.face < fc[k]) {
                            dz[k] = z;
                            fc[k] = t.face;
                            let mut b = [0.0; 3];
                            for j in 0..3 {
                                b[t.corner[j]] = l[j] * t.inv_z[j] * z;
                            }
                            bc[k] = b;
                        }
                    }
                }
            }
        });

    DepthBuffer {
        width: w,
        height: h,
        depth,
        face,
        bary,
    }
}
