use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::path::{Path, PathBuf};

use super::{area_weighted_normals, Topology, TriangleMesh, Vec3};
use crate::error::{Error, Result};

/// Relative welding tolerance, as a fraction of the bounding-box diagonal.
pub const WELD_RELATIVE_TOLERANCE: f64 = 1e-6;

/// Structural report produced while loading a mesh.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeshDiagnostics {
    pub path: PathBuf,
    pub raw_vertices: usize,
    pub welded_vertices: usize,
    pub faces: usize,
    pub degenerate_faces_removed: usize,
    pub boundary_edges: usize,
    pub non_manifold_edges: usize,
    pub components: usize,
    pub faces_flipped: usize,
    pub normals_from_file: bool,
}

impl MeshDiagnostics {
    pub fn is_manifold(&self) -> bool {
        self.non_manifold_edges == 0
    }
}

impl fmt::Display for MeshDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "path={}", self.path.display())?;
        writeln!(f, "raw_vertices={}", self.raw_vertices)?;
        writeln!(f, "welded_vertices={}", self.welded_vertices)?;
        writeln!(f, "faces={}", self.faces)?;
        writeln!(f, "degenerate_faces_removed={}", self.degenerate_faces_removed)?;
        writeln!(f, "boundary_edges={}", self.boundary_edges)?;
        writeln!(f, "non_manifold_edges={}", self.non_manifold_edges)?;
        writeln!(f, "manifold={}", self.is_manifold())?;
        writeln!(f, "components={}", self.components)?;
        writeln!(f, "faces_flipped={}", self.faces_flipped)?;
        write!(f, "normals_from_file={}", self.normals_from_file)
    }
}

/// Writes vertices, vertex normals and faces as Wavefront OBJ. Coordinates
/// are printed in shortest round-trip form.
pub fn save_obj(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for v in mesh.vertices() {
        out.push_str(&format!("v {:?} {:?} {:?}\n", v.x, v.y, v.z));
    }
    for n in mesh.normals() {
        out.push_str(&format!("vn {:?} {:?} {:?}\n", n.x, n.y, n.z));
    }
    for f in mesh.faces() {
        let [a, b, c] = f.map(|i| i + 1);
        out.push_str(&format!("f {a}//{a} {b}//{b} {c}//{c}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Loads a Wavefront OBJ file, welding coincident vertices and orienting
/// faces consistently.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    load_mesh_with_report(path).map(|(m, _)| m)
}

pub fn load_mesh_with_report(path: impl AsRef<Path>) -> Result<(TriangleMesh, MeshDiagnostics)> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::MeshNotFound(path.to_path_buf()));
    }
    let opts = tobj::LoadOptions {
        triangulate: true,
        single_index: false,
        ignore_points: true,
        ignore_lines: true,
        ..Default::default()
    };
    let (models, _) = tobj::load_obj(path, &opts).map_err(|e| Error::MeshParse {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;

    let mut positions: Vec<Vec3> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();
    // Per-corner file normals, parallel to `faces`.
    let mut corner_normals: Vec<[Vec3; 3]> = Vec::new();
    let mut all_have_normals = true;
    for model in &models {
        let m = &model.mesh;
        let base = positions.len();
        positions.extend(m.positions.chunks_exact(3).map(|p| Vec3::new(p[0], p[1], p[2])));
        let has_normals = !m.normals.is_empty() && m.normal_indices.len() == m.indices.len();
        all_have_normals &= has_normals || m.indices.is_empty();
        for (k, tri) in m.indices.chunks_exact(3).enumerate() {
            faces.push([0, 1, 2].map(|j| base + tri[j] as usize));
            if has_normals {
                corner_normals.push([0, 1, 2].map(|j| {
                    let n = m.normal_indices[3 * k + j] as usize * 3;
                    Vec3::new(m.normals[n], m.normals[n + 1], m.normals[n + 2])
                }));
            }
        }
    }
    if faces.is_empty() {
        return Err(Error::NoFaces);
    }
    let raw_vertices = positions.len();

    let tol = WELD_RELATIVE_TOLERANCE * bbox_diagonal(&positions);
    let remap = weld_map(&positions, tol);
    let (vertices, compact) = compact_vertices(&positions, &remap, &faces);
    let faces: Vec<[usize; 3]> = faces.iter().map(|f| f.map(|i| compact[remap[i]])).collect();

    let normals = (all_have_normals && !corner_normals.is_empty()).then(|| {
        let mut acc = vec![Vec3::zeros(); vertices.len()];
        for (f, cn) in faces.iter().zip(&corner_normals) {
            for j in 0..3 {
                acc[f[j]] += cn[j];
            }
        }
        acc
    });

    let probe = TriangleMesh::new(vertices, faces, None)?;
    if probe.is_empty() {
        return Err(Error::NoFaces);
    }
    let degenerate = probe.degenerate_faces_removed();
    let (oriented, flipped) = orient_faces(probe.vertices(), probe.faces());
    let normals = match normals {
        Some(acc) => {
            let computed = area_weighted_normals(probe.vertices(), &oriented);
            acc.iter()
                .zip(&computed)
                .map(|(a, c)| if a.norm() > 1e-12 { a.normalize() } else { *c })
                .collect()
        }
        None => area_weighted_normals(probe.vertices(), &oriented),
    };
    let mesh = TriangleMesh::new(probe.vertices().to_vec(), oriented, Some(normals))?;

    let topo = Topology::build(&mesh);
    let report = MeshDiagnostics {
        path: path.to_path_buf(),
        raw_vertices,
        welded_vertices: mesh.vertex_count(),
        faces: mesh.face_count(),
        degenerate_faces_removed: degenerate,
        boundary_edges: topo.boundary_edge_count(),
        non_manifold_edges: topo.non_manifold_edge_count(),
        components: topo.face_components().1,
        faces_flipped: flipped,
        normals_from_file: all_have_normals && !corner_normals.is_empty(),
    };
    if report.non_manifold_edges > 0 {
        log::warn!("{}: {} non-manifold edges", path.display(), report.non_manifold_edges);
    }
    Ok((mesh, report))
}

/// Merges vertices closer than `tolerance`; the lowest-index vertex of each
/// cluster is kept. Unreferenced vertices are dropped and faces that
/// collapse are removed.
pub fn weld_vertices(mesh: &TriangleMesh, tolerance: f64) -> Result<TriangleMesh> {
    let remap = weld_map(mesh.vertices(), tolerance);
    let (vertices, compact) = compact_vertices(mesh.vertices(), &remap, mesh.faces());
    let faces: Vec<[usize; 3]> = mesh.faces().iter().map(|f| f.map(|i| compact[remap[i]])).collect();
    let mut normals = vec![Vec3::zeros(); vertices.len()];
    for (i, n) in mesh.normals().iter().enumerate() {
        if compact[remap[i]] != usize::MAX {
            normals[compact[remap[i]]] += n;
        }
    }
    let normals = normals
        .into_iter()
        .map(|n| if n.norm() > 1e-12 { n.normalize() } else { Vec3::z() })
        .collect();
    let mut out = TriangleMesh::new(vertices, faces, Some(normals))?;
    if let Some(up) = mesh.ground_up_axis() {
        out = out.with_ground_up_axis(up);
    }
    Ok(out)
}

fn bbox_diagonal(points: &[Vec3]) -> f64 {
    let Some(first) = points.first() else {
        return 0.0;
    };
    let (lo, hi) = points.iter().fold((*first, *first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
    (hi - lo).norm()
}

/// For each vertex, the index of its cluster representative.
fn weld_map(points: &[Vec3], tol: f64) -> Vec<usize> {
    if tol <= 0.0 {
        // Exact positions only.
        let mut seen: HashMap<[u64; 3], usize> = HashMap::new();
        return points
            .iter()
            .enumerate()
            .map(|(i, p)| *seen.entry([p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]).or_insert(i))
            .collect();
    }
    let cell = |p: &Vec3| {
        [
            (p.x / tol).floor() as i64,
            (p.y / tol).floor() as i64,
            (p.z / tol).floor() as i64,
        ]
    };
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    let mut remap = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let c = cell(p);
        let mut found: Option<usize> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(reps) = grid.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        for &r in reps {
                            if (points[r] - p).norm() <= tol && found.map_or(true, |f| r < f) {
                                found = Some(r);
                            }
                        }
                    }
                }
            }
        }
        match found {
            Some(r) => remap.push(r),
            None => {
                grid.entry(c).or_default().push(i);
                remap.push(i);
            }
        }
    }
    remap
}

/// Keeps only representatives referenced by faces. Returns the new vertex
/// list and an old-index to new-index table (`usize::MAX` when dropped).
fn compact_vertices(points: &[Vec3], remap: &[usize], faces: &[[usize; 3]]) -> (Vec<Vec3>, Vec<usize>) {
    let mut used = vec![false; points.len()];
    for f in faces {
        for &i in f {
            used[remap[i]] = true;
        }
    }
    let mut compact = vec![usize::MAX; points.len()];
    let mut out = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if used[i] {
            compact[i] = out.len();
            out.push(*p);
        }
    }
    (out, compact)
}

/// Makes winding consistent across manifold edges, then flips each closed
/// component whose faces mostly point inward according to ray parity.
/// Returns the faces and the number flipped.
fn orient_faces(vertices: &[Vec3], faces: &[[usize; 3]]) -> (Vec<[usize; 3]>, usize) {
    let mut out = faces.to_vec();
    let topo = Topology::from_faces(vertices.len(), faces);
    let nf = faces.len();
    let mut visited = vec![false; nf];
    let mut flipped = vec![false; nf];
    let mut components: Vec<Vec<usize>> = Vec::new();
    for seed in 0..nf {
        if visited[seed] {
            continue;
        }
        visited[seed] = true;
        let mut comp = vec![seed];
        let mut queue = VecDeque::from([seed]);
        while let Some(f) = queue.pop_front() {
            for e in topo.face_edges(f) {
                let edge = &topo.edges()[e];
                if !edge.is_manifold() {
                    continue;
                }
                let (g, gj) = if edge.faces[0].0 == f { edge.faces[1] } else { edge.faces[0] };
                if visited[g] {
                    continue;
                }
                let fj = edge.faces.iter().find(|x| x.0 == f).unwrap().1;
                let fdir = directed(&out[f], fj);
                let gdir = directed(&faces[g], gj);
                // Consistent neighbours traverse the shared edge in opposite directions.
                if fdir == gdir {
                    out[g].swap(1, 2);
                    flipped[g] = true;
                }
                visited[g] = true;
                comp.push(g);
                queue.push_back(g);
            }
        }
        components.push(comp);
    }

    for comp in &components {
        let closed = comp.iter().all(|&f| {
            topo.face_edges(f)
                .iter()
                .all(|&e| !topo.edges()[e].is_boundary())
        });
        if !closed {
            continue;
        }
        let step = (comp.len() / 101).max(1);
        let (mut outward, mut inward) = (0usize, 0usize);
        for &f in comp.iter().step_by(step) {
            let [a, b, c] = out[f];
            let n = (vertices[b] - vertices[a]).cross(&(vertices[c] - vertices[a]));
            let len = n.norm();
            if len == 0.0 {
                continue;
            }
            let origin = (vertices[a] + vertices[b] + vertices[c]) / 3.0;
            let dir = n / len;
            let hits = comp
                .iter()
                .filter(|&&g| g != f && ray_hits(&origin, &dir, &out[g], vertices))
                .count();
            if hits % 2 == 0 {
                outward += 1;
            } else {
                inward += 1;
            }
        }
        if inward > outward {
            for &f in comp {
                out[f].swap(1, 2);
                flipped[f] = !flipped[f];
            }
        }
    }
    let count = flipped.iter().filter(|&&b| b).count();
    (out, count)
}

fn directed(f: &[usize; 3], j: usize) -> (usize, usize) {
    (f[j], f[(j + 1) % 3])
}

/// Möller–Trumbore test for a hit strictly in front of the origin.
fn ray_hits(origin: &Vec3, dir: &Vec3, f: &[usize; 3], v: &[Vec3]) -> bool {
    let (p0, p1, p2) = (v[f[0]], v[f[1]], v[f[2]]);
    let e1 = p1 - p0;
    let e2 = p2 - p0;
    let h = dir.cross(&e2);
    let det = e1.dot(&h);
    if det.abs() < 1e-14 {
        return false;
    }
    let inv = 1.0 / det;
    let s = origin - p0;
    let u = s.dot(&h) * inv;
    if !(0.0..=1.0).contains(&u) {
        return false;
    }
    let q = s.cross(&e1);
    let w = dir.dot(&q) * inv;
    if w < 0.0 || u + w > 1.0 {
        return false;
    }
    e2.dot(&q) * inv > 1e-9
}
