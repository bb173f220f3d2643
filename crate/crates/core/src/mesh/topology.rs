use std::collections::HashMap;

use super::TriangleMesh;

/// An undirected mesh edge and the faces that use it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    /// Vertex indices with `v[0] < v[1]`.
    pub v: [usize; 2],
    /// (face index, local edge index) pairs, sorted by face. Local edge `j`
    /// runs from corner `j` to corner `(j + 1) % 3`.
    pub faces: Vec<(usize, usize)>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.faces.len() == 1
    }

    pub fn is_manifold(&self) -> bool {
        self.faces.len() == 2
    }
}

/// Adjacency tables derived from a mesh's face list.
#[derive(Debug, Clone)]
pub struct Topology {
    edges: Vec<Edge>,
    /// `face_edges[f][j]` indexes into `edges` for local edge `j` of face `f`.
    face_edges: Vec<[usize; 3]>,
    neighbors: Vec<Vec<usize>>,
    vertex_faces: Vec<Vec<usize>>,
}

impl Topology {
    pub fn build(mesh: &TriangleMesh) -> Self {
        Self::from_faces(mesh.vertex_count(), mesh.faces())
    }

    pub fn from_faces(vertex_count: usize, faces: &[[usize; 3]]) -> Self {
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(faces.len() * 2);
        let mut edges: Vec<Edge> = Vec::with_capacity(faces.len() * 3 / 2 + 1);
        let mut face_edges = Vec::with_capacity(faces.len());
        let mut vertex_faces = vec![Vec::new(); vertex_count];
        for (fi, f) in faces.iter().enumerate() {
            let mut fe = [0usize; 3];
            for j in 0..3 {
                let (a, b) = (f[j], f[(j + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let id = *lookup.entry(key).or_insert_with(|| {
                    edges.push(Edge {
                        v: [key.0, key.1],
                        faces: Vec::new(),
                    });
                    edges.len() - 1
                });
                edges[id].faces.push((fi, j));
                fe[j] = id;
                vertex_faces[f[j]].push(fi);
            }
            face_edges.push(fe);
        }
        let mut neighbors = vec![Vec::new(); vertex_count];
        for e in &edges {
            neighbors[e.v[0]].push(e.v[1]);
            neighbors[e.v[1]].push(e.v[0]);
        }
        for n in &mut neighbors {
            n.sort_unstable();
            n.dedup();
        }
        Self {
            edges,
            face_edges,
            neighbors,
            vertex_faces,
        }
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn face_edges(&self, f: usize) -> [usize; 3] {
        self.face_edges[f]
    }

    pub fn vertex_neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn vertex_faces(&self, v: usize) -> &[usize] {
        &self.vertex_faces[v]
    }

    pub fn boundary_edge_count(&self) -> usize {
        self.edges.iter().filter(|e| e.is_boundary()).count()
    }

    pub fn non_manifold_edge_count(&self) -> usize {
        self.edges.iter().filter(|e| e.faces.len() > 2).count()
    }

    /// Connected components over faces sharing an edge. Returns a component
    /// id per face; ids are assigned in order of the lowest face index.
    pub fn face_components(&self) -> (Vec<usize>, usize) {
        let nf = self.face_edges.len();
        let mut comp = vec![usize::MAX; nf];
        let mut count = 0;
        let mut stack = Vec::new();
        for seed in 0..nf {
            if comp[seed] != usize::MAX {
                continue;
            }
            comp[seed] = count;
            stack.push(seed);
            while let Some(f) = stack.pop() {
                for &e in &self.face_edges[f] {
                    for &(g, _) in &self.edges[e].faces {
                        if comp[g] == usize::MAX {
                            comp[g] = count;
                            stack.push(g);
                        }
                    }
                }
            }
            count += 1;
        }
        (comp, count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;

    #[test]
    fn closed_cube_has_no_boundary() {
        let t = Topology::build(&primitives::cube(1.0));
        assert_eq!(t.edges().len(), 18);
        assert_eq!(t.boundary_edge_count(), 0);
        assert_eq!(t.non_manifold_edge_count(), 0);
        assert_eq!(t.face_components().1, 1);
    }

    #[test]
    fn icosphere_is_two_manifold() {
        let m = primitives::icosphere(2, 1.0);
        let t = Topology::build(&m);
        assert!(t.edges().iter().all(Edge::is_manifold));
        // Euler characteristic of a sphere.
        let chi = m.vertex_count() as i64 - t.edges().len() as i64 + m.face_count() as i64;
        assert_eq!(chi, 2);
    }
}
