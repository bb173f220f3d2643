//! Procedural test surfaces with known geometry.
//!
//! Smooth primitives carry analytic vertex normals; faceted ones get
//! area-weighted normals.

use std::collections::HashMap;
use std::f64::consts::TAU;

use super::{TriangleMesh, Vec3};

fn build(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>, normals: Option<Vec<Vec3>>) -> TriangleMesh {
    TriangleMesh::new(vertices, faces, normals).expect("primitive indices are valid")
}

/// Axis-aligned cube centered at the origin, 8 vertices and 12 triangles.
pub fn cube(side: f64) -> TriangleMesh {
    let h = side / 2.0;
    let vertices = (0..8)
        .map(|i| {
            Vec3::new(
                if i & 1 == 0 { -h } else { h },
                if i & 2 == 0 { -h } else { h },
                if i & 4 == 0 { -h } else { h },
            )
        })
        .collect();
    let faces = vec![
        [0, 2, 3], [0, 3, 1], // -z
        [4, 5, 7], [4, 7, 6], // +z
        [0, 1, 5], [0, 5, 4], // -y
        [2, 6, 7], [2, 7, 3], // +y
        [0, 4, 6], [0, 6, 2], // -x
        [1, 3, 7], [1, 7, 5], // +x
    ];
    build(vertices, faces, None)
}

/// Subdivided icosahedron projected onto a sphere of `radius`.
pub fn icosphere(subdivisions: usize, radius: f64) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, t, 0.0), (1.0, t, 0.0), (-1.0, -t, 0.0), (1.0, -t, 0.0),
        (0.0, -1.0, t), (0.0, 1.0, t), (0.0, -1.0, -t), (0.0, 1.0, -t),
        (t, 0.0, -1.0), (t, 0.0, 1.0), (-t, 0.0, -1.0), (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| {
            *cache.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) / 2.0).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let normals = verts.clone();
    let vertices = verts.iter().map(|v| v * radius).collect();
    build(vertices, faces, Some(normals))
}

/// Square grid in the z = 0 plane, `cells` quads per side, centered at the
/// origin, normals +Z. Even `cells` puts a vertex at the origin.
pub fn grid_plane(cells: usize, size: f64) -> TriangleMesh {
    grid_heightfield(cells, size, |_, _| 0.0, Some(|_: f64, _: f64| Vec3::z()))
}

/// Plate with a smooth Gaussian groove of `depth` and width `width` running
/// along the y axis at x = 0.
pub fn v_groove_plate(cells: usize, size: f64, depth: f64, width: f64) -> TriangleMesh {
    let h = move |x: f64, _y: f64| -depth * (-x * x / (2.0 * width * width)).exp();
    let n = move |x: f64, _y: f64| {
        let dhdx = depth * x / (width * width) * (-x * x / (2.0 * width * width)).exp();
        Vec3::new(-dhdx, 0.0, 1.0).normalize()
    };
    grid_heightfield(cells, size, h, Some(n))
}

fn grid_heightfield(
    cells: usize,
    size: f64,
    height: impl Fn(f64, f64) -> f64,
    normal: Option<impl Fn(f64, f64) -> Vec3>,
) -> TriangleMesh {
    let n = cells.max(1);
    let step = size / n as f64;
    let coord = |i: usize| -size / 2.0 + i as f64 * step;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    let mut normals = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let (x, y) = (coord(i), coord(j));
            vertices.push(Vec3::new(x, y, height(x, y)));
            if let Some(f) = &normal {
                normals.push(f(x, y));
            }
        }
    }
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut faces = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            faces.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            faces.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    build(vertices, faces, normal.is_some().then_some(normals))
}

/// Torus around the Z axis with major radius `big_r` and tube radius `r`.
pub fn torus(big_r: f64, r: f64, nu: usize, nv: usize) -> TriangleMesh {
    lobed_torus(big_r, r, 0, 0.0, nu, nv)
}

/// Torus whose tube cross-section radius varies as `r (1 + amp cos(lobes v))`.
/// The lobes produce ridge and valley lines running around the torus.
pub fn lobed_torus(big_r: f64, r: f64, lobes: u32, amp: f64, nu: usize, nv: usize) -> TriangleMesh {
    sweep_tube(big_r, r, lobes, amp, nu, nv, None)
}

/// Section of a torus swept through `sweep` radians; open at both ends.
pub fn open_torus(big_r: f64, r: f64, sweep: f64, nu: usize, nv: usize) -> TriangleMesh {
    sweep_tube(big_r, r, 0, 0.0, nu, nv, Some(sweep))
}

fn sweep_tube(
    big_r: f64,
    r: f64,
    lobes: u32,
    amp: f64,
    nu: usize,
    nv: usize,
    sweep: Option<f64>,
) -> TriangleMesh {
    let k = lobes as f64;
    let (cols, span) = match sweep {
        Some(s) => (nu + 1, s),
        None => (nu, TAU),
    };
    let mut vertices = Vec::with_capacity(cols * nv);
    let mut normals = Vec::with_capacity(cols * nv);
    for i in 0..cols {
        let u = span * i as f64 / nu as f64;
        let (su, cu) = u.sin_cos();
        for j in 0..nv {
            let v = TAU * j as f64 / nv as f64;
            let (sv, cv) = v.sin_cos();
            let rho = r * (1.0 + amp * (k * v).cos());
            let drho = -r * amp * k * (k * v).sin();
            let (tx, tz) = (drho * cv - rho * sv, drho * sv + rho * cv);
            let len = tx.hypot(tz);
            let (nr, nz) = (tz / len, -tx / len);
            let rad = big_r + rho * cv;
            vertices.push(Vec3::new(rad * cu, rad * su, rho * sv));
            normals.push(Vec3::new(nr * cu, nr * su, nz));
        }
    }
    let idx = |i: usize, j: usize| (i % cols) * nv + j % nv;
    let mut faces = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            faces.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            faces.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    build(vertices, faces, Some(normals))
}

/// Open tube of radius `r` around the Z axis spanning z in [0, height].
pub fn open_cylinder(r: f64, height: f64, nu: usize, nz: usize) -> TriangleMesh {
    let mut vertices = Vec::with_capacity(nu * (nz + 1));
    let mut normals = Vec::with_capacity(nu * (nz + 1));
    for i in 0..nu {
        let (s, c) = (TAU * i as f64 / nu as f64).sin_cos();
        for j in 0..=nz {
            vertices.push(Vec3::new(r * c, r * s, height * j as f64 / nz as f64));
            normals.push(Vec3::new(c, s, 0.0));
        }
    }
    let idx = |i: usize, j: usize| (i % nu) * (nz + 1) + j;
    let mut faces = Vec::with_capacity(2 * nu * nz);
    for i in 0..nu {
        for j in 0..nz {
            faces.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            faces.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    build(vertices, faces, Some(normals))
}

/// Superquadric `|x|^p + |y|^p + |z|^p = h^p`: a cube with rounded edges
/// whose sharpness grows with `exponent`. Sampled on a subdivided cube.
pub fn rounded_cube(half: f64, exponent: f64, cells: usize) -> TriangleMesh {
    let n = cells.max(1) as i64;
    let mut index: HashMap<(i64, i64, i64), usize> = HashMap::new();
    let mut dirs: Vec<Vec3> = Vec::new();
    let mut faces = Vec::new();
    let mut vid = |p: (i64, i64, i64), dirs: &mut Vec<Vec3>| {
        *index.entry(p).or_insert_with(|| {
            dirs.push(Vec3::new(p.0 as f64, p.1 as f64, p.2 as f64) * (2.0 / n as f64) - Vec3::repeat(1.0));
            dirs.len() - 1
        })
    };
    // Each cube face as (fixed axis, fixed value, axis a, axis b) with a × b
    // pointing outward.
    let sides: [(usize, i64, usize, usize); 6] = [
        (0, n, 1, 2),
        (0, 0, 2, 1),
        (1, n, 2, 0),
        (1, 0, 0, 2),
        (2, n, 0, 1),
        (2, 0, 1, 0),
    ];
    for &(axis, val, a, b) in &sides {
        let pt = |i: i64, j: i64| {
            let mut c = [0i64; 3];
            c[axis] = val;
            c[a] = i;
            c[b] = j;
            (c[0], c[1], c[2])
        };
        for i in 0..n {
            for j in 0..n {
                let q = [pt(i, j), pt(i + 1, j), pt(i + 1, j + 1), pt(i, j + 1)].map(|p| vid(p, &mut dirs));
                faces.push([q[0], q[1], q[2]]);
                faces.push([q[0], q[2], q[3]]);
            }
        }
    }
    let p = exponent;
    let mut vertices = Vec::with_capacity(dirs.len());
    let mut normals = Vec::with_capacity(dirs.len());
    for d in &dirs {
        let norm = (d.x.abs().powf(p) + d.y.abs().powf(p) + d.z.abs().powf(p)).powf(1.0 / p);
        let s = d / norm;
        vertices.push(s * half);
        normals.push(s.map(|c| c.signum() * c.abs().powf(p - 1.0)).normalize());
    }
    build(vertices, faces, Some(normals))
}

/// Icosphere with a smooth radial bump pattern; watertight with both convex
/// and saddle regions.
pub fn blobby_sphere(subdivisions: usize, amp: f64) -> TriangleMesh {
    let base = icosphere(subdivisions, 1.0);
    let vertices = base
        .vertices()
        .iter()
        .map(|d| d * (1.0 + amp * ((3.0 * d.x).sin() * (3.0 * d.y).sin() + (4.0 * d.z).cos()) / 2.0))
        .collect();
    build(vertices, base.faces().to_vec(), None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Topology;

    fn outward_fraction(m: &TriangleMesh) -> f64 {
        let c = m.centroid();
        let good = (0..m.face_count())
            .filter(|&f| {
                let [a, ..] = m.faces()[f];
                m.face_cross(f).dot(&(m.vertices()[a] - c)) > 0.0
            })
            .count();
        good as f64 / m.face_count() as f64
    }

    #[test]
    fn closed_primitives_are_watertight_and_outward() {
        for m in [
            cube(1.0),
            icosphere(2, 1.0),
            torus(1.0, 0.3, 32, 16),
            lobed_torus(1.0, 0.3, 4, 0.15, 48, 32),
            rounded_cube(0.5, 6.0, 8),
            blobby_sphere(3, 0.15),
        ] {
            let t = Topology::build(&m);
            assert_eq!(t.boundary_edge_count(), 0);
            assert_eq!(t.non_manifold_edge_count(), 0);
            assert_eq!(m.degenerate_faces_removed(), 0);
            // Torus faces near the hole point toward the centroid, so only
            // check the face normals agree with the vertex normals.
            for f in 0..m.face_count() {
                let [a, b, c] = m.faces()[f];
                let n = m.normals()[a] + m.normals()[b] + m.normals()[c];
                assert!(m.face_cross(f).dot(&n) > 0.0);
            }
        }
        assert_eq!(outward_fraction(&icosphere(2, 1.0)), 1.0);
    }

    #[test]
    fn open_primitives_have_boundaries() {
        let c = Topology::build(&open_cylinder(0.5, 1.0, 24, 6));
        assert_eq!(c.boundary_edge_count(), 48);
        let t = Topology::build(&open_torus(1.0, 0.3, 3.0, 24, 12));
        assert_eq!(t.boundary_edge_count(), 24);
        let g = Topology::build(&grid_plane(4, 1.0));
        assert_eq!(g.boundary_edge_count(), 16);
    }

    #[test]
    fn grid_plane_has_origin_vertex() {
        let g = grid_plane(6, 2.0);
        assert!(g.vertices().iter().any(|v| v.norm() < 1e-15));
    }

    #[test]
    fn rounded_cube_stays_inside_bounds() {
        let m = rounded_cube(0.5, 8.0, 6);
        for v in m.vertices() {
            assert!(v.amax() <= 0.5 + 1e-12);
        }
    }
}
