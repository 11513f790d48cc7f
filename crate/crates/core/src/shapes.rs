//! Analytic test shapes, wound counter-clockwise when seen from outside.

use rustc_hash::FxHashMap;

use crate::geom::Vec3;
use crate::mesh::TriangleMesh;

/// Closed axis-aligned box, two triangles per face.
pub fn cuboid(min: Vec3, max: Vec3) -> TriangleMesh {
    let v = |i: usize| {
        Vec3::new(
            if i & 1 == 0 { min.x } else { max.x },
            if i & 2 == 0 { min.y } else { max.y },
            if i & 4 == 0 { min.z } else { max.z },
        )
    };
    let vertices = (0..8).map(v).collect();
    // Faces as quads (outward CCW), split along (a, c).
    let quads: [[u32; 4]; 6] = [
        [0, 4, 6, 2], // -x
        [1, 3, 7, 5], // +x
        [0, 1, 5, 4], // -y
        [2, 6, 7, 3], // +y
        [0, 2, 3, 1], // -z
        [4, 5, 7, 6], // +z
    ];
    let triangles = quads
        .iter()
        .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
        .collect();
    TriangleMesh::new(vertices, triangles)
}

/// Cube of side `side` centered at `center`.
pub fn cube(center: Vec3, side: f64) -> TriangleMesh {
    let h = Vec3::repeat(side * 0.5);
    cuboid(center - h, center + h)
}

/// Rectangle in the plane `axis = offset`, spanning `[lo, hi]` on the two other axes
/// (in cyclic order), with per-corner UVs covering the unit square.
pub fn planar_quad(axis: usize, offset: f64, lo: [f64; 2], hi: [f64; 2]) -> TriangleMesh {
    let (u, w) = ((axis + 1) % 3, (axis + 2) % 3);
    let p = |a: f64, b: f64| {
        let mut v = Vec3::zeros();
        v[axis] = offset;
        v[u] = a;
        v[w] = b;
        v
    };
    let vertices = vec![p(lo[0], lo[1]), p(hi[0], lo[1]), p(hi[0], hi[1]), p(lo[0], hi[1])];
    let mut m = TriangleMesh::new(vertices, vec![[0, 1, 2], [0, 2, 3]]);
    m.uvs = Some(vec![
        [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]],
        [[0.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
    ]);
    m
}

/// Geodesic sphere: icosahedron refined `subdivisions` times, `20 * 4^s` triangles.
pub fn icosphere(center: Vec3, radius: f64, subdivisions: u32) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|p| Vec3::new(p[0], p[1], p[2]).normalize())
    .collect();
    let mut tris: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid: FxHashMap<(u32, u32), u32> = FxHashMap::default();
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vec3>| {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalize());
                verts.len() as u32 - 1
            })
        };
        let mut next = Vec::with_capacity(tris.len() * 4);
        for [a, b, c] in tris {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        tris = next;
    }
    let vertices = verts.into_iter().map(|v| center + v * radius).collect();
    TriangleMesh::new(vertices, tris)
}

/// Latitude/longitude sphere with `2 * segments * (rings - 1)` triangles.
pub fn uv_sphere(center: Vec3, radius: f64, rings: u32, segments: u32) -> TriangleMesh {
    assert!(rings >= 2 && segments >= 3);
    let mut vertices = vec![center + Vec3::new(0.0, 0.0, radius)];
    for r in 1..rings {
        let theta = std::f64::consts::PI * r as f64 / rings as f64;
        for s in 0..segments {
            let phi = 2.0 * std::f64::consts::PI * s as f64 / segments as f64;
            vertices.push(
                center
                    + Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()) * radius,
            );
        }
    }
    vertices.push(center - Vec3::new(0.0, 0.0, radius));
    let south = vertices.len() as u32 - 1;
    let ring = |r: u32, s: u32| 1 + (r - 1) * segments + (s % segments);
    let mut triangles = Vec::new();
    for s in 0..segments {
        triangles.push([0, ring(1, s), ring(1, s + 1)]);
    }
    for r in 1..rings - 1 {
        for s in 0..segments {
            let (a, b) = (ring(r, s), ring(r, s + 1));
            let (c, d) = (ring(r + 1, s), ring(r + 1, s + 1));
            triangles.push([a, c, d]);
            triangles.push([a, d, b]);
        }
    }
    for s in 0..segments {
        triangles.push([south, ring(rings - 1, s + 1), ring(rings - 1, s)]);
    }
    TriangleMesh::new(vertices, triangles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::triangle_normal;

    fn outward_fraction(m: &TriangleMesh, center: Vec3) -> f64 {
        let good = (0..m.triangles.len())
            .filter(|&t| {
                let [a, b, c] = m.corners(t);
                triangle_normal(&a, &b, &c).dot(&((a + b + c) / 3.0 - center)) > 0.0
            })
            .count();
        good as f64 / m.triangles.len() as f64
    }

    #[test]
    fn shapes_are_outward() {
        let c = Vec3::repeat(0.5);
        assert_eq!(outward_fraction(&cube(c, 0.8), c), 1.0);
        assert_eq!(outward_fraction(&icosphere(c, 0.4, 2), c), 1.0);
        assert_eq!(outward_fraction(&uv_sphere(c, 0.4, 8, 12), c), 1.0);
        assert!((cube(c, 0.8).total_area() - 6.0 * 0.64).abs() < 1e-12);
    }

    #[test]
    fn uv_sphere_triangle_count() {
        let m = uv_sphere(Vec3::zeros(), 1.0, 160, 320);
        assert_eq!(m.triangles.len(), 2 * 320 * 159);
    }
}
