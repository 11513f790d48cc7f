//! O-Voxel → mesh: one vertex per active voxel, one quad per flagged edge.

use rayon::prelude::*;

use crate::geom::Vec3;
use crate::grid::{Axis, GridEdge, OVoxelGrid, VoxelCoord};
use crate::mesh::TriangleMesh;

/// Dual quad around a primal edge. `verts` index the extracted mesh's vertices
/// (which coincide with the grid's voxel indices).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadFace {
    pub verts: [u32; 4],
    pub edge: GridEdge,
    pub split_weight: f32,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExtractStats {
    pub flagged_edges: usize,
    pub emitted_quads: usize,
    /// Flagged edges with at least one inactive or out-of-grid neighbor.
    pub skipped_quads: usize,
}

/// Newell normal of a closed polygon (not normalized).
pub fn newell_normal(points: &[Vec3]) -> Vec3 {
    let mut n = Vec3::zeros();
    for (i, p) in points.iter().enumerate() {
        let q = &points[(i + 1) % points.len()];
        n.x += (p.y - q.y) * (p.z + q.z);
        n.y += (p.z - q.z) * (p.x + q.x);
        n.z += (p.x - q.x) * (p.y + q.y);
    }
    n
}

/// Winds `quad` so its Newell normal does not point against `hint`.
/// A zero dot keeps the given order.
pub fn orient_quad(quad: QuadFace, positions: &[Vec3], hint: &Vec3) -> QuadFace {
    let pts = quad.verts.map(|v| positions[v as usize]);
    if newell_normal(&pts).dot(hint) < 0.0 {
        let [a, b, c, d] = quad.verts;
        QuadFace {
            verts: [a, d, c, b],
            ..quad
        }
    } else {
        quad
    }
}

/// γ ≥ 0.5 splits along (v0, v2), otherwise along (v1, v3). Both keep the quad's winding.
pub fn split_quad(quad: &QuadFace) -> [[u32; 3]; 2] {
    let [a, b, c, d] = quad.verts;
    if quad.split_weight >= 0.5 {
        [[a, b, c], [a, c, d]]
    } else {
        [[a, b, d], [b, c, d]]
    }
}

/// Vertex positions in the grid's world frame, in voxel order.
pub fn dual_vertices_world(grid: &OVoxelGrid) -> Vec<Vec3> {
    let t = grid.transform();
    (0..grid.len())
        .into_par_iter()
        .map(|i| t.from_unit(&grid.dual_vertex_unit(i)))
        .collect()
}

const MISSING: u32 = u32::MAX;

/// For every voxel, the index of the voxel at `coord - d` (`d` given as a 0/1 mask
/// per axis), or `MISSING`. Translation keeps lexicographic order, so one merge
/// pass over the sorted coordinates resolves all of them without hashing.
fn shifted_indices(keys: &[u64], d: usize) -> Vec<u32> {
    let delta = VoxelCoord([d & 1, (d >> 1) & 1, (d >> 2) & 1].map(|x| x as u32));
    let dkey = delta.pack();
    // Per-axis fields of the packed key; a field below its delta would underflow.
    let fits = |k: u64| (0..3).all(|a| (k >> (32 - 16 * a)) & 0xffff >= delta.0[a] as u64);
    const CHUNK: usize = 1 << 15;
    keys.par_chunks(CHUNK)
        .flat_map_iter(|chunk| {
            let mut cursor = keys.partition_point(|&k| k < chunk[0].saturating_sub(dkey));
            chunk.iter().map(move |&k| {
                if !fits(k) {
                    return MISSING;
                }
                let t = k - dkey;
                while cursor < keys.len() && keys[cursor] < t {
                    cursor += 1;
                }
                if cursor < keys.len() && keys[cursor] == t {
                    cursor as u32
                } else {
                    MISSING
                }
            })
        })
        .collect()
}

/// All emittable quads, oriented, ordered by edge key.
pub fn dual_quads(grid: &OVoxelGrid, positions: &[Vec3]) -> (Vec<QuadFace>, ExtractStats) {
    let coords = grid.coords();
    // Ring offsets are nonzero 0/1 masks with at most two bits set: ids 1..=6.
    let keys: Vec<u64> = coords.par_iter().map(|c| c.pack()).collect();
    let shifted: Vec<Vec<u32>> = (1..7).map(|d| shifted_indices(&keys, d)).collect();
    let quads: Vec<QuadFace> = coords
        .par_iter()
        .zip(grid.shapes().par_iter())
        .enumerate()
        .flat_map_iter(|(idx, (c, s))| {
            let shifted = &shifted;
            Axis::ALL.into_iter().filter_map(move |a| {
                if !s.edge_flags[a.index()] {
                    return None;
                }
                let (u, w) = a.others();
                let (bu, bw) = (1 << u.index(), 1 << w.index());
                let lookup = |d: usize| shifted[d - 1][idx];
                let verts = [idx as u32, lookup(bu), lookup(bu | bw), lookup(bw)];
                if verts.contains(&MISSING) {
                    return None;
                }
                let hint = if s.edge_normal_neg[a.index()] {
                    -a.unit()
                } else {
                    a.unit()
                };
                let quad = QuadFace {
                    verts,
                    edge: GridEdge::new(*c, a),
                    split_weight: s.split_weight,
                };
                Some(orient_quad(quad, positions, &hint))
            })
        })
        .collect();
    let flagged_edges = grid
        .shapes()
        .par_iter()
        .map(|s| s.edge_flags.iter().filter(|&&f| f).count())
        .sum();
    let stats = ExtractStats {
        flagged_edges,
        emitted_quads: quads.len(),
        skipped_quads: flagged_edges - quads.len(),
    };
    (quads, stats)
}

pub fn extract_mesh(grid: &OVoxelGrid) -> TriangleMesh {
    extract_mesh_with_stats(grid).0
}

pub fn extract_mesh_with_stats(grid: &OVoxelGrid) -> (TriangleMesh, ExtractStats) {
    let vertices = dual_vertices_world(grid);
    let (quads, stats) = dual_quads(grid, &vertices);
    let triangles = quads.iter().flat_map(split_quad).collect();
    (TriangleMesh::new(vertices, triangles), stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{triangle_area, triangle_normal};
    use crate::grid::{ShapeFeature, WorldTransform};
    use crate::shapes;
    use crate::voxelizer::{voxelize, VoxelizeConfig};
    use rustc_hash::FxHashMap;

    fn quad_grid(neg: bool) -> OVoxelGrid {
        // Four voxels around the X edge based at (1,1,1).
        let e = GridEdge::new(VoxelCoord::new(1, 1, 1), Axis::X);
        let entries = e
            .ring(4)
            .into_iter()
            .flatten()
            .map(|c| {
                let mut s = ShapeFeature::new([0.5; 3], [false; 3], 0.5);
                if c == e.base {
                    s.edge_flags[0] = true;
                    s.edge_normal_neg[0] = neg;
                }
                (c, s)
            })
            .collect();
        OVoxelGrid::from_entries(4, entries, WorldTransform::IDENTITY).unwrap()
    }

    #[test]
    fn single_quad() {
        let g = quad_grid(false);
        let (m, st) = extract_mesh_with_stats(&g);
        assert_eq!(m.vertices.len(), 4);
        assert_eq!(m.triangles.len(), 2);
        assert_eq!(st.emitted_quads, 1);
        for t in 0..2 {
            let [a, b, c] = m.corners(t);
            assert!(triangle_normal(&a, &b, &c).x > 0.0);
        }
        let flipped = extract_mesh(&quad_grid(true));
        for t in 0..2 {
            let [a, b, c] = flipped.corners(t);
            assert!(triangle_normal(&a, &b, &c).x < 0.0);
        }
    }

    #[test]
    fn missing_neighbor_is_skipped() {
        let g = quad_grid(false);
        let entries: Vec<_> = g.iter().filter(|(c, _)| c.j() == 1 && c.k() == 1 || c.j() == 0).map(|(c, s)| (c, *s)).collect();
        let g = OVoxelGrid::from_entries(4, entries, WorldTransform::IDENTITY).unwrap();
        let (m, st) = extract_mesh_with_stats(&g);
        assert!(m.triangles.is_empty());
        assert_eq!(st.skipped_quads, 1);
        assert_eq!(m.vertices.len(), g.len());
    }

    #[test]
    fn merged_neighbors_match_hash_lookup() {
        let s = shapes::icosphere(Vec3::repeat(0.5), 0.3, 3);
        let g = voxelize(&s, &VoxelizeConfig::new(24)).unwrap();
        for d in 1..7 {
            let keys: Vec<u64> = g.coords().iter().map(|c| c.pack()).collect();
            let table = shifted_indices(&keys, d);
            let off = [d & 1, (d >> 1) & 1, (d >> 2) & 1].map(|x| -(x as i64));
            for (i, c) in g.coords().iter().enumerate() {
                let want = c.offset(off, 24).and_then(|t| g.index_of(&t)).map_or(MISSING, |j| j as u32);
                assert_eq!(table[i], want);
            }
        }
        // Ring members agree with the edge's own neighbor list.
        let v = dual_vertices_world(&g);
        for q in dual_quads(&g, &v).0 {
            let mut got = q.verts.map(|i| g.coords()[i as usize]);
            let mut want: Vec<_> = q.edge.ring(24).into_iter().flatten().collect();
            got.sort();
            want.sort();
            assert_eq!(got.to_vec(), want);
        }
    }

    #[test]
    fn empty_grid() {
        let m = extract_mesh(&OVoxelGrid::empty(8).unwrap());
        assert!(m.vertices.is_empty() && m.triangles.is_empty());
    }

    #[test]
    fn split_rule() {
        let q = |g| QuadFace {
            verts: [0, 1, 2, 3],
            edge: GridEdge::new(VoxelCoord::new(0, 0, 0), Axis::Z),
            split_weight: g,
        };
        assert_eq!(split_quad(&q(0.5)), [[0, 1, 2], [0, 2, 3]]);
        assert_eq!(split_quad(&q(0.7)), [[0, 1, 2], [0, 2, 3]]);
        assert_eq!(split_quad(&q(0.3)), [[0, 1, 3], [1, 2, 3]]);
    }

    #[test]
    fn split_preserves_planar_area() {
        // Convex planar quads: both splits cover the quad exactly.
        let pts = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.1, 0.0),
            Vec3::new(1.2, 0.9, 0.0),
            Vec3::new(-0.1, 1.0, 0.0),
        ];
        let shoelace = newell_normal(&pts).norm() * 0.5;
        for g in [0.2f32, 0.5, 0.8] {
            let q = QuadFace {
                verts: [0, 1, 2, 3],
                edge: GridEdge::new(VoxelCoord::new(0, 0, 0), Axis::Z),
                split_weight: g,
            };
            let area: f64 = split_quad(&q)
                .iter()
                .map(|t| triangle_area(&pts[t[0] as usize], &pts[t[1] as usize], &pts[t[2] as usize]))
                .sum();
            assert!((area - shoelace).abs() < 1e-9);
        }
    }

    fn cube_surface_distance(p: &Vec3, lo: f64, hi: f64) -> f64 {
        let inside = (0..3).all(|a| p[a] >= lo && p[a] <= hi);
        if inside {
            (0..3).map(|a| (p[a] - lo).min(hi - p[a])).fold(f64::INFINITY, f64::min)
        } else {
            (0..3)
                .map(|a| (lo - p[a]).max(0.0).max(p[a] - hi))
                .map(|d| d * d)
                .sum::<f64>()
                .sqrt()
        }
    }

    #[test]
    fn cube_reconstruction_is_closed_and_sharp() {
        let cube = shapes::cube(Vec3::repeat(0.5), 0.8);
        let g = voxelize(&cube, &VoxelizeConfig::new(32)).unwrap();
        let (m, st) = extract_mesh_with_stats(&g);
        assert_eq!(st.skipped_quads, 0);
        assert_eq!(m.triangles.len(), 2 * st.emitted_quads);
        for v in &m.vertices {
            assert!(cube_surface_distance(v, 0.1, 0.9) <= 1e-4, "{v:?}");
        }
        // Closed and consistently wound: every directed edge appears once, with its twin.
        let mut directed: FxHashMap<(u32, u32), u32> = FxHashMap::default();
        for t in &m.triangles {
            for e in 0..3 {
                *directed.entry((t[e], t[(e + 1) % 3])).or_default() += 1;
            }
        }
        for (&(a, b), &n) in &directed {
            assert_eq!(n, 1);
            assert_eq!(directed.get(&(b, a)), Some(&1));
        }
    }

    #[test]
    fn sphere_orientation_is_outward() {
        let c = Vec3::repeat(0.5);
        let s = shapes::icosphere(c, 0.35, 4);
        let g = voxelize(&s, &VoxelizeConfig::new(48)).unwrap();
        let m = extract_mesh(&g);
        let good = (0..m.triangles.len())
            .filter(|&t| {
                let [a, b, cc] = m.corners(t);
                triangle_normal(&a, &b, &cc).dot(&((a + b + cc) / 3.0 - c)) > 0.0
            })
            .count();
        assert!(good as f64 >= 0.99 * m.triangles.len() as f64);
    }
}
