//! Hermite data extraction: where mesh triangles cross primal grid edges.
//!
//! Every grid edge lies on an axis-parallel lattice line. For each axis the
//! triangle is projected onto the perpendicular plane and the lattice points
//! inside the projection are found with edge functions. Points exactly on a
//! projected triangle edge are resolved with a top-left fill rule, evaluated
//! with a canonical endpoint order, so a crossing through an edge or vertex
//! shared by several triangles is claimed by exactly one of them.
//!
//! Those rules alone do not agree across the three axes when the surface runs
//! through lattice vertices (an axis-aligned box whose faces sit on grid
//! planes would leak). The mesh is therefore nudged by a tiny fixed offset in
//! a generic direction before classification, which removes such alignments
//! consistently for all axes.

use rayon::prelude::*;
use rustc_hash::FxHashMap;

use crate::geom::{triangle_normal, Vec3};
use crate::grid::{Axis, GridEdge, VoxelCoord};
use crate::mesh::TriangleMesh;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HermiteSample {
    /// Crossing point in the unit frame; lies on the edge segment.
    pub point: Vec3,
    /// Unit geometric normal of the crossing triangle.
    pub normal: Vec3,
    pub triangle: u32,
}

/// Hermite samples grouped by edge, edges in key order, samples by triangle index.
#[derive(Clone, Debug, Default)]
pub struct HermiteData {
    edges: Vec<GridEdge>,
    offsets: Vec<u32>,
    samples: Vec<HermiteSample>,
    pub degenerate_triangles: usize,
    /// Crossings on lattice lines at index N, which have no canonical owner.
    pub out_of_frame: usize,
}

impl HermiteData {
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    pub fn edges(&self) -> &[GridEdge] {
        &self.edges
    }

    pub fn samples_of(&self, edge_idx: usize) -> &[HermiteSample] {
        &self.samples[self.offsets[edge_idx] as usize..self.offsets[edge_idx + 1] as usize]
    }

    pub fn get(&self, edge: &GridEdge) -> Option<&[HermiteSample]> {
        self.edges
            .binary_search(edge)
            .ok()
            .map(|i| self.samples_of(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = (GridEdge, &[HermiteSample])> + '_ {
        (0..self.edges.len()).map(move |i| (self.edges[i], self.samples_of(i)))
    }
}

#[derive(Clone, Copy)]
struct Hit {
    key: u64,
    sample: HermiteSample,
}

/// Edge function of `p` against the directed edge `a → b`, evaluated with the
/// endpoints in lexicographic order so that swapping them negates the result exactly.
#[inline]
fn edge_fn(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    let raw = |a: [f64; 2], b: [f64; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
    if (a[0], a[1]) <= (b[0], b[1]) {
        raw(a, b)
    } else {
        -raw(b, a)
    }
}

/// Top-left rule for a counter-clockwise triangle: include zero-valued points
/// on left edges (going down) and top edges (horizontal, going left).
#[inline]
fn is_top_left(a: [f64; 2], b: [f64; 2]) -> bool {
    let du = b[0] - a[0];
    let dw = b[1] - a[1];
    dw < 0.0 || (dw == 0.0 && du < 0.0)
}

/// Offset direction in lattice units; components are rationally independent-ish
/// and negative, so a face on a grid plane lands on the lower-index edge.
const NUDGE_DIR: [f64; 3] = [-1.0, -0.754_877_666_2, -0.569_840_291_0];

/// Nudge length in lattice units: well above rounding noise and the tie band,
/// far below any geometric tolerance.
#[inline]
fn nudge(eps_l: f64) -> Vec3 {
    let len = 1e-6 + 4.0 * eps_l;
    Vec3::new(NUDGE_DIR[0] * len, NUDGE_DIR[1] * len, NUDGE_DIR[2] * len)
}

/// Assigns a coordinate along the edge axis (lattice units) to an edge base index.
/// Values within `eps` of a lattice plane go to the edge on the lower side.
#[inline]
pub(crate) fn edge_base_index(t: f64, eps: f64) -> i64 {
    ((t - eps).ceil() as i64 - 1).max(0)
}

fn triangle_hits(
    corners: &[Vec3; 3],
    tri: u32,
    resolution: u32,
    eps: f64,
    out: &mut Vec<Hit>,
    out_of_frame: &mut usize,
) {
    let nf = resolution as f64;
    let normal = triangle_normal(&corners[0], &corners[1], &corners[2]).normalize();
    let eps_l = eps * nf;
    let shift = nudge(eps_l);
    let lattice = corners.map(|c| c * nf + shift);

    for axis in Axis::ALL {
        let (u, w) = axis.others();
        let (ui, wi, ai) = (u.index(), w.index(), axis.index());
        let proj = lattice.map(|p| [p[ui], p[wi]]);
        let area = edge_fn(proj[0], proj[1], proj[2]);
        if area == 0.0 {
            continue;
        }
        // Directed edges of the counter-clockwise ordering, opposite to vertex 0, 1, 2.
        let order: [usize; 3] = if area > 0.0 { [0, 1, 2] } else { [0, 2, 1] };
        let p = order.map(|i| proj[i]);
        let heights = order.map(|i| lattice[i][ai]);
        let edges = [(p[1], p[2]), (p[2], p[0]), (p[0], p[1])];
        let top_left = edges.map(|(a, b)| is_top_left(a, b));

        let lo_u = p.iter().map(|q| q[0]).fold(f64::INFINITY, f64::min);
        let hi_u = p.iter().map(|q| q[0]).fold(f64::NEG_INFINITY, f64::max);
        let lo_w = p.iter().map(|q| q[1]).fold(f64::INFINITY, f64::min);
        let hi_w = p.iter().map(|q| q[1]).fold(f64::NEG_INFINITY, f64::max);
        let j0 = lo_u.ceil().max(0.0) as i64;
        let j1 = hi_u.floor().min(nf) as i64;
        let k0 = lo_w.ceil().max(0.0) as i64;
        let k1 = hi_w.floor().min(nf) as i64;

        for j in j0..=j1 {
            for k in k0..=k1 {
                let q = [j as f64, k as f64];
                let mut wts = [0.0f64; 3];
                let mut inside = true;
                for e in 0..3 {
                    let f = edge_fn(edges[e].0, edges[e].1, q);
                    if f < 0.0 || (f == 0.0 && !top_left[e]) {
                        inside = false;
                        break;
                    }
                    wts[e] = f;
                }
                if !inside {
                    continue;
                }
                let sum = wts[0] + wts[1] + wts[2];
                if !(sum > 0.0) {
                    continue;
                }
                if j as u32 >= resolution || k as u32 >= resolution {
                    *out_of_frame += 1;
                    continue;
                }
                let t = (wts[0] * heights[0] + wts[1] * heights[1] + wts[2] * heights[2]) / sum;
                let i = edge_base_index(t, eps_l);
                if i >= resolution as i64 {
                    *out_of_frame += 1;
                    continue;
                }
                let mut base = [0u32; 3];
                base[ai] = i as u32;
                base[ui] = j as u32;
                base[wi] = k as u32;
                let mut point = Vec3::zeros();
                point[ai] = (t - shift[ai]).clamp(i as f64, (i + 1) as f64) / nf;
                point[ui] = j as f64 / nf;
                point[wi] = k as f64 / nf;
                let edge = GridEdge::new(VoxelCoord(base), axis);
                out.push(Hit {
                    key: edge.key(),
                    sample: HermiteSample {
                        point,
                        normal,
                        triangle: tri,
                    },
                });
            }
        }
    }
}

fn is_degenerate(c: &[Vec3; 3]) -> bool {
    let n = triangle_normal(&c[0], &c[1], &c[2]);
    !(n.norm_squared() > 0.0) || !n.iter().all(|x| x.is_finite())
}

/// All crossings between mesh triangles and grid edges of a `resolution`³ grid.
///
/// The mesh must already be in the unit frame. Triangles are processed in
/// parallel; results are ordered by (edge, triangle) and identical for any
/// thread count.
pub fn find_edge_intersections(mesh: &TriangleMesh, resolution: u32, eps: f64) -> HermiteData {
    let per_tri: Vec<(Vec<Hit>, usize, bool)> = (0..mesh.triangles.len())
        .into_par_iter()
        .map(|t| {
            let c = mesh.corners(t);
            let mut hits = Vec::new();
            let mut oof = 0;
            if is_degenerate(&c) {
                return (hits, 0, true);
            }
            triangle_hits(&c, t as u32, resolution, eps, &mut hits, &mut oof);
            (hits, oof, false)
        })
        .collect();

    let mut data = HermiteData::default();
    let total: usize = per_tri.iter().map(|h| h.0.len()).sum();
    let mut hits = Vec::with_capacity(total);
    for (h, oof, degenerate) in per_tri {
        hits.extend(h);
        data.out_of_frame += oof;
        data.degenerate_triangles += degenerate as usize;
    }
    // Stable: equal keys keep triangle order.
    hits.par_sort_by_key(|h| h.key);

    data.samples.reserve(hits.len());
    for h in hits {
        if data.edges.last().map(|e| e.key()) != Some(h.key) {
            data.edges.push(GridEdge::from_key(h.key));
            data.offsets.push(data.samples.len() as u32);
        }
        data.samples.push(h.sample);
    }
    data.offsets.push(data.samples.len() as u32);
    data
}

/// Mesh edges referenced by exactly one triangle, as `(vertex, vertex)` index
/// pairs with the smaller index first, sorted.
pub fn boundary_edge_indices(mesh: &TriangleMesh) -> Vec<[u32; 2]> {
    let mut count: FxHashMap<[u32; 2], u32> = FxHashMap::default();
    for t in &mesh.triangles {
        for e in 0..3 {
            let (a, b) = (t[e], t[(e + 1) % 3]);
            if a == b {
                continue;
            }
            *count.entry([a.min(b), a.max(b)]).or_default() += 1;
        }
    }
    let mut out: Vec<[u32; 2]> = count
        .into_iter()
        .filter_map(|(k, c)| (c == 1).then_some(k))
        .collect();
    out.sort_unstable();
    out
}

/// Boundary edges as world-space segments.
pub fn boundary_edges(mesh: &TriangleMesh) -> Vec<(Vec3, Vec3)> {
    boundary_edge_indices(mesh)
        .into_iter()
        .map(|[a, b]| (mesh.vertices[a as usize], mesh.vertices[b as usize]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    #[test]
    fn axis_aligned_quad_hits() {
        let quad = shapes::planar_quad(0, 0.45, [0.1, 0.1], [0.9, 0.9]);
        let data = find_edge_intersections(&quad, 4, 1e-9);
        // Lattice lines y, z ∈ {1, 2, 3}/4 lie inside [0.1, 0.9].
        assert_eq!(data.edge_count(), 9);
        for (e, s) in data.iter() {
            assert_eq!(e.axis, Axis::X);
            assert_eq!(e.base.i(), 1);
            assert_eq!(s.len(), 1);
            assert!((s[0].point.x - 0.45).abs() < 1e-15);
            assert!((s[0].normal - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn quad_on_grid_plane_goes_to_lower_edge() {
        let quad = shapes::planar_quad(0, 0.5, [0.1, 0.1], [0.9, 0.9]);
        let data = find_edge_intersections(&quad, 4, 1e-9);
        assert_eq!(data.edge_count(), 9);
        assert_eq!(data.sample_count(), 9);
        for (e, s) in data.iter() {
            assert_eq!(e.base.i(), 1);
            assert_eq!(s.len(), 1);
        }
    }

    #[test]
    fn shared_diagonal_is_claimed_once() {
        // The quad's diagonal passes through lattice points (2,2), (3,3), …
        let quad = shapes::planar_quad(0, 0.3, [0.0, 0.0], [1.0, 1.0]);
        let data = find_edge_intersections(&quad, 8, 1e-9);
        // The nudge moves the rim just below rows j = 8 and k = 8, so exactly the
        // 8x8 in-frame lattice points are claimed.
        assert_eq!(data.sample_count(), 64);
        assert_eq!(data.out_of_frame, 0);
        assert!(data.iter().all(|(_, s)| s.len() == 1));
    }

    #[test]
    fn fan_vertex_is_claimed_once() {
        // Six triangles around a vertex sitting exactly on a lattice line.
        let c = Vec3::new(0.3, 0.5, 0.5);
        let mut verts = vec![c];
        for i in 0..6 {
            let a = std::f64::consts::TAU * i as f64 / 6.0 + 0.1;
            verts.push(Vec3::new(0.3, 0.5 + 0.2 * a.cos(), 0.5 + 0.2 * a.sin()));
        }
        let tris = (0..6u32).map(|i| [0, 1 + i, 1 + (i + 1) % 6]).collect();
        let mesh = TriangleMesh::new(verts, tris);
        let data = find_edge_intersections(&mesh, 4, 1e-9);
        let at_center: Vec<_> = data
            .iter()
            .filter(|(e, _)| e.base.j() == 2 && e.base.k() == 2)
            .collect();
        assert_eq!(at_center.len(), 1);
        assert_eq!(at_center[0].1.len(), 1);
    }

    #[test]
    fn degenerate_triangles_are_counted() {
        let mut mesh = shapes::planar_quad(2, 0.5, [0.1, 0.1], [0.9, 0.9]);
        mesh.vertices.push(Vec3::repeat(0.2));
        mesh.triangles.push([4, 4, 4]);
        mesh.triangles.push([0, 0, 1]);
        let data = find_edge_intersections(&mesh, 8, 1e-9);
        assert_eq!(data.degenerate_triangles, 2);
    }

    #[test]
    fn tie_rule_index() {
        assert_eq!(edge_base_index(2.0, 1e-9), 1);
        assert_eq!(edge_base_index(2.0 + 1e-12, 1e-9), 1);
        assert_eq!(edge_base_index(1.5, 1e-9), 1);
        assert_eq!(edge_base_index(0.0, 1e-9), 0);
    }

    /// Brute force over all (edge, triangle) pairs with an independent
    /// segment–triangle test, closed cube at N = 16.
    #[test]
    fn cube_edge_count_matches_brute_force() {
        let n = 16u32;
        let cube = shapes::cube(Vec3::repeat(0.5), 0.55);
        let data = find_edge_intersections(&cube, n, 1e-9);
        let mut brute = 0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for a in Axis::ALL {
                        let e = GridEdge::new(VoxelCoord::new(i, j, k), a);
                        let (p0, p1) = e.endpoints(n);
                        let hit = (0..cube.triangles.len()).any(|t| {
                            let [x, y, z] = cube.corners(t);
                            crate::geom::ray_triangle(&p0, &(p1 - p0), &x, &y, &z)
                                .is_some_and(|s| s <= 1.0)
                        });
                        brute += hit as usize;
                    }
                }
            }
        }
        assert_eq!(data.edge_count(), brute);
        for (e, s) in data.iter() {
            let (p0, p1) = e.endpoints(n);
            for h in s {
                let (q, _) = crate::geom::closest_on_segment(&h.point, &p0, &p1);
                assert!((q - h.point).norm() < 1e-7);
                assert!((h.normal.norm() - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn boundary_edge_cases() {
        let cube = shapes::cube(Vec3::repeat(0.5), 0.8);
        assert!(boundary_edges(&cube).is_empty());
        let tri = TriangleMesh::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::y()],
            vec![[0, 1, 2]],
        );
        assert_eq!(boundary_edge_indices(&tri), vec![[0, 1], [0, 2], [1, 2]]);
        let quad = shapes::planar_quad(2, 0.5, [0.0, 0.0], [1.0, 1.0]);
        // Shared diagonal (0, 2) is interior.
        assert_eq!(boundary_edge_indices(&quad), vec![[0, 1], [0, 3], [1, 2], [2, 3]]);
    }
}
