use crate::geom::{closest_point_on_triangle, ray_triangle, Aabb, Vec3};
use crate::mesh::TriangleMesh;

const LEAF_SIZE: usize = 4;

#[derive(Clone, Debug)]
struct Node {
    bbox: Aabb,
    /// Leaf: first slot in `order`. Interior: index of the right child (left is `self + 1`).
    start_or_right: u32,
    /// Zero for interior nodes.
    count: u32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosestHit {
    pub distance_sq: f64,
    pub point: Vec3,
    pub triangle: u32,
    pub barycentric: [f64; 3],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayHit {
    pub t: f64,
    pub triangle: u32,
}

/// Bounding-volume hierarchy over a mesh's triangles.
///
/// Closest-point and ray queries return exactly what a linear scan would
/// (ties resolved to the lowest triangle index).
#[derive(Clone, Debug)]
pub struct MeshBvh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    nodes: Vec<Node>,
    order: Vec<u32>,
}

impl MeshBvh {
    pub fn new(mesh: &TriangleMesh) -> Self {
        let boxes: Vec<Aabb> = (0..mesh.triangles.len())
            .map(|t| Aabb::from_points(mesh.corners(t).iter()))
            .collect();
        let centers: Vec<Vec3> = boxes.iter().map(|b| b.center()).collect();
        let mut order: Vec<u32> = (0..mesh.triangles.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * order.len() / LEAF_SIZE + 1);
        if !order.is_empty() {
            build(&mut nodes, &mut order, 0, &boxes, &centers);
        }
        MeshBvh {
            vertices: mesh.vertices.clone(),
            triangles: mesh.triangles.clone(),
            nodes,
            order,
        }
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn corners(&self, t: usize) -> [Vec3; 3] {
        self.triangles[t].map(|i| self.vertices[i as usize])
    }

    pub fn bounds(&self) -> Aabb {
        self.nodes.first().map(|n| n.bbox).unwrap_or_else(Aabb::empty)
    }

    fn leaf(&self, n: &Node) -> &[u32] {
        &self.order[n.start_or_right as usize..(n.start_or_right + n.count) as usize]
    }

    fn consider(&self, p: &Vec3, t: u32, best: &mut Option<ClosestHit>) {
        let [a, b, c] = self.corners(t as usize);
        let (q, bary) = closest_point_on_triangle(p, &a, &b, &c);
        let d = (p - q).norm_squared();
        let better = match best {
            None => true,
            Some(h) => d < h.distance_sq || (d == h.distance_sq && t < h.triangle),
        };
        if better {
            *best = Some(ClosestHit {
                distance_sq: d,
                point: q,
                triangle: t,
                barycentric: bary,
            });
        }
    }

    /// Closest point on the mesh surface to `p`. `None` for an empty mesh.
    pub fn closest_point(&self, p: &Vec3) -> Option<ClosestHit> {
        let mut best: Option<ClosestHit> = None;
        if self.nodes.is_empty() {
            return None;
        }
        let mut stack = vec![0u32];
        while let Some(ni) = stack.pop() {
            let n = &self.nodes[ni as usize];
            if let Some(h) = &best {
                if n.bbox.distance_sq(p) > h.distance_sq * (1.0 + 1e-9) {
                    continue;
                }
            }
            if n.count > 0 {
                for &t in self.leaf(n) {
                    self.consider(p, t, &mut best);
                }
                continue;
            }
            let (l, r) = (ni + 1, n.start_or_right);
            let dl = self.nodes[l as usize].bbox.distance_sq(p);
            let dr = self.nodes[r as usize].bbox.distance_sq(p);
            if dl <= dr {
                stack.push(r);
                stack.push(l);
            } else {
                stack.push(l);
                stack.push(r);
            }
        }
        best
    }

    /// First intersection of the ray `origin + t·dir`, t ≥ 0 (both triangle sides count).
    pub fn ray_cast(&self, origin: &Vec3, dir: &Vec3) -> Option<RayHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best: Option<RayHit> = None;
        let mut stack = vec![0u32];
        while let Some(ni) = stack.pop() {
            let n = &self.nodes[ni as usize];
            let t_max = best.map_or(f64::INFINITY, |h| h.t * (1.0 + 1e-9) + 1e-12);
            if n.bbox.ray_entry(origin, &inv, t_max).is_none() {
                continue;
            }
            if n.count > 0 {
                for &t in self.leaf(n) {
                    let [a, b, c] = self.corners(t as usize);
                    if let Some(d) = ray_triangle(origin, dir, &a, &b, &c) {
                        let better = match best {
                            None => true,
                            Some(h) => d < h.t || (d == h.t && t < h.triangle),
                        };
                        if better {
                            best = Some(RayHit { t: d, triangle: t });
                        }
                    }
                }
                continue;
            }
            stack.push(n.start_or_right);
            stack.push(ni + 1);
        }
        best
    }

    /// Triangles whose bounding boxes overlap `query`, in ascending index order.
    pub fn overlapping(&self, query: &Aabb, out: &mut Vec<u32>) {
        out.clear();
        if self.nodes.is_empty() {
            return;
        }
        let mut stack = vec![0u32];
        while let Some(ni) = stack.pop() {
            let n = &self.nodes[ni as usize];
            if !n.bbox.overlaps(query) {
                continue;
            }
            if n.count > 0 {
                for &t in self.leaf(n) {
                    let bb = Aabb::from_points(self.corners(t as usize).iter());
                    if bb.overlaps(query) {
                        out.push(t);
                    }
                }
                continue;
            }
            stack.push(n.start_or_right);
            stack.push(ni + 1);
        }
        out.sort_unstable();
    }
}

fn build(nodes: &mut Vec<Node>, order: &mut [u32], offset: usize, boxes: &[Aabb], centers: &[Vec3]) {
    let bbox = order
        .iter()
        .fold(Aabb::empty(), |acc, &t| acc.union(&boxes[t as usize]));
    let me = nodes.len();
    nodes.push(Node {
        bbox,
        start_or_right: offset as u32,
        count: order.len() as u32,
    });
    if order.len() <= LEAF_SIZE {
        return;
    }
    let cb = Aabb::from_points(order.iter().map(|&t| &centers[t as usize]));
    let axis = cb.extent().imax();
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        centers[a as usize][axis]
            .total_cmp(&centers[b as usize][axis])
            .then(a.cmp(&b))
    });
    let (left, right) = order.split_at_mut(mid);
    build(nodes, left, offset, boxes, centers);
    let r = nodes.len();
    build(nodes, right, offset + mid, boxes, centers);
    nodes[me].start_or_right = r as u32;
    nodes[me].count = 0;
}
