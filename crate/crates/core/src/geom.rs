//! Small geometric kernels shared by the voxelizer, the baker and the metrics.

use nalgebra::Vector3;

pub type Vec3 = Vector3<f64>;

/// Axis-aligned bounding box. An empty box has `min > max`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn new(min: Vec3, max: Vec3) -> Self {
        Aabb { min, max }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut b = Aabb::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn is_empty(&self) -> bool {
        self.min.x > self.max.x || self.min.y > self.max.y || self.min.z > self.max.z
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn overlaps(&self, other: &Aabb) -> bool {
        (0..3).all(|a| self.min[a] <= other.max[a] && other.min[a] <= self.max[a])
    }

    /// Squared distance from `p` to the closed box (0 inside).
    pub fn distance_sq(&self, p: &Vec3) -> f64 {
        let mut d2 = 0.0;
        for a in 0..3 {
            let d = (self.min[a] - p[a]).max(0.0).max(p[a] - self.max[a]);
            d2 += d * d;
        }
        d2
    }

    /// Slab test. Returns the entry parameter if the ray hits the box within `[0, t_max]`.
    pub fn ray_entry(&self, origin: &Vec3, inv_dir: &Vec3, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for a in 0..3 {
            let ta = (self.min[a] - origin[a]) * inv_dir[a];
            let tb = (self.max[a] - origin[a]) * inv_dir[a];
            let (lo, hi) = if ta <= tb { (ta, tb) } else { (tb, ta) };
            // NaN (0 * inf) means the origin lies on the slab plane; treat as inside.
            if lo.is_finite() || lo == f64::INFINITY {
                t0 = t0.max(lo);
            }
            if hi.is_finite() || hi == f64::NEG_INFINITY {
                t1 = t1.min(hi);
            }
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

pub fn triangle_normal(a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    (b - a).cross(&(c - a))
}

pub fn triangle_area(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    0.5 * triangle_normal(a, b, c).norm()
}

/// Closest point on the closed triangle `abc` to `p`, with its barycentric
/// coordinates `(u, v, w)` such that `q = u*a + v*b + w*c`.
///
/// Region classification after Ericson, "Real-Time Collision Detection" 5.1.5.
/// Degenerate triangles fall through to the closest of the three edge segments.
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> (Vec3, [f64; 3]) {
    let ab = b - a;
    let ac = c - a;
    let n2 = ab.cross(&ac).norm_squared();
    let scale = ab.norm_squared().max(ac.norm_squared());
    if !(n2 > 1e-24 * scale * scale) {
        return closest_on_degenerate(p, a, b, c);
    }

    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, [1.0, 0.0, 0.0]);
    }

    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, [0.0, 1.0, 0.0]);
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, [1.0 - v, v, 0.0]);
    }

    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, [0.0, 0.0, 1.0]);
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, [1.0 - w, 0.0, w]);
    }

    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, [0.0, 1.0 - w, w]);
    }

    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, [1.0 - v - w, v, w])
}

fn closest_on_degenerate(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> (Vec3, [f64; 3]) {
    let candidates = [
        (closest_on_segment(p, a, b), 0usize, 1usize),
        (closest_on_segment(p, b, c), 1, 2),
        (closest_on_segment(p, c, a), 2, 0),
    ];
    let mut best = None::<(f64, Vec3, [f64; 3])>;
    for ((q, t), i, j) in candidates {
        let d = (p - q).norm_squared();
        if best.as_ref().map_or(true, |b| d < b.0) {
            let mut bary = [0.0; 3];
            bary[i] = 1.0 - t;
            bary[j] += t;
            best = Some((d, q, bary));
        }
    }
    let (_, q, bary) = best.unwrap();
    (q, bary)
}

/// Closest point on segment `ab`, with its parameter in `[0, 1]`.
pub fn closest_on_segment(p: &Vec3, a: &Vec3, b: &Vec3) -> (Vec3, f64) {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (*a, 0.0);
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (a + ab * t, t)
}

/// Closed segment / closed box overlap test.
pub fn segment_intersects_aabb(a: &Vec3, b: &Vec3, bx: &Aabb) -> bool {
    let d = b - a;
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    for k in 0..3 {
        if d[k] == 0.0 {
            if a[k] < bx.min[k] || a[k] > bx.max[k] {
                return false;
            }
            continue;
        }
        let inv = 1.0 / d[k];
        let mut ta = (bx.min[k] - a[k]) * inv;
        let mut tb = (bx.max[k] - a[k]) * inv;
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
        if t0 > t1 {
            return false;
        }
    }
    true
}

/// Separating-axis triangle / box overlap test (Akenine-Möller). Touching counts as overlap.
pub fn triangle_intersects_aabb(v0: &Vec3, v1: &Vec3, v2: &Vec3, bx: &Aabb) -> bool {
    let c = bx.center();
    let h = bx.extent() * 0.5;
    let a = v0 - c;
    let b = v1 - c;
    let cc = v2 - c;

    for k in 0..3 {
        let lo = a[k].min(b[k]).min(cc[k]);
        let hi = a[k].max(b[k]).max(cc[k]);
        if lo > h[k] || hi < -h[k] {
            return false;
        }
    }

    let edges = [b - a, cc - b, a - cc];
    for e in &edges {
        for k in 0..3 {
            let mut axis = Vec3::zeros();
            axis[k] = 1.0;
            let l = axis.cross(e);
            if l.norm_squared() == 0.0 {
                continue;
            }
            let pa = l.dot(&a);
            let pb = l.dot(&b);
            let pc = l.dot(&cc);
            let r = h.x * l.x.abs() + h.y * l.y.abs() + h.z * l.z.abs();
            let lo = pa.min(pb).min(pc);
            let hi = pa.max(pb).max(pc);
            if lo > r || hi < -r {
                return false;
            }
        }
    }

    let n = edges[0].cross(&edges[1]);
    let r = h.x * n.x.abs() + h.y * n.y.abs() + h.z * n.z.abs();
    let s = n.dot(&a);
    s.abs() <= r
}

/// Möller–Trumbore ray / triangle intersection, double sided.
pub fn ray_triangle(origin: &Vec3, dir: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let pv = dir.cross(&e2);
    let det = e1.dot(&pv);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv = 1.0 / det;
    let tv = origin - a;
    let u = tv.dot(&pv) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qv = tv.cross(&e1);
    let v = dir.dot(&qv) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&qv) * inv;
    (t >= 0.0).then_some(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    #[test]
    fn closest_point_regions() {
        let (a, b, c) = (v(0., 0., 0.), v(1., 0., 0.), v(0., 1., 0.));
        let (q, bary) = closest_point_on_triangle(&v(0.25, 0.25, 3.0), &a, &b, &c);
        assert!((q - v(0.25, 0.25, 0.0)).norm() < 1e-15);
        assert!((bary[0] - 0.5).abs() < 1e-15);
        let (q, _) = closest_point_on_triangle(&v(0.5, -2.0, 1.0), &a, &b, &c);
        assert!((q - v(0.5, 0.0, 0.0)).norm() < 1e-15);
        let (q, _) = closest_point_on_triangle(&v(2.0, 2.0, 0.0), &a, &b, &c);
        assert!((q - v(0.5, 0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn degenerate_triangle_projects_to_segment() {
        let (a, b, c) = (v(0., 0., 0.), v(2., 0., 0.), v(1., 0., 0.));
        let (q, bary) = closest_point_on_triangle(&v(1.5, 1.0, 0.0), &a, &b, &c);
        assert!((q - v(1.5, 0.0, 0.0)).norm() < 1e-15);
        assert!((bary.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn segment_box_cases() {
        let bx = Aabb::new(v(0., 0., 0.), v(1., 1., 1.));
        assert!(segment_intersects_aabb(&v(-1., 0.5, 0.5), &v(2., 0.5, 0.5), &bx));
        assert!(segment_intersects_aabb(&v(1., 1., -1.), &v(1., 1., 2.), &bx));
        assert!(!segment_intersects_aabb(&v(1.1, 0., 0.), &v(3., 1., 1.), &bx));
        assert!(!segment_intersects_aabb(&v(-1., 0.5, 0.5), &v(-0.1, 0.5, 0.5), &bx));
    }

    #[test]
    fn triangle_box_cases() {
        let bx = Aabb::new(v(0., 0., 0.), v(1., 1., 1.));
        assert!(triangle_intersects_aabb(&v(-1., -1., 0.5), &v(3., -1., 0.5), &v(-1., 3., 0.5), &bx));
        assert!(!triangle_intersects_aabb(&v(2., 2., 2.), &v(3., 2., 2.), &v(2., 3., 2.), &bx));
        // Plane x+y+z=1.6 passes below the far corner box.
        let far = Aabb::new(v(0.9, 0.9, 0.9), v(1.0, 1.0, 1.0));
        assert!(!triangle_intersects_aabb(&v(1.6, 0., 0.), &v(0., 1.6, 0.), &v(0., 0., 1.6), &far));
        // Triangle whose bounding box overlaps the cube but which misses it along an edge axis.
        assert!(!triangle_intersects_aabb(&v(1.5, -0.5, 0.5), &v(2.5, 0.5, 0.5), &v(2.0, 0.0, 0.6), &bx));
    }

    #[test]
    fn ray_hits_front_and_back() {
        let (a, b, c) = (v(0., 0., 0.), v(1., 0., 0.), v(0., 1., 0.));
        let t = ray_triangle(&v(0.2, 0.2, 1.0), &v(0., 0., -1.), &a, &b, &c).unwrap();
        assert!((t - 1.0).abs() < 1e-15);
        assert!(ray_triangle(&v(0.2, 0.2, -1.0), &v(0., 0., 1.), &a, &b, &c).is_some());
        assert!(ray_triangle(&v(0.9, 0.9, 1.0), &v(0., 0., -1.), &a, &b, &c).is_none());
    }
}
