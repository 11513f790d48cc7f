use crate::geom::Vec3;

const LEAF_SIZE: usize = 8;

/// Static 3-d tree over a point set. Nearest-neighbor results equal a linear scan
/// (ties resolved to the lowest point index).
#[derive(Clone, Debug)]
pub struct KdTree {
    points: Vec<Vec3>,
    /// Permuted point indices; each subtree owns a contiguous range with its split at the midpoint.
    perm: Vec<u32>,
    /// Split axis for the subtree whose midpoint is at this slot.
    axes: Vec<u8>,
}

impl KdTree {
    pub fn new(points: Vec<Vec3>) -> Self {
        let mut perm: Vec<u32> = (0..points.len() as u32).collect();
        let mut axes = vec![0u8; points.len()];
        build(&points, &mut perm, &mut axes, 0);
        KdTree { points, perm, axes }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    /// (squared distance, index) of the nearest point.
    pub fn nearest(&self, p: &Vec3) -> Option<(f64, u32)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (f64::INFINITY, u32::MAX);
        self.search(p, 0, self.perm.len(), &mut best);
        Some(best)
    }

    fn search(&self, p: &Vec3, lo: usize, hi: usize, best: &mut (f64, u32)) {
        if hi - lo <= LEAF_SIZE {
            for &i in &self.perm[lo..hi] {
                let d = (self.points[i as usize] - p).norm_squared();
                if d < best.0 || (d == best.0 && i < best.1) {
                    *best = (d, i);
                }
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let axis = self.axes[mid] as usize;
        let i = self.perm[mid];
        let split = self.points[i as usize][axis];
        let d = (self.points[i as usize] - p).norm_squared();
        if d < best.0 || (d == best.0 && i < best.1) {
            *best = (d, i);
        }
        let diff = p[axis] - split;
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(p, near.0, near.1, best);
        if diff * diff <= best.0 {
            self.search(p, far.0, far.1, best);
        }
    }
}

fn build(points: &[Vec3], perm: &mut [u32], axes: &mut [u8], offset: usize) {
    if perm.len() <= LEAF_SIZE {
        return;
    }
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for &i in perm.iter() {
        lo = lo.inf(&points[i as usize]);
        hi = hi.sup(&points[i as usize]);
    }
    let axis = (hi - lo).imax();
    let mid = perm.len() / 2;
    perm.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize][axis]
            .total_cmp(&points[b as usize][axis])
            .then(a.cmp(&b))
    });
    axes[offset + mid] = axis as u8;
    let (left, right) = perm.split_at_mut(mid);
    build(points, left, axes, offset);
    build(points, &mut right[1..], axes, offset + mid + 1);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn nearest_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vec3> = (0..1000)
            .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()))
            .collect();
        let tree = KdTree::new(pts.clone());
        for _ in 0..500 {
            let q = Vec3::new(rng.random(), rng.random(), rng.random());
            let mut best = (f64::INFINITY, u32::MAX);
            for (i, p) in pts.iter().enumerate() {
                let d = (p - q).norm_squared();
                if d < best.0 {
                    best = (d, i as u32);
                }
            }
            assert_eq!(tree.nearest(&q), Some(best));
        }
    }

    #[test]
    fn duplicates_resolve_to_lowest_index() {
        let pts = vec![Vec3::repeat(0.5); 40];
        let tree = KdTree::new(pts);
        assert_eq!(tree.nearest(&Vec3::zeros()).unwrap().1, 0);
        assert!(KdTree::new(Vec::new()).nearest(&Vec3::zeros()).is_none());
    }
}
