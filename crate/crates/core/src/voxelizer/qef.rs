//! Quadratic error functions for dual-vertex placement.
//!
//! `e(v) = vᵀAv − 2bᵀv + c` accumulates three kinds of terms:
//! squared distances to Hermite planes, squared distances to boundary lines,
//! and a squared distance to the mean intersection point.

use nalgebra::{Matrix2, Matrix3, Vector2};

use crate::geom::Vec3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QefAccumulator {
    pub a: Matrix3<f64>,
    pub b: Vec3,
    pub c: f64,
    pub point_sum: Vec3,
    pub point_count: u32,
}

impl Default for QefAccumulator {
    fn default() -> Self {
        QefAccumulator {
            a: Matrix3::zeros(),
            b: Vec3::zeros(),
            c: 0.0,
            point_sum: Vec3::zeros(),
            point_count: 0,
        }
    }
}

/// How a dual vertex was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveOutcome {
    /// Unconstrained minimizer already inside the voxel.
    Interior,
    /// Minimizer found on the voxel boundary.
    Boundary,
    /// Non-finite solve; the clamped mean point was used.
    Fallback,
}

impl QefAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Plane through `q` with unit normal `n`; also feeds the mean point.
    pub fn add_plane(&mut self, q: &Vec3, n: &Vec3) {
        let d = n.dot(q);
        self.a += n * n.transpose();
        self.b += n * d;
        self.c += d * d;
        self.point_sum += q;
        self.point_count += 1;
    }

    /// Line through `o` with unit direction `d`, weighted by `weight`.
    pub fn add_line(&mut self, o: &Vec3, d: &Vec3, weight: f64) {
        let p = Matrix3::identity() - d * d.transpose();
        let po = p * o;
        self.a += p * weight;
        self.b += po * weight;
        self.c += o.dot(&po) * weight;
    }

    /// Isotropic pull toward `q`, weighted by `weight`.
    pub fn add_point(&mut self, q: &Vec3, weight: f64) {
        self.a += Matrix3::identity() * weight;
        self.b += q * weight;
        self.c += q.norm_squared() * weight;
    }

    /// Mean of the plane points, `None` before any plane was added.
    pub fn mean_point(&self) -> Option<Vec3> {
        (self.point_count > 0).then(|| self.point_sum / self.point_count as f64)
    }

    pub fn merge(&mut self, other: &QefAccumulator) {
        self.a += other.a;
        self.b += other.b;
        self.c += other.c;
        self.point_sum += other.point_sum;
        self.point_count += other.point_count;
    }

    pub fn eval(&self, v: &Vec3) -> f64 {
        v.dot(&(self.a * v)) - 2.0 * self.b.dot(v) + self.c
    }

    /// Minimizes `e` over the box `[lo, hi]`.
    ///
    /// The unconstrained minimizer is used when it lies inside. Otherwise every
    /// face, edge and corner of the box is tried with the remaining coordinates
    /// free, and the feasible candidate of least error wins; for a convex
    /// quadratic this is the exact constrained minimum.
    pub fn minimize_in_box(&self, lo: &Vec3, hi: &Vec3) -> (Vec3, SolveOutcome) {
        if let Some(v) = self.a.cholesky().map(|ch| ch.solve(&self.b)) {
            if v.iter().all(|x| x.is_finite()) {
                if (0..3).all(|k| v[k] >= lo[k] && v[k] <= hi[k]) {
                    return (v, SolveOutcome::Interior);
                }
                if let Some(v) = self.minimize_on_boundary(lo, hi) {
                    return (v, SolveOutcome::Boundary);
                }
            }
        }
        let q = self.mean_point().unwrap_or((lo + hi) * 0.5);
        (q.sup(lo).inf(hi), SolveOutcome::Fallback)
    }

    fn minimize_on_boundary(&self, lo: &Vec3, hi: &Vec3) -> Option<Vec3> {
        let mut best: Option<(f64, Vec3)> = None;
        // Each coordinate is free (0), pinned low (1) or pinned high (2); skip the all-free case.
        for code in 1..27u32 {
            let state = [code % 3, (code / 3) % 3, code / 9];
            let mut v = Vec3::zeros();
            let mut free = [0usize; 3];
            let mut nfree = 0;
            for k in 0..3 {
                match state[k] {
                    0 => {
                        free[nfree] = k;
                        nfree += 1;
                    }
                    1 => v[k] = lo[k],
                    _ => v[k] = hi[k],
                }
            }
            // Reduced system A_ff x_f = b_f − A_fc x_c.
            let rhs = |i: usize| {
                let k = free[i];
                let mut r = self.b[k];
                for j in 0..3 {
                    if state[j] != 0 {
                        r -= self.a[(k, j)] * v[j];
                    }
                }
                r
            };
            let ok = match nfree {
                0 => true,
                1 => {
                    let k = free[0];
                    let akk = self.a[(k, k)];
                    if akk > 0.0 {
                        v[k] = rhs(0) / akk;
                        true
                    } else {
                        false
                    }
                }
                _ => {
                    let (k0, k1) = (free[0], free[1]);
                    let m = Matrix2::new(
                        self.a[(k0, k0)],
                        self.a[(k0, k1)],
                        self.a[(k1, k0)],
                        self.a[(k1, k1)],
                    );
                    match m.cholesky() {
                        Some(ch) => {
                            let x = ch.solve(&Vector2::new(rhs(0), rhs(1)));
                            v[k0] = x[0];
                            v[k1] = x[1];
                            true
                        }
                        None => false,
                    }
                }
            };
            if !ok || !(0..nfree).all(|i| {
                let k = free[i];
                v[k].is_finite() && v[k] >= lo[k] && v[k] <= hi[k]
            }) {
                continue;
            }
            let e = self.eval(&v);
            if best.map_or(true, |(be, _)| e < be) {
                best = Some((e, v));
            }
        }
        best.map(|(_, v)| v)
    }
}
