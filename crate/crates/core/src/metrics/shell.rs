//! Visible-surface points from orthographic ray casting around the mesh.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::spatial::MeshBvh;

pub const DEFAULT_RAY_RESOLUTION: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShellConfig {
    pub views: usize,
    /// Number of points returned (all hits when fewer are available).
    pub points: usize,
    /// Rays per side of each view's square ray grid.
    pub ray_resolution: usize,
    pub seed: u64,
}

/// `n` nearly uniform unit directions on a Fibonacci spiral.
pub fn fibonacci_directions(n: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

fn frame(d: &Vec3) -> (Vec3, Vec3) {
    let helper = if d.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let e1 = d.cross(&helper).normalize();
    let e2 = d.cross(&e1);
    (e1, e2)
}

/// First-hit points of orthographic ray grids cast from every view direction toward
/// the mesh, pooled and subsampled with `seed`.
pub fn outer_shell_points(mesh: &MeshBvh, cfg: &ShellConfig) -> Result<Vec<Vec3>> {
    if mesh.is_empty() {
        return Err(Error::invalid("outer shell of an empty mesh"));
    }
    if cfg.views == 0 || cfg.ray_resolution == 0 {
        return Err(Error::invalid("views and ray resolution must be positive"));
    }
    let b = mesh.bounds();
    let center = b.center();
    let radius = 0.5 * b.extent().norm() * (1.0 + 1e-6) + 1e-9;
    let res = cfg.ray_resolution;
    let dirs = fibonacci_directions(cfg.views);
    let per_view: Vec<Vec<Vec3>> = dirs
        .par_iter()
        .map(|cam| {
            let d = -cam;
            let (e1, e2) = frame(&d);
            let start = center + cam * (2.0 * radius);
            let mut hits = Vec::new();
            for row in 0..res {
                for col in 0..res {
                    let x = ((col as f64 + 0.5) / res as f64 * 2.0 - 1.0) * radius;
                    let y = ((row as f64 + 0.5) / res as f64 * 2.0 - 1.0) * radius;
                    let o = start + e1 * x + e2 * y;
                    if let Some(h) = mesh.ray_cast(&o, &d) {
                        hits.push(o + d * h.t);
                    }
                }
            }
            hits
        })
        .collect();
    let pool: Vec<Vec3> = per_view.into_iter().flatten().collect();
    if pool.is_empty() {
        return Err(Error::invalid("no ray hit the mesh"));
    }
    if pool.len() <= cfg.points {
        return Ok(pool);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut idx = rand::seq::index::sample(&mut rng, pool.len(), cfg.points).into_vec();
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| pool[i]).collect())
}
